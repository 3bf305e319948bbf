#pragma once

#include <array>
#include <optional>
#include <vector>

#include <json.hpp>

#include "lmspde/types.hpp"

namespace lmspde {

struct Monomial {
  double coefficient = 0.0;
  std::array<int, 2> powers{0, 0};
};

/// amplitude * prod_i sin(k_i π x_i)
struct SineMode {
  double amplitude = 1.0;
  std::array<int, 2> modes{1, 1};
};

/// Scalar coefficient function on Λ = (0,1)^d: a polynomial plus optional sine modes.
class ScalarField {
 public:
  ScalarField() = default;
  explicit ScalarField(int dimension) : dim_(dimension) {}

  static ScalarField constant(int dimension, double value);
  /// d = 1 polynomial with ascending coefficients.
  static ScalarField polynomial(std::vector<double> coefficients);
  static ScalarField from_json(const nlohmann::json& j, int dimension);
  nlohmann::json to_json() const;

  ScalarField& add(const Monomial& term);
  ScalarField& add(const SineMode& mode);

  int dimension() const { return dim_; }
  bool is_zero() const { return terms_.empty() && sines_.empty(); }

  double value(const Point& x) const;
  Vector gradient(const Point& x) const;

 private:
  int dim_ = 1;
  std::vector<Monomial> terms_;
  std::vector<SineMode> sines_;
};

/// Smooth bump V(u) = exp(-1/(1 - |2u|²)) on |u| < 1/2, with its gradient and Laplacian.
double smooth_bump(const Point& u);
Vector smooth_bump_gradient(const Point& u);
double smooth_bump_laplacian(const Point& u);

/// θ(y) = c4 h^β (∇V)((y - x)/h): the gradient of the potential c4 h^{β+1} V((· - x)/h).
struct BumpTerm {
  Point center;
  double h = 0.1;
  double beta = 2.0;
  double c4 = 1.0;

  Vector value(const Point& y) const;
  double divergence(const Point& y) const;
  double potential(const Point& y) const;
};

/// Velocity field θ: Λ → R^d, componentwise ScalarField plus an optional bump alternative.
class VectorField {
 public:
  VectorField() = default;
  explicit VectorField(int dimension);
  VectorField(std::vector<ScalarField> components, std::optional<BumpTerm> bump = std::nullopt);

  static VectorField zero(int dimension) { return VectorField(dimension); }
  static VectorField from_json(const nlohmann::json& j, int dimension);
  nlohmann::json to_json() const;

  int dimension() const { return static_cast<int>(components_.size()); }
  bool is_zero() const;

  Vector value(const Point& x) const;
  double divergence(const Point& x) const;

  const std::vector<ScalarField>& components() const { return components_; }
  const std::optional<BumpTerm>& bump() const { return bump_; }

 private:
  std::vector<ScalarField> components_;
  std::optional<BumpTerm> bump_;
};

}  // namespace lmspde
