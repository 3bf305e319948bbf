#pragma once

#include <optional>
#include <span>

#include <json.hpp>

#include "lmspde/polynomial.hpp"
#include "lmspde/types.hpp"

namespace lmspde {

enum class Parity { even, odd };

/// Compactly supported point spread function K = -ΔK̄ with a polynomial K̄.
///
/// Two representations are supported:
///  - radial: K̄(y) = p(|y|²) for |y| <= r, any dimension d in {1, 2} (even kernels);
///  - axial:  K̄(y) = P(y) for |y| <= r, d = 1 only (even or odd).
/// All derivatives up to ΔK are stored as polynomial coefficient arrays, so
/// evaluation is exact up to rounding.
class BaseKernel {
 public:
  /// K̄(y) = (1 - |y|²/r²)^power.
  static BaseKernel polynomial_bump(int dimension, int power = 5, double radius = 1.0);
  /// K̄(y) = (y/r)(1 - y²/r²)^power in d = 1.
  static BaseKernel odd_polynomial_bump(int power = 5, double radius = 1.0);

  /// Accepts either a named family ({"name": "poly_bump", "dimension", "power", "radius"})
  /// or the full description written by to_json().
  static BaseKernel from_json(const nlohmann::json& j);
  nlohmann::json to_json() const;

  int dimension() const { return dim_; }
  double support_radius() const { return radius_; }
  Parity parity() const { return parity_; }
  bool is_radial() const { return radial_; }

  /// c·K̄, used for homogeneity checks.
  BaseKernel scaled(double factor) const;

  double base_value(const Point& y) const;
  double value(const Point& y) const;
  Vector gradient(const Point& y) const;
  double laplacian(const Point& y) const;
  Matrix hessian(const Point& y) const;

  /// |K̂(ξ)|² as a function of ξ (d = 1) or |ξ| (radial kernels).
  /// Uses the closed Bessel form for the bump family, quadrature otherwise.
  double fourier_abs2(double xi) const;
  /// Same quantity, always by numerical quadrature (used to cross-check the closed form).
  double fourier_abs2_quadrature(double xi) const;

 private:
  BaseKernel() = default;
  void build_derivatives();

  int dim_ = 1;
  double radius_ = 1.0;
  Parity parity_ = Parity::even;
  bool radial_ = true;
  std::optional<int> bump_power_;

  // radial: polynomials in s = |y|^2; axial: polynomials in y.
  Polynomial kbar_;
  Polynomial k_;
  Polynomial k1_;  // radial: q'(s); axial: K'(y)
  Polynomial k2_;  // radial: q''(s); axial: K''(y)
};

double eval_K(const BaseKernel& base, const Point& y);
Vector eval_gradK(const BaseKernel& base, const Point& y);
double eval_lapK(const BaseKernel& base, const Point& y);

/// ||D^α K||_{L²(R^d)} for a multi-index with |α| <= 2 (size of alpha = d).
double l2_norm(const BaseKernel& base, std::span<const int> alpha);
/// ||K||_{L²(R^d)}.
double l2_norm(const BaseKernel& base);

/// Limit of the observed Fisher information,
/// Σ_ij = T/(2a) (2π)^{-d} ∫ ξ_i ξ_j |ξ|^{-2} |K̂(ξ)|² dξ, by Fourier-side quadrature.
/// Throws QuadratureError if two successive refinements disagree.
Matrix fisher_sigma(const BaseKernel& base, double T, double a);

/// D^α K_{δ,x}(u) = δ^{-d/2-|α|} (D^α K)((u - x)/δ).
struct LocalizedKernel {
  const BaseKernel* base = nullptr;
  double delta = 1.0;
  Point center;

  double value(const Point& u) const;
  Vector gradient(const Point& u) const;
  double laplacian(const Point& u) const;
  /// Euclidean radius of the support, δ·r_K.
  double support_radius() const { return delta * base->support_radius(); }
};

}  // namespace lmspde
