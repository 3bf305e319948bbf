#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include <json.hpp>

#include "lmspde/fields.hpp"
#include "lmspde/types.hpp"

namespace lmspde {

enum class InitialMode { zero, explicit_field, stationary_warmup };

/// Time discretization of dX = A_h X dt + dW.
///  implicit_euler:  (I - Δt A) X+ = X + ξ
///  crank_nicolson:  (I - Δt/2 A) X+ = (I + Δt/2 A) X + ξ
///  explicit_euler:  X+ = X + Δt A X + ξ   (needs Δt <= Δx²/(2ad))
enum class TimeScheme { implicit_euler, crank_nicolson, explicit_euler };

std::string to_string(TimeScheme s);
TimeScheme time_scheme_from_string(const std::string& s);
std::string to_string(InitialMode m);
InitialMode initial_mode_from_string(const std::string& s);

/// dX = (aΔX + θ·∇X + cX) dt + dW on Λ = (0,1)^d, Dirichlet boundary.
struct ModelSpec {
  int dimension = 1;
  double a = 1.0;
  VectorField theta = VectorField::zero(1);
  ScalarField c = ScalarField(1);
  double T = 1.0;
  InitialMode x0_mode = InitialMode::zero;
  ScalarField x0 = ScalarField(1);
  /// Upper bound γ on c - ∇·θ claimed for the stationary start; verified on a grid.
  std::optional<double> gamma_check;
  /// Burn-in time for the stationary start; default 5/|γ| (or 5T without γ).
  std::optional<double> burn_in;

  /// Throws ConfigError on any violated invariant (including the γ check).
  void validate() const;
  /// Largest value of c - ∇·θ on a verification grid of the given size per axis.
  double max_c_minus_div_theta(int points_per_axis = 201) const;
  double default_burn_in() const;

  static ModelSpec from_json(const nlohmann::json& j);
  nlohmann::json to_json() const;
};

/// Tensor grid of M^d interior nodes at (i+1)Δx, Δx = 1/(M+1); n_t steps of Δt = T/n_t.
struct Grid {
  int dimension = 1;
  int M = 3;
  int n_t = 1;
  double T = 1.0;
  TimeScheme scheme = TimeScheme::implicit_euler;

  double dx() const { return 1.0 / (M + 1); }
  double dt() const { return T / n_t; }
  int nodes() const { return dimension == 1 ? M : M * M; }
  Point position(int node) const;
  /// Recorded, not enforced.
  bool cfl_diagnostic() const { return dt() <= dx(); }
  /// Largest stable explicit step for diffusivity a.
  double explicit_dt_limit(double a) const { return dx() * dx() / (2.0 * a * dimension); }

  void validate() const;
};

}  // namespace lmspde
