#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "lmspde/types.hpp"

namespace lmspde {

enum class SmoothingKernel { epanechnikov, rectangular };

SmoothingKernel smoothing_kernel_from_string(const std::string& name);
std::string to_string(SmoothingKernel v);

/// V(u): Epanechnikov 0.75(1 - y²)1(|y| <= 1) or rectangular 1(-1/2 <= y <= 1/2), product form in d = 2.
double eval_V(SmoothingKernel v, const Point& u);
/// Same, selecting the kernel by name; unknown names throw ConfigError.
double eval_V(const std::string& name, const Point& u);

struct WeightConfig {
  double h = 0.1;
  SmoothingKernel V = SmoothingKernel::epanechnikov;
  /// Added to B_{Nx} only when it is numerically singular; the result is then flagged.
  double ridge = 0.0;
};

struct WeightSet {
  Point x;
  double h = 0.0;
  Vector w;
  double min_eigenvalue = 0.0;
  int active = 0;
  /// false when the ridge fallback was used: L(iii)(4) then holds only approximately.
  bool reproducing = true;
};

/// w_k(x) = (1/(Nh^d)) U(0)ᵀ B⁻¹ U((x_k - x)/h) V((x_k - x)/h), U(u) = (1, u)ᵀ,
/// B = (1/(Nh^d)) Σ_k U Uᵀ V. Throws DegenerateDesignError when B is singular and ridge = 0.
WeightSet compute_weights(const Point& x, const std::vector<Point>& locations, const WeightConfig& config);

/// Local-constant weights V_k/ΣV_k: reproduce constants only. Throws DegenerateDesignError if no point is active.
WeightSet nadaraya_watson_weights(const Point& x, const std::vector<Point>& locations, const WeightConfig& config);

struct WeightReport {
  double max_scaled = 0.0;  ///< max_k |w_k| N h^d
  double abs_sum = 0.0;     ///< Σ|w_k|
  int support_violations = 0;
  double sum_residual = 0.0;     ///< |Σw - 1|
  Vector moment_residual;        ///< |Σ(x_k - x)_i w_k| per coordinate
  double c_star = 10.0;
  bool bounded = false;      ///< (1) and (2) against C_*
  bool local = false;        ///< (3)
  bool reproduces = false;   ///< (4) to 1e-10 (moments relative to h)
  bool pass() const { return bounded && local && reproduces; }
};

/// Checks L(iii)(1)-(4). Locality uses the sup-norm window |x_k - x|_∞ <= h, the support of a product V.
WeightReport validate_weights(const WeightSet& ws, const std::vector<Point>& locations, double c_star = 10.0);

/// CSV rows x_1..x_d,k,w_k,active.
void write_weights_csv(const std::vector<WeightSet>& sets, std::ostream& out, bool header = true);

}  // namespace lmspde
