#pragma once

#include <functional>
#include <optional>
#include <string>

#include "lmspde/fields.hpp"
#include "lmspde/measurements.hpp"
#include "lmspde/weights.hpp"

namespace lmspde {

struct VelocityEstimate {
  Point x;
  Vector theta_hat;
  Matrix fisher;
  double a_used = 0.0;
  /// "known" or "estimated"
  std::string a_source = "known";
  double fisher_condition = 0.0;
  int active = 0;
};

/// ℐ = Σ_k w_k ∫X^∇ X^∇ᵀ dt.
Matrix observed_fisher(const StatisticsSet& stats, const WeightSet& ws);
Matrix observed_fisher(const LocalMeasurementSet& meas, const WeightSet& ws);

/// [𝓜]_T = Σ_k w_k² ∫X^∇ X^∇ᵀ dt (quadratic variation of the martingale term).
Matrix martingale_qv(const StatisticsSet& stats, const WeightSet& ws);

/// 𝒰 = Σ_k w_k ∫X^∇ X^Δ dt, the sensitivity of θ̂ to the plugged-in diffusivity.
Vector diffusivity_sensitivity(const StatisticsSet& stats, const WeightSet& ws);

/// θ̂ = -ℐ⁻¹ Σ_k w_k (∫X^∇ dX - a∫X^Δ X^∇ dt). Throws EstimationError if cond(ℐ) >= 1e12.
VelocityEstimate weighted_augmented_mle(const StatisticsSet& stats, const WeightSet& ws, double a);
VelocityEstimate weighted_augmented_mle(const LocalMeasurementSet& meas, const WeightSet& ws, double a);

/// â = Σw∫X^Δ dX / Σw∫(X^Δ)² dt; all locations with unit weight when ws is absent.
double estimate_a(const StatisticsSet& stats, const WeightSet* ws = nullptr);
double estimate_a(const LocalMeasurementSet& meas, const WeightSet* ws = nullptr);

/// weighted_augmented_mle with a replaced by estimate_a(stats, &ws), or by a_override if given.
VelocityEstimate mle_unknown_a(const StatisticsSet& stats, const WeightSet& ws,
                               std::optional<double> a_override = std::nullopt);

/// Left/right parts of θ̂ - θ(x) = ℐ⁻¹𝓡 - ℐ⁻¹𝓜‖K‖ for a known θ.
struct ErrorDecomposition {
  Vector theta_x;           ///< θ(x)
  Vector remainder;         ///< ℐ⁻¹𝓡 with the drift integrand sampled at the nodes
  Vector remainder_discrete;///< ℐ⁻¹𝓡 with the drift of the discrete operator
  Vector martingale;        ///< ℐ⁻¹𝓜‖K‖
  Vector reconstruct() const { return theta_x + remainder - martingale; }
  Vector reconstruct_discrete() const { return theta_x + remainder_discrete - martingale; }
};

ErrorDecomposition decompose_error(const StatisticsSet& stats, const WeightSet& ws, const VectorField& theta);

/// Axis-aligned box [lower, upper] (componentwise).
struct Box {
  Point lower;
  Point upper;
  bool contains(const Point& x) const;
  Point project(const Point& x) const;
  double volume() const;
};

/// The estimate at the closest point of 𝒥 (unique for a box).
Vector extend_estimate(const std::function<Vector(const Point&)>& estimate_on_J, const Box& J, const Point& x);

struct IntegratedRiskResult {
  Vector total;     ///< ∫_Λ (θ̂ - θ)² dx per component
  Vector interior;  ///< over 𝒥
  Vector boundary;  ///< over Λ \ 𝒥
  double d_max2 = 0.0;           ///< (max_{x∈Λ} dist(x, 𝒥))²
  double strip_measure = 0.0;    ///< λ(Λ \ 𝒥)
};

/// Midpoint rule with `cells` cells per axis over Λ = (0,1)^d; estimates outside 𝒥 via extend_estimate.
IntegratedRiskResult integrated_risk(const std::function<Vector(const Point&)>& estimate_on_J,
                                     const VectorField& theta, const Box& J, int cells);

}  // namespace lmspde
