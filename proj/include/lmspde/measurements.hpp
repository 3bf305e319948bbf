#pragma once

#include <iosfwd>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "lmspde/kernel.hpp"
#include "lmspde/model.hpp"
#include "lmspde/simulator.hpp"
#include "lmspde/types.hpp"

namespace lmspde {

/// analytic: Δx^d·D^αK_{δ,x_k}(x_i).  discrete: K sampled at the nodes, with X^∇ and X^Δ taken through the
/// centred difference G_h and the five-point L_h (⟨X, L_h K⟩ = ⟨L_h X, K⟩ for the Dirichlet field).
enum class StencilKind { analytic, discrete };

std::string to_string(StencilKind s);
StencilKind stencil_kind_from_string(const std::string& s);

struct MeasurementConfig {
  double delta = 0.05;
  std::vector<Point> locations;
  std::shared_ptr<const BaseKernel> kernel;
  /// Minimum number of grid spacings per kernel support radius.
  double resolution_ratio = 8.0;
  StencilKind stencil = StencilKind::analytic;

  int dimension() const { return kernel->dimension(); }
  int size() const { return static_cast<int>(locations.size()); }
  double support_radius() const { return delta * kernel->support_radius(); }
  LocalizedKernel localized(int k) const { return LocalizedKernel{kernel.get(), delta, locations[static_cast<std::size_t>(k)]}; }

  /// Supports inside Λ and pairwise disjoint; throws ConfigError otherwise.
  void validate() const;
};

/// Quadrature weights Δx^d·D^αK_{δ,x_k}(x_i) over the nodes inside the support of K_{δ,x_k}.
struct Stencil {
  std::vector<int> nodes;
  std::vector<double> k;
  std::vector<double> lap;
  /// grad[i·d + c]
  std::vector<double> grad;
};

/// One stencil per location; enforces the resolution guard (MeasurementError naming δ).
std::vector<Stencil> build_stencils(const MeasurementConfig& config, const Grid& grid);

/// X, X^∇, X^Δ of one field at every location (rows = locations; columns X, ∇X..., ΔX).
Matrix measure_field(const Vector& field, const std::vector<Stencil>& stencils, int dimension);

struct LocationSeries {
  Vector X;
  /// (n_t + 1) × d
  Matrix grad;
  Vector lap;
};

struct LocalMeasurementSet {
  MeasurementConfig config;
  double dt = 0.0;
  int n_t = 0;
  std::vector<LocationSeries> series;

  double T() const { return dt * n_t; }
};

LocalMeasurementSet measure(const SolutionPath& path, const MeasurementConfig& config);

/// Records the full measurement series while a simulation runs.
class MeasurementRecorder : public StepObserver {
 public:
  MeasurementRecorder(const MeasurementConfig& config, const Grid& grid);
  void on_state(int j, const Vector& x) override;
  LocalMeasurementSet take() { return std::move(set_); }

 private:
  std::vector<Stencil> stencils_;
  LocalMeasurementSet set_;
};

/// Σ_j f[j](X[j+1] - X[j]).
double ito_sum(std::span<const double> f, std::span<const double> X);
/// Σ_{j<n_t} f[j]·Δt (left end point).
double time_integral(std::span<const double> f, double dt);

/// Per-location sufficient statistics for every estimator in this library.
struct LocationStatistics {
  Vector grad_dX;     ///< ∫X^∇ dX
  Vector lap_grad;    ///< ∫X^Δ X^∇ dt
  Matrix grad_grad;   ///< ∫X^∇ X^∇ᵀ dt
  double lap_dX = 0;  ///< ∫X^Δ dX
  double lap_lap = 0; ///< ∫(X^Δ)² dt
};

/// Ingredients of θ̂ = θ(x) + ℐ⁻¹𝓡 - ℐ⁻¹𝓜‖K‖, per location, independent of x.
struct DecompositionTerms {
  /// ∫X^∇⟨X, θ·∇K + φK⟩dt with the integrand sampled at the nodes (φ = ∇·θ - c).
  Vector drift_quadrature;
  /// Same with ⟨X, aΔK - A_hᵀK⟩: the drift the discrete dynamics actually has.
  Vector drift_discrete;
  /// Σ_j X^∇_j ⟨ξ_j, K⟩: the martingale part ∫X^∇ ‖K‖dW.
  Vector martingale;
};

struct StatisticsSet {
  double T = 0.0;
  double dt = 0.0;
  std::vector<Point> locations;
  std::vector<LocationStatistics> stats;
  std::vector<DecompositionTerms> decomposition;  ///< empty unless requested
};

StatisticsSet statistics(const LocalMeasurementSet& set);

/// Streams the sufficient statistics with the same operation order as statistics(set).
/// With a model it also accumulates the decomposition terms (needs the noise increments).
class StatisticsAccumulator : public StepObserver {
 public:
  StatisticsAccumulator(const MeasurementConfig& config, const Grid& grid, const ModelSpec* model = nullptr);
  void on_state(int j, const Vector& x) override;
  bool wants_noise() const override { return decompose_; }
  void on_noise(int j, const Vector& xi) override;
  StatisticsSet result() const;

 private:
  int d_;
  double dt_;
  int n_t_;
  double a_ = 0.0;
  bool decompose_ = false;
  std::vector<Point> locations_;
  std::vector<Stencil> stencils_;
  // drift stencils: θ·∇K + φK and aΔK - A_hᵀK (one node wider than the support)
  std::vector<std::vector<int>> drift_nodes_;
  std::vector<std::vector<double>> drift_quad_, drift_disc_;
  // columns: X, X^∇ (d), X^Δ, ⟨X, drift_quad⟩, ⟨X, drift_disc⟩
  Matrix prev_;
  Matrix cur_;
  // raw sums; time integrals are multiplied by Δt in result()
  std::vector<LocationStatistics> acc_;
  std::vector<DecompositionTerms> dec_;
};

/// CSV rows t,k,X,X_grad_1..d,X_lap.
void write_measurements_csv(const LocalMeasurementSet& set, std::ostream& out);

}  // namespace lmspde
