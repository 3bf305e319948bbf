#pragma once

#include <cstdint>
#include <functional>
#include <limits>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "lmspde/estimator.hpp"
#include "lmspde/kernel.hpp"
#include "lmspde/measurements.hpp"
#include "lmspde/model.hpp"
#include "lmspde/weights.hpp"

namespace lmspde {

enum class StudyKind { rate_in_delta, bandwidth_sweep, trajectory, integrated_risk };

std::string to_string(StudyKind k);
StudyKind study_kind_from_string(const std::string& s);

/// fixed: h = c_h;  delta_power: h = c_h δ^{d/(2β+d)};  n_power: h = c_h N^{-1/(2β+d)}.
/// An explicit exponent replaces d/(2β+d) (resp. 1/(2β+d)).
struct BandwidthRule {
  enum class Kind { fixed, delta_power, n_power };
  Kind kind = Kind::delta_power;
  double beta = 2.0;
  double c_h = 0.5;
  std::optional<double> exponent;

  double h(double delta, int N, int dimension) const;
};

struct LayoutConfig {
  /// Box 𝒥 carrying the equidistant centres (endpoints included).
  Box J;
  double margin = 0.1;
  /// Explicit centres; replaces the packing rule when non-empty.
  std::vector<Point> points;
};

struct StudyConfig {
  StudyKind kind = StudyKind::rate_in_delta;
  std::string name = "study";
  std::vector<double> deltas;
  int replicates = 100;
  BandwidthRule h_rule;
  /// bandwidth_sweep: the h values (one δ only).
  std::vector<double> h_grid;
  ModelSpec model;
  std::shared_ptr<const BaseKernel> kernel;
  LayoutConfig layout;
  std::vector<Point> eval_points;
  SmoothingKernel V = SmoothingKernel::epanechnikov;
  double ridge = 0.0;
  /// Use local-constant weights where the local-linear design is degenerate (trajectory / risk grids only).
  bool local_constant_fallback = true;
  /// Also report the plug-in estimator with â.
  bool estimate_a = false;
  /// Midpoint cells per axis for the integrated risk (computed when > 0 or for integrated_risk studies).
  int risk_cells = 0;
  /// trajectory: evaluation points per axis over 𝒥.
  int trajectory_points = 25;
  std::uint64_t seed = 1;
  std::string output_dir = "out";
  TimeScheme scheme = TimeScheme::implicit_euler;
  /// explicit_euler: Δt = cfl · Δx²/(2ad).
  double cfl = 0.9;
  /// implicit schemes: n_t = max(min_steps, ceil(T / (time_resolution · δ²))).
  double time_resolution = 4.0;
  int min_steps = 2000;
  double resolution_ratio = 8.0;
  StencilKind stencil = StencilKind::analytic;
  /// A cell loses validity above this share of failed replicates.
  double failure_tolerance = 0.1;
  /// Write replicate 0 of every cell as a binary path (about 1000 time rows).
  bool dump_paths = false;

  int dimension() const { return model.dimension; }
  /// Throws ConfigError.
  void validate() const;

  static StudyConfig from_json(const nlohmann::json& j);
  static StudyConfig load(const std::string& path);
  nlohmann::json to_json() const;
};

/// Everything derived for one δ: centres, grid and bandwidth.
struct CellSetup {
  double delta = 0.0;
  int N = 0;
  double h = 0.0;
  MeasurementConfig measurement;
  Grid grid;
};

/// N = ⌊λ(𝒥)/(2δ r_K (1 + margin))⌋ per axis, centres equidistant with 𝒥's endpoints included.
std::vector<Point> packed_locations(const Box& J, double support_radius, double margin);
Grid grid_for(const StudyConfig& cfg, double delta);
CellSetup make_cell(const StudyConfig& cfg, double delta);

/// master ⊕ splitmix64(cell << 32 | replicate).
std::uint64_t replicate_seed(std::uint64_t master, int cell, int replicate);

/// Runs fn(i) for i < n on `workers` threads; the first exception is rethrown after all tasks finish.
void parallel_for(int n, int workers, const std::function<void(int)>& fn);

struct SlopeFit {
  double slope = 0.0;
  double intercept = 0.0;
  double stderr_slope = 0.0;
  bool stderr_defined = false;
  int points = 0;
};

/// OLS of log y on log x. Needs at least two pairs and positive values (ContractError otherwise).
SlopeFit fit_loglog_slope(const std::vector<std::pair<double, double>>& pairs);

/// θ(y) = c4 h^β ∇V((y - x)/h) with the smooth bump V.
VectorField make_bump_alternative(const Point& x, double h, double beta, double c4);

/// Mean, sample standard deviation (divisor R - 1; NaN for R = 1) and RMSE of errors about a truth value.
struct ErrorSummary {
  double bias = 0.0;
  double std = 0.0;
  double rmse = 0.0;
  int count = 0;
};
ErrorSummary summarize_errors(const std::vector<double>& errors);

struct ReplicateOutcome {
  std::uint64_t seed = 0;
  bool ok = true;
  std::string error;
  /// [eval point] → θ̂ (known a) and θ̂ with â plugged in.
  std::vector<Vector> theta_hat;
  std::vector<Vector> theta_hat_plugin;
  double a_hat = std::numeric_limits<double>::quiet_NaN();
  /// [eval point] → diag([𝓜]_T)·N h^d
  std::vector<Vector> qv_scaled;
  std::optional<IntegratedRiskResult> risk;
};

struct RateCell {
  CellSetup setup;
  int failures = 0;
  std::vector<std::string> failure_messages;
  /// [eval point][component]
  std::vector<std::vector<ErrorSummary>> known_a;
  std::vector<std::vector<ErrorSummary>> plugin;
  ErrorSummary a_hat;  ///< about the true a
  std::vector<Vector> qv_scaled_mean;
  Vector risk_interior;  ///< Monte Carlo means, per component
  Vector risk_boundary;
  int fallback_points = 0;
  std::vector<ReplicateOutcome> replicates;

  bool valid(double tolerance) const;
};

struct RateStudyResult {
  StudyConfig config;
  std::vector<RateCell> cells;
  /// [eval point][component]; empty when fewer than two δ cells.
  std::vector<std::vector<SlopeFit>> slope;
  std::vector<std::vector<SlopeFit>> slope_plugin;
  /// Slope of the interior risk summed over components.
  std::optional<SlopeFit> slope_risk;
  bool valid = true;
};

using ProgressFn = std::function<void(const std::string&)>;

/// rate_in_delta and integrated_risk studies.
RateStudyResult run_rate_study(const StudyConfig& cfg, int workers = 1, const ProgressFn& progress = {});

struct SweepCell {
  double h = 0.0;
  int active = 0;
  bool degenerate = false;
  std::string degenerate_message;
  int failures = 0;
  /// [component]
  std::vector<ErrorSummary> error;
};

struct SweepResult {
  StudyConfig config;
  CellSetup setup;
  std::vector<SweepCell> cells;
  std::vector<std::uint64_t> seeds;
  /// [replicate][h]; empty vectors mark failures
  std::vector<std::vector<Vector>> estimate;
  int argmin = -1;
  /// RMSE at the first / last valid h over the minimum (first component).
  double left_ratio = 0.0;
  double right_ratio = 0.0;
  bool valid = true;

  /// Interior minimum with both end ratios ≥ 1 + margin.
  bool u_shape(double margin = 0.2) const;
};

SweepResult run_bandwidth_sweep(const StudyConfig& cfg, int workers = 1, const ProgressFn& progress = {});

struct TrajectoryCell {
  CellSetup setup;
  std::vector<Point> x;
  std::vector<Vector> truth;
  /// [replicate][point]; empty vectors mark failed replicates
  std::vector<std::vector<Vector>> estimate;
  std::vector<std::uint64_t> seeds;
  std::vector<bool> fallback;
  int failures = 0;
  std::vector<std::string> failure_messages;

  /// Per replicate sup_x |θ̂ - θ|_∞ (NaN for failures) and its median over successes.
  std::vector<double> sup_errors() const;
  double median_sup_error() const;
};

struct TrajectoryResult {
  StudyConfig config;
  std::vector<TrajectoryCell> cells;
  bool valid = true;
};

TrajectoryResult run_trajectory(const StudyConfig& cfg, int workers = 1, const ProgressFn& progress = {});

/// CSV tables (timestamp comment first) and SVG panels `<name>_<panel>.svg` in cfg.output_dir.
/// Returns the files written.
std::vector<std::string> write_outputs(const RateStudyResult& r);
std::vector<std::string> write_outputs(const SweepResult& r);
std::vector<std::string> write_outputs(const TrajectoryResult& r);

}  // namespace lmspde
