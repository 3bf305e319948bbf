#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>

#include <Eigen/Sparse>
#include <Eigen/SparseLU>

#include "lmspde/model.hpp"
#include "lmspde/types.hpp"

namespace lmspde {

using SparseMatrix = Eigen::SparseMatrix<double>;
using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// A_h = a L_h + Θ_h G_h + C_h on the interior nodes (node index i0 + M i1).
SparseMatrix build_operator(const ModelSpec& model, const Grid& grid);

/// One step X_j -> X_{j+1} of the configured scheme, factorized once.
class Stepper {
 public:
  Stepper(const ModelSpec& model, const Grid& grid);

  /// out = X_{j+1} given X_j and the noise increment ξ_j (out must not alias x).
  void step(const Vector& x, const Vector& xi, Vector& out);
  const Grid& grid() const { return grid_; }
  /// Standard deviation of each noise entry, sqrt(Δt/Δx^d).
  double noise_sd() const { return noise_sd_; }

 private:
  Grid grid_;
  double noise_sd_ = 0.0;
  bool tridiagonal_ = false;
  // d = 1: three diagonals of the explicit update, or of the implicit system (Thomas factors).
  Vector lo_, di_, up_;
  Vector cprime_, inv_denom_;
  // d = 2
  SparseMatrix explicit_;
  SparseMatrix rhs_;
  Eigen::SparseLU<SparseMatrix> lu_;
  Vector work_;
};

/// Receives the states of a simulation as they are produced.
class StepObserver {
 public:
  virtual ~StepObserver() = default;
  /// State at t_j, j = 0..n_t.
  virtual void on_state(int j, const Vector& x) = 0;
  /// Noise increment taking X_j to X_{j+1}; only delivered when wants_noise().
  virtual bool wants_noise() const { return false; }
  virtual void on_noise(int /*j*/, const Vector& /*xi*/) {}
};

struct SimulationOptions {
  /// false: deterministic PDE solve (test hook).
  bool inject_noise = true;
  /// Overrides the model's x0_mode when set.
  std::optional<Vector> initial;
};

/// Warm-up from zero over burn_in time units with the path's own scheme; returns the terminal field.
Vector stationary_warmup(const ModelSpec& model, const Grid& grid, std::uint64_t seed, double burn_in);

/// Streaming simulation; the observer sees every state. Deterministic in (model, grid, seed).
void simulate(const ModelSpec& model, const Grid& grid, std::uint64_t seed, StepObserver& observer,
              const SimulationOptions& options = {});

struct SolutionPath {
  Grid grid;
  ModelSpec model;
  std::uint64_t seed = 0;
  int stride = 1;
  /// Row r holds the interior field at step r·stride.
  RowMatrix values;

  int rows() const { return static_cast<int>(values.rows()); }
  /// Field including the (zero) boundary nodes, (M+2)^d entries.
  Vector with_boundary(int row) const;
};

/// Keeps every stride-th state (and always the last one).
class PathRecorder : public StepObserver {
 public:
  PathRecorder(const Grid& grid, int stride = 1);
  void on_state(int j, const Vector& x) override;
  RowMatrix take() { return std::move(values_); }

 private:
  int stride_;
  int n_t_;
  int row_ = 0;
  RowMatrix values_;
};

SolutionPath simulate_path(const ModelSpec& model, const Grid& grid, std::uint64_t seed,
                           const SimulationOptions& options = {}, int stride = 1);

/// Little-endian header (u64 dims, u64 M, u64 n_t, f64 T, u64 seed), then row-major f64 payload.
/// n_t in the header is the number of stored intervals (rows - 1).
void write_path_binary(const SolutionPath& path, std::ostream& out);
void write_path_binary(const SolutionPath& path, const std::string& file);

}  // namespace lmspde
