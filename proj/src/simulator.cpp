#include "lmspde/simulator.hpp"

#include <bit>
#include <cmath>
#include <fstream>
#include <random>
#include <vector>

#include <absl/random/gaussian_distribution.h>
#include <absl/random/internal/pcg_engine.h>

#include "lmspde/errors.hpp"

namespace lmspde {
namespace {

using Triplet = Eigen::Triplet<double>;

double step_factor(TimeScheme s, double dt) {
  switch (s) {
    case TimeScheme::implicit_euler: return dt;
    case TimeScheme::crank_nicolson: return 0.5 * dt;
    case TimeScheme::explicit_euler: return dt;
  }
  return dt;
}

Vector initial_field(const ModelSpec& model, const Grid& grid) {
  Vector x = Vector::Zero(grid.nodes());
  if (model.x0_mode == InitialMode::explicit_field)
    for (int i = 0; i < grid.nodes(); ++i) x[i] = model.x0.value(grid.position(i));
  return x;
}

// PCG64 with a ziggurat sampler; deterministic for a given seed and library build.
// The engine is used bare: absl::InsecureBitGen salts its seed per process, which breaks rerun reproducibility.
class NoiseSource {
 public:
  NoiseSource(std::uint64_t seed, double sd) : engine_(make_seq(seed)), sd_(sd) {}
  void fill(Vector& xi) {
    for (Eigen::Index i = 0; i < xi.size(); ++i) xi[i] = sd_ * normal_(engine_);
  }

 private:
  static std::seed_seq make_seq(std::uint64_t seed) {
    return std::seed_seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)};
  }
  absl::random_internal::pcg64_2018_engine engine_;
  absl::gaussian_distribution<double> normal_;
  double sd_;
};

void warm_up(Stepper& stepper, NoiseSource& noise, double burn_in, Vector& x) {
  const long steps = std::lround(burn_in / stepper.grid().dt());
  Vector xi(x.size());
  Vector next(x.size());
  for (long s = 0; s < steps; ++s) {
    noise.fill(xi);
    stepper.step(x, xi, next);
    x.swap(next);
  }
}

}  // namespace

SparseMatrix build_operator(const ModelSpec& model, const Grid& grid) {
  grid.validate();
  if (model.dimension != grid.dimension) throw ConfigError("model and grid dimensions differ");
  const int M = grid.M;
  const int n = grid.nodes();
  const double h = grid.dx();
  const double lap = model.a / (h * h);
  const double g = 1.0 / (2.0 * h);
  std::vector<Triplet> t;
  t.reserve(static_cast<std::size_t>(n) * (1 + 4 * grid.dimension));
  for (int node = 0; node < n; ++node) {
    const Point p = grid.position(node);
    const Vector th = model.theta.value(p);
    t.emplace_back(node, node, -2.0 * grid.dimension * lap + model.c.value(p));
    for (int axis = 0; axis < grid.dimension; ++axis) {
      const int i = axis == 0 ? node % M : node / M;
      const int stride = axis == 0 ? 1 : M;
      if (i > 0) t.emplace_back(node, node - stride, lap - th[axis] * g);
      if (i < M - 1) t.emplace_back(node, node + stride, lap + th[axis] * g);
    }
  }
  SparseMatrix A(n, n);
  A.setFromTriplets(t.begin(), t.end());
  return A;
}

Stepper::Stepper(const ModelSpec& model, const Grid& grid) : grid_(grid) {
  model.validate();
  const SparseMatrix A = build_operator(model, grid);
  const int n = grid.nodes();
  const double dt = grid.dt();
  noise_sd_ = std::sqrt(dt / std::pow(grid.dx(), grid.dimension));
  if (grid.scheme == TimeScheme::explicit_euler && dt > grid.explicit_dt_limit(model.a) * (1.0 + 1e-12))
    throw SimulationError("explicit step dt = " + std::to_string(dt) + " exceeds the stability limit " +
                          std::to_string(grid.explicit_dt_limit(model.a)));
  const double f = step_factor(grid.scheme, dt);
  work_.resize(n);

  if (grid.dimension == 1) {
    tridiagonal_ = true;
    lo_ = Vector::Zero(n);
    di_ = Vector::Zero(n);
    up_ = Vector::Zero(n);
    for (int k = 0; k < A.outerSize(); ++k)
      for (SparseMatrix::InnerIterator it(A, k); it; ++it) {
        const auto r = it.row();
        if (it.col() == r - 1) lo_[r] = it.value();
        else if (it.col() == r) di_[r] = it.value();
        else up_[r] = it.value();
      }
    if (grid.scheme == TimeScheme::explicit_euler) {
      lo_ *= dt;
      up_ *= dt;
      di_ = (di_ * dt).array() + 1.0;
      return;
    }
    // Keep the explicit half of Crank–Nicolson in lo_/di_/up_; the implicit system in Thomas factors.
    const Vector l = -f * lo_;
    const Vector d = (-f * di_).array() + 1.0;
    const Vector u = -f * up_;
    cprime_.resize(n);
    inv_denom_.resize(n);
    for (int i = 0; i < n; ++i) {
      const double denom = d[i] - (i > 0 ? l[i] * cprime_[i - 1] : 0.0);
      if (!(std::abs(denom) > 1e-14 * (std::abs(d[i]) + std::abs(l[i]) + std::abs(u[i]))))
        throw SimulationError("tridiagonal solve: vanishing pivot " + std::to_string(denom) + " at node " +
                              std::to_string(i));
      inv_denom_[i] = 1.0 / denom;
      cprime_[i] = u[i] * inv_denom_[i];
    }
    lo_ = l;  // subdiagonal of the implicit system, needed in the forward sweep
    if (grid.scheme == TimeScheme::crank_nicolson) {
      // explicit half stored in rhs_ as a sparse matrix for simplicity
      SparseMatrix I(n, n);
      I.setIdentity();
      rhs_ = I + f * A;
    }
    return;
  }

  SparseMatrix I(n, n);
  I.setIdentity();
  if (grid.scheme == TimeScheme::explicit_euler) {
    explicit_ = I + dt * A;
    return;
  }
  const SparseMatrix lhs = I - f * A;
  if (grid.scheme == TimeScheme::crank_nicolson) rhs_ = I + f * A;
  lu_.compute(lhs);
  if (lu_.info() != Eigen::Success) throw SimulationError("sparse LU factorization of I - dt A failed");
}

void Stepper::step(const Vector& x, const Vector& xi, Vector& out) {
  const Eigen::Index n = x.size();
  out.resize(n);
  if (grid_.scheme == TimeScheme::explicit_euler) {
    if (tridiagonal_) {
      const double* px = x.data();
      const double* pl = lo_.data();
      const double* pd = di_.data();
      const double* pu = up_.data();
      const double* pz = xi.data();
      double* po = out.data();
      po[0] = pd[0] * px[0] + pu[0] * px[1] + pz[0];
      for (Eigen::Index i = 1; i < n - 1; ++i) po[i] = pl[i] * px[i - 1] + pd[i] * px[i] + pu[i] * px[i + 1] + pz[i];
      po[n - 1] = pl[n - 1] * px[n - 2] + pd[n - 1] * px[n - 1] + pz[n - 1];
    } else {
      out.noalias() = explicit_ * x;
      out += xi;
    }
    return;
  }
  if (grid_.scheme == TimeScheme::crank_nicolson) {
    work_.noalias() = rhs_ * x;
    work_ += xi;
  } else {
    work_ = x + xi;
  }
  if (tridiagonal_) {
    // Thomas sweep, factors from the constructor
    double prev = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      prev = (work_[i] - (i > 0 ? lo_[i] * prev : 0.0)) * inv_denom_[i];
      out[i] = prev;
    }
    for (Eigen::Index i = n - 2; i >= 0; --i) out[i] -= cprime_[i] * out[i + 1];
  } else {
    out = lu_.solve(work_);
  }
}

Vector stationary_warmup(const ModelSpec& model, const Grid& grid, std::uint64_t seed, double burn_in) {
  Stepper stepper(model, grid);
  NoiseSource noise(seed, stepper.noise_sd());
  Vector x = Vector::Zero(grid.nodes());
  warm_up(stepper, noise, burn_in, x);
  return x;
}

void simulate(const ModelSpec& model, const Grid& grid, std::uint64_t seed, StepObserver& observer,
              const SimulationOptions& options) {
  if (grid.T != model.T) throw ConfigError("grid horizon differs from model T");
  Stepper stepper(model, grid);
  NoiseSource noise(seed, stepper.noise_sd());
  Vector x;
  if (options.initial) {
    x = *options.initial;
    if (x.size() != grid.nodes()) throw ConfigError("initial field has the wrong size");
  } else if (model.x0_mode == InitialMode::stationary_warmup) {
    x = Vector::Zero(grid.nodes());
    warm_up(stepper, noise, model.default_burn_in(), x);
  } else {
    x = initial_field(model, grid);
  }
  Vector xi = Vector::Zero(grid.nodes());
  Vector next(grid.nodes());
  observer.on_state(0, x);
  const bool wants_noise = observer.wants_noise();
  for (int j = 0; j < grid.n_t; ++j) {
    if (options.inject_noise) noise.fill(xi);
    if (wants_noise) observer.on_noise(j, xi);
    stepper.step(x, xi, next);
    x.swap(next);
    observer.on_state(j + 1, x);
  }
  if (!x.allFinite()) throw SimulationError("simulation produced non-finite values (unstable scheme?)");
}

Vector SolutionPath::with_boundary(int row) const {
  const int M = grid.M;
  const int W = M + 2;
  if (grid.dimension == 1) {
    Vector f = Vector::Zero(W);
    for (int i = 0; i < M; ++i) f[i + 1] = values(row, i);
    return f;
  }
  Vector f = Vector::Zero(W * W);
  for (int i1 = 0; i1 < M; ++i1)
    for (int i0 = 0; i0 < M; ++i0) f[(i0 + 1) + W * (i1 + 1)] = values(row, i0 + M * i1);
  return f;
}

PathRecorder::PathRecorder(const Grid& grid, int stride) : stride_(stride), n_t_(grid.n_t) {
  if (stride < 1) throw ConfigError("record stride must be >= 1");
  const int rows = grid.n_t / stride + 1 + (grid.n_t % stride != 0 ? 1 : 0);
  values_.resize(rows, grid.nodes());
}

void PathRecorder::on_state(int j, const Vector& x) {
  if (j % stride_ == 0 || j == n_t_) values_.row(row_++) = x.transpose();
}

SolutionPath simulate_path(const ModelSpec& model, const Grid& grid, std::uint64_t seed,
                           const SimulationOptions& options, int stride) {
  PathRecorder rec(grid, stride);
  simulate(model, grid, seed, rec, options);
  SolutionPath p;
  p.grid = grid;
  p.model = model;
  p.seed = seed;
  p.stride = stride;
  p.values = rec.take();
  return p;
}

void write_path_binary(const SolutionPath& path, std::ostream& out) {
  static_assert(std::endian::native == std::endian::little, "binary dump assumes a little-endian host");
  auto put_u64 = [&](std::uint64_t v) { out.write(reinterpret_cast<const char*>(&v), sizeof v); };
  auto put_f64 = [&](double v) { out.write(reinterpret_cast<const char*>(&v), sizeof v); };
  put_u64(static_cast<std::uint64_t>(path.grid.dimension));
  put_u64(static_cast<std::uint64_t>(path.grid.M));
  put_u64(static_cast<std::uint64_t>(path.rows() - 1));
  put_f64(path.grid.T);
  put_u64(path.seed);
  out.write(reinterpret_cast<const char*>(path.values.data()),
            static_cast<std::streamsize>(path.values.size() * sizeof(double)));
  if (!out) throw SimulationError("failed to write path dump");
}

void write_path_binary(const SolutionPath& path, const std::string& file) {
  std::ofstream out(file, std::ios::binary);
  if (!out) throw SimulationError("cannot open " + file);
  write_path_binary(path, out);
}

}  // namespace lmspde
