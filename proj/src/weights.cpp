#include "lmspde/weights.hpp"

#include <cmath>
#include <ostream>
#include <sstream>

#include <Eigen/Eigenvalues>

#include "lmspde/errors.hpp"

namespace lmspde {

SmoothingKernel smoothing_kernel_from_string(const std::string& name) {
  if (name == "epanechnikov") return SmoothingKernel::epanechnikov;
  if (name == "rectangular") return SmoothingKernel::rectangular;
  throw ConfigError("unknown smoothing kernel '" + name + "' (expected epanechnikov or rectangular)");
}

std::string to_string(SmoothingKernel v) {
  return v == SmoothingKernel::epanechnikov ? "epanechnikov" : "rectangular";
}

double eval_V(SmoothingKernel v, const Point& u) {
  double r = 1.0;
  for (Eigen::Index i = 0; i < u.size(); ++i) {
    const double y = u[i];
    if (v == SmoothingKernel::epanechnikov) {
      if (std::abs(y) > 1.0) return 0.0;
      r *= 0.75 * (1.0 - y * y);
    } else {
      if (y < -0.5 || y > 0.5) return 0.0;
    }
  }
  return r;
}

double eval_V(const std::string& name, const Point& u) { return eval_V(smoothing_kernel_from_string(name), u); }

WeightSet compute_weights(const Point& x, const std::vector<Point>& locations, const WeightConfig& config) {
  if (!(config.h > 0.0)) throw ConfigError("bandwidth h must be positive");
  if (config.ridge < 0.0) throw ConfigError("ridge must be nonnegative");
  const int d = static_cast<int>(x.size());
  const int N = static_cast<int>(locations.size());
  const double scale = 1.0 / (N * std::pow(config.h, d));

  WeightSet ws;
  ws.x = x;
  ws.h = config.h;
  ws.w = Vector::Zero(N);
  std::vector<Vector> U(static_cast<std::size_t>(N));
  std::vector<double> V(static_cast<std::size_t>(N), 0.0);
  Matrix B = Matrix::Zero(d + 1, d + 1);
  for (int k = 0; k < N; ++k) {
    const Point u = (locations[static_cast<std::size_t>(k)] - x) / config.h;
    const double v = eval_V(config.V, u);
    if (v == 0.0) continue;
    Vector Uk(d + 1);
    Uk[0] = 1.0;
    Uk.tail(d) = u;
    B.noalias() += (scale * v) * Uk * Uk.transpose();
    U[static_cast<std::size_t>(k)] = std::move(Uk);
    V[static_cast<std::size_t>(k)] = v;
    ++ws.active;
  }
  Eigen::SelfAdjointEigenSolver<Matrix> eig(B, Eigen::EigenvaluesOnly);
  ws.min_eigenvalue = eig.eigenvalues()[0];
  if (!(ws.min_eigenvalue >= 1e-12)) {
    if (config.ridge == 0.0) {
      std::ostringstream msg;
      msg << "degenerate design at x = (" << x.transpose() << "): B_Nx has min eigenvalue " << ws.min_eigenvalue
          << " with " << ws.active << " active location(s), h = " << config.h;
      throw DegenerateDesignError(msg.str());
    }
    B += config.ridge * Matrix::Identity(d + 1, d + 1);
    ws.reproducing = false;
  }
  Vector e1 = Vector::Zero(d + 1);
  e1[0] = 1.0;
  const Vector s = B.ldlt().solve(e1);
  for (int k = 0; k < N; ++k)
    if (V[static_cast<std::size_t>(k)] != 0.0) ws.w[k] = scale * s.dot(U[static_cast<std::size_t>(k)]) * V[static_cast<std::size_t>(k)];
  return ws;
}

WeightSet nadaraya_watson_weights(const Point& x, const std::vector<Point>& locations, const WeightConfig& config) {
  if (!(config.h > 0.0)) throw ConfigError("bandwidth h must be positive");
  const int N = static_cast<int>(locations.size());
  WeightSet ws;
  ws.x = x;
  ws.h = config.h;
  ws.w = Vector::Zero(N);
  double total = 0.0;
  for (int k = 0; k < N; ++k) {
    const double v = eval_V(config.V, (locations[static_cast<std::size_t>(k)] - x) / config.h);
    if (v == 0.0) continue;
    ws.w[k] = v;
    total += v;
    ++ws.active;
  }
  if (ws.active == 0) {
    std::ostringstream msg;
    msg << "no active location within h = " << config.h << " of x = (" << x.transpose() << ")";
    throw DegenerateDesignError(msg.str());
  }
  ws.w /= total;
  ws.min_eigenvalue = total / (N * std::pow(config.h, static_cast<double>(x.size())));
  ws.reproducing = false;
  return ws;
}

WeightReport validate_weights(const WeightSet& ws, const std::vector<Point>& locations, double c_star) {
  const int d = static_cast<int>(ws.x.size());
  const int N = static_cast<int>(locations.size());
  if (ws.w.size() != N) throw ContractError("weight vector and location list differ in length");
  WeightReport r;
  r.c_star = c_star;
  r.moment_residual = Vector::Zero(d);
  double sum = 0.0;
  for (int k = 0; k < N; ++k) {
    const double w = ws.w[k];
    const Vector diff = locations[static_cast<std::size_t>(k)] - ws.x;
    r.max_scaled = std::max(r.max_scaled, std::abs(w) * N * std::pow(ws.h, d));
    r.abs_sum += std::abs(w);
    sum += w;
    r.moment_residual += w * diff;
    if (w != 0.0 && diff.lpNorm<Eigen::Infinity>() > ws.h) ++r.support_violations;
  }
  r.sum_residual = std::abs(sum - 1.0);
  r.moment_residual = r.moment_residual.cwiseAbs();
  r.bounded = r.max_scaled <= c_star && r.abs_sum <= c_star;
  r.local = r.support_violations == 0;
  r.reproduces = r.sum_residual < 1e-10 && (r.moment_residual.array() < 1e-10 * ws.h).all();
  return r;
}

void write_weights_csv(const std::vector<WeightSet>& sets, std::ostream& out, bool header) {
  if (sets.empty()) return;
  const int d = static_cast<int>(sets.front().x.size());
  if (header) {
    for (int c = 0; c < d; ++c) out << "x_" << c + 1 << ',';
    out << "k,w_k,active\n";
  }
  out.precision(17);
  for (const auto& ws : sets)
    for (Eigen::Index k = 0; k < ws.w.size(); ++k) {
      for (int c = 0; c < d; ++c) out << ws.x[c] << ',';
      out << k << ',' << ws.w[k] << ',' << (ws.w[k] != 0.0 ? 1 : 0) << '\n';
    }
}

}  // namespace lmspde
