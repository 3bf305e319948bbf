#include "lmspde/estimator.hpp"

#include <cmath>
#include <limits>
#include <sstream>

#include <Eigen/Eigenvalues>

#include "lmspde/errors.hpp"

namespace lmspde {
namespace {

void check_shapes(const StatisticsSet& stats, const WeightSet& ws) {
  if (static_cast<std::size_t>(ws.w.size()) != stats.stats.size())
    throw ContractError("weights and measurements refer to different location sets");
}

int dim_of(const StatisticsSet& stats) {
  if (stats.stats.empty()) throw ContractError("empty measurement statistics");
  return static_cast<int>(stats.stats.front().grad_dX.size());
}

double condition_number(const Matrix& F) {
  Eigen::SelfAdjointEigenSolver<Matrix> eig(F, Eigen::EigenvaluesOnly);
  const double lo = eig.eigenvalues()[0];
  const double hi = eig.eigenvalues()[eig.eigenvalues().size() - 1];
  if (!(lo > 0.0) || !std::isfinite(hi)) return std::numeric_limits<double>::infinity();
  return hi / lo;
}

}  // namespace

Matrix observed_fisher(const StatisticsSet& stats, const WeightSet& ws) {
  check_shapes(stats, ws);
  const int d = dim_of(stats);
  Matrix F = Matrix::Zero(d, d);
  for (std::size_t k = 0; k < stats.stats.size(); ++k)
    if (ws.w[static_cast<Eigen::Index>(k)] != 0.0) F += ws.w[static_cast<Eigen::Index>(k)] * stats.stats[k].grad_grad;
  return F;
}

Matrix observed_fisher(const LocalMeasurementSet& meas, const WeightSet& ws) {
  return observed_fisher(statistics(meas), ws);
}

Matrix martingale_qv(const StatisticsSet& stats, const WeightSet& ws) {
  check_shapes(stats, ws);
  const int d = dim_of(stats);
  Matrix Q = Matrix::Zero(d, d);
  for (std::size_t k = 0; k < stats.stats.size(); ++k) {
    const double w = ws.w[static_cast<Eigen::Index>(k)];
    if (w != 0.0) Q += w * w * stats.stats[k].grad_grad;
  }
  return Q;
}

Vector diffusivity_sensitivity(const StatisticsSet& stats, const WeightSet& ws) {
  check_shapes(stats, ws);
  Vector u = Vector::Zero(dim_of(stats));
  for (std::size_t k = 0; k < stats.stats.size(); ++k) {
    const double w = ws.w[static_cast<Eigen::Index>(k)];
    if (w != 0.0) u += w * stats.stats[k].lap_grad;
  }
  return u;
}

VelocityEstimate weighted_augmented_mle(const StatisticsSet& stats, const WeightSet& ws, double a) {
  check_shapes(stats, ws);
  const int d = dim_of(stats);
  VelocityEstimate est;
  est.x = ws.x;
  est.a_used = a;
  est.fisher = observed_fisher(stats, ws);
  est.fisher_condition = condition_number(est.fisher);
  est.active = ws.active;
  if (!(est.fisher_condition < 1e12)) {
    std::ostringstream msg;
    msg << "observed Fisher information is singular at x = (" << ws.x.transpose()
        << "): condition number " << est.fisher_condition << ", " << ws.active << " active location(s)";
    throw EstimationError(msg.str());
  }
  Vector score = Vector::Zero(d);
  for (std::size_t k = 0; k < stats.stats.size(); ++k) {
    const double w = ws.w[static_cast<Eigen::Index>(k)];
    if (w == 0.0) continue;
    score += w * (stats.stats[k].grad_dX - a * stats.stats[k].lap_grad);
  }
  est.theta_hat = -est.fisher.ldlt().solve(score);
  return est;
}

VelocityEstimate weighted_augmented_mle(const LocalMeasurementSet& meas, const WeightSet& ws, double a) {
  return weighted_augmented_mle(statistics(meas), ws, a);
}

double estimate_a(const StatisticsSet& stats, const WeightSet* ws) {
  if (ws) check_shapes(stats, *ws);
  double num = 0.0, den = 0.0;
  for (std::size_t k = 0; k < stats.stats.size(); ++k) {
    const double w = ws ? ws->w[static_cast<Eigen::Index>(k)] : 1.0;
    if (w == 0.0) continue;
    num += w * stats.stats[k].lap_dX;
    den += w * stats.stats[k].lap_lap;
  }
  if (!(den > 0.0)) throw EstimationError("estimate_a: nonpositive denominator " + std::to_string(den));
  return num / den;
}

double estimate_a(const LocalMeasurementSet& meas, const WeightSet* ws) { return estimate_a(statistics(meas), ws); }

VelocityEstimate mle_unknown_a(const StatisticsSet& stats, const WeightSet& ws, std::optional<double> a_override) {
  const double a = a_override ? *a_override : estimate_a(stats, &ws);
  VelocityEstimate est = weighted_augmented_mle(stats, ws, a);
  est.a_source = "estimated";
  return est;
}

ErrorDecomposition decompose_error(const StatisticsSet& stats, const WeightSet& ws, const VectorField& theta) {
  check_shapes(stats, ws);
  if (stats.decomposition.size() != stats.stats.size())
    throw ContractError("decompose_error needs statistics accumulated with the model");
  const int d = dim_of(stats);
  const Matrix F = observed_fisher(stats, ws);
  ErrorDecomposition out;
  out.theta_x = theta.value(ws.x);
  Vector R = Vector::Zero(d), Rd = Vector::Zero(d), Mk = Vector::Zero(d);
  for (std::size_t k = 0; k < stats.stats.size(); ++k) {
    const double w = ws.w[static_cast<Eigen::Index>(k)];
    if (w == 0.0) continue;
    const Vector centred = stats.stats[k].grad_grad * out.theta_x;
    R += w * (stats.decomposition[k].drift_quadrature - centred);
    Rd += w * (stats.decomposition[k].drift_discrete - centred);
    Mk += w * stats.decomposition[k].martingale;
  }
  const auto ldlt = F.ldlt();
  out.remainder = ldlt.solve(R);
  out.remainder_discrete = ldlt.solve(Rd);
  out.martingale = ldlt.solve(Mk);
  return out;
}

bool Box::contains(const Point& x) const {
  return (x.array() >= lower.array()).all() && (x.array() <= upper.array()).all();
}

Point Box::project(const Point& x) const { return x.cwiseMax(lower).cwiseMin(upper); }

double Box::volume() const { return (upper - lower).prod(); }

Vector extend_estimate(const std::function<Vector(const Point&)>& estimate_on_J, const Box& J, const Point& x) {
  return estimate_on_J(J.project(x));
}

IntegratedRiskResult integrated_risk(const std::function<Vector(const Point&)>& estimate_on_J,
                                     const VectorField& theta, const Box& J, int cells) {
  if (cells < 1) throw ContractError("integrated_risk needs at least one cell per axis");
  const int d = theta.dimension();
  IntegratedRiskResult r;
  r.total = Vector::Zero(d);
  r.interior = Vector::Zero(d);
  r.boundary = Vector::Zero(d);
  const double h = 1.0 / cells;
  const double vol = std::pow(h, d);
  const int outer = d == 2 ? cells : 1;
  Point x(d);
  for (int i1 = 0; i1 < outer; ++i1) {
    for (int i0 = 0; i0 < cells; ++i0) {
      x[0] = (i0 + 0.5) * h;
      if (d == 2) x[1] = (i1 + 0.5) * h;
      const Vector e = extend_estimate(estimate_on_J, J, x) - theta.value(x);
      const Vector sq = vol * e.cwiseAbs2();
      if (J.contains(x)) r.interior += sq;
      else r.boundary += sq;
    }
  }
  r.total = r.interior + r.boundary;
  // farthest points of Λ from the box are its corners
  double dist2 = 0.0;
  for (int c = 0; c < d; ++c) {
    const double gap = std::max(J.lower[c], 1.0 - J.upper[c]);
    dist2 += gap * gap;
  }
  r.d_max2 = dist2;
  r.strip_measure = 1.0 - J.volume();
  return r;
}

}  // namespace lmspde
