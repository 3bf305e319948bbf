#include <cmath>
#include <memory>
#include <sstream>
#include <vector>

#include <gtest/gtest.h>

#include "lmspde/errors.hpp"
#include "lmspde/measurements.hpp"
#include "lmspde/simulator.hpp"

using namespace lmspde;

namespace {

Point pt(double a) { return Point::Constant(1, a); }

MeasurementConfig config1(double delta, std::vector<double> xs, StencilKind s = StencilKind::analytic) {
  MeasurementConfig c;
  c.delta = delta;
  c.kernel = std::make_shared<BaseKernel>(BaseKernel::polynomial_bump(1));
  for (double x : xs) c.locations.push_back(pt(x));
  c.stencil = s;
  return c;
}

Grid grid1(int M, int n_t = 1) {
  Grid g;
  g.M = M;
  g.n_t = n_t;
  return g;
}

Vector sample(const Grid& g, double (*f)(double)) {
  Vector v(g.nodes());
  for (int i = 0; i < g.nodes(); ++i) v[i] = f(g.position(i)[0]);
  return v;
}

}  // namespace

TEST(Measure, ConstantFieldIntegratesToZero) {
  // node sums of K_δ tend to ∫K = 0 as the grid is refined
  const MeasurementConfig c = config1(0.1, {0.3, 0.5137});
  const Matrix coarse = measure_field(Vector::Constant(199, 2.5), build_stencils(c, grid1(199)), 1);
  const Matrix fine = measure_field(Vector::Constant(1599, 2.5), build_stencils(c, grid1(1599)), 1);
  for (int k = 0; k < 2; ++k) {
    EXPECT_LT(std::abs(fine(k, 0)), 1e-7);
    EXPECT_LT(std::abs(fine(k, 0)), std::abs(coarse(k, 0)) / 100);
  }
}

TEST(Measure, LinearFieldHasZeroGradientMeasurement) {
  // ⟨u, ∂K_δ⟩ = -⟨1, K_δ⟩ = 0: brute-force quadrature, then the grid stencils converge to it
  const BaseKernel K = BaseKernel::polynomial_bump(1);
  for (double x : {0.3, 0.5137}) {
    const LocalizedKernel L{&K, 0.1, pt(x)};
    const int n = 1000000;
    const double w = 0.2 / n;
    double sum = 0.0;
    for (int i = 0; i < n; ++i) {
      const double u = x - 0.1 + (i + 0.5) * w;
      sum += u * L.gradient(pt(u))[0] * w;
    }
    EXPECT_LT(std::abs(sum), 1e-8) << x;
  }
  const MeasurementConfig c = config1(0.1, {0.3, 0.5137});
  auto grad_of_u = [&](int M) {
    const Grid g = grid1(M);
    return measure_field(sample(g, [](double u) { return u; }), build_stencils(c, g), 1).col(1).eval();
  };
  const Vector coarse = grad_of_u(199), fine = grad_of_u(1599);
  for (int k = 0; k < 2; ++k) EXPECT_LT(std::abs(fine[k]), std::abs(coarse[k]) / 100);
}

TEST(Measure, QuadratureConvergesAtSecondOrder) {
  // errors against a brute-force reference on a smooth field. With the support edges on grid
  // nodes the node sums are of high order and the discrete X^Δ shows the O(Δx²) of the
  // three-point Laplacian; the direct node sums are at least second order.
  const BaseKernel K = BaseKernel::polynomial_bump(1);
  const double x = 0.5, delta = 0.25;
  auto f = [](double u) { return std::sin(8 * u + 0.3); };
  const LocalizedKernel L{&K, delta, pt(x)};
  double ref_X = 0.0, ref_lap = 0.0;
  const int n = 2000000;
  const double w = 2 * delta / n;
  for (int i = 0; i < n; ++i) {
    const double u = x - delta + (i + 0.5) * w;
    ref_X += f(u) * L.value(pt(u)) * w;
    ref_lap += f(u) * L.laplacian(pt(u)) * w;
  }
  std::vector<double> err_lap, err_X;
  for (int M : {63, 127, 255, 511}) {
    const Grid g = grid1(M);
    Vector v(M);
    for (int i = 0; i < M; ++i) v[i] = f(g.position(i)[0]);
    const MeasurementConfig ca = config1(delta, {x});
    const MeasurementConfig cd = config1(delta, {x}, StencilKind::discrete);
    err_lap.push_back(std::abs(measure_field(v, build_stencils(cd, g), 1)(0, 2) - ref_lap));
    err_X.push_back(std::abs(measure_field(v, build_stencils(ca, g), 1)(0, 0) - ref_X));
  }
  for (std::size_t i = 0; i + 1 < err_lap.size(); ++i) {
    const double slope = std::log2(err_lap[i] / err_lap[i + 1]);
    EXPECT_GE(slope, 1.8);
    EXPECT_LE(slope, 2.2);
  }
  const double slope_X = std::log2(err_X.front() / err_X.back()) / 3.0;
  EXPECT_GE(slope_X, 1.8);
}

TEST(Measure, LinearityScalingAndLocality) {
  const MeasurementConfig c = config1(0.05, {0.2, 0.5, 0.8});
  const Grid g = grid1(255);
  const auto st = build_stencils(c, g);
  const Vector a = sample(g, [](double u) { return std::sin(7 * u); });
  const Vector b = sample(g, [](double u) { return u * u - 0.3; });
  const Matrix ma = measure_field(a, st, 1), mb = measure_field(b, st, 1);
  EXPECT_LT((measure_field(a + b, st, 1) - ma - mb).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_TRUE(measure_field(2.0 * a, st, 1) == 2.0 * ma);
  // perturb outside the support of the middle location
  Vector p = a;
  for (int i = 0; i < g.M; ++i)
    if (std::abs(g.position(i)[0] - 0.5) > 0.05) p[i] += 10.0;
  const Matrix mp = measure_field(p, st, 1);
  EXPECT_TRUE(mp.row(1) == ma.row(1));
}

TEST(Measure, EvenFieldHasZeroGradientMeasurement) {
  const MeasurementConfig c = config1(0.1, {0.5});
  const Grid g = grid1(255);
  const Vector v = sample(g, [](double u) { return std::cos(9 * (u - 0.5)); });
  EXPECT_NEAR(measure_field(v, build_stencils(c, g), 1)(0, 1), 0.0, 1e-10);
}

TEST(Measure, DiscreteLaplacianIsAdjoint) {
  // ⟨X, L_h K⟩ = ⟨L_h X, K⟩ for a field with zero boundary values
  const MeasurementConfig c = config1(0.08, {0.3, 0.7}, StencilKind::discrete);
  const Grid g = grid1(127);
  ModelSpec m;
  const SparseMatrix L = build_operator(m, g);
  const Vector v = sample(g, [](double u) { return std::sin(3 * u) * u * (1 - u); });
  const auto st = build_stencils(c, g);
  const Matrix direct = measure_field(v, st, 1);
  const Matrix via = measure_field(Vector(L * v), st, 1);
  EXPECT_NEAR(direct(0, 2), via(0, 0), 1e-10 * std::abs(direct(0, 2)));
  EXPECT_NEAR(direct(1, 2), via(1, 0), 1e-10 * std::abs(direct(1, 2)));
}

TEST(Measure, ResolutionGuardNamesDelta) {
  const MeasurementConfig c = config1(0.05, {0.5});
  try {
    build_stencils(c, grid1(63));
    FAIL() << "expected a MeasurementError";
  } catch (const MeasurementError& e) {
    EXPECT_NE(std::string(e.what()).find("delta = 0.05"), std::string::npos) << e.what();
  }
  EXPECT_NO_THROW(build_stencils(c, grid1(159)));
}

TEST(MeasurementConfig, RejectsOverlapAndBoundary) {
  EXPECT_THROW(config1(0.1, {0.3, 0.45}).validate(), ConfigError);
  EXPECT_THROW(config1(0.1, {0.05}).validate(), ConfigError);
  EXPECT_NO_THROW(config1(0.1, {0.3, 0.51}).validate());
  EXPECT_THROW(stencil_kind_from_string("spectral"), ConfigError);
}

TEST(Measure, RecorderMatchesStreamingStatistics) {
  ModelSpec m;
  m.theta = VectorField({ScalarField::polynomial({-0.3, 0.0, 1.5})});
  Grid g = grid1(127, 3000);
  const MeasurementConfig c = config1(1.0 / 16, {0.3, 0.5, 0.7});
  const SolutionPath p = simulate_path(m, g, 12);
  const StatisticsSet a = statistics(measure(p, c));
  StatisticsAccumulator acc(c, g);
  simulate(m, g, 12, acc);
  const StatisticsSet b = acc.result();
  ASSERT_EQ(a.stats.size(), 3u);
  for (std::size_t k = 0; k < 3; ++k) {
    EXPECT_NEAR(a.stats[k].grad_dX[0], b.stats[k].grad_dX[0], 1e-12 * std::abs(a.stats[k].grad_dX[0]) + 1e-14);
    EXPECT_NEAR(a.stats[k].grad_grad(0, 0), b.stats[k].grad_grad(0, 0), 1e-12 * a.stats[k].grad_grad(0, 0));
    EXPECT_NEAR(a.stats[k].lap_lap, b.stats[k].lap_lap, 1e-12 * a.stats[k].lap_lap);
    EXPECT_NEAR(a.stats[k].lap_dX, b.stats[k].lap_dX, 1e-12 * std::abs(a.stats[k].lap_dX) + 1e-14);
  }
  EXPECT_DOUBLE_EQ(a.T, 1.0);
  std::ostringstream csv;
  write_measurements_csv(measure(p, c), csv);
  EXPECT_EQ(csv.str().substr(0, 20), "t,k,X,X_grad_1,X_lap");
}

TEST(Measure, StridedPathIsRejected) {
  ModelSpec m;
  const SolutionPath p = simulate_path(m, grid1(127, 20), 1, {}, 2);
  EXPECT_THROW(measure(p, config1(0.1, {0.5})), MeasurementError);
}

TEST(ItoSum, TelescopesAndChecksLengths) {
  const std::vector<double> X = {0.3, 1.0, -0.5, 2.0}, one(4, 1.0);
  EXPECT_DOUBLE_EQ(ito_sum(one, X), 1.7);
  EXPECT_THROW(ito_sum(std::vector<double>{1.0, 2.0}, X), ContractError);
  EXPECT_THROW(ito_sum(std::vector<double>{1.0}, std::vector<double>{1.0}), ContractError);
}

TEST(ItoSum, SmoothPathHasNoCorrection) {
  // X(t) = t²: Σ X dX → (X_T² - X_0²)/2 at order Δt
  for (int n : {100, 1000}) {
    std::vector<double> X(static_cast<std::size_t>(n) + 1);
    for (int j = 0; j <= n; ++j) X[static_cast<std::size_t>(j)] = std::pow(static_cast<double>(j) / n, 2);
    EXPECT_NEAR(ito_sum(X, X), 0.5, 2.0 / n);
  }
}

TEST(ItoSum, ProductRule) {
  std::vector<double> f = {0.1, 0.4, -0.2, 0.9, 0.3}, X = {1.0, 0.5, 0.7, -0.1, 0.2};
  double cross = 0.0;
  for (std::size_t j = 0; j + 1 < f.size(); ++j) cross += (f[j + 1] - f[j]) * (X[j + 1] - X[j]);
  EXPECT_NEAR(ito_sum(f, X) + ito_sum(X, f) + cross, f.back() * X.back() - f.front() * X.front(), 1e-15);
}

TEST(TimeIntegral, ExactCases) {
  const int n = 50;
  const double T = 2.0, dt = T / n;
  std::vector<double> c(n + 1, 3.0), t(n + 1);
  for (int j = 0; j <= n; ++j) t[static_cast<std::size_t>(j)] = j * dt;
  EXPECT_NEAR(time_integral(c, dt), 3.0 * T, 1e-13);
  EXPECT_NEAR(time_integral(t, dt), T * T / 2 - T * dt / 2, 1e-13);
  EXPECT_THROW(time_integral(std::vector<double>{1.0}, dt), ContractError);
}

TEST(TimeIntegral, FirstOrderConvergence) {
  const double T = 1.0;
  auto err = [&](int n) {
    std::vector<double> f(static_cast<std::size_t>(n) + 1);
    for (int j = 0; j <= n; ++j) f[static_cast<std::size_t>(j)] = std::sin(T * j / n);
    return std::abs(time_integral(f, T / n) - (1 - std::cos(T)));
  };
  const double slope = std::log2(err(200) / err(400));
  EXPECT_GE(slope, 0.9);
  EXPECT_LE(slope, 1.1);
}
