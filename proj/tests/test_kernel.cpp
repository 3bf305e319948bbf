#include <cmath>
#include <numbers>
#include <random>

#include <gtest/gtest.h>

#include "lmspde/errors.hpp"
#include "lmspde/kernel.hpp"

using namespace lmspde;

namespace {
Point pt(double a) { return Point::Constant(1, a); }
Point pt(double a, double b) {
  Point p(2);
  p << a, b;
  return p;
}
}  // namespace

TEST(Kernel, DefaultValueAtOriginIsMinusSecondDerivative) {
  // K̄ = (1 - y²)^5: K̄''(0) = -10
  const BaseKernel K = BaseKernel::polynomial_bump(1);
  EXPECT_NEAR(eval_K(K, pt(0.0)), 10.0, 1e-12);
  EXPECT_EQ(eval_K(K, pt(1.0)), 0.0);
  EXPECT_EQ(eval_K(K, pt(-1.0)), 0.0);
  // closed form -K̄'' = 10(1-y²)^4 - 80y²(1-y²)^3
  for (double y : {-0.8, -0.3, 0.1, 0.55}) {
    const double s = 1 - y * y;
    EXPECT_NEAR(eval_K(K, pt(y)), 10 * std::pow(s, 4) - 80 * y * y * std::pow(s, 3), 1e-12);
  }
}

TEST(Kernel, GradientParity) {
  const BaseKernel K = BaseKernel::polynomial_bump(1);
  EXPECT_EQ(eval_gradK(K, pt(0.0))[0], 0.0);
  EXPECT_NEAR(eval_gradK(K, pt(0.37))[0] + eval_gradK(K, pt(-0.37))[0], 0.0, 1e-12);
  EXPECT_NEAR(eval_gradK(K, pt(0.0, 0.0)).norm() + 0.0, 0.0, 1e-12);
}

TEST(Kernel, LaplacianMatchesFiniteDifferences) {
  const BaseKernel K = BaseKernel::polynomial_bump(1);
  const double h = 1e-5;
  const double fd = (eval_K(K, pt(0.5 + h)) - 2 * eval_K(K, pt(0.5)) + eval_K(K, pt(0.5 - h))) / (h * h);
  EXPECT_NEAR(fd, eval_lapK(K, pt(0.5)), 1e-6 * std::abs(eval_lapK(K, pt(0.5))) + 1e-3);
  // a tighter oracle with a wider step and Richardson extrapolation
  auto second = [&](double s) { return (eval_K(K, pt(0.5 + s)) - 2 * eval_K(K, pt(0.5)) + eval_K(K, pt(0.5 - s))) / (s * s); };
  const double rich = (4 * second(1e-3) - second(2e-3)) / 3;
  EXPECT_NEAR(rich, eval_lapK(K, pt(0.5)), 1e-6 * std::abs(eval_lapK(K, pt(0.5))));
}

TEST(Kernel, MassIsZero) {
  const BaseKernel K = BaseKernel::polynomial_bump(1);
  const int n = 100000;
  double mass = 0.0;
  for (int i = 0; i < n; ++i) mass += eval_K(K, pt(-1.0 + 2.0 * (i + 0.5) / n)) * 2.0 / n;
  EXPECT_NEAR(mass, 0.0, 1e-9);
}

TEST(Kernel, RadialTwoDimensional) {
  const BaseKernel K = BaseKernel::polynomial_bump(2);
  // K = -(4 s p'' + 4 p') with p(s) = (1 - s)^5, at s = 0: -4 p'(0) = 20
  EXPECT_NEAR(K.value(pt(0.0, 0.0)), 20.0, 1e-12);
  EXPECT_NEAR(K.value(pt(0.3, 0.4)), K.value(pt(0.5, 0.0)), 1e-12);
  EXPECT_EQ(K.value(pt(0.8, 0.8)), 0.0);
  const Matrix H = K.hessian(pt(0.2, -0.1));
  EXPECT_NEAR(H(0, 1), H(1, 0), 1e-12);
  EXPECT_NEAR(H.trace(), K.laplacian(pt(0.2, -0.1)), 1e-10);
}

TEST(Kernel, RejectsBadParameters) {
  EXPECT_THROW(BaseKernel::polynomial_bump(3), ConfigError);
  EXPECT_THROW(BaseKernel::polynomial_bump(1, 2), ConfigError);
  EXPECT_THROW(BaseKernel::polynomial_bump(1, 5, -1.0), ConfigError);
}

TEST(Kernel, JsonRoundTrip) {
  for (const auto& K : {BaseKernel::polynomial_bump(1, 6, 0.8), BaseKernel::odd_polynomial_bump(), BaseKernel::polynomial_bump(2)}) {
    const BaseKernel back = BaseKernel::from_json(K.to_json());
    EXPECT_EQ(back.dimension(), K.dimension());
    EXPECT_EQ(back.parity(), K.parity());
    EXPECT_DOUBLE_EQ(back.support_radius(), K.support_radius());
    Point y = Point::Constant(K.dimension(), 0.21);
    EXPECT_NEAR(back.value(y), K.value(y), 1e-12);
    EXPECT_NEAR(back.laplacian(y), K.laplacian(y), 1e-10);
  }
  const BaseKernel named = BaseKernel::from_json({{"name", "poly_bump"}, {"dimension", 1}, {"power", 5}, {"radius", 1.0}});
  EXPECT_NEAR(named.value(pt(0.0)), 10.0, 1e-12);
}

TEST(KernelNorm, MatchesRiemannSum) {
  const BaseKernel K = BaseKernel::polynomial_bump(1);
  const int n = 1000000;
  double sum = 0.0;
  for (int i = 0; i < n; ++i) {
    const double v = eval_K(K, pt(-1.0 + 2.0 * (i + 0.5) / n));
    sum += v * v * 2.0 / n;
  }
  EXPECT_NEAR(l2_norm(K), std::sqrt(sum), 1e-6 * std::sqrt(sum));
}

TEST(KernelNorm, DerivativeOrders) {
  const BaseKernel K = BaseKernel::polynomial_bump(1);
  const int n = 200000;
  double g = 0.0, l = 0.0;
  for (int i = 0; i < n; ++i) {
    const Point y = pt(-1.0 + 2.0 * (i + 0.5) / n);
    g += std::pow(K.gradient(y)[0], 2) * 2.0 / n;
    l += std::pow(K.laplacian(y), 2) * 2.0 / n;
  }
  const int a1[] = {1}, a2[] = {2}, a0[] = {0};
  EXPECT_NEAR(l2_norm(K, a1), std::sqrt(g), 1e-6 * std::sqrt(g));
  EXPECT_NEAR(l2_norm(K, a2), std::sqrt(l), 1e-6 * std::sqrt(l));
  EXPECT_NEAR(l2_norm(K, a0), l2_norm(K), 1e-12);
}

TEST(KernelNorm, Homogeneity) {
  const BaseKernel K = BaseKernel::polynomial_bump(1);
  EXPECT_NEAR(l2_norm(K.scaled(-3.0)), 3.0 * l2_norm(K), 1e-10);
}

TEST(KernelNorm, LocalizationPreservesNorm) {
  const BaseKernel K = BaseKernel::polynomial_bump(1);
  for (double delta : {0.3, 0.05}) {
    const LocalizedKernel L{&K, delta, pt(0.4)};
    const int n = 200000;
    double sum = 0.0;
    const double lo = 0.4 - delta, w = 2 * delta / n;
    for (int i = 0; i < n; ++i) sum += std::pow(L.value(pt(lo + (i + 0.5) * w)), 2) * w;
    EXPECT_NEAR(std::sqrt(sum), l2_norm(K), 1e-6 * l2_norm(K));
    EXPECT_DOUBLE_EQ(L.support_radius(), delta);
  }
}

TEST(LocalizedKernel, DerivativeScaling) {
  const BaseKernel K = BaseKernel::polynomial_bump(1);
  const double delta = 0.1;
  const LocalizedKernel L{&K, delta, pt(0.5)};
  const Point u = pt(0.53);
  const Point y = pt(0.3);
  EXPECT_NEAR(L.value(u), std::pow(delta, -0.5) * K.value(y), 1e-10);
  EXPECT_NEAR(L.gradient(u)[0], std::pow(delta, -1.5) * K.gradient(y)[0], 1e-8);
  EXPECT_NEAR(L.laplacian(u), std::pow(delta, -2.5) * K.laplacian(y), 1e-6);
  EXPECT_EQ(L.value(pt(0.61)), 0.0);
}

TEST(Fisher, ParsevalInOneDimension) {
  const BaseKernel K = BaseKernel::polynomial_bump(1);
  const Matrix S = fisher_sigma(K, 1.0, 1.0);
  const double norm = l2_norm(K);
  EXPECT_NEAR(S(0, 0), 0.5 * norm * norm, 1e-6 * norm * norm);
}

TEST(Fisher, ScalesWithTimeAndDiffusivity) {
  const BaseKernel K = BaseKernel::polynomial_bump(1);
  const Matrix S = fisher_sigma(K, 1.0, 1.0);
  EXPECT_NEAR(fisher_sigma(K, 1.0, 2.0)(0, 0), S(0, 0) / 2, 1e-12 * S(0, 0));
  EXPECT_NEAR(fisher_sigma(K, 2.0, 1.0)(0, 0), S(0, 0) * 2, 1e-12 * S(0, 0));
}

TEST(Fisher, TwoDimensionalIsSymmetricPositive) {
  const BaseKernel K = BaseKernel::polynomial_bump(2);
  const Matrix S = fisher_sigma(K, 1.0, 1.0);
  ASSERT_EQ(S.rows(), 2);
  EXPECT_NEAR(S(0, 1), S(1, 0), 1e-12);
  Eigen::SelfAdjointEigenSolver<Matrix> es(S);
  EXPECT_GT(es.eigenvalues().minCoeff(), 0.0);
  // radial kernel: Σ = T/(2a) ‖K‖²/2 · I, since ξ_iξ_j/|ξ|² averages to δ_ij/2
  const double norm = l2_norm(K);
  EXPECT_NEAR(S(0, 0), 0.25 * norm * norm, 1e-6 * norm * norm);
  EXPECT_NEAR(S(0, 1), 0.0, 1e-10);
}

TEST(Fisher, FourierClosedFormMatchesQuadrature) {
  for (const auto& K : {BaseKernel::polynomial_bump(1), BaseKernel::polynomial_bump(2)})
    for (double xi : {0.0, 0.7, 3.0, 11.0}) {
      const double a = K.fourier_abs2(xi), b = K.fourier_abs2_quadrature(xi);
      EXPECT_NEAR(a, b, 1e-8 * std::max(1.0, std::abs(b))) << "xi = " << xi;
    }
}
