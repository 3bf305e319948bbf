#include <cmath>

#include <gtest/gtest.h>

#include "lmspde/polynomial.hpp"

using lmspde::Polynomial;

TEST(Polynomial, EvaluatesAscendingCoefficients) {
  const Polynomial p({1.0, -2.0, 3.0});
  EXPECT_DOUBLE_EQ(p(0.0), 1.0);
  EXPECT_DOUBLE_EQ(p(2.0), 1.0 - 4.0 + 12.0);
  EXPECT_EQ(p.degree(), 2);
}

TEST(Polynomial, BinomialPowerMatchesExpansion) {
  const Polynomial p = Polynomial::binomial_power(-1.0, 5);
  for (double t : {-0.7, 0.0, 0.3, 1.0, 1.4}) EXPECT_NEAR(p(t), std::pow(1.0 - t, 5), 1e-13);
  EXPECT_EQ(p.degree(), 5);
}

TEST(Polynomial, DerivativeAndIntegral) {
  const Polynomial p({0.5, 1.0, -3.0, 2.0});
  const Polynomial dp = p.derivative();
  EXPECT_DOUBLE_EQ(dp(1.5), 1.0 - 6.0 * 1.5 + 6.0 * 1.5 * 1.5);
  EXPECT_NEAR(p.integrate(-1.0, 2.0), p.antiderivative()(2.0) - p.antiderivative()(-1.0), 1e-14);
  EXPECT_NEAR(Polynomial({0.0, 0.0, 3.0}).integrate(0.0, 1.0), 1.0, 1e-15);
  EXPECT_EQ(Polynomial({4.0}).derivative().degree(), 0);
  EXPECT_DOUBLE_EQ(Polynomial({4.0}).derivative()(3.0), 0.0);
}

TEST(Polynomial, Arithmetic) {
  const Polynomial a({1.0, 1.0}), b({-1.0, 1.0});
  const Polynomial prod = a * b;  // t² - 1
  EXPECT_DOUBLE_EQ(prod(3.0), 8.0);
  EXPECT_DOUBLE_EQ((a + b)(2.0), 4.0);
  EXPECT_DOUBLE_EQ((a * 2.5)(1.0), 5.0);
  // cancellation trims the leading term
  EXPECT_EQ((a + Polynomial({0.0, -1.0})).degree(), 0);
}
