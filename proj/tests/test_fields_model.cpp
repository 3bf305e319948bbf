#include <cmath>

#include <gtest/gtest.h>

#include "lmspde/errors.hpp"
#include "lmspde/fields.hpp"
#include "lmspde/model.hpp"

using namespace lmspde;

namespace {
Point pt(double a) { return Point::Constant(1, a); }
Point pt(double a, double b) {
  Point p(2);
  p << a, b;
  return p;
}
}  // namespace

TEST(ScalarField, PolynomialAndGradient) {
  const ScalarField f = ScalarField::polynomial({-0.3, 0.0, 1.5});
  EXPECT_NEAR(f.value(pt(0.5)), 0.075, 1e-15);
  EXPECT_NEAR(f.gradient(pt(0.5))[0], 1.5, 1e-15);
  EXPECT_TRUE(ScalarField(1).is_zero());
  EXPECT_DOUBLE_EQ(ScalarField::constant(2, 3.0).value(pt(0.1, 0.9)), 3.0);
}

TEST(ScalarField, MonomialsAndSinesInTwoDimensions) {
  ScalarField f(2);
  f.add(Monomial{2.0, {1, 2}});
  f.add(SineMode{0.5, {1, 2}});
  const Point x = pt(0.3, 0.4);
  const double v = 2 * 0.3 * 0.16 + 0.5 * std::sin(M_PI * 0.3) * std::sin(2 * M_PI * 0.4);
  EXPECT_NEAR(f.value(x), v, 1e-14);
  const double h = 1e-6;
  for (int c = 0; c < 2; ++c) {
    Point xp = x, xm = x;
    xp[c] += h;
    xm[c] -= h;
    EXPECT_NEAR(f.gradient(x)[c], (f.value(xp) - f.value(xm)) / (2 * h), 1e-8);
  }
  const ScalarField back = ScalarField::from_json(f.to_json(), 2);
  EXPECT_NEAR(back.value(x), v, 1e-14);
}

TEST(VectorField, DivergenceOfPolynomial) {
  const VectorField th({ScalarField::polynomial({-0.3, 0.0, 1.5})});
  EXPECT_NEAR(th.divergence(pt(0.2)), 0.6, 1e-14);
  EXPECT_FALSE(th.is_zero());
  EXPECT_TRUE(VectorField::zero(2).is_zero());
}

TEST(VectorField, JsonForms) {
  const VectorField a = VectorField::from_json({{"polynomial", {1.0, 2.0}}}, 1);
  EXPECT_NEAR(a.value(pt(0.5))[0], 2.0, 1e-15);
  EXPECT_THROW(VectorField::from_json({{"constant", 1.0}}, 2), ConfigError);
  const VectorField b = VectorField::from_json({{"components", {{{"constant", 1.0}}, {{"constant", -2.0}}}}}, 2);
  EXPECT_NEAR(b.value(pt(0.1, 0.2))[1], -2.0, 1e-15);
  const VectorField c = VectorField::from_json(b.to_json(), 2);
  EXPECT_NEAR(c.value(pt(0.1, 0.2))[0], 1.0, 1e-15);
}

TEST(SmoothBump, SupportAndDerivatives) {
  EXPECT_EQ(smooth_bump(pt(0.5)), 0.0);
  EXPECT_EQ(smooth_bump(pt(-0.6)), 0.0);
  EXPECT_NEAR(smooth_bump(pt(0.0)), std::exp(-1.0), 1e-15);
  const double h = 1e-5;
  for (double u : {-0.4, -0.1, 0.2, 0.45}) {
    const double fd1 = (smooth_bump(pt(u + h)) - smooth_bump(pt(u - h))) / (2 * h);
    const double fd2 = (smooth_bump(pt(u + h)) - 2 * smooth_bump(pt(u)) + smooth_bump(pt(u - h))) / (h * h);
    EXPECT_NEAR(smooth_bump_gradient(pt(u))[0], fd1, 1e-6);
    EXPECT_NEAR(smooth_bump_laplacian(pt(u)), fd2, 1e-4);
  }
}

TEST(ModelSpec, ValidateRejectsBadInput) {
  ModelSpec m;
  m.a = 0.0;
  EXPECT_THROW(m.validate(), ConfigError);
  m.a = 1.0;
  m.T = -1.0;
  EXPECT_THROW(m.validate(), ConfigError);
  m.T = 1.0;
  m.dimension = 3;
  EXPECT_THROW(m.validate(), ConfigError);
}

TEST(ModelSpec, StationaryStartNeedsNegativeGamma) {
  ModelSpec m;
  m.x0_mode = InitialMode::stationary_warmup;
  m.theta = VectorField({ScalarField::polynomial({0.0, 1.0})});  // ∇·θ = 1, c - ∇·θ = -1
  m.validate();
  m.gamma_check = -0.5;
  m.validate();
  m.gamma_check = -2.0;  // claim violated
  EXPECT_THROW(m.validate(), ConfigError);
  m.gamma_check.reset();
  m.theta = VectorField({ScalarField::polynomial({0.0, -1.0})});
  EXPECT_THROW(m.validate(), ConfigError);
  // the θ = 0 relaxation
  m.theta = VectorField::zero(1);
  m.validate();
  EXPECT_DOUBLE_EQ(m.default_burn_in(), 5.0 * m.T);
  m.gamma_check = -2.0;
  m.c = ScalarField::constant(1, -3.0);
  EXPECT_DOUBLE_EQ(m.default_burn_in(), 2.5);
}

TEST(ModelSpec, JsonRoundTrip) {
  const ModelSpec m = ModelSpec::from_json(
      {{"a", 0.7}, {"T", 2.0}, {"theta", {{"polynomial", {-0.3, 0.0, 1.5}}}}, {"c", {{"constant", -1.0}}}});
  EXPECT_DOUBLE_EQ(m.a, 0.7);
  const ModelSpec back = ModelSpec::from_json(m.to_json());
  EXPECT_DOUBLE_EQ(back.T, 2.0);
  EXPECT_NEAR(back.theta.value(pt(0.5))[0], 0.075, 1e-15);
  EXPECT_NEAR(back.c.value(pt(0.5)), -1.0, 1e-15);
  EXPECT_THROW(ModelSpec::from_json({{"a", -1.0}}), ConfigError);
  EXPECT_THROW(ModelSpec::from_json({{"x0_mode", "bogus"}}), ConfigError);
}

TEST(Grid, Geometry) {
  Grid g;
  g.M = 3;
  g.n_t = 10;
  EXPECT_DOUBLE_EQ(g.dx(), 0.25);
  EXPECT_DOUBLE_EQ(g.dt(), 0.1);
  EXPECT_DOUBLE_EQ(g.position(0)[0], 0.25);
  EXPECT_TRUE(g.cfl_diagnostic());
  g.dimension = 2;
  EXPECT_EQ(g.nodes(), 9);
  EXPECT_DOUBLE_EQ(g.position(4)[0], 0.5);
  EXPECT_DOUBLE_EQ(g.position(5)[1], 0.5);
  EXPECT_DOUBLE_EQ(g.position(5)[0], 0.75);
  g.M = 2;
  EXPECT_THROW(g.validate(), ConfigError);
}
