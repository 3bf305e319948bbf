#include "lmspde/fields.hpp"

#include <cmath>
#include <numbers>

#include "lmspde/errors.hpp"

namespace lmspde {
namespace {

double ipow(double x, int n) {
  double r = 1.0;
  for (int i = 0; i < n; ++i) r *= x;
  return r;
}

void check_dimension(int d) {
  if (d != 1 && d != 2) throw ConfigError("dimension must be 1 or 2");
}

}  // namespace

ScalarField ScalarField::constant(int dimension, double value) {
  check_dimension(dimension);
  ScalarField f(dimension);
  if (value != 0.0) f.add(Monomial{value, {0, 0}});
  return f;
}

ScalarField ScalarField::polynomial(std::vector<double> coefficients) {
  ScalarField f(1);
  for (std::size_t k = 0; k < coefficients.size(); ++k)
    if (coefficients[k] != 0.0) f.add(Monomial{coefficients[k], {static_cast<int>(k), 0}});
  return f;
}

ScalarField ScalarField::from_json(const nlohmann::json& j, int dimension) {
  check_dimension(dimension);
  if (j.is_number()) return constant(dimension, j.get<double>());
  ScalarField f(dimension);
  if (j.contains("constant")) f = constant(dimension, j.at("constant").get<double>());
  if (j.contains("polynomial")) {
    if (dimension != 1) throw ConfigError("'polynomial' shorthand is only valid in d = 1; use 'terms'");
    const auto c = j.at("polynomial").get<std::vector<double>>();
    for (std::size_t k = 0; k < c.size(); ++k)
      if (c[k] != 0.0) f.add(Monomial{c[k], {static_cast<int>(k), 0}});
  }
  if (j.contains("terms")) {
    for (const auto& t : j.at("terms")) {
      Monomial m;
      m.coefficient = t.at("coefficient").get<double>();
      const auto p = t.at("powers").get<std::vector<int>>();
      if (static_cast<int>(p.size()) != dimension) throw ConfigError("monomial powers must have one entry per dimension");
      for (int i = 0; i < dimension; ++i) {
        if (p[static_cast<std::size_t>(i)] < 0) throw ConfigError("monomial powers must be nonnegative");
        m.powers[static_cast<std::size_t>(i)] = p[static_cast<std::size_t>(i)];
      }
      f.add(m);
    }
  }
  if (j.contains("sine_modes")) {
    for (const auto& s : j.at("sine_modes")) {
      SineMode mode;
      mode.amplitude = s.at("amplitude").get<double>();
      const auto k = s.at("modes").get<std::vector<int>>();
      if (static_cast<int>(k.size()) != dimension) throw ConfigError("sine mode needs one index per dimension");
      for (int i = 0; i < dimension; ++i) mode.modes[static_cast<std::size_t>(i)] = k[static_cast<std::size_t>(i)];
      f.add(mode);
    }
  }
  return f;
}

nlohmann::json ScalarField::to_json() const {
  nlohmann::json j = nlohmann::json::object();
  nlohmann::json terms = nlohmann::json::array();
  for (const auto& t : terms_) {
    std::vector<int> p(t.powers.begin(), t.powers.begin() + dim_);
    terms.push_back({{"coefficient", t.coefficient}, {"powers", p}});
  }
  j["terms"] = terms;
  if (!sines_.empty()) {
    nlohmann::json s = nlohmann::json::array();
    for (const auto& m : sines_) {
      std::vector<int> k(m.modes.begin(), m.modes.begin() + dim_);
      s.push_back({{"amplitude", m.amplitude}, {"modes", k}});
    }
    j["sine_modes"] = s;
  }
  return j;
}

ScalarField& ScalarField::add(const Monomial& term) {
  terms_.push_back(term);
  return *this;
}

ScalarField& ScalarField::add(const SineMode& mode) {
  sines_.push_back(mode);
  return *this;
}

double ScalarField::value(const Point& x) const {
  double v = 0.0;
  for (const auto& t : terms_) {
    double m = t.coefficient;
    for (int i = 0; i < dim_; ++i) m *= ipow(x[i], t.powers[static_cast<std::size_t>(i)]);
    v += m;
  }
  for (const auto& s : sines_) {
    double m = s.amplitude;
    for (int i = 0; i < dim_; ++i) m *= std::sin(s.modes[static_cast<std::size_t>(i)] * std::numbers::pi * x[i]);
    v += m;
  }
  return v;
}

Vector ScalarField::gradient(const Point& x) const {
  Vector g = Vector::Zero(dim_);
  for (const auto& t : terms_) {
    for (int i = 0; i < dim_; ++i) {
      const int pi = t.powers[static_cast<std::size_t>(i)];
      if (pi == 0) continue;
      double m = t.coefficient * pi * ipow(x[i], pi - 1);
      for (int k = 0; k < dim_; ++k)
        if (k != i) m *= ipow(x[k], t.powers[static_cast<std::size_t>(k)]);
      g[i] += m;
    }
  }
  for (const auto& s : sines_) {
    for (int i = 0; i < dim_; ++i) {
      const double ki = s.modes[static_cast<std::size_t>(i)] * std::numbers::pi;
      double m = s.amplitude * ki * std::cos(ki * x[i]);
      for (int k = 0; k < dim_; ++k)
        if (k != i) m *= std::sin(s.modes[static_cast<std::size_t>(k)] * std::numbers::pi * x[k]);
      g[i] += m;
    }
  }
  return g;
}

double smooth_bump(const Point& u) {
  const double q = 1.0 - 4.0 * u.squaredNorm();
  if (q <= 0.0) return 0.0;
  return std::exp(-1.0 / q);
}

// Radial profile in s = |u|²: V(s) = exp(-1/(1-4s)), V' = -4V/(1-4s)², V'' = -4V'/(1-4s)² - 32V/(1-4s)³.
Vector smooth_bump_gradient(const Point& u) {
  const double q = 1.0 - 4.0 * u.squaredNorm();
  if (q <= 0.0) return Vector::Zero(u.size());
  const double v = std::exp(-1.0 / q);
  const double v1 = -4.0 * v / (q * q);
  return (2.0 * v1) * u;
}

double smooth_bump_laplacian(const Point& u) {
  const double s = u.squaredNorm();
  const double q = 1.0 - 4.0 * s;
  if (q <= 0.0) return 0.0;
  const double v = std::exp(-1.0 / q);
  const double v1 = -4.0 * v / (q * q);
  const double v2 = -4.0 * v1 / (q * q) - 32.0 * v / (q * q * q);
  return 4.0 * s * v2 + 2.0 * static_cast<double>(u.size()) * v1;
}

Vector BumpTerm::value(const Point& y) const {
  return (c4 * std::pow(h, beta)) * smooth_bump_gradient((y - center) / h);
}

double BumpTerm::divergence(const Point& y) const {
  return c4 * std::pow(h, beta - 1.0) * smooth_bump_laplacian((y - center) / h);
}

double BumpTerm::potential(const Point& y) const { return c4 * std::pow(h, beta + 1.0) * smooth_bump((y - center) / h); }

VectorField::VectorField(int dimension) {
  check_dimension(dimension);
  components_.assign(static_cast<std::size_t>(dimension), ScalarField(dimension));
}

VectorField::VectorField(std::vector<ScalarField> components, std::optional<BumpTerm> bump)
    : components_(std::move(components)), bump_(std::move(bump)) {
  check_dimension(dimension());
  for (const auto& c : components_)
    if (c.dimension() != dimension()) throw ConfigError("velocity components must share the field dimension");
  if (bump_ && bump_->center.size() != dimension()) throw ConfigError("bump center has the wrong dimension");
}

VectorField VectorField::from_json(const nlohmann::json& j, int dimension) {
  check_dimension(dimension);
  std::vector<ScalarField> comps;
  if (j.contains("components")) {
    for (const auto& c : j.at("components")) comps.push_back(ScalarField::from_json(c, dimension));
  } else if (j.contains("bump") && !j.contains("polynomial") && !j.contains("terms") && !j.contains("constant")) {
    comps.assign(static_cast<std::size_t>(dimension), ScalarField(dimension));
  } else {
    if (dimension != 1) throw ConfigError("velocity field in d = 2 needs explicit 'components'");
    comps.push_back(ScalarField::from_json(j, dimension));
  }
  if (static_cast<int>(comps.size()) != dimension) throw ConfigError("velocity field needs one component per dimension");
  std::optional<BumpTerm> bump;
  if (j.contains("bump")) {
    const auto& b = j.at("bump");
    BumpTerm t;
    const auto c = b.at("center").get<std::vector<double>>();
    if (static_cast<int>(c.size()) != dimension) throw ConfigError("bump center has the wrong dimension");
    t.center = Eigen::Map<const Vector>(c.data(), dimension);
    t.h = b.at("h").get<double>();
    t.beta = b.value("beta", 2.0);
    t.c4 = b.value("c4", 1.0);
    if (!(t.h > 0.0)) throw ConfigError("bump bandwidth must be positive");
    bump = t;
  }
  return VectorField(std::move(comps), bump);
}

nlohmann::json VectorField::to_json() const {
  nlohmann::json j;
  j["components"] = nlohmann::json::array();
  for (const auto& c : components_) j["components"].push_back(c.to_json());
  if (bump_) {
    std::vector<double> c(bump_->center.data(), bump_->center.data() + bump_->center.size());
    j["bump"] = {{"center", c}, {"h", bump_->h}, {"beta", bump_->beta}, {"c4", bump_->c4}};
  }
  return j;
}

bool VectorField::is_zero() const {
  if (bump_ && bump_->c4 != 0.0) return false;
  for (const auto& c : components_)
    if (!c.is_zero()) return false;
  return true;
}

Vector VectorField::value(const Point& x) const {
  Vector v(dimension());
  for (int i = 0; i < dimension(); ++i) v[i] = components_[static_cast<std::size_t>(i)].value(x);
  if (bump_) v += bump_->value(x);
  return v;
}

double VectorField::divergence(const Point& x) const {
  double div = 0.0;
  for (int i = 0; i < dimension(); ++i) div += components_[static_cast<std::size_t>(i)].gradient(x)[i];
  if (bump_) div += bump_->divergence(x);
  return div;
}

}  // namespace lmspde
