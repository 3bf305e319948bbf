#include "lmspde/model.hpp"

#include <algorithm>
#include <cmath>

#include "lmspde/errors.hpp"

namespace lmspde {

std::string to_string(TimeScheme s) {
  switch (s) {
    case TimeScheme::implicit_euler: return "implicit_euler";
    case TimeScheme::crank_nicolson: return "crank_nicolson";
    case TimeScheme::explicit_euler: return "explicit_euler";
  }
  return "?";
}

TimeScheme time_scheme_from_string(const std::string& s) {
  if (s == "implicit_euler") return TimeScheme::implicit_euler;
  if (s == "crank_nicolson") return TimeScheme::crank_nicolson;
  if (s == "explicit_euler") return TimeScheme::explicit_euler;
  throw ConfigError("unknown time scheme '" + s + "'");
}

std::string to_string(InitialMode m) {
  switch (m) {
    case InitialMode::zero: return "zero";
    case InitialMode::explicit_field: return "explicit_field";
    case InitialMode::stationary_warmup: return "stationary_warmup";
  }
  return "?";
}

InitialMode initial_mode_from_string(const std::string& s) {
  if (s == "zero") return InitialMode::zero;
  if (s == "explicit_field") return InitialMode::explicit_field;
  if (s == "stationary_warmup") return InitialMode::stationary_warmup;
  throw ConfigError("unknown x0_mode '" + s + "'");
}

double ModelSpec::max_c_minus_div_theta(int n) const {
  double worst = -INFINITY;
  Point p(dimension);
  const int n2 = dimension == 1 ? 1 : n;
  for (int i = 0; i < n; ++i) {
    for (int k = 0; k < n2; ++k) {
      p[0] = static_cast<double>(i) / (n - 1);
      if (dimension == 2) p[1] = static_cast<double>(k) / (n - 1);
      worst = std::max(worst, c.value(p) - theta.divergence(p));
    }
  }
  return worst;
}

double ModelSpec::default_burn_in() const {
  if (burn_in) return *burn_in;
  if (gamma_check && *gamma_check < 0.0) return 5.0 / std::abs(*gamma_check);
  return 5.0 * T;
}

void ModelSpec::validate() const {
  if (dimension != 1 && dimension != 2) throw ConfigError("only d = 1 and d = 2 are supported");
  if (!(a > 0.0) || !std::isfinite(a)) throw ConfigError("diffusivity a must be positive");
  if (!(T > 0.0) || !std::isfinite(T)) throw ConfigError("time horizon T must be positive");
  if (theta.dimension() != dimension || c.dimension() != dimension)
    throw ConfigError("theta and c must match the model dimension");
  if (x0_mode == InitialMode::explicit_field && x0.dimension() != dimension)
    throw ConfigError("x0 field must match the model dimension");
  if (burn_in && *burn_in < 0.0) throw ConfigError("burn_in must be nonnegative");
  if (x0_mode == InitialMode::stationary_warmup) {
    const double worst = max_c_minus_div_theta();
    if (gamma_check) {
      if (!(*gamma_check < 0.0) && !theta.is_zero())
        throw ConfigError("stationary start needs gamma_check < 0 unless theta = 0");
      if (worst > *gamma_check + 1e-12)
        throw ConfigError("c - div(theta) reaches " + std::to_string(worst) + " > gamma_check " +
                          std::to_string(*gamma_check));
    } else if (theta.is_zero()) {
      // relaxation γ = 0 for θ = 0
      if (worst > 1e-12) throw ConfigError("stationary start with theta = 0 needs c <= 0");
    } else if (!(worst < 0.0)) {
      throw ConfigError("stationary start needs c - div(theta) <= gamma < 0");
    }
  }
}

ModelSpec ModelSpec::from_json(const nlohmann::json& j) {
  ModelSpec m;
  try {
    m.dimension = j.value("dimension", 1);
    if (m.dimension != 1 && m.dimension != 2) throw ConfigError("only d = 1 and d = 2 are supported");
    m.a = j.value("a", 1.0);
    m.T = j.value("T", 1.0);
    m.theta = j.contains("theta") ? VectorField::from_json(j.at("theta"), m.dimension) : VectorField::zero(m.dimension);
    m.c = j.contains("c") ? ScalarField::from_json(j.at("c"), m.dimension) : ScalarField(m.dimension);
    m.x0_mode = initial_mode_from_string(j.value("x0_mode", std::string("zero")));
    m.x0 = j.contains("x0") ? ScalarField::from_json(j.at("x0"), m.dimension) : ScalarField(m.dimension);
    if (j.contains("gamma_check")) m.gamma_check = j.at("gamma_check").get<double>();
    if (j.contains("burn_in")) m.burn_in = j.at("burn_in").get<double>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("model: ") + e.what());
  }
  m.validate();
  return m;
}

nlohmann::json ModelSpec::to_json() const {
  nlohmann::json j{{"dimension", dimension}, {"a", a},         {"T", T}, {"theta", theta.to_json()},
                   {"c", c.to_json()},       {"x0_mode", to_string(x0_mode)}};
  if (x0_mode == InitialMode::explicit_field) j["x0"] = x0.to_json();
  if (gamma_check) j["gamma_check"] = *gamma_check;
  if (burn_in) j["burn_in"] = *burn_in;
  return j;
}

Point Grid::position(int node) const {
  Point p(dimension);
  const double h = dx();
  if (dimension == 1) {
    p[0] = (node + 1) * h;
  } else {
    p[0] = (node % M + 1) * h;
    p[1] = (node / M + 1) * h;
  }
  return p;
}

void Grid::validate() const {
  if (dimension != 1 && dimension != 2) throw ConfigError("grid dimension must be 1 or 2");
  if (M < 3) throw ConfigError("grid needs M >= 3 interior points per axis");
  if (n_t < 1) throw ConfigError("grid needs n_t >= 1 time steps");
  if (!(T > 0.0)) throw ConfigError("grid horizon must be positive");
}

}  // namespace lmspde
