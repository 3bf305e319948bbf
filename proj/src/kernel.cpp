#include "lmspde/kernel.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include <boost/math/quadrature/gauss.hpp>

#include "lmspde/errors.hpp"

namespace lmspde {
namespace {

constexpr int kMaxPower = 14;
using Gauss30 = boost::math::quadrature::gauss<double, 30>;

template <class F>
double composite_gauss(F&& f, double lower, double upper, int panels) {
  const double width = (upper - lower) / panels;
  double total = 0.0;
  for (int p = 0; p < panels; ++p) {
    const double lo = lower + p * width;
    total += Gauss30::integrate(f, lo, lo + width);
  }
  return total;
}

Polynomial even_in_coordinate(const Polynomial& in_s) {
  const auto& c = in_s.coefficients();
  std::vector<double> out(2 * c.size() - 1, 0.0);
  for (std::size_t k = 0; k < c.size(); ++k) out[2 * k] = c[k];
  return Polynomial(std::move(out));
}

}  // namespace

BaseKernel BaseKernel::polynomial_bump(int dimension, int power, double radius) {
  if (dimension != 1 && dimension != 2) throw ConfigError("kernel dimension must be 1 or 2");
  if (power < 4 || power > kMaxPower)
    throw ConfigError("poly_bump power must lie in [4, " + std::to_string(kMaxPower) + "] for H^4 regularity");
  if (!(radius > 0.0)) throw ConfigError("kernel support radius must be positive");
  BaseKernel k;
  k.dim_ = dimension;
  k.radius_ = radius;
  k.parity_ = Parity::even;
  k.radial_ = true;
  k.bump_power_ = power;
  k.kbar_ = Polynomial::binomial_power(-1.0 / (radius * radius), power);
  k.build_derivatives();
  return k;
}

BaseKernel BaseKernel::odd_polynomial_bump(int power, double radius) {
  if (power < 4 || power > kMaxPower - 1) throw ConfigError("odd_poly_bump power out of range");
  if (!(radius > 0.0)) throw ConfigError("kernel support radius must be positive");
  BaseKernel k;
  k.dim_ = 1;
  k.radius_ = radius;
  k.parity_ = Parity::odd;
  k.radial_ = false;
  k.kbar_ = even_in_coordinate(Polynomial::binomial_power(-1.0 / (radius * radius), power)) *
            Polynomial::monomial(1.0 / radius, 1);
  k.build_derivatives();
  return k;
}

void BaseKernel::build_derivatives() {
  if (radial_) {
    const Polynomial p1 = kbar_.derivative();
    const Polynomial p2 = p1.derivative();
    // K = -ΔK̄ = -(4 s p'' + 2 d p')
    k_ = (Polynomial::monomial(1.0, 1) * p2 * 4.0 + p1 * (2.0 * dim_)) * -1.0;
    k1_ = k_.derivative();
    k2_ = k1_.derivative();
  } else {
    k_ = kbar_.derivative().derivative() * -1.0;
    k1_ = k_.derivative();
    k2_ = k1_.derivative();
  }
}

BaseKernel BaseKernel::from_json(const nlohmann::json& j) {
  if (j.contains("name")) {
    const auto name = j.at("name").get<std::string>();
    const int dimension = j.value("dimension", 1);
    const int power = j.value("power", 5);
    const double radius = j.value("radius", 1.0);
    if (name == "poly_bump") return polynomial_bump(dimension, power, radius);
    if (name == "odd_poly_bump") {
      if (dimension != 1) throw ConfigError("odd_poly_bump is only available in d = 1");
      return odd_polynomial_bump(power, radius);
    }
    throw ConfigError("unknown kernel name '" + name + "'");
  }
  BaseKernel k;
  k.dim_ = j.at("dimension").get<int>();
  k.radius_ = j.at("support_radius").get<double>();
  k.parity_ = j.at("parity").get<std::string>() == "odd" ? Parity::odd : Parity::even;
  const auto variable = j.at("variable").get<std::string>();
  k.radial_ = variable == "radius_squared";
  if (!k.radial_ && variable != "coordinate") throw ConfigError("kernel variable must be radius_squared or coordinate");
  if (!k.radial_ && k.dim_ != 1) throw ConfigError("coordinate kernels are only available in d = 1");
  if (k.radial_ && k.parity_ == Parity::odd) throw ConfigError("radial kernels are even");
  const auto& pieces = j.at("pieces");
  if (pieces.size() != 1) throw ConfigError("kernel description must contain exactly one polynomial piece");
  k.kbar_ = Polynomial(pieces.at(0).at("coefficients").get<std::vector<double>>());
  if (j.contains("bump_power")) k.bump_power_ = j.at("bump_power").get<int>();
  k.build_derivatives();
  return k;
}

nlohmann::json BaseKernel::to_json() const {
  nlohmann::json piece;
  piece["lower"] = radial_ ? 0.0 : -radius_;
  piece["upper"] = radial_ ? radius_ * radius_ : radius_;
  piece["coefficients"] = kbar_.coefficients();
  nlohmann::json j;
  j["dimension"] = dim_;
  j["support_radius"] = radius_;
  j["parity"] = parity_ == Parity::even ? "even" : "odd";
  j["variable"] = radial_ ? "radius_squared" : "coordinate";
  j["pieces"] = nlohmann::json::array({piece});
  if (bump_power_) j["bump_power"] = *bump_power_;
  return j;
}

BaseKernel BaseKernel::scaled(double factor) const {
  BaseKernel k = *this;
  k.kbar_ *= factor;
  k.bump_power_.reset();
  k.build_derivatives();
  return k;
}

double BaseKernel::base_value(const Point& y) const {
  const double s = y.squaredNorm();
  if (s >= radius_ * radius_) return 0.0;
  return radial_ ? kbar_(s) : kbar_(y[0]);
}

double BaseKernel::value(const Point& y) const {
  const double s = y.squaredNorm();
  if (s >= radius_ * radius_) return 0.0;
  return radial_ ? k_(s) : k_(y[0]);
}

Vector BaseKernel::gradient(const Point& y) const {
  Vector g = Vector::Zero(dim_);
  const double s = y.squaredNorm();
  if (s >= radius_ * radius_) return g;
  if (radial_) {
    g = (2.0 * k1_(s)) * y;
  } else {
    g[0] = k1_(y[0]);
  }
  return g;
}

double BaseKernel::laplacian(const Point& y) const {
  const double s = y.squaredNorm();
  if (s >= radius_ * radius_) return 0.0;
  if (radial_) return 4.0 * s * k2_(s) + 2.0 * dim_ * k1_(s);
  return k2_(y[0]);
}

Matrix BaseKernel::hessian(const Point& y) const {
  Matrix h = Matrix::Zero(dim_, dim_);
  const double s = y.squaredNorm();
  if (s >= radius_ * radius_) return h;
  if (radial_) {
    h = (4.0 * k2_(s)) * (y * y.transpose());
    h.diagonal().array() += 2.0 * k1_(s);
  } else {
    h(0, 0) = k2_(y[0]);
  }
  return h;
}

double BaseKernel::fourier_abs2(double xi) const {
  if (!bump_power_) return fourier_abs2_quadrature(xi);
  const double m = *bump_power_;
  const double z = std::abs(xi) * radius_;
  if (z < 1e-8) return 0.0;  // K̂(ξ) = |ξ|² K̄̂(ξ) vanishes at the origin
  double kbar_hat = 0.0;
  if (dim_ == 1) {
    kbar_hat = radius_ * std::sqrt(std::numbers::pi) * std::tgamma(m + 1.0) * std::pow(2.0 / z, m + 0.5) *
               std::cyl_bessel_j(m + 0.5, z);
  } else {
    kbar_hat = 2.0 * std::numbers::pi * radius_ * radius_ * std::pow(2.0, m) * std::tgamma(m + 1.0) *
               std::cyl_bessel_j(m + 1.0, z) / std::pow(z, m + 1.0);
  }
  const double k_hat = xi * xi * kbar_hat;
  return k_hat * k_hat;
}

double BaseKernel::fourier_abs2_quadrature(double xi) const {
  const int panels = 2 * (4 + static_cast<int>(std::ceil(std::abs(xi) * radius_ / std::numbers::pi)));
  if (dim_ == 1) {
    auto k_of = [this](double y) { return radial_ ? k_(y * y) : k_(y); };
    const double c = composite_gauss([&](double y) { return k_of(y) * std::cos(xi * y); }, -radius_, radius_, panels);
    const double s = composite_gauss([&](double y) { return k_of(y) * std::sin(xi * y); }, -radius_, radius_, panels);
    return c * c + s * s;
  }
  const double h = 2.0 * std::numbers::pi *
                   composite_gauss([&](double t) { return k_(t * t) * std::cyl_bessel_j(0.0, xi * t) * t; }, 0.0,
                                   radius_, panels);
  return h * h;
}

double eval_K(const BaseKernel& base, const Point& y) { return base.value(y); }
Vector eval_gradK(const BaseKernel& base, const Point& y) { return base.gradient(y); }
double eval_lapK(const BaseKernel& base, const Point& y) { return base.laplacian(y); }

double l2_norm(const BaseKernel& base, std::span<const int> alpha) {
  const int d = base.dimension();
  if (static_cast<int>(alpha.size()) != d) throw ContractError("multi-index size must equal the kernel dimension");
  int order = 0;
  for (int a : alpha) {
    if (a < 0) throw ContractError("multi-index entries must be nonnegative");
    order += a;
  }
  if (order > 2) throw ContractError("l2_norm supports |alpha| <= 2");

  auto derivative = [&](const Point& y) {
    if (order == 0) return base.value(y);
    if (order == 1) {
      const int i = alpha[0] == 1 ? 0 : 1;
      return base.gradient(y)[i];
    }
    int i = 0;
    int j = 0;
    if (d == 1) {
      i = j = 0;
    } else if (alpha[0] == 2) {
      i = j = 0;
    } else if (alpha[1] == 2) {
      i = j = 1;
    } else {
      i = 0;
      j = 1;
    }
    return base.hessian(y)(i, j);
  };

  const double r = base.support_radius();
  Point y(d);
  double total = 0.0;
  if (d == 1) {
    auto f = [&](double t) {
      y[0] = t;
      const double v = derivative(y);
      return v * v;
    };
    total = composite_gauss(f, -r, r, 2);
  } else {
    constexpr int kAngles = 64;
    auto radial = [&](double rho) {
      double acc = 0.0;
      for (int a = 0; a < kAngles; ++a) {
        const double phi = 2.0 * std::numbers::pi * a / kAngles;
        y[0] = rho * std::cos(phi);
        y[1] = rho * std::sin(phi);
        const double v = derivative(y);
        acc += v * v;
      }
      return acc * (2.0 * std::numbers::pi / kAngles) * rho;
    };
    total = composite_gauss(radial, 0.0, r, 2);
  }
  return std::sqrt(total);
}

double l2_norm(const BaseKernel& base) {
  const std::vector<int> zero(static_cast<std::size_t>(base.dimension()), 0);
  return l2_norm(base, zero);
}

namespace {

// (2π)^{-d} ∫ ξ ξᵀ/|ξ|² |K̂|² dξ truncated to |ξ| <= cutoff.
Matrix fourier_sigma_integral(const BaseKernel& base, double cutoff, int panels) {
  const int d = base.dimension();
  if (d == 1) {
    const double radial = composite_gauss([&](double xi) { return base.fourier_abs2(xi); }, 0.0, cutoff, panels);
    Matrix m(1, 1);
    m(0, 0) = 2.0 * radial / (2.0 * std::numbers::pi);
    return m;
  }
  const double radial = composite_gauss([&](double rho) { return rho * base.fourier_abs2(rho); }, 0.0, cutoff, panels);
  constexpr int kAngles = 32;
  Matrix angular = Matrix::Zero(2, 2);
  for (int a = 0; a < kAngles; ++a) {
    const double phi = 2.0 * std::numbers::pi * a / kAngles;
    Vector n(2);
    n << std::cos(phi), std::sin(phi);
    angular += n * n.transpose();
  }
  angular *= 2.0 * std::numbers::pi / kAngles;
  return angular * (radial / (4.0 * std::numbers::pi * std::numbers::pi));
}

}  // namespace

Matrix fisher_sigma(const BaseKernel& base, double T, double a) {
  if (!(T > 0.0) || !(a > 0.0)) throw ContractError("fisher_sigma requires T > 0 and a > 0");
  const double cutoff = 200.0 / base.support_radius();
  const int panels = 400;
  const Matrix coarse = fourier_sigma_integral(base, cutoff, panels);
  const Matrix fine = fourier_sigma_integral(base, 2.0 * cutoff, 4 * panels);
  const double scale = fine.norm();
  if (!(scale > 0.0) || (fine - coarse).norm() > 1e-8 * scale)
    throw QuadratureError("fisher_sigma: Fourier quadrature did not converge (relative change " +
                          std::to_string((fine - coarse).norm() / scale) + ")");
  return fine * (T / (2.0 * a));
}

double LocalizedKernel::value(const Point& u) const {
  const int d = base->dimension();
  return std::pow(delta, -0.5 * d) * base->value((u - center) / delta);
}

Vector LocalizedKernel::gradient(const Point& u) const {
  const int d = base->dimension();
  return std::pow(delta, -0.5 * d - 1.0) * base->gradient((u - center) / delta);
}

double LocalizedKernel::laplacian(const Point& u) const {
  const int d = base->dimension();
  return std::pow(delta, -0.5 * d - 2.0) * base->laplacian((u - center) / delta);
}

}  // namespace lmspde
