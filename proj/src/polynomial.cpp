#include "lmspde/polynomial.hpp"

#include <algorithm>

namespace lmspde {

Polynomial::Polynomial(std::vector<double> coefficients) : coefficients_(std::move(coefficients)) {
  if (coefficients_.empty()) coefficients_.push_back(0.0);
  trim();
}

Polynomial Polynomial::binomial_power(double scale, int power) {
  std::vector<double> c(static_cast<std::size_t>(power) + 1, 0.0);
  double binom = 1.0;
  double s = 1.0;
  for (int k = 0; k <= power; ++k) {
    c[static_cast<std::size_t>(k)] = binom * s;
    binom = binom * (power - k) / (k + 1);
    s *= scale;
  }
  return Polynomial(std::move(c));
}

Polynomial Polynomial::monomial(double coefficient, int degree) {
  std::vector<double> c(static_cast<std::size_t>(degree) + 1, 0.0);
  c.back() = coefficient;
  return Polynomial(std::move(c));
}

double Polynomial::operator()(double t) const {
  double acc = 0.0;
  for (auto it = coefficients_.rbegin(); it != coefficients_.rend(); ++it) acc = acc * t + *it;
  return acc;
}

Polynomial Polynomial::derivative() const {
  if (coefficients_.size() <= 1) return Polynomial();
  std::vector<double> c(coefficients_.size() - 1);
  for (std::size_t k = 1; k < coefficients_.size(); ++k) c[k - 1] = static_cast<double>(k) * coefficients_[k];
  return Polynomial(std::move(c));
}

Polynomial Polynomial::antiderivative() const {
  std::vector<double> c(coefficients_.size() + 1, 0.0);
  for (std::size_t k = 0; k < coefficients_.size(); ++k) c[k + 1] = coefficients_[k] / static_cast<double>(k + 1);
  return Polynomial(std::move(c));
}

double Polynomial::integrate(double lower, double upper) const {
  const Polynomial p = antiderivative();
  return p(upper) - p(lower);
}

Polynomial& Polynomial::operator+=(const Polynomial& other) {
  if (other.coefficients_.size() > coefficients_.size()) coefficients_.resize(other.coefficients_.size(), 0.0);
  for (std::size_t k = 0; k < other.coefficients_.size(); ++k) coefficients_[k] += other.coefficients_[k];
  trim();
  return *this;
}

Polynomial& Polynomial::operator*=(double factor) {
  for (double& c : coefficients_) c *= factor;
  trim();
  return *this;
}

Polynomial operator*(const Polynomial& lhs, const Polynomial& rhs) {
  std::vector<double> c(lhs.coefficients_.size() + rhs.coefficients_.size() - 1, 0.0);
  for (std::size_t i = 0; i < lhs.coefficients_.size(); ++i)
    for (std::size_t j = 0; j < rhs.coefficients_.size(); ++j) c[i + j] += lhs.coefficients_[i] * rhs.coefficients_[j];
  return Polynomial(std::move(c));
}

void Polynomial::trim() {
  while (coefficients_.size() > 1 && coefficients_.back() == 0.0) coefficients_.pop_back();
}

}  // namespace lmspde
