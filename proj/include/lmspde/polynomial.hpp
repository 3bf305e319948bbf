#pragma once

#include <cstddef>
#include <vector>

namespace lmspde {

/// Dense univariate polynomial, coefficients in ascending order of degree.
class Polynomial {
 public:
  Polynomial() = default;
  explicit Polynomial(std::vector<double> coefficients);

  /// (1 + scale * t)^power expanded by the binomial theorem.
  static Polynomial binomial_power(double scale, int power);
  static Polynomial monomial(double coefficient, int degree);

  double operator()(double t) const;
  Polynomial derivative() const;
  Polynomial antiderivative() const;
  double integrate(double lower, double upper) const;

  int degree() const { return static_cast<int>(coefficients_.size()) - 1; }
  const std::vector<double>& coefficients() const { return coefficients_; }

  Polynomial& operator+=(const Polynomial& other);
  Polynomial& operator*=(double factor);
  friend Polynomial operator+(Polynomial lhs, const Polynomial& rhs) { return lhs += rhs; }
  friend Polynomial operator*(Polynomial lhs, double factor) { return lhs *= factor; }
  friend Polynomial operator*(const Polynomial& lhs, const Polynomial& rhs);

 private:
  void trim();

  std::vector<double> coefficients_{0.0};
};

}  // namespace lmspde
