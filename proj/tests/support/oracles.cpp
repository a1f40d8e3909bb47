#include "support/oracles.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <stdexcept>

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/special_functions/gamma.hpp>

namespace oracle {

namespace {

Rational binomial(std::size_t n, std::size_t k) {
  boost::multiprecision::cpp_int r = 1;
  for (std::size_t i = 1; i <= k; ++i) {
    r *= n - k + i;
    r /= i;
  }
  return Rational(r);
}

Rational power(const Rational& x, std::size_t k) {
  Rational r = 1;
  for (std::size_t i = 0; i < k; ++i) r *= x;
  return r;
}

}  // namespace

Rational exact(double x) {
  if (!std::isfinite(x)) throw std::invalid_argument("exact: not finite");
  int e = 0;
  const double m = std::frexp(x, &e);
  // m * 2^53 is an integer for every double.
  const auto mant = static_cast<long long>(std::ldexp(m, 53));
  Rational r(mant);
  e -= 53;
  boost::multiprecision::cpp_int two = 1;
  two <<= static_cast<unsigned>(std::abs(e));
  return e >= 0 ? r * Rational(two) : r / Rational(two);
}

std::vector<Rational> legendre_coefficients(std::size_t r) {
  std::vector<Rational> c(r + 1);
  for (std::size_t k = 0; k <= r; ++k) {
    Rational v = binomial(r, k) * binomial(r + k, k);
    c[k] = ((r - k) % 2 == 0) ? v : Rational(-v);
  }
  return c;
}

Rational poly_integral(std::size_t r, const Rational& a, const Rational& b) {
  const auto c = legendre_coefficients(r);
  Rational s = 0;
  for (std::size_t k = 0; k < c.size(); ++k) {
    s += c[k] * (power(b, k + 1) - power(a, k + 1)) / Rational(k + 1);
  }
  return s;
}

double lmoment_exact(std::span<const double> values, std::size_t r) {
  std::vector<double> y(values.begin(), values.end());
  std::sort(y.begin(), y.end());
  const auto n = y.size();
  Rational s = 0;
  for (std::size_t i = 0; i < n; ++i) {
    s += exact(y[i]) * poly_integral(r, Rational(i) / Rational(n),
                                     Rational(i + 1) / Rational(n));
  }
  return static_cast<double>(s);
}

double gini_half_mean_difference(std::span<const double> values) {
  long double s = 0.0L;
  for (double a : values) {
    for (double b : values) s += std::fabs(static_cast<long double>(a) - b);
  }
  const auto n = static_cast<long double>(values.size());
  return static_cast<double>(s / (2.0L * n * n));
}

double quantile_brute_force(std::span<const double> values, double u) {
  std::vector<double> y(values.begin(), values.end());
  std::sort(y.begin(), y.end());
  const auto n = static_cast<double>(y.size());
  for (double cand : y) {
    double cnt = 0;
    for (double v : y) cnt += v <= cand ? 1 : 0;
    if (cnt / n >= u) return cand;
  }
  return y.back();
}

double integrate(const std::function<double(double)>& f, double a, double b) {
  double err = 0.0;
  return boost::math::quadrature::gauss_kronrod<double, 61>::integrate(
      f, a, b, 15, 1e-14, &err);
}

double chi2_upper_tail_quadrature(double x, unsigned df) {
  const double k = df / 2.0;
  const double norm = std::exp(-std::lgamma(k) - k * std::log(2.0));
  auto density = [&](double t) {
    if (t <= 0.0) return 0.0;
    return norm * std::pow(t, k - 1.0) * std::exp(-t / 2.0);
  };
  // Tail integral over [x, x + 400], beyond which the density is negligible.
  return integrate(density, x, x + 400.0);
}

double ks_uniform_statistic(std::vector<double> p) {
  std::sort(p.begin(), p.end());
  const auto n = static_cast<double>(p.size());
  double d = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double lo = p[i] - static_cast<double>(i) / n;
    const double hi = static_cast<double>(i + 1) / n - p[i];
    d = std::max({d, lo, hi});
  }
  return d;
}

double ks_pvalue(double d, std::size_t n) {
  const double rn = std::sqrt(static_cast<double>(n));
  const double x = d * (rn + 0.12 + 0.11 / rn);
  double s = 0.0;
  for (int k = 1; k <= 100; ++k) {
    const double term = std::exp(-2.0 * k * k * x * x);
    s += (k % 2 ? 1.0 : -1.0) * term;
    if (term < 1e-16) break;
  }
  return std::clamp(2.0 * s, 0.0, 1.0);
}

double central_difference(const std::function<double(double)>& f, double x,
                          double h) {
  return (f(x + h) - f(x - h)) / (2.0 * h);
}

}  // namespace oracle
