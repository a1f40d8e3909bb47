#pragma once

// Empirical quantile functions, shifted Legendre polynomials and exact
// L-moments of step quantile functions.

#include <cstddef>
#include <initializer_list>
#include <span>
#include <vector>

#include <Eigen/Core>

namespace gmlm {

// A batch of scalar outcomes held in ascending order.
class Sample {
 public:
  Sample() = default;

  // Sorts the input. Throws invalid-argument on an empty or non-finite batch.
  explicit Sample(std::vector<double> values);
  Sample(std::initializer_list<double> values);

  std::span<const double> values() const noexcept { return values_; }
  std::size_t size() const noexcept { return values_.size(); }
  bool empty() const noexcept { return values_.empty(); }
  double operator[](std::size_t i) const { return values_[i]; }

  double min() const;
  double max() const;
  double mean() const;
  // Unbiased (n - 1) variance; zero for a single observation.
  double variance() const;
  double stddev() const;
  bool is_constant() const;

  // Distinct values and the number of observations at each of them.
  std::vector<double> distinct_values() const;
  std::vector<std::size_t> tie_counts() const;

 private:
  std::vector<double> values_;
};

// Integration range [lo, hi] on the probability scale.
class TrimRange {
 public:
  TrimRange() = default;
  TrimRange(double lo, double hi);

  double lo() const noexcept { return lo_; }
  double hi() const noexcept { return hi_; }
  double width() const noexcept { return hi_ - lo_; }
  bool is_full() const noexcept { return lo_ == 0.0 && hi_ == 1.0; }

  friend bool operator==(const TrimRange&, const TrimRange&) = default;

 private:
  double lo_ = 0.0;
  double hi_ = 1.0;
};

// Shifted Legendre polynomials P*_0 .. P*_{R-1} on [0, 1] (Hosking's
// normalisation, P*_r(1) = 1).
//
// The monomial table P*_r(u) = sum_k (-1)^{r-k} C(r,k) C(r+k,k) u^k is built
// with exact integer arithmetic and is exact in double precision up to r = 20.
// Point evaluation and integration go through Bonnet's three-term recurrence
// and the antiderivative identity
//   int_0^u P*_r = (P*_{r+1}(u) - P*_{r-1}(u)) / (2 (2r + 1)),   r >= 1,
// which stays accurate at orders where the monomial form cancels badly.
class LegendreBasis {
 public:
  static constexpr std::size_t max_order = 64;

  explicit LegendreBasis(std::size_t order);

  std::size_t order() const noexcept { return order_; }

  // Monomial coefficients of P*_r, constant term first.
  std::span<const double> coefficients(std::size_t r) const;

  // P*_0(u) .. P*_{R-1}(u).
  void evaluate(double u, std::span<double> out) const;
  Eigen::VectorXd evaluate(double u) const;

  // int_0^u P*_r(t) dt for r = 0 .. R-1.
  void antiderivative(double u, std::span<double> out) const;

  // int_a^b P*_r(t) dt.
  double integral(std::size_t r, double a, double b) const;

  // (int_{lo}^{hi} P*_r)_{r < R}.
  Eigen::VectorXd integrals(const TrimRange& trim) const;

 private:
  std::size_t order_;
  std::vector<std::vector<double>> coeffs_;
  // Bonnet recurrence factors (2n+1)/(n+1) and n/(n+1) for n < order.
  std::vector<double> rec_a_;
  std::vector<double> rec_b_;
};

// Throws invalid-argument unless 1 <= R <= 64.
LegendreBasis build_basis(std::size_t order);

// Q(u) = inf{x : F_n(x) >= u} = y_(ceil(n u)); u = 0 maps to the minimum.
double empirical_quantile(const Sample& sample, double u);

// int_a^b P*_r(u) du for 0 <= a <= b <= 1.
double poly_integral(const LegendreBasis& basis, std::size_t r, double a,
                     double b);

struct LMomentVector {
  TrimRange trim;
  Eigen::VectorXd values;

  std::size_t order() const noexcept {
    return static_cast<std::size_t>(values.size());
  }
};

// A right-continuous-in-probability step function: the quantile equals
// values[i] on (upper[i-1], upper[i]], with upper[-1] = 0 and upper.back() = 1.
// Values are strictly increasing (ties merged).
struct StepQuantile {
  std::vector<double> values;
  std::vector<double> upper;

  static StepQuantile from_sample(const Sample& sample);
  // Reweighted empirical cdf F(x) = sum_i w_i 1{y_i <= x}; weights follow the
  // sample's sorted order and must be nonnegative and sum to one.
  static StepQuantile from_weights(const Sample& sample,
                                   std::span<const double> weights);

  double operator()(double u) const;
};

// Exact (int_{lo}^{hi} Q(u) P*_r(u) du)_{r < R}; no quadrature.
Eigen::VectorXd integrate_quantile(const StepQuantile& q,
                                   const LegendreBasis& basis,
                                   const TrimRange& trim);

// Same integral against G(Q(u)): per-step integrals of the basis, one row per
// step, so that int G(Q) P = sum_i G(values[i]) * row_i.
Eigen::MatrixXd step_basis_integrals(const StepQuantile& q,
                                     const LegendreBasis& basis,
                                     const TrimRange& trim);

// Allocation-free kernel behind integrate_quantile. `values` and `upper`
// describe the steps; `out` has basis.order() entries and is overwritten.
// `scratch` must hold at least 2 * (basis.order() + 1) doubles.
void integrate_steps(std::span<const double> values,
                     std::span<const double> upper, const LegendreBasis& basis,
                     const TrimRange& trim, std::span<double> out,
                     std::span<double> scratch);

LMomentVector lmoments(const Sample& sample, std::size_t order,
                       const TrimRange& trim = {});

}  // namespace gmlm
