#include "gmlm/quantile_core.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include <boost/multiprecision/cpp_int.hpp>

#include "gmlm/error.hpp"

namespace gmlm {

namespace {

// Neumaier-compensated sum.
double compensated_sum(std::span<const double> xs) {
  double sum = 0.0;
  double c = 0.0;
  for (double x : xs) {
    const double t = sum + x;
    if (std::abs(sum) >= std::abs(x)) {
      c += (sum - t) + x;
    } else {
      c += (x - t) + sum;
    }
    sum = t;
  }
  return sum + c;
}

void require_nonempty(const Sample& s, const char* where) {
  require(!s.empty(), ErrorKind::invalid_state,
          std::string(where) + ": empty sample");
}

std::vector<double> monomial_coefficients(std::size_t r) {
  using boost::multiprecision::cpp_int;
  std::vector<double> out(r + 1);
  // C(r,k) and C(r+k,k) built incrementally in exact integers.
  cpp_int c_rk = 1;
  cpp_int c_rkk = 1;
  for (std::size_t k = 0; k <= r; ++k) {
    if (k > 0) {
      c_rk = c_rk * (r - k + 1) / k;
      c_rkk = c_rkk * (r + k) / k;
    }
    cpp_int term = c_rk * c_rkk;
    if ((r - k) % 2 == 1) term = -term;
    out[k] = term.convert_to<double>();
  }
  return out;
}

}  // namespace

// ---------------------------------------------------------------- Sample

Sample::Sample(std::vector<double> values) : values_(std::move(values)) {
  require(!values_.empty(), ErrorKind::invalid_argument,
          "Sample: at least one observation is required");
  for (double v : values_) {
    require(std::isfinite(v), ErrorKind::invalid_argument,
            "Sample: non-finite observation");
  }
  std::sort(values_.begin(), values_.end());
}

Sample::Sample(std::initializer_list<double> values)
    : Sample(std::vector<double>(values)) {}

double Sample::min() const {
  require_nonempty(*this, "Sample::min");
  return values_.front();
}

double Sample::max() const {
  require_nonempty(*this, "Sample::max");
  return values_.back();
}

double Sample::mean() const {
  require_nonempty(*this, "Sample::mean");
  return compensated_sum(values_) / static_cast<double>(values_.size());
}

double Sample::variance() const {
  require_nonempty(*this, "Sample::variance");
  if (values_.size() < 2) return 0.0;
  const double m = mean();
  double ss = 0.0;
  double c = 0.0;
  for (double v : values_) c += v - m;
  for (double v : values_) ss += (v - m) * (v - m);
  const auto n = static_cast<double>(values_.size());
  // Two-pass with the first-order correction term.
  return (ss - c * c / n) / (n - 1.0);
}

double Sample::stddev() const { return std::sqrt(variance()); }

bool Sample::is_constant() const {
  require_nonempty(*this, "Sample::is_constant");
  return values_.front() == values_.back();
}

std::vector<double> Sample::distinct_values() const {
  std::vector<double> out;
  for (double v : values_) {
    if (out.empty() || out.back() != v) out.push_back(v);
  }
  return out;
}

std::vector<std::size_t> Sample::tie_counts() const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < values_.size(); ++i) {
    if (i == 0 || values_[i] != values_[i - 1]) {
      out.push_back(1);
    } else {
      ++out.back();
    }
  }
  return out;
}

// ------------------------------------------------------------- TrimRange

TrimRange::TrimRange(double lo, double hi) : lo_(lo), hi_(hi) {
  require(lo >= 0.0 && lo < 1.0 && hi > 0.0 && hi <= 1.0 && lo < hi,
          ErrorKind::invalid_argument,
          "TrimRange: need 0 <= lo < hi <= 1, got [" + std::to_string(lo) +
              ", " + std::to_string(hi) + "]");
}

// --------------------------------------------------------- LegendreBasis

LegendreBasis::LegendreBasis(std::size_t order) : order_(order) {
  require(order >= 1 && order <= max_order, ErrorKind::invalid_argument,
          "LegendreBasis: order must lie in [1, 64], got " +
              std::to_string(order));
  coeffs_.reserve(order);
  for (std::size_t r = 0; r < order; ++r) {
    coeffs_.push_back(monomial_coefficients(r));
  }
  rec_a_.resize(order + 1);
  rec_b_.resize(order + 1);
  for (std::size_t n = 0; n <= order; ++n) {
    const auto nd = static_cast<double>(n);
    rec_a_[n] = (2.0 * nd + 1.0) / (nd + 1.0);
    rec_b_[n] = nd / (nd + 1.0);
  }
}

std::span<const double> LegendreBasis::coefficients(std::size_t r) const {
  require(r < order_, ErrorKind::invalid_argument,
          "LegendreBasis::coefficients: index out of range");
  return coeffs_[r];
}

void LegendreBasis::evaluate(double u, std::span<double> out) const {
  const double x = 2.0 * u - 1.0;
  double prev = 1.0;
  double cur = x;
  out[0] = 1.0;
  if (order_ > 1) out[1] = x;
  for (std::size_t n = 1; n + 1 < order_; ++n) {
    const double next = rec_a_[n] * x * cur - rec_b_[n] * prev;
    prev = cur;
    cur = next;
    out[n + 1] = cur;
  }
}

Eigen::VectorXd LegendreBasis::evaluate(double u) const {
  Eigen::VectorXd out(order_);
  evaluate(u, std::span<double>(out.data(), order_));
  return out;
}

void LegendreBasis::antiderivative(double u, std::span<double> out) const {
  const double x = 2.0 * u - 1.0;
  // p_{r-1}, p_r, p_{r+1} rolled forward.
  double pm1 = 1.0;  // P_0
  double p0 = x;     // P_1
  out[0] = u;
  for (std::size_t r = 1; r < order_; ++r) {
    const double pp1 = rec_a_[r] * x * p0 - rec_b_[r] * pm1;
    out[r] = (pp1 - pm1) / (2.0 * (2.0 * static_cast<double>(r) + 1.0));
    pm1 = p0;
    p0 = pp1;
  }
}

double LegendreBasis::integral(std::size_t r, double a, double b) const {
  require(r < order_, ErrorKind::invalid_argument,
          "LegendreBasis::integral: index out of range");
  std::vector<double> fa(order_);
  std::vector<double> fb(order_);
  antiderivative(a, fa);
  antiderivative(b, fb);
  return fb[r] - fa[r];
}

Eigen::VectorXd LegendreBasis::integrals(const TrimRange& trim) const {
  std::vector<double> fa(order_);
  std::vector<double> fb(order_);
  antiderivative(trim.lo(), fa);
  antiderivative(trim.hi(), fb);
  Eigen::VectorXd out(order_);
  for (std::size_t r = 0; r < order_; ++r) out[r] = fb[r] - fa[r];
  return out;
}

LegendreBasis build_basis(std::size_t order) { return LegendreBasis(order); }

double poly_integral(const LegendreBasis& basis, std::size_t r, double a,
                     double b) {
  require(0.0 <= a && a <= b && b <= 1.0, ErrorKind::invalid_argument,
          "poly_integral: need 0 <= a <= b <= 1");
  return basis.integral(r, a, b);
}

// ------------------------------------------------------------- quantiles

double empirical_quantile(const Sample& sample, double u) {
  require_nonempty(sample, "empirical_quantile");
  require(u >= 0.0 && u <= 1.0, ErrorKind::invalid_argument,
          "empirical_quantile: probability outside [0, 1]");
  const std::size_t n = sample.size();
  if (u == 0.0) return sample[0];
  const auto nd = static_cast<double>(n);
  // Smallest k with k/n >= u, where k/n is the correctly rounded quotient used
  // everywhere else as a step boundary.
  auto k = static_cast<std::size_t>(std::clamp(std::ceil(nd * u), 1.0, nd));
  while (k > 1 && static_cast<double>(k - 1) / nd >= u) --k;
  while (k < n && static_cast<double>(k) / nd < u) ++k;
  return sample[k - 1];
}

StepQuantile StepQuantile::from_sample(const Sample& sample) {
  require_nonempty(sample, "StepQuantile::from_sample");
  StepQuantile q;
  const auto values = sample.values();
  const auto nd = static_cast<double>(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (i + 1 < values.size() && values[i + 1] == values[i]) continue;
    q.values.push_back(values[i]);
    q.upper.push_back(static_cast<double>(i + 1) / nd);
  }
  return q;
}

StepQuantile StepQuantile::from_weights(const Sample& sample,
                                        std::span<const double> weights) {
  require_nonempty(sample, "StepQuantile::from_weights");
  require(weights.size() == sample.size(), ErrorKind::invalid_argument,
          "StepQuantile::from_weights: weight count differs from sample size");
  for (double w : weights) {
    require(w >= 0.0 && std::isfinite(w), ErrorKind::invalid_argument,
            "StepQuantile::from_weights: negative or non-finite weight");
  }
  const double total = compensated_sum(weights);
  require(std::abs(total - 1.0) <= 1e-12, ErrorKind::invalid_argument,
          "StepQuantile::from_weights: weights must sum to one");
  StepQuantile q;
  const auto values = sample.values();
  double cum = 0.0;
  double group = 0.0;
  for (std::size_t i = 0; i < values.size(); ++i) {
    group += weights[i];
    if (i + 1 < values.size() && values[i + 1] == values[i]) continue;
    cum += group;
    if (group > 0.0) {
      q.values.push_back(values[i]);
      q.upper.push_back(std::min(cum, 1.0));
    }
    group = 0.0;
  }
  q.upper.back() = 1.0;
  return q;
}

double StepQuantile::operator()(double u) const {
  require(!values.empty(), ErrorKind::invalid_state,
          "StepQuantile: empty step function");
  require(u >= 0.0 && u <= 1.0, ErrorKind::invalid_argument,
          "StepQuantile: probability outside [0, 1]");
  if (u == 0.0) return values.front();
  const auto it = std::lower_bound(upper.begin(), upper.end(), u);
  const auto idx = static_cast<std::size_t>(
      std::min<std::ptrdiff_t>(it - upper.begin(),
                               static_cast<std::ptrdiff_t>(values.size()) - 1));
  return values[idx];
}

// ------------------------------------------------------------ L-moments

void integrate_steps(std::span<const double> values,
                     std::span<const double> upper, const LegendreBasis& basis,
                     const TrimRange& trim, std::span<double> out,
                     std::span<double> scratch) {
  const std::size_t order = basis.order();
  std::span<double> prev = scratch.subspan(0, order);
  std::span<double> cur = scratch.subspan(order, order);
  std::fill(out.begin(), out.end(), 0.0);

  const double lo = trim.lo();
  const double hi = trim.hi();
  double prev_c = lo;
  basis.antiderivative(lo, prev);
  for (std::size_t i = 0; i < values.size(); ++i) {
    const double c = std::clamp(upper[i], lo, hi);
    if (c <= prev_c) continue;
    basis.antiderivative(c, cur);
    const double y = values[i];
    for (std::size_t r = 0; r < order; ++r) out[r] += y * (cur[r] - prev[r]);
    std::swap(prev, cur);
    prev_c = c;
    if (c >= hi) break;
  }
}

Eigen::VectorXd integrate_quantile(const StepQuantile& q,
                                   const LegendreBasis& basis,
                                   const TrimRange& trim) {
  Eigen::VectorXd out(basis.order());
  std::vector<double> scratch(2 * (basis.order() + 1));
  integrate_steps(q.values, q.upper, basis, trim,
                  std::span<double>(out.data(), basis.order()), scratch);
  return out;
}

Eigen::MatrixXd step_basis_integrals(const StepQuantile& q,
                                     const LegendreBasis& basis,
                                     const TrimRange& trim) {
  const std::size_t order = basis.order();
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(
      static_cast<Eigen::Index>(q.values.size()),
      static_cast<Eigen::Index>(order));
  std::vector<double> prev(order);
  std::vector<double> cur(order);
  double prev_c = trim.lo();
  basis.antiderivative(prev_c, prev);
  for (std::size_t i = 0; i < q.values.size(); ++i) {
    const double c = std::clamp(q.upper[i], trim.lo(), trim.hi());
    if (c <= prev_c) continue;
    basis.antiderivative(c, cur);
    for (std::size_t r = 0; r < order; ++r) {
      out(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(r)) =
          cur[r] - prev[r];
    }
    std::swap(prev, cur);
    prev_c = c;
  }
  return out;
}

LMomentVector lmoments(const Sample& sample, std::size_t order,
                       const TrimRange& trim) {
  require_nonempty(sample, "lmoments");
  const LegendreBasis basis(order);
  return {trim, integrate_quantile(StepQuantile::from_sample(sample), basis,
                                   trim)};
}

}  // namespace gmlm
