#include "gmlm/weighting.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include <Eigen/Eigenvalues>
#include <boost/math/special_functions/gamma.hpp>

#include "gmlm/error.hpp"

namespace gmlm {

namespace {

constexpr double kPsdTolerance = 1e-10;
constexpr double kPinvRelativeCutoff = 1e-10;

// One arm of a replicate: the sample's distinct values, their tie counts and
// working buffers for the reweighted step boundaries.
class ReweightedArm {
 public:
  ReweightedArm(const Sample& sample, std::size_t order)
      : values_(sample.distinct_values()),
        counts_(sample.tie_counts()),
        z_(sample.size()),
        group_(values_.size()),
        upper_(values_.size()),
        scratch_(2 * (order + 1)) {}

  void draw(std::mt19937_64& rng) {
    std::exponential_distribution<double> exp1(1.0);
    for (double& z : z_) z = exp1(rng);
    double total = 0.0;
    std::size_t i = 0;
    for (std::size_t k = 0; k < values_.size(); ++k) {
      double g = 0.0;
      for (std::size_t c = 0; c < counts_[k]; ++c) g += z_[i++];
      group_[k] = g;
      total += g;
    }
    double cum = 0.0;
    for (std::size_t k = 0; k < values_.size(); ++k) {
      cum += group_[k];
      group_[k] /= total;
      upper_[k] = std::min(cum / total, 1.0);
    }
    upper_.back() = 1.0;
  }

  void lmoments(const LegendreBasis& basis, const TrimRange& trim,
                std::span<double> out) {
    integrate_steps(values_, upper_, basis, trim, out, scratch_);
  }

  double mean() const {
    double m = 0.0;
    for (std::size_t k = 0; k < values_.size(); ++k) m += group_[k] * values_[k];
    return m;
  }

  StepQuantile steps() const { return {values_, upper_}; }

 private:
  std::vector<double> values_;
  std::vector<std::size_t> counts_;
  std::vector<double> z_;
  std::vector<double> group_;
  std::vector<double> upper_;
  std::vector<double> scratch_;
};

// Column-wise covariance of the rows of `draws`, entry by entry so that the
// leading block does not depend on how many columns were drawn.
Eigen::MatrixXd row_covariance(const Eigen::MatrixXd& draws) {
  const Eigen::Index b = draws.rows();
  const Eigen::Index k = draws.cols();
  Eigen::VectorXd mean = Eigen::VectorXd::Zero(k);
  for (Eigen::Index c = 0; c < k; ++c) {
    double s = 0.0;
    for (Eigen::Index r = 0; r < b; ++r) s += draws(r, c);
    mean[c] = s / static_cast<double>(b);
  }
  Eigen::MatrixXd cov(k, k);
  for (Eigen::Index c1 = 0; c1 < k; ++c1) {
    for (Eigen::Index c2 = 0; c2 <= c1; ++c2) {
      double s = 0.0;
      for (Eigen::Index r = 0; r < b; ++r) {
        s += (draws(r, c1) - mean[c1]) * (draws(r, c2) - mean[c2]);
      }
      cov(c1, c2) = cov(c2, c1) = s / static_cast<double>(b - 1);
    }
  }
  return cov;
}

}  // namespace

// ---------------------------------------------------------- WeightMatrix

Eigen::MatrixXd symmetric_pseudo_inverse(const Eigen::MatrixXd& a,
                                         std::size_t* rank) {
  require(a.rows() == a.cols(), ErrorKind::invalid_argument,
          "pseudo-inverse: matrix is not square");
  const Eigen::MatrixXd sym = 0.5 * (a + a.transpose());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(sym);
  const Eigen::VectorXd& ev = eig.eigenvalues();
  const double top = ev.size() > 0 ? ev.cwiseAbs().maxCoeff() : 0.0;
  const double cutoff = top * kPinvRelativeCutoff;
  Eigen::VectorXd inv = Eigen::VectorXd::Zero(ev.size());
  std::size_t r = 0;
  for (Eigen::Index i = 0; i < ev.size(); ++i) {
    if (top > 0.0 && ev[i] > cutoff) {
      inv[i] = 1.0 / ev[i];
      ++r;
    }
  }
  if (rank) *rank = r;
  const Eigen::MatrixXd& q = eig.eigenvectors();
  Eigen::MatrixXd out = q * inv.asDiagonal() * q.transpose();
  return 0.5 * (out + out.transpose());
}

WeightMatrix WeightMatrix::identity(std::size_t order) {
  WeightMatrix w;
  w.m_ = Eigen::MatrixXd::Identity(static_cast<Eigen::Index>(order),
                                   static_cast<Eigen::Index>(order));
  w.rank_ = order;
  return w;
}

WeightMatrix WeightMatrix::from_matrix(const Eigen::MatrixXd& m) {
  require(m.rows() == m.cols() && m.rows() > 0, ErrorKind::invalid_argument,
          "WeightMatrix: matrix must be square and non-empty");
  require(m.allFinite(), ErrorKind::invalid_argument,
          "WeightMatrix: non-finite entry");
  const double scale = std::max(1.0, m.cwiseAbs().maxCoeff());
  require((m - m.transpose()).cwiseAbs().maxCoeff() <= 1e-12 * scale,
          ErrorKind::invalid_argument, "WeightMatrix: matrix is not symmetric");
  const Eigen::MatrixXd sym = 0.5 * (m + m.transpose());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(sym);
  Eigen::VectorXd ev = eig.eigenvalues();
  const double top = std::max(1.0, ev.cwiseAbs().maxCoeff());
  WeightMatrix w;
  bool repaired = false;
  for (Eigen::Index i = 0; i < ev.size(); ++i) {
    require(ev[i] >= -kPsdTolerance * top, ErrorKind::invalid_argument,
            "WeightMatrix: matrix is not positive semidefinite");
    if (ev[i] < 0.0) {
      ev[i] = 0.0;
      repaired = true;
    }
    if (ev[i] > kPinvRelativeCutoff * top) ++w.rank_;
  }
  w.m_ = repaired ? Eigen::MatrixXd(eig.eigenvectors() * ev.asDiagonal() *
                                    eig.eigenvectors().transpose())
                  : sym;
  return w;
}

WeightMatrix WeightMatrix::pseudo_inverse_of(const Eigen::MatrixXd& covariance) {
  WeightMatrix w;
  w.m_ = symmetric_pseudo_inverse(covariance, &w.rank_);
  return w;
}

// ------------------------------------------------------------ bootstrap

void BootstrapConfig::validate() const {
  require(replicates >= 50, ErrorKind::invalid_argument,
          "bootstrap: at least 50 replicates are required for covariance "
          "estimation, got " + std::to_string(replicates));
}

void draw_bootstrap_weights(std::span<double> out, std::mt19937_64& rng) {
  std::exponential_distribution<double> exp1(1.0);
  double total = 0.0;
  for (double& w : out) {
    w = exp1(rng);
    total += w;
  }
  for (double& w : out) w /= total;
}

std::vector<double> draw_bootstrap_weights(std::size_t n,
                                           std::mt19937_64& rng) {
  require(n >= 1, ErrorKind::invalid_argument,
          "draw_bootstrap_weights: n must be positive");
  std::vector<double> w(n);
  draw_bootstrap_weights(w, rng);
  return w;
}

double reweighted_quantile(const Sample& sample,
                           std::span<const double> weights, double u) {
  return StepQuantile::from_weights(sample, weights)(u);
}

double first_step_scale_sd_ratio(const Sample& treated, const Sample& control) {
  const double s0 = control.stddev();
  require(s0 > 0.0, ErrorKind::degenerate_design,
          "first-step scale: control sample has zero variance");
  return treated.stddev() / s0;
}

Eigen::VectorXd first_step_parameter(const Sample& treated,
                                     const Sample& control,
                                     const ModelSpec& model) {
  switch (model.family) {
    case ModelFamily::location_scale: {
      const double s = first_step_scale_sd_ratio(treated, control);
      return Eigen::Vector2d(treated.mean() - s * control.mean(), s);
    }
    case ModelFamily::location:
      return model.null_parameter;
    case ModelFamily::custom: {
      GmlmProblem first{treated, control, std::max<std::size_t>(model.dim, 1),
                        TrimRange{}, WeightMatrix{}};
      GmlmFit f = fit_generic(first, model);
      require(f.converged, ErrorKind::degenerate_design,
              "first_step_parameter: identity-weighted fit did not converge");
      return f.theta;
    }
  }
  return model.null_parameter;
}

Eigen::MatrixXd model_discrepancy_covariance(const Sample& treated,
                                             const Sample& control,
                                             const ModelSpec& model,
                                             const Eigen::VectorXd& first_step,
                                             std::size_t order,
                                             const TrimRange& trim,
                                             const BootstrapConfig& cfg) {
  switch (model.family) {
    case ModelFamily::location_scale:
      return discrepancy_covariance(treated, control, first_step[1], order,
                                    trim, cfg);
    case ModelFamily::location:
      return discrepancy_covariance(treated, control, 1.0, order, trim, cfg);
    case ModelFamily::custom: {
      std::vector<double> mapped;
      mapped.reserve(control.size());
      for (double v : control.values()) {
        mapped.push_back(model.transform(v, first_step));
      }
      return discrepancy_covariance(treated, Sample(std::move(mapped)), 1.0,
                                    order, trim, cfg);
    }
  }
  return {};
}

Eigen::MatrixXd discrepancy_covariance(const Sample& treated,
                                       const Sample& control,
                                       double first_step_scale,
                                       std::size_t order,
                                       const TrimRange& trim,
                                       const BootstrapConfig& cfg) {
  cfg.validate();
  require(!treated.empty() && !control.empty(), ErrorKind::invalid_state,
          "discrepancy_covariance: empty sample");
  const LegendreBasis basis(order);
  const Eigen::VectorXd l1 =
      integrate_quantile(StepQuantile::from_sample(treated), basis, trim);
  const Eigen::VectorXd l0 =
      integrate_quantile(StepQuantile::from_sample(control), basis, trim);
  const double root_n =
      std::sqrt(static_cast<double>(treated.size() + control.size()));

  ReweightedArm arm1(treated, order);
  ReweightedArm arm0(control, order);
  const auto R = static_cast<Eigen::Index>(order);
  const auto B = static_cast<Eigen::Index>(cfg.replicates);
  Eigen::MatrixXd draws(B, R);
  std::vector<double> t1(order);
  std::vector<double> t0(order);
  for (Eigen::Index b = 0; b < B; ++b) {
    const auto ub = static_cast<std::uint64_t>(b);
    auto rng1 = make_stream(
        {cfg.seed, purpose(StreamPurpose::weight_matrix), cfg.stream, ub, 1});
    auto rng0 = make_stream(
        {cfg.seed, purpose(StreamPurpose::weight_matrix), cfg.stream, ub, 0});
    arm1.draw(rng1);
    arm0.draw(rng0);
    arm1.lmoments(basis, trim, t1);
    arm0.lmoments(basis, trim, t0);
    for (Eigen::Index r = 0; r < R; ++r) {
      const auto k = static_cast<std::size_t>(r);
      draws(b, r) = root_n * ((t1[k] - l1[r]) -
                              first_step_scale * (t0[k] - l0[r]));
    }
  }
  return row_covariance(draws);
}

WeightMatrix optimal_weight_matrix(const Sample& treated,
                                   const Sample& control,
                                   double first_step_scale, std::size_t order,
                                   const TrimRange& trim,
                                   const BootstrapConfig& cfg) {
  return WeightMatrix::pseudo_inverse_of(discrepancy_covariance(
      treated, control, first_step_scale, order, trim, cfg));
}

Eigen::MatrixXd theta_covariance(const GmlmProblem& problem,
                                 const GmlmFit& fit,
                                 const WeightMatrix& weight,
                                 const Eigen::MatrixXd& discrepancy_cov,
                                 const ModelSpec& model) {
  require(fit.converged, ErrorKind::invalid_state,
          "theta_covariance: fit did not converge");
  const auto R = static_cast<Eigen::Index>(problem.order);
  require(weight.order() == problem.order && discrepancy_cov.rows() == R &&
              discrepancy_cov.cols() == R,
          ErrorKind::invalid_argument,
          "theta_covariance: matrix orders differ from R");
  const Eigen::MatrixXd J = residual_jacobian(problem, model, fit.theta);
  const Eigen::MatrixXd& W = weight.matrix();
  const Eigen::MatrixXd jtw = J.transpose() * W;
  Eigen::MatrixXd a = jtw * J;
  a = 0.5 * (a + a.transpose()).eval();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(a, Eigen::EigenvaluesOnly);
  const double lo = eig.eigenvalues().minCoeff();
  const double hi = eig.eigenvalues().maxCoeff();
  require(lo > 0.0 && hi / lo <= 1e14, ErrorKind::degenerate_design,
          "theta_covariance: J'WJ is singular");
  const Eigen::MatrixXd a_inv = a.ldlt().solve(
      Eigen::MatrixXd::Identity(a.rows(), a.cols()));
  const Eigen::MatrixXd middle = jtw * discrepancy_cov * jtw.transpose();
  Eigen::MatrixXd cov = a_inv * middle * a_inv /
                        static_cast<double>(problem.total_size());
  return 0.5 * (cov + cov.transpose());
}

double jtest_pvalue(double j, std::size_t df) {
  require(std::isfinite(j), ErrorKind::invalid_argument,
          "jtest_pvalue: non-finite statistic");
  if (df == 0) return j <= 1e-8 ? 1.0 : 0.0;
  if (j <= 0.0) return 1.0;
  return boost::math::gamma_q(0.5 * static_cast<double>(df), 0.5 * j);
}

PrimitiveCovariance primitive_joint_cov(
    const GmlmProblem& problem, const ModelSpec& model,
    const BootstrapConfig& cfg,
    const std::optional<Eigen::VectorXd>& theta_init) {
  cfg.validate();
  require(!problem.treated.empty() && !problem.control.empty(),
          ErrorKind::invalid_state, "primitive_joint_cov: empty sample");
  const std::size_t p = model.dim;
  PrimitiveCovariance out;
  out.dim = p;
  const auto k = static_cast<Eigen::Index>(p + 2);

  if (problem.treated.is_constant() && problem.control.is_constant() &&
      problem.treated[0] == problem.control[0]) {
    out.cov = Eigen::MatrixXd::Zero(k, k);
    out.replicates_used = cfg.replicates;
    return out;
  }

  const LegendreBasis basis(problem.order);
  const Eigen::MatrixXd W = problem.weight_or_identity();
  const Eigen::VectorXd ones = basis.integrals(problem.trim);
  const bool linear = model.family != ModelFamily::custom;
  const Eigen::VectorXd init = theta_init.value_or(model.null_parameter);

  ReweightedArm arm1(problem.treated, problem.order);
  ReweightedArm arm0(problem.control, problem.order);
  std::vector<double> t1(problem.order);
  std::vector<double> t0(problem.order);
  const auto R = static_cast<Eigen::Index>(problem.order);
  Eigen::MatrixXd X(R, model.family == ModelFamily::location_scale ? 2 : 1);
  X.col(0) = ones;

  std::vector<Eigen::VectorXd> rows;
  rows.reserve(cfg.replicates);
  for (std::size_t b = 0; b < cfg.replicates; ++b) {
    auto rng1 = make_stream({cfg.seed, purpose(StreamPurpose::primitive_covariance),
                             cfg.stream, b, 1});
    auto rng0 = make_stream({cfg.seed, purpose(StreamPurpose::primitive_covariance),
                             cfg.stream, b, 0});
    arm1.draw(rng1);
    arm0.draw(rng0);
    arm1.lmoments(basis, problem.trim, t1);
    const Eigen::Map<const Eigen::VectorXd> y(t1.data(), R);
    Eigen::VectorXd theta;
    try {
      if (linear) {
        if (model.family == ModelFamily::location_scale) {
          arm0.lmoments(basis, problem.trim, t0);
          X.col(1) = Eigen::Map<const Eigen::VectorXd>(t0.data(), R);
          theta = gls_solve(y, X, W);
          if (!(theta[1] > 0.0)) {
            ++out.failures;
            continue;
          }
        } else {
          arm0.lmoments(basis, problem.trim, t0);
          const Eigen::Map<const Eigen::VectorXd> x0(t0.data(), R);
          theta = gls_solve(y - x0, X, W);
        }
      } else {
        const StepQuantile q0 = arm0.steps();
        const Eigen::MatrixXd steps =
            step_basis_integrals(q0, basis, problem.trim);
        GmlmFit f = gauss_newton(y, q0, steps, W, model, init);
        if (!f.converged) {
          ++out.failures;
          continue;
        }
        theta = f.theta;
      }
    } catch (const Error& e) {
      if (!e.is_numerical()) throw;
      ++out.failures;
      continue;
    }
    Eigen::VectorXd row(k);
    row.head(static_cast<Eigen::Index>(p)) = theta;
    row[static_cast<Eigen::Index>(p)] = arm1.mean();
    row[static_cast<Eigen::Index>(p + 1)] = arm0.mean();
    rows.push_back(std::move(row));
  }
  require(static_cast<double>(out.failures) <=
              0.05 * static_cast<double>(cfg.replicates),
          ErrorKind::inference_unstable,
          "primitive_joint_cov: " + std::to_string(out.failures) + " of " +
              std::to_string(cfg.replicates) + " replicate fits failed");
  Eigen::MatrixXd draws(static_cast<Eigen::Index>(rows.size()), k);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    draws.row(static_cast<Eigen::Index>(i)) = rows[i].transpose();
  }
  out.cov = row_covariance(draws);
  out.replicates_used = rows.size();
  return out;
}

}  // namespace gmlm
