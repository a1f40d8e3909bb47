#include "gmlm/effects.hpp"

#include <cmath>
#include <string>

#include "gmlm/error.hpp"

namespace gmlm {

namespace {

void check_shares(double p_d, double p_0) {
  require(p_d > 0.0 && p_0 > 0.0, ErrorKind::invalid_argument,
          "arm shares must be positive");
}

double fourth_central_moment(const Sample& s) {
  const double m = s.mean();
  double acc = 0.0;
  for (double v : s.values()) {
    const double d = v - m;
    acc += d * d * d * d;
  }
  return acc / static_cast<double>(s.size());
}

}  // namespace

double ate_from_fit(double alpha, double sigma, double treated_mean,
                    double control_mean, double p_d, double p_0) {
  require(sigma > 0.0, ErrorKind::invalid_argument,
          "ate_from_fit: sigma must be positive");
  check_shares(p_d, p_0);
  const double s_d = p_d / (p_d + p_0);
  const double s_0 = p_0 / (p_d + p_0);
  return s_d * (treated_mean - (treated_mean - alpha) / sigma) +
         s_0 * (alpha + (sigma - 1.0) * control_mean);
}

std::array<double, 4> ate_gradient(double alpha, double sigma,
                                   double treated_mean, double control_mean,
                                   double p_d, double p_0) {
  require(sigma > 0.0, ErrorKind::invalid_argument,
          "ate_gradient: sigma must be positive");
  check_shares(p_d, p_0);
  const double s_d = p_d / (p_d + p_0);
  const double s_0 = p_0 / (p_d + p_0);
  return {s_d / sigma + s_0,
          s_d * (treated_mean - alpha) / (sigma * sigma) + s_0 * control_mean,
          s_d * (1.0 - 1.0 / sigma), s_0 * (sigma - 1.0)};
}

double dispersion_from_fit(double sigma) {
  require(sigma > 0.0, ErrorKind::invalid_argument,
          "dispersion_from_fit: sigma must be positive");
  return sigma - 1.0;
}

std::array<double, 4> dispersion_gradient() { return {0.0, 1.0, 0.0, 0.0}; }

double delta_se(std::span<const double> gradient, const Eigen::MatrixXd& cov,
                bool* clamped) {
  require(static_cast<Eigen::Index>(gradient.size()) == cov.rows() &&
              cov.rows() == cov.cols(),
          ErrorKind::invalid_argument,
          "delta_se: gradient dimension differs from the covariance");
  const Eigen::Map<const Eigen::VectorXd> g(gradient.data(), cov.rows());
  const double var = g.dot(cov * g);
  if (clamped) *clamped = var < 0.0;
  return var > 0.0 ? std::sqrt(var) : 0.0;
}

double delta_se(std::span<const double> gradient,
                const PrimitiveCovariance& cov, bool* clamped) {
  return delta_se(gradient, cov.cov, clamped);
}

AggregateEffect aggregate_strata(std::span<const StratumEffect> effects,
                                 std::span<const double> proportions) {
  require(!effects.empty() && effects.size() == proportions.size(),
          ErrorKind::invalid_argument,
          "aggregate_strata: strata and proportions do not match");
  double total = 0.0;
  for (double w : proportions) {
    require(w >= 0.0, ErrorKind::invalid_argument,
            "aggregate_strata: negative proportion");
    total += w;
  }
  require(std::abs(total - 1.0) <= 1e-9, ErrorKind::invalid_argument,
          "aggregate_strata: proportions must sum to one");
  AggregateEffect out;
  double var = 0.0;
  for (std::size_t i = 0; i < effects.size(); ++i) {
    out.value += proportions[i] * effects[i].value;
    var += proportions[i] * proportions[i] * effects[i].se * effects[i].se;
  }
  out.se = std::sqrt(var);
  out.weights.assign(proportions.begin(), proportions.end());
  return out;
}

EffectEstimate estimate_effect(const Sample& treated, const Sample& control,
                               const EffectConfig& cfg) {
  require(treated.size() >= 2 && control.size() >= 2,
          ErrorKind::invalid_argument,
          "estimate_effect: each arm needs at least two observations");
  const double scale = first_step_scale_sd_ratio(treated, control);
  const Eigen::MatrixXd V = discrepancy_covariance(
      treated, control, scale, cfg.order, cfg.trim, cfg.bootstrap);

  GmlmProblem problem{treated, control, cfg.order, cfg.trim,
                      WeightMatrix::pseudo_inverse_of(V)};
  GmlmFit fit = fit_location_scale(problem);
  const ModelSpec model = ModelSpec::location_scale();
  fit.covariance = theta_covariance(problem, fit, problem.weight, V, model);

  const PrimitiveCovariance pc =
      primitive_joint_cov(problem, model, cfg.bootstrap);

  EffectEstimate e;
  e.alpha = fit.theta[0];
  e.sigma = fit.theta[1];
  e.alpha_se = std::sqrt(std::max(0.0, pc.cov(0, 0)));
  e.sigma_se = std::sqrt(std::max(0.0, pc.cov(1, 1)));
  e.treated_mean = treated.mean();
  e.control_mean = control.mean();
  e.n_treated = treated.size();
  e.n_control = control.size();
  const auto n_d = static_cast<double>(treated.size());
  const auto n_0 = static_cast<double>(control.size());
  e.delta = ate_from_fit(e.alpha, e.sigma, e.treated_mean, e.control_mean, n_d,
                         n_0);
  const auto g = ate_gradient(e.alpha, e.sigma, e.treated_mean, e.control_mean,
                              n_d, n_0);
  e.delta_se = delta_se(g, pc);
  e.psi = dispersion_from_fit(e.sigma);
  e.psi_se = delta_se(dispersion_gradient(), pc);
  e.j_stat = fit.j_stat;
  e.df = fit.df;
  e.j_pvalue = jtest_pvalue(fit.j_stat, fit.df);
  e.R_used = cfg.order;
  e.trim_used = cfg.trim;
  e.weight_rank = problem.weight.rank();
  return e;
}

NonparametricEffect nonparametric_effect(const Sample& treated,
                                         const Sample& control) {
  require(treated.size() >= 2 && control.size() >= 2,
          ErrorKind::invalid_argument,
          "nonparametric_effect: each arm needs at least two observations");
  NonparametricEffect out;
  const auto n1 = static_cast<double>(treated.size());
  const auto n0 = static_cast<double>(control.size());
  const double v1 = treated.variance();
  const double v0 = control.variance();
  out.diff_means = treated.mean() - control.mean();
  out.diff_means_se = std::sqrt(v1 / n1 + v0 / n0);
  if (v0 > 0.0 && v1 > 0.0) {
    const double ratio = std::sqrt(v1 / v0);
    out.sd_ratio_minus_one = ratio - 1.0;
    const double var_s2_1 = (fourth_central_moment(treated) - v1 * v1) / n1;
    const double var_s2_0 = (fourth_central_moment(control) - v0 * v0) / n0;
    const double var_log =
        std::max(0.0, var_s2_1 / (4.0 * v1 * v1) + var_s2_0 / (4.0 * v0 * v0));
    out.sd_ratio_se = ratio * std::sqrt(var_log);
  } else {
    out.sd_ratio_minus_one = std::nan("");
    out.sd_ratio_se = std::nan("");
  }
  return out;
}

}  // namespace gmlm
