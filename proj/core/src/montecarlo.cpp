#include "gmlm/montecarlo.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include <boost/math/distributions/normal.hpp>

#include "gmlm/error.hpp"
#include "gmlm/parallel.hpp"
#include "gmlm/weighting.hpp"

namespace gmlm {

namespace {

constexpr double kJLevel = 0.05;

double nan() { return std::numeric_limits<double>::quiet_NaN(); }

Sample to_scale(Sample s, McScale scale) {
  if (scale == McScale::levels) return s;
  std::vector<double> v(s.values().begin(), s.values().end());
  for (double& x : v) x = std::log(x);
  return Sample(std::move(v));
}

double median(std::vector<double> v) {
  if (v.empty()) return nan();
  std::sort(v.begin(), v.end());
  const std::size_t m = v.size() / 2;
  return v.size() % 2 ? v[m] : 0.5 * (v[m - 1] + v[m]);
}

bool flat_equal(const Sample& a, const Sample& b) {
  return a.is_constant() && b.is_constant() && a[0] == b[0];
}

EstimatorRecord diff_in_means(const Sample& t, const Sample& c, double z) {
  EstimatorRecord r;
  r.estimator = McEstimator::diff_in_means;
  r.estimate = t.mean() - c.mean();
  r.se = std::sqrt(t.variance() / static_cast<double>(t.size()) +
                   c.variance() / static_cast<double>(c.size()));
  r.covers = std::abs(r.estimate) <= z * r.se;
  r.ok = true;
  return r;
}

EstimatorRecord gmlm_location(const Population& pop, std::size_t N,
                              const McConfig& cfg, std::size_t replicate,
                              const Sample& t, const Sample& c,
                              McEstimator which, double z) {
  EstimatorRecord r;
  r.estimator = which;
  const TrimRange trim = which == McEstimator::gmlm_trimmed
                             ? TrimRange(0.0, cfg.trim_hi)
                             : TrimRange{};
  const std::uint64_t est_id = static_cast<std::uint64_t>(which);
  try {
    if (flat_equal(t, c)) {
      r.estimate = 0.0;
      r.se = 0.0;
      r.covers = true;
      r.R = cfg.orders.front();
      r.ok = true;
      return r;
    }

    std::vector<PlaceboPeriod> periods;
    periods.reserve(cfg.T0);
    for (std::size_t k = 0; k < cfg.T0; ++k) {
      auto rng = make_stream({cfg.seed, purpose(StreamPurpose::placebo_draw),
                              N, replicate, k});
      auto [pt, pc] = draw_two_samples(pop, N, rng);
      periods.push_back({"placebo-" + std::to_string(k),
                         to_scale(std::move(pt), cfg.scale),
                         to_scale(std::move(pc), cfg.scale),
                         stream_key({N, replicate, k, est_id})});
    }
    TuningConfig tc;
    tc.model = ModelSpec::location();
    tc.weighting = TuningWeight::optimal;
    tc.bootstrap = {cfg.tuning_replicates, cfg.seed, 0};
    const TuningReport tr =
        select_hyperparams(periods, HyperGrid(cfg.orders, {trim}), tc);
    r.R = tr.chosen.order;

    BootstrapConfig bc{cfg.bootstrap_replicates, cfg.seed,
                       stream_key({N, replicate, est_id})};
    const Eigen::MatrixXd V =
        discrepancy_covariance(t, c, 1.0, r.R, trim, bc);
    GmlmProblem problem{t, c, r.R, trim, WeightMatrix::pseudo_inverse_of(V)};
    const ModelSpec model = ModelSpec::location();
    GmlmFit f = fit_location(problem);
    const Eigen::MatrixXd cov =
        theta_covariance(problem, f, problem.weight, V, model);
    r.estimate = f.theta[0];
    r.se = std::sqrt(std::max(0.0, cov(0, 0)));
    r.covers = std::abs(r.estimate) <= z * r.se;
    r.j_reject = jtest_pvalue(f.j_stat, f.df) < kJLevel;
    r.ok = true;
  } catch (const Error& e) {
    if (!e.is_numerical()) throw;
    r.ok = false;
    r.message = e.what();
  }
  return r;
}

}  // namespace

// ------------------------------------------------------------ population

Population::Population(std::vector<double> values, std::string source)
    : values_(std::move(values)), source_(std::move(source)) {
  require(!values_.empty(), ErrorKind::data_error, "population is empty");
  for (std::size_t i = 0; i < values_.size(); ++i) {
    require(std::isfinite(values_[i]), ErrorKind::data_error,
            "population value " + std::to_string(i + 1) + " is not finite");
  }
}

Population Population::synthetic(const SyntheticPopulationSpec& spec) {
  require(spec.size >= 2, ErrorKind::invalid_argument,
          "synthetic population: size must be at least 2");
  require(spec.tail_weight >= 0.0 && spec.tail_weight <= 1.0,
          ErrorKind::invalid_argument,
          "synthetic population: tail weight must lie in [0, 1]");
  require(spec.body_log_sd >= 0.0 && spec.tail_log_sd >= 0.0,
          ErrorKind::invalid_argument,
          "synthetic population: log-sds must be nonnegative");
  auto rng = make_stream(
      {spec.seed, purpose(StreamPurpose::synthetic_population), 1});
  std::bernoulli_distribution tail(spec.tail_weight);
  std::normal_distribution<double> z(0.0, 1.0);
  std::vector<double> v(spec.size);
  for (double& x : v) {
    const bool in_tail = tail(rng);
    const double g = z(rng);
    x = in_tail ? std::exp(spec.tail_log_mean + spec.tail_log_sd * g)
                : std::exp(spec.body_log_mean + spec.body_log_sd * g);
  }
  return Population(std::move(v), "synthetic");
}

Population Population::lognormal(std::size_t size, double log_mean,
                                 double log_sd, std::uint64_t seed) {
  SyntheticPopulationSpec spec;
  spec.size = size;
  spec.body_log_mean = log_mean;
  spec.body_log_sd = log_sd;
  spec.tail_weight = 0.0;
  spec.seed = seed;
  Population p = synthetic(spec);
  p.source_ = "lognormal";
  return p;
}

bool Population::is_positive() const {
  return std::all_of(values_.begin(), values_.end(),
                     [](double x) { return x > 0.0; });
}

// ------------------------------------------------------------ config

std::string to_string(McScale s) {
  return s == McScale::levels ? "levels" : "logs";
}

std::string to_string(McEstimator e) {
  switch (e) {
    case McEstimator::diff_in_means: return "diff_in_means";
    case McEstimator::gmlm: return "gmlm";
    case McEstimator::gmlm_trimmed: return "gmlm_trimmed";
  }
  return "?";
}

McScale parse_mc_scale(const std::string& s) {
  if (s == "levels") return McScale::levels;
  if (s == "logs") return McScale::logs;
  fail(ErrorKind::invalid_argument,
       "unknown scale '" + s + "' (expected levels or logs)");
}

McEstimator parse_mc_estimator(const std::string& s) {
  if (s == "diff_in_means") return McEstimator::diff_in_means;
  if (s == "gmlm") return McEstimator::gmlm;
  if (s == "gmlm_trimmed") return McEstimator::gmlm_trimmed;
  fail(ErrorKind::invalid_argument,
       "unknown estimator '" + s +
           "' (expected diff_in_means, gmlm or gmlm_trimmed)");
}

void McConfig::validate(std::size_t population_size) const {
  require(!sizes.empty(), ErrorKind::invalid_argument, "mc: no sample sizes");
  for (std::size_t n : sizes) {
    require(n >= 4 && n % 2 == 0, ErrorKind::invalid_argument,
            "mc: sample size " + std::to_string(n) + " must be even and >= 4");
    require(n <= population_size, ErrorKind::invalid_argument,
            "mc: sample size " + std::to_string(n) +
                " exceeds the population size " +
                std::to_string(population_size));
  }
  require(replications >= 1, ErrorKind::invalid_argument,
          "mc: at least one replication is required");
  require(ci_level > 0.0 && ci_level < 1.0, ErrorKind::invalid_argument,
          "mc: CI level must lie in (0, 1)");
  require(!estimators.empty(), ErrorKind::invalid_argument,
          "mc: no estimators");
  require(!orders.empty(), ErrorKind::invalid_argument, "mc: empty R grid");
  require(trim_hi > 0.0 && trim_hi <= 1.0, ErrorKind::invalid_argument,
          "mc: trim_hi must lie in (0, 1]");
  const bool needs_gmlm = std::any_of(
      estimators.begin(), estimators.end(),
      [](McEstimator e) { return e != McEstimator::diff_in_means; });
  if (needs_gmlm) {
    require(T0 >= 1, ErrorKind::invalid_argument,
            "mc: T0 must be positive for the GMLM estimators");
    BootstrapConfig{bootstrap_replicates}.validate();
    BootstrapConfig{tuning_replicates}.validate();
  }
}

// ------------------------------------------------------------ simulation

std::pair<Sample, Sample> draw_two_samples(const Population& pop,
                                           std::size_t N,
                                           std::mt19937_64& rng) {
  require(N >= 2 && N % 2 == 0, ErrorKind::invalid_argument,
          "draw_two_samples: N must be even and positive");
  require(N <= pop.size(), ErrorKind::invalid_argument,
          "draw_two_samples: N exceeds the population size");
  // Partial Fisher-Yates over the index set.
  std::vector<std::size_t> idx(pop.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  for (std::size_t i = 0; i < N; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, idx.size() - 1);
    std::swap(idx[i], idx[pick(rng)]);
  }
  const std::size_t half = N / 2;
  std::vector<double> t(half);
  std::vector<double> c(half);
  for (std::size_t i = 0; i < half; ++i) {
    t[i] = pop.values()[idx[i]];
    c[i] = pop.values()[idx[half + i]];
  }
  return {Sample(std::move(t)), Sample(std::move(c))};
}

ReplicationResult run_replication(const Population& pop, std::size_t N,
                                  const McConfig& cfg, std::size_t replicate) {
  if (cfg.scale == McScale::logs) {
    require(pop.is_positive(), ErrorKind::data_error,
            "mc: the log scale needs a positive population");
  }
  const double z = boost::math::quantile(boost::math::normal(),
                                         0.5 + 0.5 * cfg.ci_level);
  auto rng = make_stream(
      {cfg.seed, purpose(StreamPurpose::two_sample_draw), N, replicate});
  auto [t_raw, c_raw] = draw_two_samples(pop, N, rng);
  const Sample t = to_scale(std::move(t_raw), cfg.scale);
  const Sample c = to_scale(std::move(c_raw), cfg.scale);

  ReplicationResult out;
  out.N = N;
  out.replicate = replicate;
  for (McEstimator e : cfg.estimators) {
    if (e == McEstimator::diff_in_means) {
      out.records.push_back(diff_in_means(t, c, z));
    } else {
      out.records.push_back(gmlm_location(pop, N, cfg, replicate, t, c, e, z));
    }
  }
  return out;
}

std::vector<McRow> summarize(const std::vector<ReplicationResult>& reps,
                             const McConfig& cfg) {
  const double z = boost::math::quantile(boost::math::normal(),
                                         0.5 + 0.5 * cfg.ci_level);
  std::vector<McRow> rows;
  for (std::size_t n : cfg.sizes) {
    for (std::size_t k = 0; k < cfg.estimators.size(); ++k) {
      McRow row;
      row.estimator = cfg.estimators[k];
      row.N = n;
      double sq = 0.0, ab = 0.0, cov = 0.0, len = 0.0, jr = 0.0;
      std::vector<double> Rs;
      for (const auto& rep : reps) {
        if (rep.N != n) continue;
        const EstimatorRecord& r = rep.records[k];
        if (!r.ok) {
          ++row.failures;
          continue;
        }
        ++row.replications;
        sq += r.estimate * r.estimate;
        ab += std::abs(r.estimate);
        cov += r.covers ? 1.0 : 0.0;
        len += 2.0 * z * r.se;
        jr += r.j_reject ? 1.0 : 0.0;
        Rs.push_back(static_cast<double>(r.R));
      }
      const double m = static_cast<double>(row.replications);
      if (row.replications > 0) {
        row.rmse = std::sqrt(sq / m);
        row.mae = ab / m;
        row.coverage = cov / m;
        row.avg_length = len / m;
        row.j_rate = jr / m;
        row.median_R = median(Rs);
      } else {
        row.rmse = row.mae = row.coverage = row.avg_length = nan();
        row.j_rate = row.median_R = nan();
      }
      if (row.estimator == McEstimator::diff_in_means) {
        row.j_rate = nan();
        row.median_R = nan();
      }
      rows.push_back(row);
    }
  }
  return rows;
}

McResult run_study(const Population& pop, const McConfig& cfg) {
  cfg.validate(pop.size());
  McResult result;
  const std::size_t per = cfg.replications;
  result.replications.resize(cfg.sizes.size() * per);
  parallel_for(result.replications.size(), cfg.threads, [&](std::size_t i) {
    result.replications[i] =
        run_replication(pop, cfg.sizes[i / per], cfg, i % per);
  });
  result.rows = summarize(result.replications, cfg);
  return result;
}

}  // namespace gmlm
