#pragma once

// Two-sample simulation study on a finite population: repeated draws without
// replacement, so the true effect is zero, comparing the difference in means
// with tuned GMLM location estimators.

#include <cstddef>
#include <cstdint>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "gmlm/quantile_core.hpp"
#include "gmlm/random.hpp"
#include "gmlm/tuning.hpp"

namespace gmlm {

// Log-normal body with an inflated-variance log-normal tail component.
struct SyntheticPopulationSpec {
  std::size_t size = 50000;
  double body_log_mean = 12.0;
  double body_log_sd = 0.6;
  double tail_log_mean = 12.0;
  double tail_log_sd = 1.3;
  double tail_weight = 0.05;
  std::uint64_t seed = kDefaultSeed;
};

class Population {
 public:
  Population() = default;
  // Throws data-error on an empty list or non-finite values.
  explicit Population(std::vector<double> values, std::string source = "");

  static Population synthetic(const SyntheticPopulationSpec& spec);
  // Exactly log-normal(log_mean, log_sd^2), for null-calibration studies.
  static Population lognormal(std::size_t size, double log_mean,
                              double log_sd, std::uint64_t seed);

  const std::vector<double>& values() const noexcept { return values_; }
  std::size_t size() const noexcept { return values_.size(); }
  const std::string& source() const noexcept { return source_; }
  bool is_positive() const;

 private:
  std::vector<double> values_;
  std::string source_;
};

enum class McScale { levels, logs };
enum class McEstimator { diff_in_means, gmlm, gmlm_trimmed };

std::string to_string(McScale s);
std::string to_string(McEstimator e);
McScale parse_mc_scale(const std::string& s);
McEstimator parse_mc_estimator(const std::string& s);

struct McConfig {
  std::vector<std::size_t> sizes{500, 1000, 2000};
  std::size_t replications = 1000;
  std::size_t T0 = 16;
  double ci_level = 0.95;
  std::size_t bootstrap_replicates = 500;
  // Replicates for the weight matrices inside placebo fits.
  std::size_t tuning_replicates = 200;
  std::uint64_t seed = kDefaultSeed;
  McScale scale = McScale::levels;
  std::vector<McEstimator> estimators{McEstimator::diff_in_means,
                                      McEstimator::gmlm,
                                      McEstimator::gmlm_trimmed};
  std::vector<std::size_t> orders{2, 3, 4, 5, 6, 7, 8, 9, 10,
                                  11, 12, 13, 14, 15, 16};
  double trim_hi = 0.98;  // upper-tail trim of the trimmed variant
  std::size_t threads = 1;

  // Throws invalid-argument on odd sizes, sizes above `population_size`,
  // fewer than one replication or an out-of-range CI level.
  void validate(std::size_t population_size) const;
};

// Two disjoint halves of N / 2 units drawn without replacement.
std::pair<Sample, Sample> draw_two_samples(const Population& pop,
                                           std::size_t N, std::mt19937_64& rng);

struct EstimatorRecord {
  McEstimator estimator = McEstimator::diff_in_means;
  bool ok = false;
  std::string message;
  double estimate = 0.0;
  double se = 0.0;
  bool covers = false;    // CI covers the true effect, zero
  bool j_reject = false;  // J-test rejects at 5% (GMLM only)
  std::size_t R = 0;      // selected order (GMLM only)
};

struct ReplicationResult {
  std::size_t N = 0;
  std::size_t replicate = 0;
  std::vector<EstimatorRecord> records;  // in cfg.estimators order
};

// One replication: draw the two samples, estimate with every configured
// estimator. GMLM variants tune R on T0 fresh placebo draws, then use the
// optimal weight and the sandwich standard error. Estimator failures are
// recorded, not thrown. Streams are keyed by (seed, N, replicate).
ReplicationResult run_replication(const Population& pop, std::size_t N,
                                  const McConfig& cfg, std::size_t replicate);

struct McRow {
  McEstimator estimator = McEstimator::diff_in_means;
  std::size_t N = 0;
  double rmse = 0.0;
  double mae = 0.0;
  double coverage = 0.0;
  double avg_length = 0.0;
  double j_rate = 0.0;    // NaN for the difference in means
  double median_R = 0.0;  // NaN for the difference in means
  std::size_t replications = 0;  // successful ones
  std::size_t failures = 0;
};

struct McResult {
  std::vector<McRow> rows;  // by N, then estimator
  std::vector<ReplicationResult> replications;
};

// Runs every (N, replication) and aggregates. Bit-identical for a given seed
// whatever the thread count.
McResult run_study(const Population& pop, const McConfig& cfg);

// Metric table from finished replications.
std::vector<McRow> summarize(const std::vector<ReplicationResult>& reps,
                             const McConfig& cfg);

}  // namespace gmlm
