#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <vector>

#include <boost/math/distributions/normal.hpp>
#include <gtest/gtest.h>

#include "gmlm/error.hpp"
#include "gmlm/montecarlo.hpp"

using namespace gmlm;

namespace {

Population index_population(std::size_t n) {
  std::vector<double> v(n);
  std::iota(v.begin(), v.end(), 0.0);
  return Population(std::move(v), "index");
}

McConfig small_config() {
  McConfig cfg;
  cfg.sizes = {40};
  cfg.replications = 6;
  cfg.T0 = 3;
  cfg.bootstrap_replicates = 60;
  cfg.tuning_replicates = 50;
  cfg.orders = {2, 3, 4};
  cfg.seed = 17;
  return cfg;
}

}  // namespace

TEST(Population, Validation) {
  EXPECT_THROW(Population(std::vector<double>{}), Error);
  EXPECT_THROW(Population({1.0, NAN}), Error);
  EXPECT_TRUE(Population({1.0, 2.0}).is_positive());
  EXPECT_FALSE(Population({0.0, 2.0}).is_positive());
}

TEST(Population, SyntheticIsDeterministicAndHeavyTailed) {
  SyntheticPopulationSpec spec;
  spec.size = 20000;
  const Population a = Population::synthetic(spec);
  const Population b = Population::synthetic(spec);
  EXPECT_EQ(a.values(), b.values());
  EXPECT_EQ(a.size(), 20000u);
  EXPECT_TRUE(a.is_positive());
  // The tail component inflates the upper quantiles relative to the body.
  std::vector<double> logs;
  for (double x : a.values()) logs.push_back(std::log(x));
  std::sort(logs.begin(), logs.end());
  const double q999 = logs[static_cast<std::size_t>(0.999 * 20000)];
  EXPECT_GT(q999 - 12.0, 3.09 * 0.6 * 1.1);
  spec.seed += 1;
  EXPECT_NE(Population::synthetic(spec).values(), a.values());
}

TEST(Population, Lognormal) {
  const Population p = Population::lognormal(50000, 1.0, 0.5, 3);
  double m = 0.0;
  for (double x : p.values()) m += std::log(x);
  m /= 50000.0;
  EXPECT_NEAR(m, 1.0, 0.01);
}

TEST(DrawTwoSamples, SizesAndDisjointness) {
  const Population pop = index_population(1000);
  std::mt19937_64 rng(5);
  const auto [t, c] = draw_two_samples(pop, 500, rng);
  EXPECT_EQ(t.size(), 250u);
  EXPECT_EQ(c.size(), 250u);
  std::set<double> seen(t.values().begin(), t.values().end());
  for (double x : c.values()) EXPECT_FALSE(seen.count(x));
  seen.insert(c.values().begin(), c.values().end());
  EXPECT_EQ(seen.size(), 500u);
}

TEST(DrawTwoSamples, FullPopulationIsAPartition) {
  const Population pop = index_population(64);
  std::mt19937_64 rng(6);
  const auto [t, c] = draw_two_samples(pop, 64, rng);
  std::vector<double> all(t.values().begin(), t.values().end());
  all.insert(all.end(), c.values().begin(), c.values().end());
  std::sort(all.begin(), all.end());
  EXPECT_EQ(all, pop.values());
}

TEST(DrawTwoSamples, FixedSeedIsReproducible) {
  const Population pop = index_population(300);
  std::mt19937_64 a(7), b(7);
  const auto x = draw_two_samples(pop, 100, a);
  const auto y = draw_two_samples(pop, 100, b);
  EXPECT_TRUE(std::ranges::equal(x.first.values(), y.first.values()));
  EXPECT_TRUE(std::ranges::equal(x.second.values(), y.second.values()));
  std::mt19937_64 r(1);
  EXPECT_THROW(draw_two_samples(pop, 301, r), Error);
  EXPECT_THROW(draw_two_samples(pop, 7, r), Error);
}

TEST(McConfig, Validation) {
  McConfig cfg = small_config();
  EXPECT_NO_THROW(cfg.validate(100));
  EXPECT_THROW(cfg.validate(30), Error);
  McConfig odd = cfg;
  odd.sizes = {41};
  EXPECT_THROW(odd.validate(100), Error);
  McConfig none = cfg;
  none.replications = 0;
  EXPECT_THROW(none.validate(100), Error);
  McConfig ci = cfg;
  ci.ci_level = 1.0;
  EXPECT_THROW(ci.validate(100), Error);
  McConfig lowb = cfg;
  lowb.bootstrap_replicates = 10;
  EXPECT_THROW(lowb.validate(100), Error);
}

TEST(Labels, RoundTrip) {
  for (McScale s : {McScale::levels, McScale::logs}) {
    EXPECT_EQ(parse_mc_scale(to_string(s)), s);
  }
  for (McEstimator e : {McEstimator::diff_in_means, McEstimator::gmlm,
                        McEstimator::gmlm_trimmed}) {
    EXPECT_EQ(parse_mc_estimator(to_string(e)), e);
  }
  EXPECT_THROW(parse_mc_scale("sqrt"), Error);
}

TEST(RunReplication, DiffInMeansIsTheMeanDifference) {
  const Population pop = Population::lognormal(2000, 0.0, 1.0, 9);
  McConfig cfg = small_config();
  cfg.estimators = {McEstimator::diff_in_means};
  for (std::size_t rep = 0; rep < 5; ++rep) {
    const ReplicationResult r = run_replication(pop, 40, cfg, rep);
    auto rng = make_stream(
        {cfg.seed, purpose(StreamPurpose::two_sample_draw), 40, rep});
    const auto [t, c] = draw_two_samples(pop, 40, rng);
    ASSERT_EQ(r.records.size(), 1u);
    EXPECT_EQ(r.records[0].estimate, t.mean() - c.mean());
    const double se = std::sqrt(t.variance() / 20.0 + c.variance() / 20.0);
    EXPECT_NEAR(r.records[0].se, se, 1e-15 * se);
  }
}

TEST(RunStudy, ConstantPopulationIsExact) {
  const Population pop(std::vector<double>(500, 3.25));
  const McResult res = run_study(pop, small_config());
  ASSERT_EQ(res.rows.size(), 3u);
  for (const McRow& row : res.rows) {
    EXPECT_EQ(row.rmse, 0.0);
    EXPECT_EQ(row.mae, 0.0);
    EXPECT_EQ(row.coverage, 1.0);
    EXPECT_EQ(row.replications, 6u);
    EXPECT_EQ(row.failures, 0u);
  }
  for (const auto& rep : res.replications) {
    for (const auto& rec : rep.records) {
      EXPECT_EQ(rec.estimate, 0.0);
      EXPECT_TRUE(rec.covers);
    }
  }
}

TEST(RunStudy, ThreadCountDoesNotChangeResults) {
  const Population pop = Population::lognormal(3000, 0.0, 1.0, 10);
  McConfig one = small_config();
  McConfig many = one;
  many.threads = 3;
  const McResult a = run_study(pop, one);
  const McResult b = run_study(pop, many);
  ASSERT_EQ(a.replications.size(), b.replications.size());
  for (std::size_t i = 0; i < a.replications.size(); ++i) {
    for (std::size_t k = 0; k < a.replications[i].records.size(); ++k) {
      EXPECT_EQ(a.replications[i].records[k].estimate,
                b.replications[i].records[k].estimate);
      EXPECT_EQ(a.replications[i].records[k].se,
                b.replications[i].records[k].se);
      EXPECT_EQ(a.replications[i].records[k].R,
                b.replications[i].records[k].R);
    }
  }
  for (std::size_t i = 0; i < a.rows.size(); ++i) {
    EXPECT_EQ(a.rows[i].rmse, b.rows[i].rmse);
  }
}

TEST(RunStudy, LogScaleGmlmTracksTheMeanDifference) {
  // On log outcomes the tails are light and the two estimators agree up to
  // sampling noise.
  const Population pop = Population::lognormal(20000, 0.0, 1.0, 11);
  McConfig cfg = small_config();
  cfg.sizes = {400};
  cfg.replications = 20;
  cfg.scale = McScale::logs;
  cfg.estimators = {McEstimator::diff_in_means, McEstimator::gmlm};
  const McResult res = run_study(pop, cfg);
  double gap = 0.0, se = 0.0;
  for (const auto& rep : res.replications) {
    ASSERT_TRUE(rep.records[1].ok) << rep.records[1].message;
    gap += std::abs(rep.records[1].estimate - rep.records[0].estimate);
    se += rep.records[0].se;
  }
  EXPECT_LT(gap, 0.5 * se);
  EXPECT_THROW(run_study(Population({-1.0, 1.0, 2.0, 3.0}), [] {
                 McConfig c = small_config();
                 c.sizes = {4};
                 c.scale = McScale::logs;
                 return c;
               }()),
               Error);
}

TEST(Summarize, Metrics) {
  McConfig cfg;
  cfg.sizes = {10};
  cfg.estimators = {McEstimator::diff_in_means, McEstimator::gmlm};
  std::vector<ReplicationResult> reps;
  const double est[4] = {1.0, -2.0, 0.5, 3.0};
  const std::size_t Rs[4] = {4, 2, 8, 6};
  for (int i = 0; i < 4; ++i) {
    ReplicationResult r;
    r.N = 10;
    r.replicate = static_cast<std::size_t>(i);
    EstimatorRecord dm{McEstimator::diff_in_means, true, "", est[i], 1.0,
                       i % 2 == 0, false, 0};
    EstimatorRecord g{McEstimator::gmlm, i != 3, "", est[i] / 2, 0.5,
                      true, i == 0, Rs[i]};
    r.records = {dm, g};
    reps.push_back(r);
  }
  const auto rows = summarize(reps, cfg);
  ASSERT_EQ(rows.size(), 2u);
  const double z = boost::math::quantile(boost::math::normal(), 0.975);
  EXPECT_NEAR(rows[0].rmse, std::sqrt((1 + 4 + 0.25 + 9) / 4.0), 1e-15);
  EXPECT_NEAR(rows[0].mae, 6.5 / 4.0, 1e-15);
  EXPECT_EQ(rows[0].coverage, 0.5);
  EXPECT_NEAR(rows[0].avg_length, 2 * z, 1e-14);
  EXPECT_TRUE(std::isnan(rows[0].j_rate));
  EXPECT_TRUE(std::isnan(rows[0].median_R));
  EXPECT_EQ(rows[1].replications, 3u);
  EXPECT_EQ(rows[1].failures, 1u);
  EXPECT_NEAR(rows[1].rmse, std::sqrt((0.25 + 1 + 0.0625) / 3.0), 1e-15);
  EXPECT_NEAR(rows[1].j_rate, 1.0 / 3.0, 1e-15);
  EXPECT_EQ(rows[1].median_R, 4.0);
  EXPECT_EQ(rows[1].coverage, 1.0);
}
