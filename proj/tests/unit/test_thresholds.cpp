#include <cmath>
#include <vector>

#include <gtest/gtest.h>

#include "localrhat/thresholds.hpp"

using namespace localrhat;

TEST(AsymptoticThreshold, AgainstReferenceQuantiles) {
  EXPECT_NEAR(r_lim(4, 0.05, 400), std::sqrt(1.0 + 7.814727903251179 / 400.0), 1e-12);
  EXPECT_NEAR(r_lim(100, 0.05, 400), std::sqrt(1.0 + 123.2252214533618 / 400.0), 1e-10);
  EXPECT_NEAR(type1_error(4, 1.01, 400), 0.04519221940437128, 1e-12);
  EXPECT_NEAR(type1_error(4, 1.01, 50), 0.8000421057928462, 1e-12);
}

TEST(AsymptoticThreshold, RoundTrip) {
  for (std::size_t m : {2u, 4u, 8u, 15u}) {
    for (double alpha : {0.005, 0.01, 0.05, 0.1}) {
      for (double ess : {50.0, 400.0, 5000.0}) {
        EXPECT_NEAR(type1_error(m, r_lim(m, alpha, ess), ess), alpha, 1e-9);
      }
    }
  }
}

TEST(AsymptoticThreshold, Monotone) {
  EXPECT_LT(r_lim(4, 0.05, 800), r_lim(4, 0.05, 400));
  EXPECT_LT(r_lim(4, 0.05, 400), r_lim(8, 0.05, 400));
  EXPECT_LT(r_lim(4, 0.1, 400), r_lim(4, 0.01, 400));
  EXPECT_GT(type1_error(4, 1.01, 100), type1_error(4, 1.01, 200));
  EXPECT_THROW(r_lim(1, 0.05, 400), Error);
  EXPECT_THROW(r_lim(4, 0.0, 400), Error);
  EXPECT_THROW(type1_error(4, 0.99, 400), Error);
}

TEST(EmpiricalQuantile, LowerInverse) {
  std::vector<double> v;
  for (int k = 1; k <= 100; ++k) v.push_back(k);
  EXPECT_EQ(upper_empirical_quantile(v, 0.05), 95.0);
  EXPECT_EQ(upper_empirical_quantile(v, 0.055), 95.0);
  EXPECT_EQ(upper_empirical_quantile(v, 0.5), 50.0);
  EXPECT_EQ(mc_pvalue(95.5, v), 6.0 / 101.0);
  EXPECT_EQ(mc_pvalue(1000.0, v), 1.0 / 101.0);
  EXPECT_EQ(mc_pvalue(0.0, v), 1.0);
}

TEST(NullQuantile, TableMatchesRecomputation) {
  for (std::size_t m : {2u, 4u}) {
    for (double alpha : {0.005, 0.05}) {
      const ThresholdSpec spec{m, 1, alpha, 400.0, 2000, kDefaultSeed};
      EXPECT_EQ(mc_null_quantile(spec), mc_null_quantile(spec, true)) << m << ' ' << alpha;
    }
  }
}

TEST(NullQuantile, MonotoneAndAboveOne) {
  const ThresholdSpec a{4, 1, 0.1, 400.0, 2000, kDefaultSeed};
  const ThresholdSpec b{4, 1, 0.01, 400.0, 2000, kDefaultSeed};
  const ThresholdSpec c{8, 1, 0.1, 400.0, 2000, kDefaultSeed};
  EXPECT_GT(mc_null_quantile(a), 1.0);
  EXPECT_LT(mc_null_quantile(a), mc_null_quantile(b));
  EXPECT_LT(mc_null_quantile(a), mc_null_quantile(c));
  // R-hat-infinity is a sup over many points, so it sits above the pointwise limit
  EXPECT_GT(mc_null_quantile(a), r_lim(4, 0.1, 400));
}

TEST(NullQuantile, SeedDeterminism) {
  const ThresholdSpec s{3, 1, 0.05, 300.0, 200, 77};
  EXPECT_EQ(null_sample(s), null_sample(s));
  ThresholdSpec t = s;
  t.seed = 78;
  EXPECT_NE(null_sample(s), null_sample(t));
  ThresholdSpec bad = s;
  bad.reps = 10;
  EXPECT_THROW(null_sample(bad), Error);
}

TEST(MvThresholds, OrderingAndPresets) {
  const auto t = mv_thresholds(4, 3, 0.05, 400.0, 1000, 5);
  EXPECT_GT(t.margin, 1.0);
  EXPECT_GE(t.copula, t.margin);  // 2^(d-1) = 4 > d = 3
  ASSERT_TRUE(mv_threshold_preset(8, 0.05));
  EXPECT_EQ(mv_threshold_preset(8, 0.05)->copula, 1.05);
  EXPECT_FALSE(mv_threshold_preset(5, 0.05));
  EXPECT_FALSE(mv_threshold_preset(4, 0.01));
  EXPECT_THROW(mv_thresholds(4, 1, 0.05), Error);
}
