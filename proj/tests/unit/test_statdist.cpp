#include <cmath>
#include <numbers>
#include <vector>

#include <gtest/gtest.h>

#include "ks.hpp"
#include "localrhat/statdist.hpp"

using namespace localrhat;

TEST(NormalQuantile, KnownValues) {
  EXPECT_DOUBLE_EQ(std_normal_quantile(0.5), 0.0);
  // reference values from an independent implementation (scipy.stats.norm.ppf)
  EXPECT_NEAR(std_normal_quantile(0.975), 1.959963984540054, 1e-12);
  EXPECT_NEAR(std_normal_quantile(0.3), -0.5244005127080409, 1e-12);
  EXPECT_NEAR(std_normal_quantile(1e-10), -6.361340902404056, 1e-9);
  EXPECT_DOUBLE_EQ(std_normal_cdf(0.0), 0.5);
}

TEST(NormalQuantile, RoundTrip) {
  for (double p = 1e-6; p < 1.0; p += 0.0137) {
    EXPECT_NEAR(std_normal_cdf(std_normal_quantile(p)), p, 1e-12) << p;
  }
  EXPECT_THROW(std_normal_quantile(0.0), Error);
  EXPECT_THROW(std_normal_quantile(1.0), Error);
}

TEST(IncompleteGamma, AgainstReference) {
  EXPECT_NEAR(regularized_gamma_p(3.3, 2.5), 0.38454531873871534, 1e-13);
  EXPECT_NEAR(regularized_gamma_q(10.0, 40.0), 3.925932226286184e-09, 1e-20);
  EXPECT_EQ(regularized_gamma_p(2.0, 0.0), 0.0);
}

TEST(ChiSquareQuantile, KnownValues) {
  EXPECT_NEAR(chi_square_quantile(3, 0.95), 7.814727903251179, 1e-9);
  const double z = std_normal_quantile(0.975);
  EXPECT_NEAR(chi_square_quantile(1, 0.95), z * z, 1e-10);
  EXPECT_NEAR(chi_square_quantile(7, 0.999), 24.321886347856854, 1e-8);
  EXPECT_NEAR(chi_square_quantile(2, 0.01), 0.020100671707002873, 1e-12);
  // sqrt(1 + z / 400) = 1.144 for df = 99
  EXPECT_NEAR(std::sqrt(1.0 + chi_square_quantile(99, 0.95) / 400.0), 1.144, 5e-4);
}

TEST(ChiSquareQuantile, InvertsCdfAndIsMonotone) {
  for (double df : {1.0, 2.0, 3.0, 7.0, 19.0, 99.0}) {
    double prev = 0.0;
    for (double p : {0.001, 0.01, 0.1, 0.5, 0.9, 0.95, 0.99, 0.999}) {
      const double x = chi_square_quantile(df, p);
      EXPECT_NEAR(chi_square_cdf(df, x), p, 1e-10);
      EXPECT_GT(x, prev);
      prev = x;
    }
  }
  for (double p : {0.05, 0.5, 0.95}) {
    EXPECT_LT(chi_square_quantile(3, p), chi_square_quantile(4, p));
  }
  EXPECT_THROW(chi_square_quantile(0.5, 0.5), Error);
  EXPECT_THROW(chi_square_quantile(3, 1.0), Error);
}

TEST(Distributions, CdfExamples) {
  EXPECT_EQ(cdf(DistributionSpec::pareto(0.8, 1.0), 1.0), 0.0);
  EXPECT_NEAR(cdf(DistributionSpec::gpd(0.0, 1.0, 0.0), std::numbers::ln2), 0.5, 1e-15);
  EXPECT_DOUBLE_EQ(cdf(DistributionSpec::uniform(-1.0, 1.0), 0.5), 0.75);
  EXPECT_NEAR(cdf(DistributionSpec::gpd(0.2, 1.5, 0.3), 1.7), 0.582949327685854, 1e-13);
  EXPECT_NEAR(cdf(DistributionSpec::laplace(0.1, 0.7), -0.4), 0.24477082977847656, 1e-14);
}

TEST(Distributions, QuantileExamples) {
  EXPECT_DOUBLE_EQ(quantile(DistributionSpec::uniform(0.0, 1.0), 0.25), 0.25);
  EXPECT_NEAR(quantile(DistributionSpec::pareto(1.0, 1.0), 0.5), 2.0, 1e-14);
  const double l2 = std::numbers::ln2;
  EXPECT_NEAR(quantile(DistributionSpec::gpd(1.0 - 2.0 * l2, 4.0 * l2, -1.0), 0.5), 1.0, 1e-14);
  EXPECT_NEAR(quantile(DistributionSpec::gpd(-1.0, 2.0, -0.4), 0.8), 1.373472195596233, 1e-13);
  EXPECT_NEAR(quantile(DistributionSpec::cauchy(1.0, 2.0), 0.9), 7.155367074350509, 1e-12);
  EXPECT_THROW(quantile(DistributionSpec::uniform(0.0, 1.0), 0.0), Error);
}

TEST(Distributions, RoundTripRandomSpecs) {
  Rng rng(99);
  for (int t = 0; t < 1000; ++t) {
    const double a = rng.uniform() * 4.0 - 2.0;
    const double s = 0.1 + 3.0 * rng.uniform();
    DistributionSpec spec = DistributionSpec::uniform(0.0, 1.0);
    switch (t % 8) {
      case 0: spec = DistributionSpec::uniform(a, a + s); break;
      case 1: spec = DistributionSpec::normal(a, s); break;
      case 2: spec = DistributionSpec::pareto(s, 0.5 + s); break;
      case 3: spec = DistributionSpec::gpd(a, s, rng.uniform() * 1.6 - 0.8); break;
      case 4: spec = DistributionSpec::exponential(s); break;
      case 5: spec = DistributionSpec::laplace(a, s); break;
      case 6: spec = DistributionSpec::cauchy(a, s); break;
      default: spec = DistributionSpec::chi_square(1.0 + std::floor(10.0 * rng.uniform())); break;
    }
    const double p = 0.001 + 0.998 * rng.uniform();
    EXPECT_NEAR(cdf(spec, quantile(spec, p)), p, 1e-10) << spec.family_name();
  }
}

TEST(Distributions, GpdZeroShapeMatchesExponential) {
  const auto g = DistributionSpec::gpd(0.0, 1.0, 0.0);
  const auto e = DistributionSpec::exponential(1.0);
  for (double x = 0.0; x < 20.0; x += 0.37) EXPECT_NEAR(cdf(g, x), cdf(e, x), 1e-12);
  for (double p = 0.01; p < 1.0; p += 0.05) EXPECT_NEAR(quantile(g, p), quantile(e, p), 1e-12);
  // the near-zero branch joins the general formula
  const auto tiny = DistributionSpec::gpd(0.0, 1.0, 5e-13);
  const auto small = DistributionSpec::gpd(0.0, 1.0, 5e-11);
  EXPECT_NEAR(cdf(tiny, 2.0), cdf(small, 2.0), 1e-10);
}

TEST(Distributions, ParameterValidation) {
  EXPECT_THROW(DistributionSpec::uniform(1.0, 1.0), Error);
  EXPECT_THROW(DistributionSpec::normal(0.0, 0.0), Error);
  EXPECT_THROW(DistributionSpec::pareto(-1.0, 1.0), Error);
  EXPECT_THROW(DistributionSpec::gpd(0.0, -1.0, 0.1), Error);
  EXPECT_THROW(DistributionSpec::laplace(0.0, 0.0), Error);
  EXPECT_THROW(DistributionSpec::cauchy(0.0, -2.0), Error);
  EXPECT_THROW(DistributionSpec::chi_square(0.5), Error);
}

TEST(Sampling, UniformKs) {
  Rng rng(2024);
  std::vector<double> xs(100000);
  const auto u = DistributionSpec::uniform(0.0, 1.0);
  for (auto& x : xs) x = sample(u, rng);
  EXPECT_LT(testsupport::ks_one_sample_stat(xs, [](double x) { return x; }), 0.01);
}

TEST(Sampling, ParetoSupportAndDeterminism) {
  Rng rng(5);
  const auto p = DistributionSpec::pareto(0.8, 1.0);
  for (int i = 0; i < 10000; ++i) EXPECT_GE(sample(p, rng), 1.0);
  Rng a(17), b(17);
  EXPECT_EQ(sample(p, a), sample(p, b));
}

TEST(Json, RoundTrip) {
  for (const auto& s : {DistributionSpec::uniform(-1, 2), DistributionSpec::gpd(0.5, 2, -0.3),
                        DistributionSpec::exponential(3), DistributionSpec::chi_square(4)}) {
    EXPECT_EQ(distribution_from_json(to_json(s)), s);
  }
  EXPECT_THROW(distribution_from_json(nlohmann::json{{"family", "beta"}, {"params", {{"a", 1}}}}), Error);
  EXPECT_THROW(distribution_from_json(nlohmann::json{{"family", "normal"}, {"params", {{"mu", 1}}}}), Error);
}
