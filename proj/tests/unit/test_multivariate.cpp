#include <cmath>
#include <numbers>
#include <vector>

#include <gtest/gtest.h>

#include "localrhat/multivariate.hpp"

using namespace localrhat;

namespace {

ChainSet small_mvn(std::size_t n, double rho, std::uint64_t seed) {
  return generate_mvn({Eigen::MatrixXd::Identity(2, 2), bivariate_correlation(rho)}, n, seed);
}

// Exhaustive maximum over all pooled coordinate values.
double brute_sup(const ChainSet& cs, const Direction& dir) {
  const auto xs = cs.pooled(0);
  const auto ys = cs.pooled(1);
  double best = 1.0;
  for (double x : xs) {
    for (double y : ys) {
      const std::vector<double> pt{x, y};
      best = std::max(best, mv_local_rhat(cs, pt, dir));
    }
  }
  return best;
}

}  // namespace

TEST(Directions, Enumeration) {
  const auto c = canonical_directions(3);
  ASSERT_EQ(c.size(), 4u);
  for (const auto& d : c) EXPECT_TRUE(d.canonical());
  EXPECT_EQ(all_directions(3).size(), 8u);
  EXPECT_EQ((Direction{3, 0b010}).str(), "<=,>=,<=");
}

TEST(MvLocalRhat, ReducesToUnivariate) {
  const auto cs = generate_iid({DistributionSpec::normal(0, 1), DistributionSpec::normal(0.3, 1)}, 60, 4);
  for (double x = -2.0; x <= 2.0; x += 0.05) {
    const std::vector<double> pt{x};
    EXPECT_EQ(mv_local_rhat(cs, pt, Direction{1, 0}), local_rhat(cs, x));
  }
  MvGridOptions opt;
  opt.all_directions = true;
  EXPECT_EQ(rhat_max_infinity(cs, opt).value, rhat_infinity(cs).value);
}

TEST(MvRhatInfinity, MatchesExhaustiveSearch) {
  const auto cs = small_mvn(25, 0.8, 12);
  for (const auto& dir : all_directions(2)) {
    EXPECT_EQ(mv_rhat_infinity(cs, dir).value, brute_sup(cs, dir)) << dir.str();
  }
  const auto best = rhat_max_infinity(cs);
  EXPECT_EQ(mv_local_rhat(cs, best.argmax_x, best.direction), best.value);
}

TEST(MvRhatInfinity, NegationMapsDirections) {
  const auto cs = small_mvn(40, 0.5, 3);
  const auto neg = cs.transformed([](double v, std::size_t p) { return p == 1 ? -v : v; });
  for (const auto& dir : all_directions(2)) {
    const Direction flipped{2, dir.ge_mask ^ 0b10};
    EXPECT_EQ(mv_rhat_infinity(cs, dir).value, mv_rhat_infinity(neg, flipped).value);
  }
}

TEST(MvRhatInfinity, ThinnedGridIsSymmetric) {
  const auto cs = small_mvn(3000, 0.5, 6);
  const std::size_t g = 101;
  const auto a = coordinate_grid(cs, 0, g);
  const auto neg = cs.transformed([](double v, std::size_t) { return -v; });
  const auto b = coordinate_grid(neg, 0, g);
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t k = 0; k < a.size(); ++k) EXPECT_EQ(a[k], -b[b.size() - 1 - k]);
  EXPECT_LE(a.size(), g + 1);
  EXPECT_EQ(per_coordinate_budget(2, 1'000'000), 1000u);
  EXPECT_EQ(per_coordinate_budget(3, 1'000'000), 100u);
  EXPECT_EQ(per_coordinate_budget(5, 1'000'000), 15u);
}

TEST(MvRhatInfinity, DirectionCap) {
  MvGridOptions opt;
  opt.max_dims = 2;
  const auto cs = generate_mvn(std::vector<Eigen::MatrixXd>(2, Eigen::MatrixXd::Identity(3, 3)), 10, 1);
  try {
    rhat_max_infinity(cs, opt);
    FAIL();
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("log-likelihood"), std::string::npos);
  }
}

TEST(TwoStep, OverrideThresholds) {
  const auto cs = small_mvn(200, 0.9, 1);
  MvDiagnoseConfig cfg;
  cfg.thresholds = MvThresholds{10.0, 1.0};
  const auto rep = two_step_diagnosis(cs, cfg);
  EXPECT_TRUE(rep.margins_converged);
  EXPECT_FALSE(rep.copula_converged);
  EXPECT_FALSE(rep.converged);
  ASSERT_EQ(rep.margin_rhat_inf.size(), 2u);
  EXPECT_EQ(rep.margin_rhat_inf[1], rhat_infinity(cs.coordinate(1)).value);
  const auto j = to_json(rep);
  EXPECT_EQ(j["verdict"], "not_converged");
  cfg.thresholds.reset();
  cfg.use_preset = true;
  const auto four = generate_mvn(std::vector<Eigen::MatrixXd>(4, Eigen::MatrixXd::Identity(2, 2)), 100, 2);
  const auto r4 = two_step_diagnosis(four, cfg);
  EXPECT_EQ(r4.margin_threshold, 1.03);
  EXPECT_EQ(r4.copula_threshold, 1.03);
}

TEST(CopulaBounds, ClosedForms) {
  EXPECT_NEAR(frechet_r_infinity_bound(2), std::sqrt(1.5), 1e-15);
  EXPECT_NEAR(pairwise_bound(2, 2), std::sqrt(1.5), 1e-15);
  EXPECT_NEAR(nlod_bound(1'000'000), std::sqrt(1.0 + 1.0 / (2.0 * (std::numbers::e - 1.0))), 1e-4);
  EXPECT_NEAR(plod_bound(2), 1.0379548493, 1e-9);
  for (std::size_t d = 3; d < 12; ++d) {
    EXPECT_GT(plod_bound(d), plod_bound(d - 1));
    EXPECT_GT(nlod_bound(d), nlod_bound(d - 1));
    // maximum of 1 + f_d / 2 found by a plain scan
    double scan = 0.0;
    for (int k = 1; k < 200000; ++k) scan = std::max(scan, detail::plod_f(k / 200000.0, static_cast<double>(d)));
    EXPECT_NEAR(plod_bound(d), std::sqrt(1.0 + 0.5 * scan), 1e-8);
  }
}

TEST(Copulas, BivariateNormalCdf) {
  EXPECT_NEAR(bivariate_normal_cdf(0, 0, 0.5), 1.0 / 3.0, 1e-12);
  // arcsine law P(X<=0,Y<=0) = 1/4 + asin(rho) / (2 pi)
  EXPECT_NEAR(bivariate_normal_cdf(0, 0, -0.7), 0.25 + std::asin(-0.7) / (2 * std::numbers::pi), 1e-12);
  EXPECT_NEAR(bivariate_normal_cdf(0.3, -0.5, 0.7), 0.28323259571179427, 1e-10);
}

TEST(Copulas, PopulationRInfinity) {
  EXPECT_NEAR(copula_population_r_infinity(Copula::lower(2), Copula::upper(2)), std::sqrt(1.5), 1e-6);
  EXPECT_NEAR(copula_population_r_infinity(Copula::independence(2), Copula::upper(2)), plod_bound(2), 1e-8);
  for (std::size_t d : {2u, 3u, 5u}) {
    EXPECT_NEAR(copula_population_r_infinity(Copula::independence(d), Copula::lower(d)), nlod_bound(d), 1e-6) << d;
  }
  EXPECT_EQ(copula_population_r_infinity(Copula::gaussian(0.0), Copula::independence(2)), 1.0);
}

TEST(Copulas, MixturesStayBelowFrechetBound) {
  const double cap = frechet_r_infinity_bound(2);
  for (double w : {0.1, 0.5, 0.9}) {
    const auto mix = Copula::mixture({w, 1.0 - w}, {Copula::lower(2), Copula::upper(2)});
    const auto r = copula_population_r_infinity(mix, Copula::independence(2), 200);
    EXPECT_LE(r, cap + 1e-12);
    EXPECT_GE(r, 1.0);
  }
  EXPECT_THROW(Copula::mixture({0.5, 0.6}, {Copula::lower(2), Copula::upper(2)}), Error);
}
