#include <cmath>
#include <numbers>

#include <gtest/gtest.h>

#include "localrhat/counterexamples.hpp"

using namespace localrhat;

namespace {

// E(X | X > median) as 2 * integral of Q(p) over (1/2, 1), midpoint rule in t = -log(1 - p).
double upper_half_mean_numeric(const DistributionSpec& s) {
  const int steps = 200000;
  const double t0 = std::numbers::ln2;
  const double t1 = 30.0;
  const double h = (t1 - t0) / steps;
  double acc = 0.0;
  for (int k = 0; k < steps; ++k) {
    const double t = t0 + (k + 0.5) * h;
    const double p = -std::expm1(-t);
    acc += quantile(s, p) * std::exp(-t) * h;
  }
  return 2.0 * acc;
}

}  // namespace

TEST(FXi, ValuesAndContinuity) {
  EXPECT_NEAR(f_xi(0.0), std::numbers::ln2, 1e-15);
  EXPECT_NEAR(f_xi(-1.0), 0.25, 1e-15);
  EXPECT_NEAR(f_xi(0.5), (std::sqrt(2.0) - 1.0) / 0.25, 1e-14);
  EXPECT_NEAR(f_xi(1e-9), f_xi(2e-8), 1e-7);
  EXPECT_THROW(f_xi(1.0), Error);
}

TEST(Solver, ExponentialAgainstUniform) {
  const auto p = solve_counterexample(0.0, -1.0, 1.0, 0.0);
  const auto* g2 = p.spec2.as<family::Gpd>();
  ASSERT_NE(g2, nullptr);
  EXPECT_NEAR(g2->sigma, 4.0 * std::numbers::ln2, 1e-12);
  EXPECT_NEAR(g2->mu, 1.0 - 2.0 * std::numbers::ln2, 1e-12);
  EXPECT_NEAR(p.lambda, 4.0 * std::numbers::ln2, 1e-12);
}

TEST(Solver, ConditionalMeanMatchesQuadrature) {
  for (double xi : {-0.8, -0.3, 0.0, 0.2, 0.4}) {
    const auto s = DistributionSpec::gpd(0.5, 1.3, xi);
    EXPECT_NEAR(gpd_upper_half_mean(0.5, 1.3, xi), upper_half_mean_numeric(s), 2e-3) << xi;
  }
}

TEST(Solver, RandomInputsSatisfyConstraints) {
  Rng rng(314);
  for (int t = 0; t < 100; ++t) {
    const double xi1 = -2.0 + 2.9 * rng.uniform();
    double xi2 = -2.0 + 2.9 * rng.uniform();
    if (xi2 == xi1) xi2 += 0.1;
    const double sigma1 = 0.1 + 5.0 * rng.uniform();
    const double mu1 = -5.0 + 10.0 * rng.uniform();
    const auto p = solve_counterexample(xi1, xi2, sigma1, mu1);
    const auto* a = p.spec1.as<family::Gpd>();
    const auto* b = p.spec2.as<family::Gpd>();
    const double scale = std::max(1.0, std::abs(gpd_mean(a->mu, a->sigma, a->xi)));
    EXPECT_NEAR(gpd_mean(a->mu, a->sigma, a->xi), gpd_mean(b->mu, b->sigma, b->xi), 1e-10 * scale);
    EXPECT_NEAR(gpd_upper_half_mean(a->mu, a->sigma, a->xi), gpd_upper_half_mean(b->mu, b->sigma, b->xi),
                1e-10 * std::max(scale, std::abs(gpd_upper_half_mean(a->mu, a->sigma, a->xi))));
  }
}

TEST(Solver, Rejections) {
  EXPECT_THROW(solve_counterexample(0.3, 0.3, 1.0, 0.0), Error);
  EXPECT_THROW(solve_counterexample(1.0, 0.0, 1.0, 0.0), Error);
  EXPECT_THROW(solve_counterexample(0.0, -1.0, 0.0, 0.0), Error);
}

TEST(Demo, LocalDiagnosticSeesWhatMomentsMiss) {
  const auto pair = solve_counterexample(0.0, -1.0, 1.0, 0.0);
  const auto s = demo_false_negative(pair, 4, 1000, 40, 9);
  EXPECT_EQ(s.values.size(), 40u);
  EXPECT_GT(s.rhat_inf_fraction, 0.9);
  EXPECT_LT(s.split_rhat_fraction, 0.5);
  EXPECT_EQ(to_json(pair)["spec2"]["family"], "gpd");
}
