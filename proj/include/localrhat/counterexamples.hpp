#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "localrhat/error.hpp"
#include "localrhat/simulate.hpp"
#include "localrhat/statdist.hpp"
#include "localrhat/thresholds.hpp"

namespace localrhat {

inline constexpr double kXiPoleMargin = 1e-6;

/// f(xi) = (2^xi - 1) / (xi (1 - xi)), continued by log 2 at xi = 0.
inline double f_xi(double xi) {
  if (!(xi < 1.0 - kXiPoleMargin)) throw Error("f_xi requires xi < 1");
  if (std::abs(xi) < 1e-8) {
    const double l = std::numbers::ln2;
    // (2^xi - 1)/xi = l + l^2 xi / 2 + ..., 1/(1 - xi) = 1 + xi + ...
    return l * (1.0 + xi * (0.5 * l + 1.0));
  }
  return std::expm1(xi * std::numbers::ln2) / (xi * (1.0 - xi));
}

inline double gpd_mean(double mu, double sigma, double xi) { return mu + sigma / (1.0 - xi); }

/// E(X | X > median) of a GPD.
inline double gpd_upper_half_mean(double mu, double sigma, double xi) {
  return gpd_mean(mu, sigma, xi) + sigma * f_xi(xi);
}

struct GpdPair {
  DistributionSpec spec1;
  DistributionSpec spec2;
  double lambda;
};

/// Second GPD sharing the mean and the mean above the median with gpd(mu1, sigma1, xi1).
inline GpdPair solve_counterexample(double xi1, double xi2, double sigma1, double mu1) {
  if (!(xi1 < 1.0 - kXiPoleMargin && xi2 < 1.0 - kXiPoleMargin)) throw Error("counterexample requires xi < 1");
  if (xi1 == xi2) throw Error("counterexample requires xi1 != xi2");
  if (!(sigma1 > 0.0)) throw Error("counterexample requires sigma1 > 0");
  const double lambda = f_xi(xi1) / f_xi(xi2);
  const double sigma2 = lambda * sigma1;
  const double mu2 = mu1 - sigma1 * (lambda / (1.0 - xi2) - 1.0 / (1.0 - xi1));

  const double mean1 = gpd_mean(mu1, sigma1, xi1);
  const double mean2 = gpd_mean(mu2, sigma2, xi2);
  const double up1 = gpd_upper_half_mean(mu1, sigma1, xi1);
  const double up2 = gpd_upper_half_mean(mu2, sigma2, xi2);
  const double scale = std::max({1.0, std::abs(mean1), std::abs(up1)});
  if (std::abs(mean1 - mean2) > 1e-10 * scale || std::abs(up1 - up2) > 1e-10 * scale) {
    throw NumericalError("solve_counterexample: moment constraints not met");
  }
  return {DistributionSpec::gpd(mu1, sigma1, xi1), DistributionSpec::gpd(mu2, sigma2, xi2), lambda};
}

inline nlohmann::json to_json(const GpdPair& p) {
  return {{"spec1", to_json(p.spec1)}, {"spec2", to_json(p.spec2)}, {"lambda", p.lambda}};
}

struct DetectionSummary {
  std::size_t reps = 0;
  double split_rhat_fraction = 0.0;  // split-R-hat > 1.01
  double rank_rhat_fraction = 0.0;   // rank-R-hat > 1.01
  double rhat_inf_fraction = 0.0;    // R-hat-infinity > threshold
  double rhat_inf_threshold = 0.0;
  std::vector<UnivariateStats> values;
};

/// Detection rates over replications of (m - 1) chains from spec1 and one from spec2.
/// Without an explicit threshold, R-hat-infinity uses the null quantile at alpha = 0.05
/// and target ESS nm.
inline DetectionSummary demo_false_negative(const DistributionSpec& spec1, const DistributionSpec& spec2,
                                            std::size_t m, std::size_t n, std::size_t reps, std::uint64_t seed,
                                            std::optional<double> threshold = std::nullopt) {
  if (reps == 0) throw Error("demo_false_negative requires reps >= 1");
  DetectionSummary s;
  s.reps = reps;
  s.rhat_inf_threshold = threshold ? *threshold
                                   : mc_null_quantile(ThresholdSpec{m, 1, 0.05, static_cast<double>(m * n), 2000,
                                                                    kDefaultSeed});
  s.values = replicate_univariate(one_odd_chain(spec1, spec2, m), n, reps, seed);
  for (const auto& v : s.values) {
    s.split_rhat_fraction += v.split_rhat > 1.01 ? 1.0 : 0.0;
    s.rank_rhat_fraction += v.rank_rhat > 1.01 ? 1.0 : 0.0;
    s.rhat_inf_fraction += v.rhat_inf > s.rhat_inf_threshold ? 1.0 : 0.0;
  }
  const auto r = static_cast<double>(reps);
  s.split_rhat_fraction /= r;
  s.rank_rhat_fraction /= r;
  s.rhat_inf_fraction /= r;
  return s;
}

inline DetectionSummary demo_false_negative(const GpdPair& pair, std::size_t m, std::size_t n, std::size_t reps,
                                            std::uint64_t seed, std::optional<double> threshold = std::nullopt) {
  return demo_false_negative(pair.spec1, pair.spec2, m, n, reps, seed, threshold);
}

}  // namespace localrhat
