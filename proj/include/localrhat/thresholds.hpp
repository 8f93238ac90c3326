#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <vector>

#include "localrhat/chains.hpp"
#include "localrhat/diagnostics.hpp"
#include "localrhat/error.hpp"
#include "localrhat/parallel.hpp"
#include "localrhat/rng.hpp"
#include "localrhat/statdist.hpp"
#include "localrhat/threshold_table.hpp"

namespace localrhat {

/// Asymptotic threshold for local R-hat at type I error alpha:
/// sqrt(1 + z / ess), z the (1 - alpha) quantile of chi-square(m - 1).
inline double r_lim(std::size_t m, double alpha, double ess) {
  if (m < 2) throw Error("r_lim requires m >= 2");
  if (!(alpha > 0.0 && alpha < 1.0)) throw Error("alpha must lie in (0,1)");
  if (!(ess > 0.0)) throw Error("ess must be positive");
  return std::sqrt(1.0 + chi_square_quantile(static_cast<double>(m - 1), 1.0 - alpha) / ess);
}

/// Asymptotic type I error of the cutoff `threshold` for local R-hat:
/// P(chi-square(m - 1) >= ess * (threshold^2 - 1)).
inline double type1_error(std::size_t m, double threshold, double ess) {
  if (m < 2) throw Error("type1_error requires m >= 2");
  if (!(threshold >= 1.0)) throw Error("type1_error requires threshold >= 1");
  if (!(ess > 0.0)) throw Error("ess must be positive");
  return chi_square_sf(static_cast<double>(m - 1), ess * (threshold * threshold - 1.0));
}

inline constexpr std::uint64_t kDefaultSeed = 20230611;

/// Monte Carlo calibration settings for the null distribution of R-hat-infinity.
struct ThresholdSpec {
  std::size_t m = 4;
  std::size_t d = 1;
  double alpha = 0.05;
  double target_ess = 400.0;
  std::size_t reps = 2000;
  std::uint64_t seed = kDefaultSeed;

  /// Chain length of the null simulation: i.i.d. chains have ESS = nm.
  std::size_t chain_length() const {
    return static_cast<std::size_t>(std::llround(target_ess / static_cast<double>(m)));
  }

  void validate() const {
    if (m < 2) throw Error("threshold spec: m must be >= 2");
    if (d < 1) throw Error("threshold spec: d must be >= 1");
    if (!(alpha > 0.0 && alpha < 1.0)) throw Error("threshold spec: alpha must lie in (0,1)");
    if (!(target_ess > 0.0)) throw Error("threshold spec: target_ess must be positive");
    if (reps < 100) throw Error("threshold spec: reps must be >= 100");
    if (chain_length() < 4) throw Error("threshold spec: n = round(target_ess / m) must be >= 4");
  }
};

/// Sorted R-hat-infinity values over `reps` replications of m i.i.d. chains of
/// length n drawn from `dist`. Replication r uses seed derive_seed(seed, r).
inline std::vector<double> null_rhat_infinity_sample(std::size_t m, std::size_t n, std::size_t reps,
                                                     std::uint64_t seed,
                                                     const DistributionSpec& dist = DistributionSpec::uniform(0.0, 1.0)) {
  std::vector<double> out(reps);
  const std::vector<DistributionSpec> specs(m, dist);
  parallel_for(reps, [&](std::size_t r) {
    out[r] = rhat_infinity(generate_iid(specs, n, derive_seed(seed, r))).value;
  });
  std::sort(out.begin(), out.end());
  return out;
}

/// Lower inverse of the empirical cdf at level 1 - alpha (no interpolation).
inline double upper_empirical_quantile(const std::vector<double>& sorted, double alpha) {
  if (sorted.empty()) throw Error("empirical quantile of an empty sample");
  const double level = (1.0 - alpha) * static_cast<double>(sorted.size());
  auto k = static_cast<std::size_t>(std::ceil(level - 1e-9));
  k = std::clamp<std::size_t>(k, 1, sorted.size());
  return sorted[k - 1];
}

inline std::vector<double> null_sample(const ThresholdSpec& spec) {
  spec.validate();
  return null_rhat_infinity_sample(spec.m, spec.chain_length(), spec.reps, spec.seed);
}

/// (1 - alpha) null quantile of R-hat-infinity. Specs on the shipped table grid
/// (target_ess 400, 2000 reps, default seed) are answered from the table unless
/// `recompute` is set; the table holds exactly what recomputation produces.
inline double mc_null_quantile(const ThresholdSpec& spec, bool recompute = false) {
  spec.validate();
  if (!recompute && spec.reps == 2000 && spec.seed == kDefaultSeed && spec.target_ess == 400.0) {
    if (auto cached = cached_null_quantile(spec.m, spec.alpha)) return *cached;
  }
  return upper_empirical_quantile(null_sample(spec), spec.alpha);
}

/// Add-one Monte Carlo p-value: (1 + #{null >= observed}) / (reps + 1).
inline double mc_pvalue(double observed, const std::vector<double>& sorted_null) {
  const auto ge = static_cast<std::size_t>(
      sorted_null.end() - std::lower_bound(sorted_null.begin(), sorted_null.end(), observed));
  return (1.0 + static_cast<double>(ge)) / (static_cast<double>(sorted_null.size()) + 1.0);
}

inline double mc_pvalue(double observed, const ThresholdSpec& spec) {
  if (!(observed >= 1.0)) throw Error("mc_pvalue: observed R-hat-infinity must be >= 1");
  return mc_pvalue(observed, null_sample(spec));
}

struct MvThresholds {
  double margin;  ///< cutoff for each marginal R-hat-infinity
  double copula;  ///< cutoff for the max over directions of multivariate R-hat-infinity
};

/// Two-step thresholds at overall level alpha: alpha/2 split by Bonferroni over the
/// d margins, and alpha/2 split over the 2^(d-1) canonical directions. Both are upper
/// quantiles of the univariate null R-hat-infinity (one shared simulation).
inline MvThresholds mv_thresholds(std::size_t m, std::size_t d, double alpha, double target_ess = 400.0,
                                  std::size_t reps = 2000, std::uint64_t seed = kDefaultSeed) {
  if (d < 2) throw Error("mv_thresholds requires d >= 2");
  if (d > 60) throw Error("mv_thresholds: d too large");
  ThresholdSpec spec{m, d, alpha, target_ess, reps, seed};
  spec.validate();
  const auto sample = null_sample(spec);
  const double margin_level = 0.5 * alpha / static_cast<double>(d);
  const double copula_level = 0.5 * alpha / std::ldexp(1.0, static_cast<int>(d) - 1);
  return {upper_empirical_quantile(sample, margin_level), upper_empirical_quantile(sample, copula_level)};
}

/// Rule-of-thumb two-step thresholds at alpha = 0.05 for m = 4 and m = 8.
inline std::optional<MvThresholds> mv_threshold_preset(std::size_t m, double alpha) {
  if (alpha != 0.05) return std::nullopt;
  if (m == 4) return MvThresholds{1.03, 1.03};
  if (m == 8) return MvThresholds{1.04, 1.05};
  return std::nullopt;
}

}  // namespace localrhat
