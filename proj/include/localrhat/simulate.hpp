#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "localrhat/chains.hpp"
#include "localrhat/diagnostics.hpp"
#include "localrhat/error.hpp"
#include "localrhat/multivariate.hpp"
#include "localrhat/parallel.hpp"
#include "localrhat/rng.hpp"
#include "localrhat/statdist.hpp"

namespace localrhat {

/// Split-R-hat, rank-R-hat and R-hat-infinity of one univariate chain set.
struct UnivariateStats {
  double split_rhat;
  double rank_rhat;
  double rhat_inf;
};

inline UnivariateStats univariate_stats(const ChainSet& cs) {
  return {trad_split_rhat(cs), rank_rhat(cs).max, rhat_infinity(cs).value};
}

/// m - 1 chains from `base` and one from `odd`.
inline std::vector<DistributionSpec> one_odd_chain(const DistributionSpec& base, const DistributionSpec& odd,
                                                   std::size_t m) {
  if (m < 2) throw Error("at least two chains required");
  std::vector<DistributionSpec> specs(m - 1, base);
  specs.push_back(odd);
  return specs;
}

/// Replications of (m - 1) x base + 1 x odd; replication r uses derive_seed(seed, r).
inline std::vector<UnivariateStats> replicate_univariate(const std::vector<DistributionSpec>& specs, std::size_t n,
                                                         std::size_t reps, std::uint64_t seed) {
  std::vector<UnivariateStats> out(reps);
  parallel_for(reps, [&](std::size_t r) { out[r] = univariate_stats(generate_iid(specs, n, derive_seed(seed, r))); });
  return out;
}

struct SimulationConfig {
  int example = 1;
  std::size_t reps = 500;
  std::uint64_t seed = 1;
  std::optional<std::size_t> m;
  std::optional<std::size_t> n;
  std::size_t d = 5;   // example 5 only
  double rho = 0.9;    // example 4 only
};

struct SimRow {
  std::size_t rep;
  std::string stat;
  double value;
  bool operator==(const SimRow&) const = default;
};

/// Chain set of replication r for one of the six toy examples.
inline ChainSet example_chains(const SimulationConfig& cfg, std::size_t rep) {
  const std::uint64_t s = derive_seed(cfg.seed, rep);
  switch (cfg.example) {
    case 1:
      return generate_iid(one_odd_chain(DistributionSpec::uniform(-0.75, 0.75), DistributionSpec::uniform(-1.0, 1.0),
                                        cfg.m.value_or(4)),
                          cfg.n.value_or(200), s);
    case 2:
      return generate_iid(one_odd_chain(DistributionSpec::pareto(0.8, 1.0), DistributionSpec::pareto(0.8, 1.5),
                                        cfg.m.value_or(4)),
                          cfg.n.value_or(200), s);
    case 3: {
      const double l2 = std::numbers::ln2;
      return generate_iid(one_odd_chain(DistributionSpec::exponential(1.0),
                                        DistributionSpec::uniform(1.0 - 2.0 * l2, 1.0 + 2.0 * l2), cfg.m.value_or(4)),
                          cfg.n.value_or(200), s);
    }
    case 4: {
      const std::size_t m = cfg.m.value_or(2);
      if (m < 2) throw Error("at least two chains required");
      std::vector<Eigen::MatrixXd> covs(m - 1, Eigen::MatrixXd::Identity(2, 2));
      covs.push_back(bivariate_correlation(cfg.rho));
      return generate_mvn(covs, cfg.n.value_or(200), s);
    }
    case 5: {
      const std::size_t m = cfg.m.value_or(4);
      if (m < 2) throw Error("at least two chains required");
      if (cfg.d < 2) throw Error("example 5 requires d >= 2");
      std::vector<Eigen::MatrixXd> covs(m - 1, Eigen::MatrixXd::Identity(cfg.d, cfg.d));
      covs.push_back(random_unitdiag_covariance(cfg.d, derive_seed(s, 0xC0)));
      return generate_mvn(covs, cfg.n.value_or(200), s);
    }
    case 6: {
      const std::size_t m = cfg.m.value_or(4);
      if (m < 2) throw Error("at least two chains required");
      std::vector<double> sig(m - 1, 1.0);
      sig.push_back(2.0);
      return generate_ar1(0.5, sig, cfg.n.value_or(500), s);
    }
    default:
      throw Error("unknown example " + std::to_string(cfg.example) + " (expected 1..6)");
  }
}

/// Long-format replication output `rep,stat,value`.
inline std::vector<SimRow> simulate(const SimulationConfig& cfg) {
  if (cfg.example < 1 || cfg.example > 6) {
    throw Error("unknown example " + std::to_string(cfg.example) + " (expected 1..6)");
  }
  const bool multi = cfg.example == 4 || cfg.example == 5;
  std::vector<std::vector<SimRow>> per(cfg.reps);
  parallel_for(cfg.reps, [&](std::size_t r) {
    const auto cs = example_chains(cfg, r);
    if (multi) {
      const Direction lower{cs.dims(), 0};
      MvGridOptions opt;
      per[r].push_back({r + 1, "rhat_inf", mv_rhat_infinity(cs, lower, opt).value});
      per[r].push_back({r + 1, "rhat_max_inf", rhat_max_infinity(cs, opt).value});
    } else {
      const auto st = univariate_stats(cs);
      per[r].push_back({r + 1, "split_rhat", st.split_rhat});
      per[r].push_back({r + 1, "rank_rhat", st.rank_rhat});
      per[r].push_back({r + 1, "rhat_inf", st.rhat_inf});
    }
  });
  std::vector<SimRow> rows;
  for (auto& v : per) rows.insert(rows.end(), v.begin(), v.end());
  return rows;
}

inline void write_sim_csv(std::ostream& out, const std::vector<SimRow>& rows) {
  out << "rep,stat,value\n";
  for (const auto& r : rows) {
    out << r.rep << ',' << r.stat << ',' << (std::isinf(r.value) ? std::string("inf") : format_double(r.value))
        << '\n';
  }
}

}  // namespace localrhat
