#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <ostream>
#include <vector>

#include <nlohmann/json.hpp>

#include "localrhat/chains.hpp"
#include "localrhat/diagnostics.hpp"
#include "localrhat/error.hpp"
#include "localrhat/thresholds.hpp"

namespace localrhat {

enum class Verdict { converged, not_converged };

inline const char* to_string(Verdict v) { return v == Verdict::converged ? "converged" : "not_converged"; }

struct DiagnosticReport {
  std::size_t m = 0;
  std::size_t n = 0;
  double rhat_inf = 1.0;
  double argmax_x = 0.0;
  double split_rhat = 1.0;
  double rank_rhat_bulk = 1.0;
  double rank_rhat_tail = 1.0;
  double rank_rhat = 1.0;
  std::optional<double> min_local_ess;
  double threshold_used = 0.0;
  std::optional<double> p_value;
  Verdict verdict = Verdict::converged;
};

struct DiagnoseConfig {
  double alpha = 0.05;
  std::optional<double> threshold;  // override
  GridSpec grid = grid::AllPoints{};
  std::size_t mc_reps = 2000;  // 0: no p-value
  std::uint64_t seed = kDefaultSeed;
  std::size_t ess_points = 100;
};

/// Smallest local ESS over quantile-spaced pooled draws (degenerate points skipped).
inline std::optional<double> min_local_ess(const ChainSet& cs, std::size_t points = 100) {
  auto pooled = cs.pooled();
  std::sort(pooled.begin(), pooled.end());
  std::vector<double> xs;
  for (std::size_t k = 1; k <= points; ++k) {
    const auto idx = static_cast<std::size_t>(static_cast<double>(k) / static_cast<double>(points + 1) *
                                              static_cast<double>(pooled.size() - 1));
    xs.push_back(pooled[idx]);
  }
  xs.erase(std::unique(xs.begin(), xs.end()), xs.end());
  std::optional<double> best;
  for (double x : xs) {
    try {
      const double e = local_ess(cs, x);
      if (!best || e < *best) best = e;
    } catch (const Error&) {
      // constant indicator at this x
    }
  }
  return best;
}

inline DiagnosticReport diagnose(const ChainSet& cs, const DiagnoseConfig& cfg = {}) {
  require_univariate(cs, "diagnose");
  DiagnosticReport r;
  r.m = cs.chains();
  r.n = cs.iterations();
  const auto inf = rhat_infinity(cs, cfg.grid);
  r.rhat_inf = inf.value;
  r.argmax_x = inf.argmax_x;
  r.split_rhat = trad_split_rhat(cs);
  const auto rr = rank_rhat(cs);
  r.rank_rhat_bulk = rr.bulk;
  r.rank_rhat_tail = rr.tail;
  r.rank_rhat = rr.max;
  r.min_local_ess = min_local_ess(cs, cfg.ess_points);

  ThresholdSpec spec{cs.chains(), 1, cfg.alpha, static_cast<double>(cs.total()), cfg.mc_reps, cfg.seed};
  if (cfg.mc_reps > 0) {
    const auto null = null_sample(spec);
    r.threshold_used = cfg.threshold ? *cfg.threshold : upper_empirical_quantile(null, cfg.alpha);
    r.p_value = mc_pvalue(r.rhat_inf, null);
  } else {
    spec.reps = 2000;
    r.threshold_used = cfg.threshold ? *cfg.threshold : mc_null_quantile(spec);
  }
  r.verdict = r.rhat_inf >= r.threshold_used ? Verdict::not_converged : Verdict::converged;
  return r;
}

namespace detail {
inline nlohmann::json json_number(double v) {
  if (std::isinf(v)) return "inf";
  if (std::isnan(v)) return nullptr;
  return v;
}
}  // namespace detail

inline nlohmann::json to_json(const DiagnosticReport& r) {
  nlohmann::json j = {{"m", r.m},
                      {"n", r.n},
                      {"rhat_inf", detail::json_number(r.rhat_inf)},
                      {"argmax_x", r.argmax_x},
                      {"split_rhat", detail::json_number(r.split_rhat)},
                      {"rank_rhat_bulk", detail::json_number(r.rank_rhat_bulk)},
                      {"rank_rhat_tail", detail::json_number(r.rank_rhat_tail)},
                      {"rank_rhat", detail::json_number(r.rank_rhat)},
                      {"threshold_used", r.threshold_used},
                      {"verdict", to_string(r.verdict)}};
  j["min_local_ess"] = r.min_local_ess ? nlohmann::json(*r.min_local_ess) : nlohmann::json(nullptr);
  j["p_value"] = r.p_value ? nlohmann::json(*r.p_value) : nlohmann::json(nullptr);
  return j;
}

/// `x,rhat,ess` CSV; with an overlay, a fourth column `rhat_population`.
inline void write_curve_csv(std::ostream& out, const LocalCurve& curve, const LocalCurve* overlay = nullptr) {
  if (overlay && overlay->points.size() != curve.points.size()) throw Error("curve overlay size mismatch");
  out << "x,rhat,ess" << (overlay ? ",rhat_population" : "") << '\n';
  auto val = [](double v) { return std::isinf(v) ? std::string("inf") : format_double(v); };
  for (std::size_t k = 0; k < curve.points.size(); ++k) {
    const auto& p = curve.points[k];
    out << format_double(p.x) << ',' << val(p.rhat) << ',' << (p.ess ? format_double(*p.ess) : std::string());
    if (overlay) out << ',' << val(overlay->points[k].rhat);
    out << '\n';
  }
}

}  // namespace localrhat
