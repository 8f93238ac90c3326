#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numbers>
#include <optional>
#include <span>
#include <vector>

#include <nlohmann/json.hpp>

#include "localrhat/diagnostics.hpp"
#include "localrhat/error.hpp"
#include "localrhat/optimize.hpp"
#include "localrhat/statdist.hpp"

namespace localrhat {

/// Known stationary laws F_1..F_m of the chains.
struct PopulationModel {
  std::vector<DistributionSpec> chains;

  std::size_t size() const noexcept { return chains.size(); }
  void validate() const {
    if (chains.size() < 2) throw Error("population model needs at least two chains");
  }
};

inline PopulationModel population_from_json(const nlohmann::json& j) {
  const auto& arr = j.is_object() && j.contains("chains") ? j.at("chains") : j;
  if (!arr.is_array()) throw Error("population model JSON must be an array of distributions");
  PopulationModel model;
  for (const auto& item : arr) model.chains.push_back(distribution_from_json(item));
  model.validate();
  return model;
}

/// R(x) from the chain cdf values at x.
inline double r_from_cdfs(std::span<const double> f) {
  const auto m = static_cast<double>(f.size());
  double between = 0.0;
  double within = 0.0;
  for (std::size_t j = 0; j < f.size(); ++j) {
    within += f[j] * (1.0 - f[j]);
    for (std::size_t k = j + 1; k < f.size(); ++k) between += (f[j] - f[k]) * (f[j] - f[k]);
  }
  if (within <= 0.0) return between > 0.0 ? kDisjointSupports : 1.0;
  return std::sqrt(1.0 + between / (m * within));
}

inline double population_local_r(const PopulationModel& model, double x) {
  model.validate();
  std::vector<double> f(model.size());
  for (std::size_t j = 0; j < f.size(); ++j) f[j] = cdf(model.chains[j], x);
  return r_from_cdfs(f);
}

inline LocalCurve population_curve(const PopulationModel& model, std::span<const double> xs) {
  LocalCurve out;
  out.points.reserve(xs.size());
  for (double x : xs) {
    const double r = population_local_r(model, x);
    out.points.push_back({x, r, std::nullopt, is_disjoint(r)});
  }
  return out;
}

// ---------------------------------------------------------------------------
// Closed forms: m-1 chains share F, one chain follows F_m
// ---------------------------------------------------------------------------

namespace detail {
inline void require_m(std::size_t m) {
  if (m < 2) throw Error("closed-form R requires m >= 2");
}
}  // namespace detail

/// F_1..F_{m-1} = U(-sigma, sigma), F_m = U(-sigma_m, sigma_m).
inline double uniform_local_r(double x, double sigma, double sigma_m, std::size_t m) {
  detail::require_m(m);
  if (!(sigma > 0.0 && sigma <= sigma_m)) throw Error("uniform model requires 0 < sigma <= sigma_m");
  const double ax = std::abs(x);
  const double md = static_cast<double>(m);
  if (ax >= sigma_m || ax == 0.0) return 1.0;
  if (ax >= sigma) return std::sqrt(1.0 + (md - 1.0) / md * (1.0 - 2.0 / (1.0 + sigma_m / ax)));
  const double gap = 1.0 / sigma - 1.0 / sigma_m;
  const double den =
      md * md / ((md - 1.0) * x * x) - md * (1.0 / (sigma * sigma) + 1.0 / ((md - 1.0) * sigma_m * sigma_m));
  return std::sqrt(1.0 + gap * gap / den);
}

inline double uniform_r_infinity(double sigma, double sigma_m, std::size_t m) {
  detail::require_m(m);
  if (!(sigma > 0.0 && sigma <= sigma_m)) throw Error("uniform model requires 0 < sigma <= sigma_m");
  const double md = static_cast<double>(m);
  return std::sqrt(1.0 + (md - 1.0) / md * (1.0 - 2.0 / (1.0 + sigma_m / sigma)));
}

/// F_1..F_{m-1} = Pareto(alpha, eta), F_m = Pareto(alpha, eta_m).
inline double pareto_local_r(double x, double alpha, double eta, double eta_m, std::size_t m) {
  detail::require_m(m);
  if (!(alpha > 0.0 && eta > 0.0 && eta <= eta_m)) throw Error("pareto model requires alpha > 0, 0 < eta <= eta_m");
  const double md = static_cast<double>(m);
  if (x <= eta) return 1.0;
  if (x <= eta_m) return std::sqrt(1.0 + (std::pow(x / eta, alpha) - 1.0) / md);
  const double ea = std::pow(eta, alpha);
  const double ema = std::pow(eta_m, alpha);
  const double den = (ea + ema / (md - 1.0)) * std::pow(x, alpha) - (ea * ea + ema * ema / (md - 1.0));
  return std::sqrt(1.0 + (ea - ema) * (ea - ema) / (md * den));
}

inline double pareto_r_infinity(double alpha, double eta, double eta_m, std::size_t m) {
  detail::require_m(m);
  if (!(alpha > 0.0 && eta > 0.0 && eta <= eta_m)) throw Error("pareto model requires alpha > 0, 0 < eta <= eta_m");
  return std::sqrt(1.0 + (std::pow(eta_m / eta, alpha) - 1.0) / static_cast<double>(m));
}

/// m = 2, U(-2b, 2b) against Laplace(0, b); R(x) = R_1(x / b).
inline double laplace_uniform_r(double xnorm) {
  const double ax = std::abs(xnorm);
  const double e = std::exp(-ax);
  if (ax >= 2.0) return std::sqrt(1.0 + e / (2.0 * (2.0 - e)));
  const double num = ax / 2.0 - 1.0 + e;
  return std::sqrt(1.0 + 0.5 * num * num / (1.0 - ax * ax / 4.0 + e * (2.0 - e)));
}

inline double laplace_uniform_r_infinity() {
  return std::sqrt(1.0 + 1.0 / (2.0 * (2.0 * std::numbers::e * std::numbers::e - 1.0)));
}

/// Lower bounds on R-infinity when F_m starts at a_m inside the support of F
/// (given F(a_m)), or F ends at b inside the support of F_m (given F_m(b)).
inline double left_endpoint_bound(double f_at_am, std::size_t m) {
  detail::require_m(m);
  return std::sqrt(1.0 + f_at_am / (static_cast<double>(m) * (1.0 - f_at_am)));
}

inline double right_endpoint_bound(double fm_at_b, std::size_t m) {
  detail::require_m(m);
  const double md = static_cast<double>(m);
  return std::sqrt(1.0 + (md - 1.0) * (1.0 - fm_at_b) / (md * fm_at_b));
}

// ---------------------------------------------------------------------------
// Population R-infinity
// ---------------------------------------------------------------------------

struct PopulationRInfinity {
  double value;
  double argmax_x;
};

enum class PopulationMethod { analytic, grid_refine };

namespace detail {

// Index of the single chain that differs from the others, if the model has that shape.
inline std::optional<std::size_t> odd_chain(const PopulationModel& model) {
  const auto m = model.size();
  for (std::size_t odd = 0; odd < m; ++odd) {
    const auto& ref = model.chains[odd == 0 ? 1 : 0];
    bool ok = !(model.chains[odd] == ref);
    for (std::size_t j = 0; ok && j < m; ++j) {
      if (j != odd && !(model.chains[j] == ref)) ok = false;
    }
    if (ok) return odd;
  }
  return std::nullopt;
}

inline std::optional<PopulationRInfinity> analytic_r_infinity(const PopulationModel& model) {
  const auto m = model.size();
  if (std::all_of(model.chains.begin(), model.chains.end(), [&](const auto& s) { return s == model.chains[0]; })) {
    return PopulationRInfinity{1.0, quantile(model.chains[0], 1e-8)};  // R is 1 everywhere
  }
  const auto odd = odd_chain(model);
  if (!odd) return std::nullopt;
  const auto& fm = model.chains[*odd];
  const auto& f = model.chains[*odd == 0 ? 1 : 0];

  if (const auto* u = f.as<family::Uniform>()) {
    const auto* um = fm.as<family::Uniform>();
    if (um && u->a == -u->b && um->a == -um->b && u->b <= um->b) {
      return PopulationRInfinity{uniform_r_infinity(u->b, um->b, m), -u->b};
    }
    const auto* lp = fm.as<family::Laplace>();
    if (m == 2 && lp && lp->mu == 0.0 && u->a == -u->b && u->b == 2.0 * lp->b) {
      return PopulationRInfinity{laplace_uniform_r_infinity(), -u->b};
    }
  }
  if (const auto* p = f.as<family::Pareto>()) {
    const auto* pm = fm.as<family::Pareto>();
    if (pm && pm->alpha == p->alpha && p->eta <= pm->eta) {
      return PopulationRInfinity{pareto_r_infinity(p->alpha, p->eta, pm->eta, m), pm->eta};
    }
  }
  if (const auto* lp = f.as<family::Laplace>(); lp && m == 2) {
    const auto* u = fm.as<family::Uniform>();
    if (u && lp->mu == 0.0 && u->a == -u->b && u->b == 2.0 * lp->b) {
      return PopulationRInfinity{laplace_uniform_r_infinity(), -u->b};
    }
  }
  return std::nullopt;
}

// True when some x has every F_j(x) in {0, 1} but not all equal. It suffices to
// look at support endpoints.
inline bool has_disjoint_point(const PopulationModel& model) {
  std::vector<std::pair<double, double>> sup;
  for (const auto& s : model.chains) sup.push_back(support(s));
  for (const auto& [lo, hi] : sup) {
    for (double e : {lo, hi}) {
      if (!std::isfinite(e)) continue;
      bool all_degenerate = true;
      bool any0 = false;
      bool any1 = false;
      for (const auto& [a, b] : sup) {
        if (e <= a) any0 = true;
        else if (e >= b) any1 = true;
        else all_degenerate = false;
      }
      if (all_degenerate && any0 && any1) return true;
    }
  }
  return false;
}

}  // namespace detail

/// Quantile of the equal-weight mixture of the chain laws.
inline double mixture_quantile(const PopulationModel& model, double p) {
  double lo = std::numeric_limits<double>::infinity();
  double hi = -lo;
  for (const auto& s : model.chains) {
    const double q = quantile(s, p);
    lo = std::min(lo, q);
    hi = std::max(hi, q);
  }
  const auto mix = [&](double x) {
    double acc = 0.0;
    for (const auto& s : model.chains) acc += cdf(s, x);
    return acc / static_cast<double>(model.size());
  };
  for (int it = 0; it < 200 && hi - lo > 1e-15 * std::max(1.0, std::abs(lo)); ++it) {
    const double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;
    if (mix(mid) < p) lo = mid;
    else hi = mid;
  }
  return 0.5 * (lo + hi);
}

struct PopulationGridOptions {
  std::size_t points = 10000;
  double p_min = 1e-8;
  double x_tol = 1e-10;
};

/// R-infinity by a quantile-spaced grid over the mixture law, then golden-section
/// refinement around the best grid point.
inline PopulationRInfinity population_r_infinity_grid(const PopulationModel& model,
                                                      const PopulationGridOptions& opt = {}) {
  model.validate();
  if (detail::has_disjoint_point(model)) throw Error("R∞ infinite/undefined: chain supports do not overlap");
  if (opt.points < 3) throw Error("population grid needs at least 3 points");
  std::vector<double> xs(opt.points);
  const double span = 1.0 - 2.0 * opt.p_min;
  for (std::size_t k = 0; k < opt.points; ++k) {
    const double p = opt.p_min + span * static_cast<double>(k) / static_cast<double>(opt.points - 1);
    xs[k] = mixture_quantile(model, p);
  }
  std::size_t best = 0;
  double best_r = -1.0;
  for (std::size_t k = 0; k < xs.size(); ++k) {
    const double r = population_local_r(model, xs[k]);
    if (is_disjoint(r)) throw Error("R∞ infinite/undefined: chain supports do not overlap");
    if (r > best_r) {
      best_r = r;
      best = k;
    }
  }
  const double a = xs[best == 0 ? 0 : best - 1];
  const double b = xs[std::min(best + 1, xs.size() - 1)];
  const auto refined = golden_section_max([&](double x) { return population_local_r(model, x); }, a, b, opt.x_tol);
  if (refined.value > best_r) return {refined.value, refined.x};
  return {best_r, xs[best]};
}

inline PopulationRInfinity population_r_infinity(const PopulationModel& model,
                                                 PopulationMethod method = PopulationMethod::analytic) {
  model.validate();
  if (method == PopulationMethod::analytic) {
    if (auto r = detail::analytic_r_infinity(model)) return *r;
  }
  return population_r_infinity_grid(model);
}

}  // namespace localrhat
