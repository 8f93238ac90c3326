#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <numbers>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "localrhat/chains.hpp"
#include "localrhat/diagnostics.hpp"
#include "localrhat/error.hpp"
#include "localrhat/optimize.hpp"
#include "localrhat/parallel.hpp"
#include "localrhat/statdist.hpp"
#include "localrhat/thresholds.hpp"

namespace localrhat {

// ---------------------------------------------------------------------------
// Directions
// ---------------------------------------------------------------------------

/// Orthant direction: coordinate p uses theta_p >= x_p when bit p of ge_mask is set,
/// theta_p <= x_p otherwise.
struct Direction {
  std::size_t d = 1;
  std::uint64_t ge_mask = 0;

  bool ge(std::size_t p) const noexcept { return (ge_mask >> p) & 1U; }
  bool canonical() const noexcept { return !ge(0); }

  /// e.g. "<=,>=,<="
  std::string str() const {
    std::string out;
    for (std::size_t p = 0; p < d; ++p) {
      if (p) out += ',';
      out += ge(p) ? ">=" : "<=";
    }
    return out;
  }

  bool operator==(const Direction&) const = default;
};

inline constexpr std::size_t kMaxDirectionDims = 12;

/// The 2^(d-1) directions with coordinate 1 fixed to <=.
inline std::vector<Direction> canonical_directions(std::size_t d) {
  if (d < 1 || d > 62) throw Error("directions: unsupported dimension");
  std::vector<Direction> out;
  const std::uint64_t count = std::uint64_t{1} << (d - 1);
  for (std::uint64_t k = 0; k < count; ++k) out.push_back({d, k << 1});
  return out;
}

/// All 2^d directions.
inline std::vector<Direction> all_directions(std::size_t d) {
  if (d < 1 || d > 62) throw Error("directions: unsupported dimension");
  std::vector<Direction> out;
  const std::uint64_t count = std::uint64_t{1} << d;
  for (std::uint64_t k = 0; k < count; ++k) out.push_back({d, k});
  return out;
}

/// Local R-hat of the orthant indicators prod_p 1{theta_p dir_p x_p}.
inline double mv_local_rhat(const ChainSet& cs, std::span<const double> x, const Direction& dir) {
  const std::size_t d = cs.dims();
  if (x.size() != d || dir.d != d) throw Error("mv_local_rhat: dimension mismatch");
  std::vector<std::int64_t> counts(cs.chains(), 0);
  for (std::size_t j = 0; j < cs.chains(); ++j) {
    for (std::size_t i = 0; i < cs.iterations(); ++i) {
      bool in = true;
      for (std::size_t p = 0; p < d && in; ++p) {
        const double v = cs(j, i, p);
        in = dir.ge(p) ? v >= x[p] : v <= x[p];
      }
      counts[j] += in ? 1 : 0;
    }
  }
  return rhat_from_counts(counts, static_cast<std::int64_t>(cs.iterations()));
}

// ---------------------------------------------------------------------------
// Grid evaluation
// ---------------------------------------------------------------------------

struct MvGridOptions {
  std::size_t budget = 1'000'000;  // cap on the number of grid cells
  std::size_t per_coordinate = 0;  // 0: largest G with G^d <= budget
  bool all_directions = false;     // 2^d directions instead of the canonical 2^(d-1)
  std::size_t max_dims = kMaxDirectionDims;
};

inline std::size_t per_coordinate_budget(std::size_t d, std::size_t budget) {
  std::size_t g = 1;
  auto fits = [&](std::size_t c) {
    double total = 1.0;
    for (std::size_t p = 0; p < d; ++p) total *= static_cast<double>(c);
    return total <= static_cast<double>(budget);
  };
  while (fits(g + 1)) ++g;
  return g;
}

/// Sorted distinct pooled values of coordinate p, thinned to at most g entries.
/// The kept index set is mirror-symmetric so negating the coordinate negates the grid.
inline std::vector<double> coordinate_grid(const ChainSet& cs, std::size_t p, std::size_t g) {
  auto v = cs.pooled(p);
  std::sort(v.begin(), v.end());
  v.erase(std::unique(v.begin(), v.end()), v.end());
  const std::size_t n = v.size();
  if (g == 0) throw Error("coordinate_grid: empty budget");
  if (n <= g) return v;
  if (g == 1) return {v[(n - 1) / 2]};
  std::vector<std::size_t> idx;
  for (std::size_t i = 0; i < (g + 1) / 2; ++i) {
    const std::size_t k = i * (n - 1) / (g - 1);
    idx.push_back(k);
    idx.push_back(n - 1 - k);
  }
  std::sort(idx.begin(), idx.end());
  idx.erase(std::unique(idx.begin(), idx.end()), idx.end());
  std::vector<double> out;
  out.reserve(idx.size());
  for (auto k : idx) out.push_back(v[k]);
  return out;
}

struct MvRhatInfinity {
  double value;
  std::vector<double> argmax_x;
  Direction direction;
};

namespace detail {

struct MvGrid {
  std::vector<std::vector<double>> axes;
  std::vector<std::size_t> stride;  // row-major, last axis fastest
  std::size_t cells = 1;
  // per draw (chain-major), per axis: bin for <= and for >= (-1 when out of range)
  std::vector<std::int32_t> le_bin;
  std::vector<std::int32_t> ge_bin;
};

inline MvGrid build_grid(const ChainSet& cs, const MvGridOptions& opt) {
  const std::size_t d = cs.dims();
  const std::size_t g = opt.per_coordinate ? opt.per_coordinate : per_coordinate_budget(d, opt.budget);
  MvGrid grid;
  for (std::size_t p = 0; p < d; ++p) grid.axes.push_back(coordinate_grid(cs, p, g));
  grid.stride.assign(d, 1);
  for (std::size_t p = d; p-- > 0;) {
    grid.stride[p] = grid.cells;
    grid.cells *= grid.axes[p].size();
  }
  const std::size_t total = cs.total();
  grid.le_bin.resize(total * d);
  grid.ge_bin.resize(total * d);
  for (std::size_t j = 0; j < cs.chains(); ++j) {
    for (std::size_t i = 0; i < cs.iterations(); ++i) {
      const std::size_t draw = j * cs.iterations() + i;
      for (std::size_t p = 0; p < d; ++p) {
        const auto& ax = grid.axes[p];
        const double v = cs(j, i, p);
        const auto lo = std::lower_bound(ax.begin(), ax.end(), v) - ax.begin();
        const auto hi = std::upper_bound(ax.begin(), ax.end(), v) - ax.begin() - 1;
        grid.le_bin[draw * d + p] = lo == static_cast<std::ptrdiff_t>(ax.size()) ? -1 : static_cast<std::int32_t>(lo);
        grid.ge_bin[draw * d + p] = static_cast<std::int32_t>(hi);
      }
    }
  }
  return grid;
}

// Sup over the grid for one direction; ties go to the smallest cell index.
inline MvRhatInfinity grid_sup(const ChainSet& cs, const MvGrid& grid, const Direction& dir) {
  const std::size_t d = cs.dims();
  const std::size_t n = cs.iterations();
  std::vector<std::int32_t> h(grid.cells);
  std::vector<std::int64_t> s1(grid.cells, 0);
  std::vector<std::int64_t> s2(grid.cells, 0);
  for (std::size_t j = 0; j < cs.chains(); ++j) {
    std::fill(h.begin(), h.end(), 0);
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t draw = j * n + i;
      std::size_t cell = 0;
      bool ok = true;
      for (std::size_t p = 0; p < d && ok; ++p) {
        const std::int32_t b = dir.ge(p) ? grid.ge_bin[draw * d + p] : grid.le_bin[draw * d + p];
        if (b < 0) ok = false;
        else cell += static_cast<std::size_t>(b) * grid.stride[p];
      }
      if (ok) ++h[cell];
    }
    // cumulative counts along each axis: forward for <=, backward for >=
    for (std::size_t p = 0; p < d; ++p) {
      const std::size_t s = grid.stride[p];
      const std::size_t len = grid.axes[p].size();
      if (!dir.ge(p)) {
        for (std::size_t c = 0; c < grid.cells; ++c) {
          if ((c / s) % len > 0) h[c] += h[c - s];
        }
      } else {
        for (std::size_t c = grid.cells; c-- > 0;) {
          if ((c / s) % len + 1 < len) h[c] += h[c + s];
        }
      }
    }
    for (std::size_t c = 0; c < grid.cells; ++c) {
      s1[c] += h[c];
      s2[c] += static_cast<std::int64_t>(h[c]) * h[c];
    }
  }
  const auto m = static_cast<std::int64_t>(cs.chains());
  std::size_t best = 0;
  double best_r = -1.0;
  for (std::size_t c = 0; c < grid.cells; ++c) {
    const double r = rhat_from_sums(m, static_cast<std::int64_t>(n), s1[c], s2[c]);
    if (r > best_r) {
      best_r = r;
      best = c;
    }
  }
  std::vector<double> x(d);
  for (std::size_t p = 0; p < d; ++p) x[p] = grid.axes[p][(best / grid.stride[p]) % grid.axes[p].size()];
  return {best_r, std::move(x), dir};
}

}  // namespace detail

/// Sup of multivariate local R-hat for one direction over the Cartesian grid of
/// per-coordinate order statistics (thinned to the budget; exact for small samples).
inline MvRhatInfinity mv_rhat_infinity(const ChainSet& cs, const Direction& dir, const MvGridOptions& opt = {}) {
  if (dir.d != cs.dims()) throw Error("mv_rhat_infinity: direction dimension mismatch");
  return detail::grid_sup(cs, detail::build_grid(cs, opt), dir);
}

/// Maximum over directions of the directional sup. Ties keep the first direction.
inline MvRhatInfinity rhat_max_infinity(const ChainSet& cs, const MvGridOptions& opt = {}) {
  const std::size_t d = cs.dims();
  if (d > opt.max_dims) {
    throw Error("rhat_max_infinity: d = " + std::to_string(d) + " exceeds the direction cap of " +
                std::to_string(opt.max_dims) +
                "; diagnose a scalar summary instead (e.g. the log-likelihood or log-posterior series)");
  }
  const auto dirs = opt.all_directions ? all_directions(d) : canonical_directions(d);
  const auto grid = detail::build_grid(cs, opt);
  std::vector<std::optional<MvRhatInfinity>> res(dirs.size());
  parallel_for(dirs.size(), [&](std::size_t k) { res[k] = detail::grid_sup(cs, grid, dirs[k]); });
  std::size_t best = 0;
  for (std::size_t k = 1; k < res.size(); ++k) {
    if (res[k]->value > res[best]->value) best = k;
  }
  return *res[best];
}

// ---------------------------------------------------------------------------
// Two-step diagnosis
// ---------------------------------------------------------------------------

struct MvReport {
  std::vector<double> margin_rhat_inf;
  double margin_threshold = 0.0;
  double copula_rhat_max_inf = 0.0;
  Direction copula_direction;
  double copula_threshold = 0.0;
  bool margins_converged = false;
  bool copula_converged = false;
  bool converged = false;
};

struct MvDiagnoseConfig {
  double alpha = 0.05;
  std::optional<MvThresholds> thresholds;  // override
  bool use_preset = false;                 // rule-of-thumb values when available
  std::size_t reps = 2000;
  std::uint64_t seed = kDefaultSeed;
  MvGridOptions grid;
};

/// Margins first (Bonferroni over d at level alpha/2), then the dependence structure
/// through the max over directions (level alpha/2).
inline MvReport two_step_diagnosis(const ChainSet& cs, const MvDiagnoseConfig& cfg = {}) {
  const std::size_t d = cs.dims();
  if (d < 2) throw Error("two_step_diagnosis requires d >= 2");
  MvThresholds th{};
  if (cfg.thresholds) {
    th = *cfg.thresholds;
  } else if (auto preset = cfg.use_preset ? mv_threshold_preset(cs.chains(), cfg.alpha) : std::nullopt) {
    th = *preset;
  } else {
    th = mv_thresholds(cs.chains(), d, cfg.alpha, static_cast<double>(cs.total()), cfg.reps, cfg.seed);
  }
  MvReport rep;
  rep.margin_threshold = th.margin;
  rep.copula_threshold = th.copula;
  rep.margins_converged = true;
  for (std::size_t p = 0; p < d; ++p) {
    const double r = rhat_infinity(cs.coordinate(p)).value;
    rep.margin_rhat_inf.push_back(r);
    if (r >= th.margin) rep.margins_converged = false;
  }
  const auto mx = rhat_max_infinity(cs, cfg.grid);
  rep.copula_rhat_max_inf = mx.value;
  rep.copula_direction = mx.direction;
  rep.copula_converged = mx.value < th.copula;
  rep.converged = rep.margins_converged && rep.copula_converged;
  return rep;
}

inline nlohmann::json to_json(const MvReport& r) {
  auto num = [](double v) -> nlohmann::json {
    if (std::isinf(v)) return "inf";
    return v;
  };
  nlohmann::json margins = nlohmann::json::array();
  for (double v : r.margin_rhat_inf) margins.push_back(num(v));
  return {{"margin_rhat_inf", margins},
          {"margin_threshold", r.margin_threshold},
          {"margins_verdict", r.margins_converged ? "converged" : "not_converged"},
          {"copula_rhat_max_inf", num(r.copula_rhat_max_inf)},
          {"copula_direction", r.copula_direction.str()},
          {"copula_threshold", r.copula_threshold},
          {"copula_verdict", r.copula_converged ? "converged" : "not_converged"},
          {"verdict", r.converged ? "converged" : "not_converged"}};
}

// ---------------------------------------------------------------------------
// Copula bounds
// ---------------------------------------------------------------------------

/// R-infinity between the Frechet-Hoeffding bounds W_d and M_d.
inline double frechet_r_infinity_bound(std::size_t d) {
  if (d < 1) throw Error("bound requires d >= 1");
  return std::sqrt((static_cast<double>(d) + 1.0) / 2.0);
}

/// Bound on R-infinity for m chains through pairwise Frechet bounds.
inline double pairwise_bound(std::size_t m, std::size_t d) {
  if (m < 2 || d < 1) throw Error("pairwise_bound requires m >= 2 and d >= 1");
  return std::sqrt(1.0 + static_cast<double>(m - 1) * static_cast<double>(d - 1) / 2.0);
}

/// R-infinity bound for two NLOD copulas.
inline double nlod_bound(std::size_t d) {
  if (d < 2) throw Error("nlod_bound requires d >= 2");
  const double dd = static_cast<double>(d);
  const double pow_term = std::exp(-dd * std::log1p(-1.0 / dd));  // (1 - 1/d)^(-d)
  return std::sqrt(1.0 + 0.5 / (pow_term - 1.0));
}

namespace detail {

// f_d(u) = (u^d - u)^2 / (u^d (1 - u^d) + u (1 - u))
inline double plod_f(double u, double d) {
  const double ud = std::pow(u, d);
  return (ud - u) * (ud - u) / (ud * (1.0 - ud) + u * (1.0 - u));
}

// Sign-equivalent to -f_d'(u).
inline double plod_g(double u, double d) {
  const double ud = std::pow(u, d);
  const double ud1 = std::pow(u, d - 1.0);
  const double den = ud * (1.0 - ud) + u * (1.0 - u);
  const double dden = d * ud1 - 2.0 * d * ud * ud1 + 1.0 - 2.0 * u;
  return 2.0 * (d * ud1 - 1.0) * den - (ud - u) * dden;
}

}  // namespace detail

/// R-infinity bound for two PLOD copulas: max of 1 + f_d / 2 over the diagonal.
inline double plod_bound(std::size_t d) {
  if (d < 2) throw Error("plod_bound requires d >= 2");
  if (d == 2) return std::sqrt(0.5 + 1.0 / std::sqrt(3.0));
  const double dd = static_cast<double>(d);
  // g < 0 near 0 (f increasing) and g > 0 near 1 (f decreasing); locate the sign change.
  double lo = 1e-9;
  double hi = 1.0 - 1e-9;
  if (!(detail::plod_g(lo, dd) < 0.0 && detail::plod_g(hi, dd) > 0.0)) {
    throw NumericalError("plod_bound: root of g_d not bracketed");
  }
  while (hi - lo > 1e-12) {
    const double mid = 0.5 * (lo + hi);
    if (detail::plod_g(mid, dd) < 0.0) lo = mid;
    else hi = mid;
  }
  return std::sqrt(1.0 + 0.5 * detail::plod_f(0.5 * (lo + hi), dd));
}

// ---------------------------------------------------------------------------
// Copulas
// ---------------------------------------------------------------------------

/// Bivariate normal cdf P(X <= h, Y <= k) with correlation rho, |rho| < 1.
inline double bivariate_normal_cdf(double h, double k, double rho) {
  if (!(std::abs(rho) < 1.0)) throw Error("bivariate_normal_cdf requires |rho| < 1");
  const double base = std_normal_cdf(h) * std_normal_cdf(k);
  if (rho == 0.0) return base;
  auto integrand = [&](double r) {
    const double one = 1.0 - r * r;
    return std::exp(-(h * h - 2.0 * r * h * k + k * k) / (2.0 * one)) / std::sqrt(one);
  };
  // 10-point Gauss-Legendre rule, bisected until two halves agree with the whole
  static constexpr double xs[] = {0.1488743389816312, 0.4333953941292472, 0.6794095682990244,
                                  0.8650633666889845, 0.9739065285171717};
  static constexpr double ws[] = {0.2955242247147529, 0.2692667193099963, 0.2190863625159820,
                                  0.1494513491505806, 0.0666713443086881};
  auto gl = [&](double a, double b) {
    const double c = 0.5 * (a + b);
    const double hw = 0.5 * (b - a);
    double s = 0.0;
    for (int i = 0; i < 5; ++i) s += ws[i] * (integrand(c - hw * xs[i]) + integrand(c + hw * xs[i]));
    return s * hw;
  };
  std::function<double(double, double, double, int)> adapt = [&](double a, double b, double whole, int depth) {
    const double m = 0.5 * (a + b);
    const double left = gl(a, m);
    const double right = gl(m, b);
    if (depth >= 30 || std::abs(left + right - whole) <= 1e-10) return left + right;
    return adapt(a, m, left, depth + 1) + adapt(m, b, right, depth + 1);
  };
  const double integral = adapt(0.0, rho, gl(0.0, rho), 0);
  return base + integral / (2.0 * std::numbers::pi);
}

/// A d-variate copula evaluator.
class Copula {
 public:
  using Eval = std::function<double(std::span<const double>)>;

  Copula(std::string name, std::size_t d, Eval eval) : name_(std::move(name)), d_(d), eval_(std::move(eval)) {
    if (d_ < 1) throw Error("copula dimension must be >= 1");
  }

  static Copula independence(std::size_t d) {
    return {"independence", d, [](std::span<const double> u) {
              double p = 1.0;
              for (double v : u) p *= v;
              return p;
            }};
  }
  /// Upper Frechet-Hoeffding bound M_d.
  static Copula upper(std::size_t d) {
    return {"upper", d, [](std::span<const double> u) { return *std::min_element(u.begin(), u.end()); }};
  }
  /// Lower Frechet-Hoeffding bound W_d (a copula only for d = 2).
  static Copula lower(std::size_t d) {
    return {"lower", d, [](std::span<const double> u) {
              double s = 0.0;
              for (double v : u) s += v;
              return std::max(s - static_cast<double>(u.size()) + 1.0, 0.0);
            }};
  }
  static Copula gaussian(double rho) {
    if (!(rho >= -1.0 && rho <= 1.0)) throw Error("gaussian copula requires rho in [-1, 1]");
    if (rho == 1.0) return upper(2);
    if (rho == -1.0) return lower(2);
    return {"gaussian", 2, [rho](std::span<const double> u) {
              if (u[0] <= 0.0 || u[1] <= 0.0) return 0.0;
              if (u[0] >= 1.0) return std::min(u[1], 1.0);
              if (u[1] >= 1.0) return u[0];
              return bivariate_normal_cdf(std_normal_quantile(u[0]), std_normal_quantile(u[1]), rho);
            }};
  }
  /// Convex combination sum_k w_k C_k.
  static Copula mixture(std::vector<double> weights, std::vector<Copula> parts) {
    if (weights.empty() || weights.size() != parts.size()) throw Error("mixture: weights/components mismatch");
    double total = 0.0;
    for (double w : weights) {
      if (!(w >= 0.0)) throw Error("mixture: weights must be nonnegative");
      total += w;
    }
    if (std::abs(total - 1.0) > 1e-12) throw Error("mixture: weights must sum to 1");
    const std::size_t d = parts.front().dims();
    for (const auto& c : parts) {
      if (c.dims() != d) throw Error("mixture: components differ in dimension");
    }
    auto shared = std::make_shared<std::vector<Copula>>(std::move(parts));
    return {"mixture", d, [weights = std::move(weights), shared](std::span<const double> u) {
              double s = 0.0;
              for (std::size_t k = 0; k < weights.size(); ++k) s += weights[k] * (*shared)[k](u);
              return s;
            }};
  }

  double operator()(std::span<const double> u) const { return eval_(u); }
  std::size_t dims() const noexcept { return d_; }
  const std::string& name() const noexcept { return name_; }

 private:
  std::string name_;
  std::size_t d_;
  Eval eval_;
};

/// R(u) between two chains with copulas c1, c2 and identical margins.
inline double copula_local_r(double c1, double c2) {
  const double den = c1 * (1.0 - c1) + c2 * (1.0 - c2);
  const double diff = c1 - c2;
  if (den <= 0.0) return diff == 0.0 ? 1.0 : kDisjointSupports;
  return std::sqrt(1.0 + diff * diff / (2.0 * den));
}

/// Sup of R(u) over [eps, 1-eps]^d: grid maximum, combined with a diagonal scan refined
/// by golden section (the bound pairs attain their maximum on the diagonal).
inline double copula_population_r_infinity(const Copula& c1, const Copula& c2, std::size_t grid_n = 0,
                                           double eps = 1e-6) {
  const std::size_t d = c1.dims();
  if (c2.dims() != d) throw Error("copula_population_r_infinity: dimension mismatch");
  if (grid_n == 0) grid_n = per_coordinate_budget(d, 1'000'000);
  if (grid_n < 2) throw Error("copula_population_r_infinity: grid_n must be >= 2");
  auto at = [&](std::span<const double> u) { return copula_local_r(c1(u), c2(u)); };

  std::vector<double> axis(grid_n);
  for (std::size_t k = 0; k < grid_n; ++k) {
    axis[k] = eps + (1.0 - 2.0 * eps) * static_cast<double>(k) / static_cast<double>(grid_n - 1);
  }
  std::size_t cells = 1;
  for (std::size_t p = 0; p < d; ++p) cells *= grid_n;
  std::vector<double> vals(cells);
  parallel_for(cells, [&](std::size_t c) {
    std::vector<double> u(d);
    std::size_t rest = c;
    for (std::size_t p = d; p-- > 0;) {
      u[p] = axis[rest % grid_n];
      rest /= grid_n;
    }
    vals[c] = at(u);
  });
  double best = *std::max_element(vals.begin(), vals.end());

  // diagonal
  auto diag = [&](double t) {
    std::vector<double> u(d, t);
    return at(u);
  };
  constexpr std::size_t kDiag = 10000;
  std::size_t kbest = 0;
  double dbest = -1.0;
  std::vector<double> ts(kDiag);
  for (std::size_t k = 0; k < kDiag; ++k) {
    ts[k] = eps + (1.0 - 2.0 * eps) * static_cast<double>(k) / static_cast<double>(kDiag - 1);
    const double r = diag(ts[k]);
    if (r > dbest) {
      dbest = r;
      kbest = k;
    }
  }
  const auto ref = golden_section_max(diag, ts[kbest == 0 ? 0 : kbest - 1], ts[std::min(kbest + 1, kDiag - 1)], 1e-12);
  return std::max({best, dbest, ref.value});
}

}  // namespace localrhat
