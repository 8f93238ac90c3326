#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "localrhat/chains.hpp"
#include "localrhat/error.hpp"
#include "localrhat/statdist.hpp"

namespace localrhat {

/// Value returned by local R-hat when every chain's empirical cdf is 0 or 1 at x
/// but the chains disagree: no within-chain variance, positive between-chain variance.
inline constexpr double kDisjointSupports = std::numeric_limits<double>::infinity();

inline bool is_disjoint(double rhat) noexcept { return std::isinf(rhat); }

/// Local R-hat from per-chain counts c_j = #{draws of chain j in the region}, each
/// chain holding n draws. Integer arithmetic up to the final division, so the result
/// does not depend on chain order. Requires m * n < 2^31.
///   R^2 = 1 + sum_{j<k} (c_j - c_k)^2 / (m * sum_j c_j (n - c_j))
inline double rhat_from_sums(std::int64_t m, std::int64_t n, std::int64_t sum, std::int64_t sum_sq) noexcept {
  const std::int64_t between = m * sum_sq - sum * sum;  // = sum_{j<k} (c_j - c_k)^2
  const std::int64_t within = n * sum - sum_sq;         // = sum_j c_j (n - c_j)
  if (within == 0) return between == 0 ? 1.0 : kDisjointSupports;
  return std::sqrt(1.0 + static_cast<double>(between) /
                             (static_cast<double>(m) * static_cast<double>(within)));
}

inline double rhat_from_counts(std::span<const std::int64_t> counts, std::int64_t n) noexcept {
  std::int64_t sum = 0, sum_sq = 0;
  for (std::int64_t c : counts) {
    sum += c;
    sum_sq += c * c;
  }
  return rhat_from_sums(static_cast<std::int64_t>(counts.size()), n, sum, sum_sq);
}

inline void require_univariate(const ChainSet& cs, const char* op) {
  if (cs.dims() != 1) throw Error(std::string(op) + " requires d = 1 (use the multivariate functions)");
}

/// Local R-hat at x: the Gelman-Rubin ratio of the indicators 1{theta <= x}.
inline double local_rhat(const ChainSet& cs, double x) {
  require_univariate(cs, "local_rhat");
  std::vector<std::int64_t> counts(cs.chains(), 0);
  for (std::size_t j = 0; j < cs.chains(); ++j) {
    for (std::size_t i = 0; i < cs.iterations(); ++i) counts[j] += cs(j, i) <= x ? 1 : 0;
  }
  return rhat_from_counts(counts, static_cast<std::int64_t>(cs.iterations()));
}

// ---------------------------------------------------------------------------
// Curves
// ---------------------------------------------------------------------------

namespace grid {
/// Every distinct pooled draw except the largest (where R-hat is 1 trivially).
struct AllPoints {};
/// Every k-th entry of the AllPoints grid, starting with the smallest draw.
struct Stride {
  std::size_t k;
};
/// User-supplied evaluation points; sorted and de-duplicated before use.
struct Explicit {
  std::vector<double> xs;
};
}  // namespace grid

using GridSpec = std::variant<grid::AllPoints, grid::Stride, grid::Explicit>;

struct CurvePoint {
  double x;
  double rhat;
  std::optional<double> ess;
  bool disjoint = false;
};

/// Local R-hat trace: points ordered by strictly increasing x, rhat >= 1.
struct LocalCurve {
  std::vector<CurvePoint> points;
};

namespace detail {

struct TaggedDraw {
  double value;
  std::uint32_t chain;
};

inline std::vector<TaggedDraw> sorted_tagged(const ChainSet& cs, std::size_t coord = 0) {
  std::vector<TaggedDraw> all;
  all.reserve(cs.total());
  for (std::size_t j = 0; j < cs.chains(); ++j) {
    for (std::size_t i = 0; i < cs.iterations(); ++i) {
      all.push_back({cs(j, i, coord), static_cast<std::uint32_t>(j)});
    }
  }
  std::sort(all.begin(), all.end(), [](const TaggedDraw& a, const TaggedDraw& b) {
    return a.value < b.value || (a.value == b.value && a.chain < b.chain);
  });
  return all;
}

// Calls visit(x, rhat) at each distinct pooled value below the maximum, in increasing order.
template <typename Visit>
void sweep_order_statistics(const ChainSet& cs, Visit&& visit) {
  const auto all = sorted_tagged(cs);
  std::vector<std::int64_t> counts(cs.chains(), 0);
  const auto n = static_cast<std::int64_t>(cs.iterations());
  std::size_t k = 0;
  while (k < all.size()) {
    const double x = all[k].value;
    while (k < all.size() && all[k].value == x) ++counts[all[k++].chain];
    if (k == all.size()) break;  // global maximum
    visit(x, rhat_from_counts(counts, n));
  }
}

}  // namespace detail

/// Evaluates local R-hat on the requested grid.
inline LocalCurve rhat_curve(const ChainSet& cs, const GridSpec& spec = grid::AllPoints{}) {
  require_univariate(cs, "rhat_curve");
  LocalCurve curve;
  if (const auto* ex = std::get_if<grid::Explicit>(&spec)) {
    std::vector<double> xs = ex->xs;
    std::sort(xs.begin(), xs.end());
    xs.erase(std::unique(xs.begin(), xs.end()), xs.end());
    if (xs.empty()) throw Error("rhat_curve: empty grid");
    const auto all = detail::sorted_tagged(cs);
    std::vector<std::int64_t> counts(cs.chains(), 0);
    const auto n = static_cast<std::int64_t>(cs.iterations());
    std::size_t k = 0;
    for (double x : xs) {
      if (!std::isfinite(x)) throw Error("rhat_curve: grid points must be finite");
      while (k < all.size() && all[k].value <= x) ++counts[all[k++].chain];
      const double r = rhat_from_counts(counts, n);
      curve.points.push_back({x, r, std::nullopt, is_disjoint(r)});
    }
    return curve;
  }
  std::size_t stride = 1;
  if (const auto* st = std::get_if<grid::Stride>(&spec)) {
    if (st->k == 0) throw Error("rhat_curve: stride must be >= 1");
    stride = st->k;
  }
  std::size_t index = 0;
  detail::sweep_order_statistics(cs, [&](double x, double r) {
    if (index++ % stride == 0) curve.points.push_back({x, r, std::nullopt, is_disjoint(r)});
  });
  if (curve.points.empty()) throw Error("rhat_curve: empty grid (all draws identical)");
  return curve;
}

struct RhatInfinity {
  double value;
  double argmax_x;
};

/// Supremum of the curve and its location; ties go to the smallest x.
inline RhatInfinity rhat_infinity(const LocalCurve& curve) {
  if (curve.points.empty()) throw Error("rhat_infinity: empty curve");
  RhatInfinity best{curve.points.front().rhat, curve.points.front().x};
  for (const auto& pt : curve.points) {
    if (pt.rhat > best.value) best = {pt.rhat, pt.x};
  }
  return best;
}

inline RhatInfinity rhat_infinity(const ChainSet& cs, const GridSpec& spec = grid::AllPoints{}) {
  require_univariate(cs, "rhat_infinity");
  if (std::holds_alternative<grid::AllPoints>(spec)) {
    // Same as the curve route without materializing it.
    std::optional<RhatInfinity> best;
    detail::sweep_order_statistics(cs, [&](double x, double r) {
      if (!best || r > best->value) best = RhatInfinity{r, x};
    });
    if (!best) throw Error("rhat_curve: empty grid (all draws identical)");
    return *best;
  }
  return rhat_infinity(rhat_curve(cs, spec));
}

// ---------------------------------------------------------------------------
// Effective sample size
// ---------------------------------------------------------------------------

/// Multi-chain effective sample size of chain-major series (m chains of n values):
/// per-chain autocovariances averaged across chains, combined with the between-chain
/// variance, summed over lags with Geyer's initial monotone positive sequence.
/// Returns nm / tau with tau floored at 1 / log10(nm).
inline double effective_sample_size(std::span<const double> values, std::size_t m, std::size_t n) {
  if (m < 1 || n < 2 || values.size() != m * n) throw Error("effective_sample_size: bad shape");
  std::vector<double> means(m, 0.0);
  for (std::size_t j = 0; j < m; ++j) {
    means[j] = std::accumulate(values.begin() + static_cast<std::ptrdiff_t>(j * n),
                               values.begin() + static_cast<std::ptrdiff_t>((j + 1) * n), 0.0) /
               static_cast<double>(n);
  }
  const double nd = static_cast<double>(n);
  // Mean over chains of the biased lag-t autocovariance.
  auto mean_acov = [&](std::size_t lag) {
    double total = 0.0;
    for (std::size_t j = 0; j < m; ++j) {
      const double* y = values.data() + j * n;
      double s = 0.0;
      for (std::size_t i = 0; i + lag < n; ++i) s += (y[i] - means[j]) * (y[i + lag] - means[j]);
      total += s / nd;
    }
    return total / static_cast<double>(m);
  };
  const double acov0 = mean_acov(0);
  const double within = acov0 * nd / (nd - 1.0);
  double between_over_n = 0.0;
  if (m > 1) {
    const double grand = std::accumulate(means.begin(), means.end(), 0.0) / static_cast<double>(m);
    for (double mu : means) between_over_n += (mu - grand) * (mu - grand);
    between_over_n /= static_cast<double>(m - 1);
  }
  const double var_plus = within * (nd - 1.0) / nd + between_over_n;
  if (!(var_plus > 0.0)) throw Error("effective_sample_size: constant series");
  auto rho = [&](std::size_t lag) { return 1.0 - (within - mean_acov(lag)) / var_plus; };

  // Pair sums P_k = rho(2k) + rho(2k+1); keep while positive, then enforce monotonicity.
  std::vector<double> pairs;
  pairs.push_back(1.0 + rho(1));
  for (std::size_t t = 2; t + 1 < n; t += 2) {
    const double p = rho(t) + rho(t + 1);
    if (!(p > 0.0)) break;
    pairs.push_back(std::min(p, pairs.back()));
  }
  const double tau_raw = -1.0 + 2.0 * std::accumulate(pairs.begin(), pairs.end(), 0.0);
  const double total = static_cast<double>(m * n);
  const double tau = std::max(tau_raw, 1.0 / std::log10(total));
  return total / tau;
}

/// ESS(x) = nm * F(x)(1 - F(x)) / sigma^2(x) estimated from the indicator series 1{theta <= x}.
inline double local_ess(const ChainSet& cs, double x) {
  require_univariate(cs, "local_ess");
  std::vector<double> ind(cs.total());
  std::size_t ones = 0;
  for (std::size_t j = 0; j < cs.chains(); ++j) {
    for (std::size_t i = 0; i < cs.iterations(); ++i) {
      const bool below = cs(j, i) <= x;
      ind[j * cs.iterations() + i] = below ? 1.0 : 0.0;
      ones += below;
    }
  }
  if (ones == 0 || ones == cs.total()) throw Error("degenerate quantile: indicator is constant at x");
  return effective_sample_size(ind, cs.chains(), cs.iterations());
}

/// Fills the ess field of each curve point.
inline void attach_ess(const ChainSet& cs, LocalCurve& curve) {
  for (auto& pt : curve.points) pt.ess = local_ess(cs, pt.x);
}

// ---------------------------------------------------------------------------
// Classical split-R-hat and rank-R-hat
// ---------------------------------------------------------------------------

/// Gelman-Rubin R-hat of chain-major values without splitting. Zero within-chain
/// variance gives 1 when chain means agree and +inf otherwise.
inline double basic_rhat(std::span<const double> values, std::size_t m, std::size_t n) {
  if (m < 2 || n < 2 || values.size() != m * n) throw Error("basic_rhat: bad shape");
  const double nd = static_cast<double>(n);
  std::vector<double> means(m), vars(m);
  for (std::size_t j = 0; j < m; ++j) {
    const double* y = values.data() + j * n;
    const double mu = std::accumulate(y, y + n, 0.0) / nd;
    double ss = 0.0;
    for (std::size_t i = 0; i < n; ++i) ss += (y[i] - mu) * (y[i] - mu);
    means[j] = mu;
    vars[j] = ss / (nd - 1.0);
  }
  const double within = std::accumulate(vars.begin(), vars.end(), 0.0) / static_cast<double>(m);
  const double grand = std::accumulate(means.begin(), means.end(), 0.0) / static_cast<double>(m);
  double between_over_n = 0.0;
  for (double mu : means) between_over_n += (mu - grand) * (mu - grand);
  between_over_n /= static_cast<double>(m - 1);
  if (within == 0.0) return between_over_n == 0.0 ? 1.0 : std::numeric_limits<double>::infinity();
  return std::sqrt(((nd - 1.0) / nd * within + between_over_n) / within);
}

/// Classic split-R-hat: chains halved, then sqrt(((n'-1)/n' W + B/n') / W).
inline double trad_split_rhat(const ChainSet& cs) {
  require_univariate(cs, "trad_split_rhat");
  const ChainSet split = split_chains(cs);
  return basic_rhat(split.raw(), split.chains(), split.iterations());
}

/// Normal scores Phi^-1((r - 3/8) / (S + 1/4)) of pooled values, r = average rank (1-based).
inline std::vector<double> rank_normalize(std::span<const double> values) {
  const std::size_t total = values.size();
  std::vector<std::size_t> order(total);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
  std::vector<double> z(total);
  const double denom = static_cast<double>(total) + 0.25;
  std::size_t k = 0;
  while (k < total) {
    std::size_t end = k;
    while (end < total && values[order[end]] == values[order[k]]) ++end;
    const double avg_rank = 0.5 * static_cast<double>(k + 1 + end);  // mean of ranks k+1 .. end
    const double score = std_normal_quantile((avg_rank - 0.375) / denom);
    for (std::size_t t = k; t < end; ++t) z[order[t]] = score;
    k = end;
  }
  return z;
}

struct RankRhat {
  double bulk;
  double tail;
  double max;
};

/// Rank-normalized split-R-hat: bulk on normal scores of the draws, tail on normal
/// scores of |theta - median|; both after splitting the chains.
inline RankRhat rank_rhat(const ChainSet& cs) {
  require_univariate(cs, "rank_rhat");
  const ChainSet split = split_chains(cs);
  const std::size_t m = split.chains(), n = split.iterations();
  const auto raw = split.raw();
  const auto bulk_scores = rank_normalize(raw);
  const double bulk = basic_rhat(bulk_scores, m, n);

  std::vector<double> sorted(raw.begin(), raw.end());
  std::sort(sorted.begin(), sorted.end());
  const std::size_t s = sorted.size();
  const double median = s % 2 ? sorted[s / 2] : 0.5 * (sorted[s / 2 - 1] + sorted[s / 2]);
  std::vector<double> folded(raw.size());
  for (std::size_t k = 0; k < raw.size(); ++k) folded[k] = std::abs(raw[k] - median);
  const double tail = basic_rhat(rank_normalize(folded), m, n);
  return {bulk, tail, std::max(bulk, tail)};
}

/// Lower pooled median: the order statistic of rank ceil(nm / 2).
inline double pooled_median(const ChainSet& cs, std::size_t coord = 0) {
  auto all = cs.pooled(coord);
  const std::size_t k = (all.size() - 1) / 2;
  std::nth_element(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(k), all.end());
  return all[k];
}

}  // namespace localrhat
