#pragma once

#include <cstddef>
#include <optional>

namespace localrhat {

/// Null quantiles of R-hat-infinity on the (m, alpha) grid at target ESS 400,
/// 2000 replications, default seed. Regenerate with `localrhat threshold --table 2 --recompute`.
struct CachedQuantile {
  std::size_t m;
  double alpha;
  double value;
};

inline constexpr CachedQuantile kNullQuantileTable[] = {
    {2, 0.005, 1.0172312216447006},
    {2, 0.01, 1.0157567556263145},
    {2, 0.05, 1.0120515316024261},
    {2, 0.1, 1.0103629710818451},
    {3, 0.005, 1.0229553553469861},
    {3, 0.01, 1.0218229947579729},
    {3, 0.05, 1.0166059483993726},
    {3, 0.1, 1.0140369196556507},
    {4, 0.005, 1.0249441063284404},
    {4, 0.01, 1.0235700296381383},
    {4, 0.05, 1.0196916797668869},
    {4, 0.1, 1.017521121839797},
    {8, 0.005, 1.041158412590707},
    {8, 0.01, 1.0378866782270992},
    {8, 0.05, 1.0313765673905801},
    {8, 0.1, 1.0279715674464256},
    {10, 0.005, 1.0459690052882999},
    {10, 0.01, 1.0430602492398529},
    {10, 0.05, 1.0363264942766475},
    {10, 0.1, 1.0332965998947432},
    {20, 0.005, 1.0805771878137764},
    {20, 0.01, 1.0728561917439192},
    {20, 0.05, 1.0603114424684785},
    {20, 0.1, 1.0559802742583033},
};

inline std::optional<double> cached_null_quantile(std::size_t m, double alpha) {
  for (const auto& row : kNullQuantileTable) {
    if (row.m == m && row.alpha == alpha) return row.value;
  }
  return std::nullopt;
}

}  // namespace localrhat
