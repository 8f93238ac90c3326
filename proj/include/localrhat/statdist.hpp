#pragma once

#include <cmath>
#include <limits>
#include <numbers>
#include <string>
#include <type_traits>
#include <utility>
#include <variant>

#include <nlohmann/json.hpp>

#include "localrhat/error.hpp"
#include "localrhat/rng.hpp"

namespace localrhat {

// ---------------------------------------------------------------------------
// Special functions
// ---------------------------------------------------------------------------

inline double std_normal_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

/// Inverse standard normal cdf. Acklam's rational approximation followed by
/// Halley refinement steps on erfc; |Phi(Phi^-1(p)) - p| is at rounding level.
inline double std_normal_quantile(double p) {
  if (!(p > 0.0 && p < 1.0)) throw Error("std_normal_quantile: p must lie in (0,1)");
  static constexpr double a[] = {-3.969683028665376e+01, 2.209460984245205e+02,
                                 -2.759285104469687e+02, 1.383577518672690e+02,
                                 -3.066479806614716e+01, 2.506628277459239e+00};
  static constexpr double b[] = {-5.447609879822406e+01, 1.615858368580409e+02,
                                 -1.556989798598866e+02, 6.680131188771972e+01,
                                 -1.328068155288572e+01};
  static constexpr double c[] = {-7.784894002430293e-03, -3.223964580411365e-01,
                                 -2.400758277161838e+00, -2.549732539343734e+00,
                                 4.374664141464968e+00,  2.938163982698783e+00};
  static constexpr double d[] = {7.784695709041462e-03, 3.224671290700398e-01,
                                 2.445134137142996e+00, 3.754408661907416e+00};
  constexpr double p_low = 0.02425;
  double x;
  if (p < p_low) {
    const double q = std::sqrt(-2.0 * std::log(p));
    x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  } else if (p <= 1.0 - p_low) {
    const double q = p - 0.5;
    const double r = q * q;
    x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
        (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
  } else {
    const double q = std::sqrt(-2.0 * std::log1p(-p));
    x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  }
  // Halley steps. Work on the smaller tail so the residual keeps its relative accuracy.
  for (int step = 0; step < 2; ++step) {
    double e;
    if (p < 0.5) {
      e = 0.5 * std::erfc(-x / std::numbers::sqrt2) - p;
    } else {
      e = (1.0 - p) - 0.5 * std::erfc(x / std::numbers::sqrt2);
      // e here is Phi(x) - p computed through the upper tail
    }
    const double u = e * std::sqrt(2.0 * std::numbers::pi) * std::exp(0.5 * x * x);
    x -= u / (1.0 + 0.5 * x * u);
  }
  return x;
}

namespace detail {

// Series for P(a, x), valid for x < a + 1.
inline double gamma_p_series(double a, double x) {
  double ap = a;
  double sum = 1.0 / a;
  double del = sum;
  for (int i = 0; i < 10000; ++i) {
    ap += 1.0;
    del *= x / ap;
    sum += del;
    if (std::abs(del) < std::abs(sum) * 1e-17) {
      return sum * std::exp(-x + a * std::log(x) - std::lgamma(a));
    }
  }
  throw NumericalError("incomplete gamma series did not converge");
}

// Modified Lentz continued fraction for Q(a, x), valid for x >= a + 1.
inline double gamma_q_fraction(double a, double x) {
  constexpr double tiny = 1e-300;
  double b = x + 1.0 - a;
  double c = 1.0 / tiny;
  double d = 1.0 / b;
  double h = d;
  for (int i = 1; i < 10000; ++i) {
    const double an = -i * (i - a);
    b += 2.0;
    d = an * d + b;
    if (std::abs(d) < tiny) d = tiny;
    c = b + an / c;
    if (std::abs(c) < tiny) c = tiny;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::abs(del - 1.0) < 1e-17) {
      return std::exp(-x + a * std::log(x) - std::lgamma(a)) * h;
    }
  }
  throw NumericalError("incomplete gamma continued fraction did not converge");
}

}  // namespace detail

/// Regularized lower incomplete gamma P(a, x).
inline double regularized_gamma_p(double a, double x) {
  if (!(a > 0.0)) throw Error("regularized_gamma_p: a must be positive");
  if (x <= 0.0) return 0.0;
  if (std::isinf(x)) return 1.0;
  return x < a + 1.0 ? detail::gamma_p_series(a, x) : 1.0 - detail::gamma_q_fraction(a, x);
}

/// Regularized upper incomplete gamma Q(a, x) = 1 - P(a, x), accurate in the far tail.
inline double regularized_gamma_q(double a, double x) {
  if (!(a > 0.0)) throw Error("regularized_gamma_q: a must be positive");
  if (x <= 0.0) return 1.0;
  if (std::isinf(x)) return 0.0;
  return x < a + 1.0 ? 1.0 - detail::gamma_p_series(a, x) : detail::gamma_q_fraction(a, x);
}

inline double chi_square_cdf(double df, double x) { return regularized_gamma_p(0.5 * df, 0.5 * x); }
inline double chi_square_sf(double df, double x) { return regularized_gamma_q(0.5 * df, 0.5 * x); }

inline double chi_square_pdf(double df, double x) {
  if (x <= 0.0) return 0.0;
  const double k = 0.5 * df;
  return std::exp((k - 1.0) * std::log(x) - 0.5 * x - k * std::numbers::ln2 - std::lgamma(k));
}

/// Quantile of the chi-square distribution: bracketed Newton iteration on the
/// regularized incomplete gamma, falling back to bisection when a Newton step
/// leaves the bracket. Throws NumericalError if the iteration cap is reached.
inline double chi_square_quantile(double df, double p) {
  if (!(df >= 1.0)) throw Error("chi_square_quantile: df must be >= 1");
  if (!(p > 0.0 && p < 1.0)) throw Error("chi_square_quantile: p must lie in (0,1)");

  // Wilson-Hilferty starting point.
  const double z = std_normal_quantile(p);
  const double h = 2.0 / (9.0 * df);
  double x = df * std::pow(std::max(1.0 - h + z * std::sqrt(h), 1e-3), 3.0);

  double lo = 0.0;
  double hi = std::max(1.0, 2.0 * x);
  while (chi_square_cdf(df, hi) < p) {
    lo = hi;
    hi *= 2.0;
    if (hi > 1e300) throw NumericalError("chi_square_quantile: cannot bracket");
  }
  if (!(x > lo && x < hi)) x = 0.5 * (lo + hi);

  for (int iter = 0; iter < 500; ++iter) {
    // Residual on the smaller tail keeps precision for p close to 1.
    const double resid = p < 0.5 ? chi_square_cdf(df, x) - p : (1.0 - p) - chi_square_sf(df, x);
    if (resid < 0.0) {
      lo = x;
    } else {
      hi = x;
    }
    if (std::abs(resid) <= 1e-15 * std::min(p, 1.0 - p) || hi - lo <= 4e-16 * hi) return x;
    const double dens = chi_square_pdf(df, x);
    double next = dens > 0.0 ? x - resid / dens : 0.5 * (lo + hi);
    if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
    if (std::abs(next - x) <= 1e-15 * x) return next;
    x = next;
  }
  throw NumericalError("chi_square_quantile: iteration cap reached");
}

// ---------------------------------------------------------------------------
// Distribution families
// ---------------------------------------------------------------------------

namespace family {
struct Uniform {
  double a, b;
  bool operator==(const Uniform&) const = default;
};
struct Normal {
  double mu, sigma;
  bool operator==(const Normal&) const = default;
};
struct Pareto {
  double alpha, eta;
  bool operator==(const Pareto&) const = default;
};
struct Gpd {
  double mu, sigma, xi;
  bool operator==(const Gpd&) const = default;
};
struct Exponential {
  double rate;
  bool operator==(const Exponential&) const = default;
};
struct Laplace {
  double mu, b;
  bool operator==(const Laplace&) const = default;
};
struct Cauchy {
  double mu, s;
  bool operator==(const Cauchy&) const = default;
};
struct ChiSquare {
  double k;
  bool operator==(const ChiSquare&) const = default;
};
}  // namespace family

/// A univariate parametric distribution. Constructed only through the named
/// factories, which enforce the family's parameter constraints.
class DistributionSpec {
 public:
  using Variant = std::variant<family::Uniform, family::Normal, family::Pareto, family::Gpd,
                               family::Exponential, family::Laplace, family::Cauchy,
                               family::ChiSquare>;

  static DistributionSpec uniform(double a, double b) {
    require(std::isfinite(a) && std::isfinite(b) && a < b, "uniform requires finite a < b");
    return DistributionSpec(family::Uniform{a, b});
  }
  static DistributionSpec normal(double mu, double sigma) {
    require(std::isfinite(mu) && sigma > 0.0 && std::isfinite(sigma), "normal requires sigma > 0");
    return DistributionSpec(family::Normal{mu, sigma});
  }
  static DistributionSpec pareto(double alpha, double eta) {
    require(alpha > 0.0 && eta > 0.0 && std::isfinite(alpha) && std::isfinite(eta),
            "pareto requires alpha > 0 and eta > 0");
    return DistributionSpec(family::Pareto{alpha, eta});
  }
  static DistributionSpec gpd(double mu, double sigma, double xi) {
    require(std::isfinite(mu) && sigma > 0.0 && std::isfinite(sigma) && std::isfinite(xi),
            "gpd requires sigma > 0");
    return DistributionSpec(family::Gpd{mu, sigma, xi});
  }
  static DistributionSpec exponential(double rate) {
    require(rate > 0.0 && std::isfinite(rate), "exponential requires rate > 0");
    return DistributionSpec(family::Exponential{rate});
  }
  static DistributionSpec laplace(double mu, double b) {
    require(std::isfinite(mu) && b > 0.0 && std::isfinite(b), "laplace requires b > 0");
    return DistributionSpec(family::Laplace{mu, b});
  }
  static DistributionSpec cauchy(double mu, double s) {
    require(std::isfinite(mu) && s > 0.0 && std::isfinite(s), "cauchy requires s > 0");
    return DistributionSpec(family::Cauchy{mu, s});
  }
  static DistributionSpec chi_square(double k) {
    require(k >= 1.0 && std::isfinite(k), "chi_square requires k >= 1");
    return DistributionSpec(family::ChiSquare{k});
  }

  const Variant& params() const noexcept { return params_; }

  template <typename F>
  const F* as() const noexcept {
    return std::get_if<F>(&params_);
  }

  std::string family_name() const {
    return std::visit(
        [](const auto& f) -> std::string {
          using T = std::decay_t<decltype(f)>;
          if constexpr (std::is_same_v<T, family::Uniform>) return "uniform";
          else if constexpr (std::is_same_v<T, family::Normal>) return "normal";
          else if constexpr (std::is_same_v<T, family::Pareto>) return "pareto";
          else if constexpr (std::is_same_v<T, family::Gpd>) return "gpd";
          else if constexpr (std::is_same_v<T, family::Exponential>) return "exponential";
          else if constexpr (std::is_same_v<T, family::Laplace>) return "laplace";
          else if constexpr (std::is_same_v<T, family::Cauchy>) return "cauchy";
          else return "chi_square";
        },
        params_);
  }

  bool operator==(const DistributionSpec&) const = default;

 private:
  explicit DistributionSpec(Variant v) : params_(std::move(v)) {}
  static void require(bool ok, const char* msg) {
    if (!ok) throw Error(std::string("invalid distribution: ") + msg);
  }

  Variant params_;
};

/// GPD branch threshold: |xi| below this uses the exponential limit with a first-order correction.
inline constexpr double kGpdXiZero = 1e-12;

/// Exact analytic cdf.
inline double cdf(const DistributionSpec& spec, double x) {
  using namespace family;
  return std::visit(
      [x](const auto& f) -> double {
        using T = std::decay_t<decltype(f)>;
        if constexpr (std::is_same_v<T, Uniform>) {
          if (x <= f.a) return 0.0;
          if (x >= f.b) return 1.0;
          return (x - f.a) / (f.b - f.a);
        } else if constexpr (std::is_same_v<T, Normal>) {
          return std_normal_cdf((x - f.mu) / f.sigma);
        } else if constexpr (std::is_same_v<T, Pareto>) {
          if (x <= f.eta) return 0.0;
          return -std::expm1(-f.alpha * std::log(x / f.eta));
        } else if constexpr (std::is_same_v<T, Gpd>) {
          const double z = (x - f.mu) / f.sigma;
          if (z <= 0.0) return 0.0;
          if (std::abs(f.xi) < kGpdXiZero) return -std::expm1(-z * (1.0 - 0.5 * f.xi * z));
          const double t = 1.0 + f.xi * z;
          if (t <= 0.0) return 1.0;  // beyond the upper endpoint when xi < 0
          return -std::expm1(-std::log1p(f.xi * z) / f.xi);
        } else if constexpr (std::is_same_v<T, Exponential>) {
          if (x <= 0.0) return 0.0;
          return -std::expm1(-f.rate * x);
        } else if constexpr (std::is_same_v<T, Laplace>) {
          const double z = (x - f.mu) / f.b;
          return z < 0.0 ? 0.5 * std::exp(z) : 1.0 - 0.5 * std::exp(-z);
        } else if constexpr (std::is_same_v<T, Cauchy>) {
          return 0.5 + std::atan((x - f.mu) / f.s) / std::numbers::pi;
        } else {
          return chi_square_cdf(f.k, x);
        }
      },
      spec.params());
}

/// Inverse cdf on (0, 1).
inline double quantile(const DistributionSpec& spec, double p) {
  if (!(p > 0.0 && p < 1.0)) throw Error("quantile: p must lie in (0,1)");
  using namespace family;
  return std::visit(
      [p](const auto& f) -> double {
        using T = std::decay_t<decltype(f)>;
        if constexpr (std::is_same_v<T, Uniform>) {
          return f.a + p * (f.b - f.a);
        } else if constexpr (std::is_same_v<T, Normal>) {
          return f.mu + f.sigma * std_normal_quantile(p);
        } else if constexpr (std::is_same_v<T, Pareto>) {
          return f.eta * std::exp(-std::log1p(-p) / f.alpha);
        } else if constexpr (std::is_same_v<T, Gpd>) {
          const double tail = -std::log1p(-p);  // -log(1-p) > 0
          if (std::abs(f.xi) < kGpdXiZero) return f.mu + f.sigma * tail * (1.0 + 0.5 * f.xi * tail);
          return f.mu + f.sigma * std::expm1(f.xi * tail) / f.xi;
        } else if constexpr (std::is_same_v<T, Exponential>) {
          return -std::log1p(-p) / f.rate;
        } else if constexpr (std::is_same_v<T, Laplace>) {
          return p < 0.5 ? f.mu + f.b * std::log(2.0 * p) : f.mu - f.b * std::log(2.0 * (1.0 - p));
        } else if constexpr (std::is_same_v<T, Cauchy>) {
          return f.mu + f.s * std::tan(std::numbers::pi * (p - 0.5));
        } else {
          return chi_square_quantile(f.k, p);
        }
      },
      spec.params());
}

/// Inverse-transform sample: quantile(spec, U) with U uniform on (0,1).
inline double sample(const DistributionSpec& spec, Rng& rng) { return quantile(spec, rng.uniform()); }

/// Lower and upper support endpoints (possibly infinite).
inline std::pair<double, double> support(const DistributionSpec& spec) {
  using namespace family;
  return std::visit(
      [](const auto& f) -> std::pair<double, double> {
        constexpr double inf = std::numeric_limits<double>::infinity();
        using T = std::decay_t<decltype(f)>;
        if constexpr (std::is_same_v<T, Uniform>) return {f.a, f.b};
        else if constexpr (std::is_same_v<T, Pareto>) return {f.eta, inf};
        else if constexpr (std::is_same_v<T, Gpd>) {
          if (f.xi < 0.0) return {f.mu, f.mu - f.sigma / f.xi};
          return {f.mu, inf};
        } else if constexpr (std::is_same_v<T, Exponential> || std::is_same_v<T, ChiSquare>)
          return {0.0, inf};
        else return {-inf, inf};
      },
      spec.params());
}

// ---------------------------------------------------------------------------
// JSON: {"family": "...", "params": {...}}
// ---------------------------------------------------------------------------

inline nlohmann::json to_json(const DistributionSpec& spec) {
  using namespace family;
  nlohmann::json params = std::visit(
      [](const auto& f) -> nlohmann::json {
        using T = std::decay_t<decltype(f)>;
        if constexpr (std::is_same_v<T, Uniform>) return {{"a", f.a}, {"b", f.b}};
        else if constexpr (std::is_same_v<T, Normal>) return {{"mu", f.mu}, {"sigma", f.sigma}};
        else if constexpr (std::is_same_v<T, Pareto>) return {{"alpha", f.alpha}, {"eta", f.eta}};
        else if constexpr (std::is_same_v<T, Gpd>)
          return {{"mu", f.mu}, {"sigma", f.sigma}, {"xi", f.xi}};
        else if constexpr (std::is_same_v<T, Exponential>) return {{"lambda", f.rate}};
        else if constexpr (std::is_same_v<T, Laplace>) return {{"mu", f.mu}, {"b", f.b}};
        else if constexpr (std::is_same_v<T, Cauchy>) return {{"mu", f.mu}, {"s", f.s}};
        else return {{"k", f.k}};
      },
      spec.params());
  return {{"family", spec.family_name()}, {"params", params}};
}

inline DistributionSpec distribution_from_json(const nlohmann::json& j) {
  if (!j.is_object() || !j.contains("family") || !j.contains("params")) {
    throw Error("distribution JSON must have \"family\" and \"params\"");
  }
  const std::string fam = j.at("family").get<std::string>();
  const auto& p = j.at("params");
  auto get = [&](const char* key) -> double {
    if (!p.contains(key) || !p.at(key).is_number()) {
      throw Error("distribution \"" + fam + "\" missing numeric parameter \"" + key + "\"");
    }
    return p.at(key).get<double>();
  };
  if (fam == "uniform") return DistributionSpec::uniform(get("a"), get("b"));
  if (fam == "normal") return DistributionSpec::normal(get("mu"), get("sigma"));
  if (fam == "pareto") return DistributionSpec::pareto(get("alpha"), get("eta"));
  if (fam == "gpd") return DistributionSpec::gpd(get("mu"), get("sigma"), get("xi"));
  if (fam == "exponential") return DistributionSpec::exponential(get("lambda"));
  if (fam == "laplace") return DistributionSpec::laplace(get("mu"), get("b"));
  if (fam == "cauchy") return DistributionSpec::cauchy(get("mu"), get("s"));
  if (fam == "chi_square") return DistributionSpec::chi_square(get("k"));
  throw Error("unknown distribution family \"" + fam + "\"");
}

}  // namespace localrhat
