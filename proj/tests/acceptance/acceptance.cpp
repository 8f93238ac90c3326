// One PASS/FAIL line per acceptance criterion; exit status 1 when any fails.
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <numbers>
#include <string>
#include <vector>

#include "ks.hpp"
#include "localrhat/localrhat.hpp"

using namespace localrhat;

namespace {

int failures = 0;

void report(int id, bool ok, const std::string& what, const std::string& detail) {
  std::printf("%s criterion %d: %s | %s\n", ok ? "PASS" : "FAIL", id, what.c_str(), detail.c_str());
  std::fflush(stdout);
  if (!ok) ++failures;
}

std::string fmt(const char* f, double a) {
  char buf[128];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

void run(int id, const std::string& what, const std::function<bool(std::string&)>& body) {
  std::string detail;
  bool ok = false;
  try {
    ok = body(detail);
  } catch (const std::exception& e) {
    detail += std::string(" exception: ") + e.what();
  }
  report(id, ok, what, detail);
}

double fraction(const std::vector<double>& v, const std::function<bool(double)>& pred) {
  double hits = 0.0;
  for (double x : v) hits += pred(x) ? 1.0 : 0.0;
  return hits / static_cast<double>(v.size());
}

PopulationModel odd_model(const DistributionSpec& base, const DistributionSpec& odd, std::size_t m) {
  PopulationModel model;
  model.chains.assign(m - 1, base);
  model.chains.push_back(odd);
  return model;
}

}  // namespace

int main() {
  run(1, "type I error of cutoff 1.01, m=4", [](std::string& d) {
    const auto t0 = std::chrono::steady_clock::now();
    const double ess[] = {50, 100, 200, 400};
    const double want[] = {0.80, 0.57, 0.26, 0.04};
    bool ok = true;
    for (int k = 0; k < 4; ++k) {
      const double a = type1_error(4, 1.01, ess[k]);
      ok = ok && std::abs(a - want[k]) <= 0.01;
      d += fmt("ess %.0f:", ess[k]) + fmt("%.4f ", a);
    }
    const double a800 = type1_error(4, 1.01, 800), a1500 = type1_error(4, 1.01, 1500);
    ok = ok && a800 <= 1.2e-3 && a1500 <= 1e-5;
    const double s = seconds_since(t0);
    d += fmt("ess 800:%.3g ", a800) + fmt("ess 1500:%.3g ", a1500) + fmt("time %.4fs", s);
    return ok && s < 1.0;
  });

  run(2, "asymptotic threshold r_lim(m, 0.05, 400)", [](std::string& d) {
    const auto t0 = std::chrono::steady_clock::now();
    const std::size_t ms[] = {2, 4, 8, 15, 50, 100};
    const double want[] = {1.005, 1.010, 1.017, 1.029, 1.080, 1.144};
    bool ok = true;
    for (int k = 0; k < 6; ++k) {
      const double r = r_lim(ms[k], 0.05, 400);
      ok = ok && std::abs(r - want[k]) <= 0.001;
      d += fmt("m %.0f:", static_cast<double>(ms[k])) + fmt("%.4f ", r);
    }
    const double s = seconds_since(t0);
    d += fmt("time %.4fs", s);
    return ok && s < 1.0;
  });

  run(3, "null quantiles of R-hat-infinity, ess 400, 2000 reps (recomputed)", [](std::string& d) {
    const std::size_t ms[] = {2, 3, 4, 8, 10, 20};
    const double alphas[] = {0.005, 0.01, 0.05, 0.1};
    const double printed[6][4] = {{1.018, 1.016, 1.012, 1.010}, {1.023, 1.022, 1.016, 1.014},
                                  {1.027, 1.025, 1.020, 1.018}, {1.038, 1.037, 1.031, 1.028},
                                  {1.043, 1.041, 1.036, 1.033}, {1.080, 1.076, 1.062, 1.056}};
    bool ok = true;
    double worst = 0.0;
    for (int i = 0; i < 6; ++i) {
      const double tol = ms[i] == 20 ? 0.008 : 0.005;
      for (int k = 0; k < 4; ++k) {
        const double q = mc_null_quantile(ThresholdSpec{ms[i], 1, alphas[k], 400.0, 2000, kDefaultSeed}, true);
        const double err = std::abs(q - printed[i][k]);
        worst = std::max(worst, err / tol);
        if (err > tol) {
          ok = false;
          d += fmt("miss m=%.0f ", static_cast<double>(ms[i])) + fmt("alpha=%.3f ", alphas[k]) + fmt("%.4f ", q);
        }
      }
    }
    d += fmt("24 cells, worst |err|/tol %.2f", worst);
    return ok;
  });

  run(4, "two-step thresholds, m 4/8, d 2..6, alpha 0.05, 20000 reps", [](std::string& d) {
    // rows d = 2..6; margin then copula
    const double m4[5][2] = {{1.025, 1.026}, {1.026, 1.030}, {1.025, 1.033}, {1.026, 1.040}, {1.030, 1.034}};
    const double m8[5][2] = {{1.037, 1.040}, {1.037, 1.047}, {1.040, 1.048}, {1.038, 1.048}, {1.039, 1.058}};
    bool ok = true;
    double worst = 0.0;
    for (std::size_t m : {4u, 8u}) {
      for (std::size_t dd = 2; dd <= 6; ++dd) {
        const auto t = mv_thresholds(m, dd, 0.05, 400.0, 20000, kDefaultSeed);
        const auto& row = (m == 4 ? m4 : m8)[dd - 2];
        const double e1 = std::abs(t.margin - row[0]);
        const double e2 = std::abs(t.copula - row[1]);
        worst = std::max({worst, e1, e2});
        if (e1 > 0.01 || e2 > 0.01) ok = false;
        d += fmt("m%.0f", static_cast<double>(m)) + fmt("d%.0f:", static_cast<double>(dd)) +
             fmt("%.4f/", t.margin) + fmt("%.4f ", t.copula);
      }
    }
    d += fmt("worst |err| %.4f", worst);
    return ok;
  });

  run(5, "closed-form R-infinity vs grid+refine (100 random draws per family)", [](std::string& d) {
    Rng rng(5005);
    double worst[3] = {0, 0, 0};
    for (int t = 0; t < 100; ++t) {
      const std::size_t m = 2 + static_cast<std::size_t>(9.0 * rng.uniform());
      const double sigma = 0.1 + 4.9 * rng.uniform();
      const double sigma_m = sigma * (1.05 + 2.0 * rng.uniform());
      const auto um = odd_model(DistributionSpec::uniform(-sigma, sigma), DistributionSpec::uniform(-sigma_m, sigma_m), m);
      worst[0] = std::max(worst[0], std::abs(uniform_r_infinity(sigma, sigma_m, m) -
                                             population_r_infinity(um, PopulationMethod::grid_refine).value));

      const double alpha = 0.3 + 2.7 * rng.uniform();
      const double eta = 0.5 + 2.5 * rng.uniform();
      const double eta_m = eta * (1.05 + 2.0 * rng.uniform());
      const auto pm = odd_model(DistributionSpec::pareto(alpha, eta), DistributionSpec::pareto(alpha, eta_m), m);
      worst[1] = std::max(worst[1], std::abs(pareto_r_infinity(alpha, eta, eta_m, m) -
                                             population_r_infinity(pm, PopulationMethod::grid_refine).value));

      const double b = 0.1 + 9.9 * rng.uniform();
      const auto lm = odd_model(DistributionSpec::uniform(-2.0 * b, 2.0 * b), DistributionSpec::laplace(0.0, b), 2);
      worst[2] = std::max(worst[2], std::abs(laplace_uniform_r_infinity() -
                                             population_r_infinity(lm, PopulationMethod::grid_refine).value));
    }
    const double c = laplace_uniform_r_infinity();
    d = fmt("max |diff| uniform %.2e ", worst[0]) + fmt("pareto %.2e ", worst[1]) + fmt("laplace %.2e ", worst[2]) +
        fmt("laplace constant %.7f", c);
    return worst[0] <= 1e-8 && worst[1] <= 1e-8 && worst[2] <= 1e-8 && std::abs(c - 1.01799) <= 1e-5;
  });

  run(6, "consistency at n=1e5, m=4 (Examples 1 and 2, 50 reps)", [](std::string& d) {
    const double pop1 = uniform_r_infinity(0.75, 1.0, 4);
    const double pop2 = pareto_r_infinity(0.8, 1.0, 1.5, 4);
    const auto s1 = replicate_univariate(
        one_odd_chain(DistributionSpec::uniform(-0.75, 0.75), DistributionSpec::uniform(-1, 1), 4), 100000, 50, 61);
    const auto s2 = replicate_univariate(
        one_odd_chain(DistributionSpec::pareto(0.8, 1.0), DistributionSpec::pareto(0.8, 1.5), 4), 100000, 50, 62);
    std::vector<double> v1, v2;
    for (const auto& s : s1) v1.push_back(s.rhat_inf);
    for (const auto& s : s2) v2.push_back(s.rhat_inf);
    const double f1 = fraction(v1, [&](double r) { return std::abs(r - pop1) <= 0.005; });
    const double f2 = fraction(v2, [&](double r) { return std::abs(r - pop2) <= 0.005; });
    d = fmt("R-inf %.5f ", pop1) + fmt("within: %.2f; ", f1) + fmt("R-inf %.5f ", pop2) + fmt("within: %.2f", f2);
    return f1 >= 0.95 && f2 >= 0.95;
  });

  run(7, "detection contrast, m=4, n=200, 500 reps", [](std::string& d) {
    double fr[3] = {0, 0, 0};
    double rank3 = 0.0;
    for (int e = 1; e <= 3; ++e) {
      SimulationConfig cfg;
      cfg.example = e;
      cfg.reps = 500;
      cfg.seed = 700 + static_cast<std::uint64_t>(e);
      std::vector<double> inf, rank;
      for (const auto& row : simulate(cfg)) {
        if (row.stat == "rhat_inf") inf.push_back(row.value);
        if (row.stat == "rank_rhat") rank.push_back(row.value);
      }
      fr[e - 1] = fraction(inf, [](double r) { return r > 1.02; });
      if (e == 3) rank3 = fraction(rank, [](double r) { return r > 1.01; });
    }
    d = fmt("ex1 R-inf>1.02: %.3f ", fr[0]) + fmt("ex2: %.3f ", fr[1]) + fmt("ex3: %.3f ", fr[2]) +
        fmt("ex3 rank>1.01: %.3f", rank3);
    return fr[0] >= 0.8 && fr[1] >= 0.8 && fr[2] >= 0.6 && rank3 <= 0.2;
  });

  run(8, "null false-alarm rate at threshold 1.020, m=4, nm=400, 2000 reps", [](std::string& d) {
    const auto v = null_rhat_infinity_sample(4, 100, 2000, kDefaultSeed + 1);
    const double f = fraction(v, [](double r) { return r >= 1.020; });
    d = fmt("rate %.4f", f);
    return std::abs(f - 0.05) <= 0.02;
  });

  run(9, "null invariance: uniform vs Pareto(0.8,1) chains, two-sample KS", [](std::string& d) {
    const auto a = null_rhat_infinity_sample(4, 100, 2000, 901);
    const auto b = null_rhat_infinity_sample(4, 100, 2000, 902, DistributionSpec::pareto(0.8, 1.0));
    const double p = testsupport::ks_two_sample_pvalue(a, b);
    d = fmt("D %.4f ", testsupport::ks_two_sample_stat(a, b)) + fmt("p %.4f", p);
    return p > 0.01;
  });

  run(10, "chi-square law of ESS(x)(R^2(x)-1) at the pooled median, 2000 reps", [](std::string& d) {
    bool ok = true;
    for (std::size_t m : {2u, 4u}) {
      const std::size_t n = m == 2 ? 10000 : 5000;
      std::vector<double> stat(2000);
      const std::vector<DistributionSpec> specs(m, DistributionSpec::uniform(0, 1));
      parallel_for(stat.size(), [&](std::size_t r) {
        const auto cs = generate_iid(specs, n, derive_seed(1010 + m, r));
        const double x = pooled_median(cs);
        const double rh = local_rhat(cs, x);
        stat[r] = local_ess(cs, x) * (rh * rh - 1.0);
      });
      const double df = static_cast<double>(m - 1);
      const double p = testsupport::ks_one_sample_pvalue(stat, [df](double x) { return x <= 0 ? 0.0 : chi_square_cdf(df, x); });
      d += fmt("m=%.0f ", static_cast<double>(m)) + fmt("n=%.0f ", static_cast<double>(n)) + fmt("KS p %.4f; ", p);
      ok = ok && p > 0.01;
    }
    return ok;
  });

  run(11, "copula bounds", [](std::string& d) {
    const double wm = copula_population_r_infinity(Copula::lower(2), Copula::upper(2));
    const double pm = copula_population_r_infinity(Copula::independence(2), Copula::upper(2));
    double nl = 0.0;
    for (std::size_t k : {2u, 3u, 5u}) {
      nl = std::max(nl, std::abs(copula_population_r_infinity(Copula::independence(k), Copula::lower(k)) - nlod_bound(k)));
    }
    const double lim = std::sqrt(1.0 + 1.0 / (2.0 * (std::numbers::e - 1.0)));
    const double big = nlod_bound(1'000'000);
    d = fmt("(W2,M2) %.8f ", wm) + fmt("(P2,M2) %.6f ", pm) + fmt("nlod max|diff| %.2e ", nl) +
        fmt("nlod(1e6) %.6f ", big) + fmt("limit %.6f", lim);
    return std::abs(wm - std::sqrt(1.5)) <= 1e-6 && std::abs(pm - 1.038) <= 1e-4 && nl <= 1e-6 &&
           std::abs(big - lim) <= 1e-4;
  });

  run(12, "bivariate detection, m=2, n=200, 100 reps, d=2 copula threshold", [](std::string& d) {
    const double th = mv_thresholds(2, 2, 0.05, 400.0, 2000, kDefaultSeed).copula;
    double f[2] = {0, 0};
    const double rhos[2] = {0.9, 0.0};
    for (int k = 0; k < 2; ++k) {
      SimulationConfig cfg;
      cfg.example = 4;
      cfg.rho = rhos[k];
      cfg.seed = 1200 + static_cast<std::uint64_t>(k);
      std::vector<double> mx(100);
      parallel_for(mx.size(), [&](std::size_t r) { mx[r] = rhat_max_infinity(example_chains(cfg, r)).value; });
      f[k] = fraction(mx, [th](double v) { return v >= th; });
    }
    d = fmt("threshold %.4f ", th) + fmt("rho 0.9 exceed %.2f ", f[0]) + fmt("rho 0 exceed %.2f", f[1]);
    return f[0] >= 0.7 && std::abs(f[1] - 0.05) <= 0.03;
  });

  run(13, "direction symmetry under coordinate negation (20 random inputs)", [](std::string& d) {
    Rng rng(1313);
    bool full_ok = true;
    bool canon_ok = true;
    int canon_first_diff = 0;
    for (int t = 0; t < 20; ++t) {
      const std::size_t m = 2 + static_cast<std::size_t>(3.0 * rng.uniform());
      const std::size_t dd = 2 + static_cast<std::size_t>(3.0 * rng.uniform());
      const std::size_t n = 20 + static_cast<std::size_t>(600.0 * rng.uniform());
      std::vector<Eigen::MatrixXd> covs;
      for (std::size_t j = 0; j < m; ++j) covs.push_back(random_unitdiag_covariance(dd, derive_seed(t, j)));
      const auto cs = generate_mvn(covs, n, derive_seed(1313, t));
      MvGridOptions full;
      full.all_directions = true;
      const double base_full = rhat_max_infinity(cs, full).value;
      const double base_canon = rhat_max_infinity(cs).value;
      for (std::size_t p = 0; p < dd; ++p) {
        const auto neg = cs.transformed([p](double v, std::size_t q) { return q == p ? -v : v; });
        full_ok = full_ok && rhat_max_infinity(neg, full).value == base_full;
        const bool same = rhat_max_infinity(neg).value == base_canon;
        if (p > 0) canon_ok = canon_ok && same;
        else canon_first_diff += same ? 0 : 1;
      }
    }
    d = std::string("full 2^d set, every coordinate: ") + (full_ok ? "identical" : "DIFFERS") +
        "; canonical set, coordinates 2..d: " + (canon_ok ? "identical" : "DIFFERS") +
        "; canonical set, coordinate 1 differs in " + std::to_string(canon_first_diff) + "/20 inputs";
    return full_ok && canon_ok;
  });

  run(14, "GPD counter-example solver", [](std::string& d) {
    const auto p = solve_counterexample(0.0, -1.0, 1.0, 0.0);
    const auto* g = p.spec2.as<family::Gpd>();
    const double es = std::abs(g->sigma - 4.0 * std::numbers::ln2);
    const double em = std::abs(g->mu - (1.0 - 2.0 * std::numbers::ln2));
    Rng rng(1414);
    double worst = 0.0;
    for (int t = 0; t < 100; ++t) {
      const double xi1 = -2.0 + 2.9 * rng.uniform();
      const double xi2 = -2.0 + 2.9 * rng.uniform();
      const double s1 = 0.1 + 5.0 * rng.uniform();
      const double mu1 = -5.0 + 10.0 * rng.uniform();
      const auto q = solve_counterexample(xi1, xi2, s1, mu1);
      const auto* a = q.spec1.as<family::Gpd>();
      const auto* b = q.spec2.as<family::Gpd>();
      const double ma = gpd_mean(a->mu, a->sigma, a->xi), ua = gpd_upper_half_mean(a->mu, a->sigma, a->xi);
      const double scale = std::max({1.0, std::abs(ma), std::abs(ua)});
      worst = std::max({worst, std::abs(ma - gpd_mean(b->mu, b->sigma, b->xi)) / scale,
                        std::abs(ua - gpd_upper_half_mean(b->mu, b->sigma, b->xi)) / scale});
    }
    d = fmt("|sigma2 - 4 log 2| %.1e ", es) + fmt("|mu2 - (1 - 2 log 2)| %.1e ", em) +
        fmt("max relative constraint residual %.1e", worst);
    return es <= 1e-12 && em <= 1e-12 && worst <= 1e-10;
  });

  std::printf("%d criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
