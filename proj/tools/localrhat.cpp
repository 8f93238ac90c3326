// localrhat command-line front end.

#include <cmath>
#include <fstream>
#include <iostream>
#include <numbers>
#include <optional>
#include <sstream>
#include <string>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "localrhat/localrhat.hpp"

namespace lr = localrhat;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitError = 1;
constexpr int kExitNotConverged = 2;

struct Common {
  std::string input;
  std::string layout;
  std::string out;
  std::string format = "json";
  double alpha = 0.05;
  std::size_t stride = 1;
  std::size_t reps = 2000;
  std::uint64_t seed = lr::kDefaultSeed;
  std::optional<double> threshold;
};

std::optional<lr::Layout> parse_layout(const std::string& s) {
  if (s.empty()) return std::nullopt;
  if (s == "wide") return lr::Layout::wide;
  if (s == "long") return lr::Layout::long_;
  throw lr::Error("unknown layout \"" + s + "\" (expected wide or long)");
}

// Writes to --out when given, stdout otherwise.
void emit(const std::string& path, const std::string& text) {
  if (path.empty()) {
    std::cout << text;
    return;
  }
  std::ofstream f(path, std::ios::binary);
  if (!f) throw lr::Error("cannot write " + path);
  f << text;
}

lr::GridSpec grid_for(std::size_t stride) {
  if (stride == 0) throw lr::Error("--stride must be >= 1");
  if (stride == 1) return lr::grid::AllPoints{};
  return lr::grid::Stride{stride};
}

int run_mv(const lr::ChainSet& cs, const Common& c, bool preset, bool all_dirs,
           std::optional<double> margin_th, std::optional<double> copula_th) {
  lr::MvDiagnoseConfig cfg;
  cfg.alpha = c.alpha;
  cfg.reps = c.reps;
  cfg.seed = c.seed;
  cfg.use_preset = preset;
  cfg.grid.all_directions = all_dirs;
  if (margin_th || copula_th || c.threshold) {
    const double fallback = c.threshold.value_or(0.0);
    if (!margin_th && !c.threshold) throw lr::Error("--margin-threshold needed with --copula-threshold");
    if (!copula_th && !c.threshold) throw lr::Error("--copula-threshold needed with --margin-threshold");
    cfg.thresholds = lr::MvThresholds{margin_th.value_or(fallback), copula_th.value_or(fallback)};
  }
  const auto rep = lr::two_step_diagnosis(cs, cfg);
  emit(c.out, lr::to_json(rep).dump(2) + "\n");
  return rep.converged ? kExitOk : kExitNotConverged;
}

int cmd_diagnose(const Common& c, bool preset, bool all_dirs, std::optional<double> mt, std::optional<double> ct) {
  const auto cs = lr::load_chains(c.input, parse_layout(c.layout));
  if (cs.dims() > 1) return run_mv(cs, c, preset, all_dirs, mt, ct);
  lr::DiagnoseConfig cfg;
  cfg.alpha = c.alpha;
  cfg.threshold = c.threshold;
  cfg.grid = grid_for(c.stride);
  cfg.mc_reps = c.reps;
  cfg.seed = c.seed;
  const auto rep = lr::diagnose(cs, cfg);
  if (c.format == "csv") {
    const auto j = lr::to_json(rep);
    std::ostringstream os;
    os << "field,value\n";
    for (const auto& [k, v] : j.items()) os << k << ',' << (v.is_string() ? v.get<std::string>() : v.dump()) << '\n';
    emit(c.out, os.str());
  } else {
    emit(c.out, lr::to_json(rep).dump(2) + "\n");
  }
  return rep.verdict == lr::Verdict::converged ? kExitOk : kExitNotConverged;
}

int cmd_curve(const Common& c, const std::string& model_path, bool no_ess) {
  const auto cs = lr::load_chains(c.input, parse_layout(c.layout));
  if (cs.dims() != 1) throw lr::Error("curve requires univariate input (d = 1)");
  auto curve = lr::rhat_curve(cs, grid_for(c.stride));
  if (!no_ess) lr::attach_ess(cs, curve);
  std::optional<lr::LocalCurve> overlay;
  if (!model_path.empty()) {
    std::ifstream f(model_path);
    if (!f) throw lr::Error("cannot open file " + model_path);
    const auto model = lr::population_from_json(nlohmann::json::parse(f));
    std::vector<double> xs;
    for (const auto& p : curve.points) xs.push_back(p.x);
    overlay = lr::population_curve(model, xs);
  }
  std::ostringstream os;
  lr::write_curve_csv(os, curve, overlay ? &*overlay : nullptr);
  emit(c.out, os.str());
  return kExitOk;
}

int cmd_threshold(const Common& c, const std::string& table, std::size_t m, std::size_t d, double ess,
                  bool recompute) {
  std::ostringstream os;
  if (table.empty()) {
    if (d <= 1) {
      lr::ThresholdSpec spec{m, 1, c.alpha, ess, c.reps, c.seed};
      os << "m,alpha,ess,r_lim,rinf_lim\n"
         << m << ',' << lr::format_double(c.alpha) << ',' << lr::format_double(ess) << ','
         << lr::format_double(lr::r_lim(m, c.alpha, ess)) << ','
         << lr::format_double(lr::mc_null_quantile(spec, recompute)) << '\n';
    } else {
      const auto th = lr::mv_thresholds(m, d, c.alpha, ess, c.reps, c.seed);
      os << "d,m,alpha,margin,copula\n"
         << d << ',' << m << ',' << lr::format_double(c.alpha) << ',' << lr::format_double(th.margin) << ','
         << lr::format_double(th.copula) << '\n';
    }
  } else if (table == "t1-left") {
    const double r = c.threshold.value_or(1.01);
    os << "ess,type1_error\n";
    for (double e : {50.0, 100.0, 200.0, 400.0, 800.0, 1500.0}) {
      os << lr::format_double(e) << ',' << lr::format_double(lr::type1_error(m, r, e)) << '\n';
    }
  } else if (table == "t1-right") {
    os << "m,r_lim\n";
    for (std::size_t mm : {2, 4, 8, 15, 50, 100}) {
      os << mm << ',' << lr::format_double(lr::r_lim(mm, c.alpha, ess)) << '\n';
    }
  } else if (table == "2") {
    os << "m,alpha,rinf_lim\n";
    for (std::size_t mm : {2, 3, 4, 8, 10, 20}) {
      for (double a : {0.005, 0.01, 0.05, 0.1}) {
        lr::ThresholdSpec spec{mm, 1, a, ess, c.reps, c.seed};
        os << mm << ',' << lr::format_double(a) << ',' << lr::format_double(lr::mc_null_quantile(spec, recompute))
           << '\n';
      }
    }
  } else if (table == "b1") {
    os << "d,m,alpha,margin,copula\n";
    for (std::size_t dd = 2; dd <= 6; ++dd) {
      for (std::size_t mm : {2, 3, 4, 8}) {
        // one null sample per (m, d) serves every alpha
        lr::ThresholdSpec spec{mm, dd, 0.05, ess, c.reps, c.seed};
        const auto null = lr::null_sample(spec);
        for (double a : {0.005, 0.01, 0.05, 0.1}) {
          const double margin = lr::upper_empirical_quantile(null, 0.5 * a / static_cast<double>(dd));
          const double copula = lr::upper_empirical_quantile(null, 0.5 * a / std::ldexp(1.0, static_cast<int>(dd) - 1));
          os << dd << ',' << mm << ',' << lr::format_double(a) << ',' << lr::format_double(margin) << ','
             << lr::format_double(copula) << '\n';
        }
      }
    }
  } else if (table == "bounds") {
    os << "d,frechet,plod,nlod\n";
    for (std::size_t dd = 2; dd <= (d > 1 ? d : 10); ++dd) {
      os << dd << ',' << lr::format_double(lr::frechet_r_infinity_bound(dd)) << ','
         << lr::format_double(lr::plod_bound(dd)) << ',' << lr::format_double(lr::nlod_bound(dd)) << '\n';
    }
  } else {
    throw lr::Error("unknown table \"" + table + "\" (expected t1-left, t1-right, 2, b1, bounds)");
  }
  emit(c.out, os.str());
  return kExitOk;
}

int cmd_simulate(const Common& c, int example, std::optional<std::size_t> m, std::optional<std::size_t> n,
                 std::size_t d, double rho) {
  lr::SimulationConfig cfg;
  cfg.example = example;
  cfg.reps = c.reps;
  cfg.seed = c.seed;
  cfg.m = m;
  cfg.n = n;
  cfg.d = d;
  cfg.rho = rho;
  std::ostringstream os;
  lr::write_sim_csv(os, lr::simulate(cfg));
  emit(c.out, os.str());
  return kExitOk;
}

int cmd_counterexample(const Common& c, const std::string& pair_kind, double xi1, double xi2, double sigma1,
                       double mu1, std::size_t m, std::size_t n) {
  nlohmann::json pair_json;
  lr::DistributionSpec s1 = lr::DistributionSpec::exponential(1.0);
  lr::DistributionSpec s2 = s1;
  if (pair_kind == "gpd") {
    const auto pair = lr::solve_counterexample(xi1, xi2, sigma1, mu1);
    pair_json = lr::to_json(pair);
    s1 = pair.spec1;
    s2 = pair.spec2;
  } else if (pair_kind == "laplace-uniform") {
    s1 = lr::DistributionSpec::uniform(-2.0 * sigma1, 2.0 * sigma1);
    s2 = lr::DistributionSpec::laplace(0.0, sigma1);
    pair_json = {{"spec1", lr::to_json(s1)}, {"spec2", lr::to_json(s2)}};
  } else {
    throw lr::Error("unknown pair \"" + pair_kind + "\" (expected gpd or laplace-uniform)");
  }
  const auto det = lr::demo_false_negative(s1, s2, m, n, c.reps, c.seed, c.threshold);
  std::ostringstream os;
  if (c.format == "csv") {
    os << "stat,threshold,fraction\n"
       << "split_rhat,1.01," << lr::format_double(det.split_rhat_fraction) << '\n'
       << "rank_rhat,1.01," << lr::format_double(det.rank_rhat_fraction) << '\n'
       << "rhat_inf," << lr::format_double(det.rhat_inf_threshold) << ','
       << lr::format_double(det.rhat_inf_fraction) << '\n';
  } else {
    nlohmann::json j = {{"pair", pair_json},
                        {"m", m},
                        {"n", n},
                        {"reps", det.reps},
                        {"detection",
                         {{"split_rhat", {{"threshold", 1.01}, {"fraction", det.split_rhat_fraction}}},
                          {"rank_rhat", {{"threshold", 1.01}, {"fraction", det.rank_rhat_fraction}}},
                          {"rhat_inf",
                           {{"threshold", det.rhat_inf_threshold}, {"fraction", det.rhat_inf_fraction}}}}}};
    os << j.dump(2) << '\n';
  }
  emit(c.out, os.str());
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Localized R-hat convergence diagnostics for MCMC output"};
  app.require_subcommand(1);

  Common c;
  std::optional<double> threshold;
  auto add_common = [&](CLI::App* sub, bool with_input) {
    if (with_input) sub->add_option("input", c.input, "CSV file of chains")->required();
    sub->add_option("--layout", c.layout, "wide or long (detected from the header by default)");
    sub->add_option("--out", c.out, "output file (stdout by default)");
    sub->add_option("--alpha", c.alpha, "type I error level")->check(CLI::Range(0.0, 1.0));
    sub->add_option("--seed", c.seed, "random seed");
  };

  std::size_t diag_reps = 2000, mv_reps = 2000, thr_reps = 2000, sim_reps = 500, ce_reps = 500;

  // diagnose
  auto* diag = app.add_subcommand("diagnose", "full report; exit 0 converged, 2 not converged");
  add_common(diag, true);
  diag->add_option("--format", c.format, "json or csv")->check(CLI::IsMember({"json", "csv"}));
  diag->add_option("--stride", c.stride, "keep every k-th order statistic");
  diag->add_option("--reps", diag_reps, "null replications for threshold and p-value (0: no p-value)");
  diag->add_option("--threshold", threshold, "R-hat-infinity cutoff override");
  bool preset = false;
  bool all_dirs = false;
  std::optional<double> margin_th;
  std::optional<double> copula_th;
  diag->add_flag("--preset", preset, "multivariate: rule-of-thumb thresholds");
  diag->add_flag("--all-directions", all_dirs, "multivariate: use all 2^d directions");
  diag->add_option("--margin-threshold", margin_th, "multivariate: margin cutoff override");
  diag->add_option("--copula-threshold", copula_th, "multivariate: copula cutoff override");

  // mvdiag
  auto* mv = app.add_subcommand("mvdiag", "two-step multivariate diagnosis");
  add_common(mv, true);
  mv->add_option("--reps", mv_reps, "null replications");
  mv->add_option("--threshold", threshold, "cutoff used for both stages");
  mv->add_flag("--preset", preset, "rule-of-thumb thresholds");
  mv->add_flag("--all-directions", all_dirs, "use all 2^d directions");
  mv->add_option("--margin-threshold", margin_th, "margin cutoff override");
  mv->add_option("--copula-threshold", copula_th, "copula cutoff override");

  // curve
  auto* curve = app.add_subcommand("curve", "local R-hat curve as x,rhat,ess CSV");
  add_common(curve, true);
  curve->add_option("--stride", c.stride, "keep every k-th order statistic");
  std::string model_path;
  bool no_ess = false;
  curve->add_option("--model", model_path, "population model JSON for an overlay column");
  curve->add_flag("--no-ess", no_ess, "skip the local ESS column");

  // threshold
  auto* thr = app.add_subcommand("threshold", "thresholds and tables");
  add_common(thr, false);
  std::string table;
  std::size_t m = 4;
  std::size_t d = 1;
  double ess = 400.0;
  bool recompute = false;
  thr->add_option("--table", table, "t1-left, t1-right, 2, b1 or bounds");
  thr->add_option("--m", m, "number of chains");
  thr->add_option("--d", d, "dimension (d >= 2: margin and copula thresholds; bounds: largest d)");
  thr->add_option("--ess", ess, "target effective sample size");
  thr->add_option("--reps", thr_reps, "null replications");
  thr->add_option("--threshold", threshold, "cutoff for t1-left (default 1.01)");
  thr->add_flag("--recompute", recompute, "ignore the shipped table");

  // simulate
  auto* sim = app.add_subcommand("simulate", "replications of the toy examples as rep,stat,value CSV");
  add_common(sim, false);
  int example = 0;
  std::optional<std::size_t> sim_m;
  std::optional<std::size_t> sim_n;
  std::size_t sim_d = 5;
  double rho = 0.9;
  sim->add_option("--example", example, "example 1..6")->required();
  sim->add_option("--reps", sim_reps, "replications");
  sim->add_option("--m", sim_m, "number of chains");
  sim->add_option("--n", sim_n, "iterations per chain");
  sim->add_option("--d", sim_d, "dimension (example 5)");
  sim->add_option("--rho", rho, "correlation of the odd chain (example 4)");

  // counterexample
  auto* ce = app.add_subcommand("counterexample", "chains fooling rank-R-hat, with detection rates");
  add_common(ce, false);
  ce->add_option("--format", c.format, "json or csv")->check(CLI::IsMember({"json", "csv"}));
  std::string pair_kind = "gpd";
  double xi1 = 0.0, xi2 = -1.0, sigma1 = 1.0, mu1 = 0.0;
  std::size_t ce_m = 4, ce_n = 200;
  ce->add_option("--pair", pair_kind, "gpd or laplace-uniform")->check(CLI::IsMember({"gpd", "laplace-uniform"}));
  ce->add_option("--xi1", xi1);
  ce->add_option("--xi2", xi2);
  ce->add_option("--sigma1", sigma1, "GPD scale, or Laplace scale for laplace-uniform");
  ce->add_option("--mu1", mu1);
  ce->add_option("--m", ce_m, "number of chains");
  ce->add_option("--n", ce_n, "iterations per chain");
  ce->add_option("--reps", ce_reps, "replications");
  ce->add_option("--threshold", threshold, "R-hat-infinity cutoff (default: null quantile)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitError;
  }

  c.threshold = threshold;
  c.reps = *diag ? diag_reps : *mv ? mv_reps : *thr ? thr_reps : *sim ? sim_reps : ce_reps;
  try {
    if (*diag) return cmd_diagnose(c, preset, all_dirs, margin_th, copula_th);
    if (*mv) {
      const auto cs = lr::load_chains(c.input, parse_layout(c.layout));
      if (cs.dims() < 2) throw lr::Error("mvdiag requires d >= 2 (use diagnose)");
      return run_mv(cs, c, preset, all_dirs, margin_th, copula_th);
    }
    if (*curve) return cmd_curve(c, model_path, no_ess);
    if (*thr) return cmd_threshold(c, table, m, d, ess, recompute);
    if (*sim) return cmd_simulate(c, example, sim_m, sim_n, sim_d, rho);
    if (*ce) return cmd_counterexample(c, pair_kind, xi1, xi2, sigma1, mu1, ce_m, ce_n);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitError;
  }
  return kExitError;
}
