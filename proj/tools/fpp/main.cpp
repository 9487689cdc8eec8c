#include "config.hpp"

#include "fpp/csv.hpp"
#include "fpp/verify.hpp"

#include <CLI11.hpp>

#include <cstdlib>
#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

namespace fs = std::filesystem;
using namespace fpp;
using fppcli::ConfigError;
using fppcli::RunConfig;

namespace {

constexpr int kOk = 0;
constexpr int kCheckFailed = 1;
constexpr int kConfigError = 2;

struct Flags {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> paths;
  std::string out;
  unsigned threads = 0;
  std::string preset;
  std::optional<double> t;
  double y = 2.0;
  std::string file;
};

struct Run {
  RunConfig cfg;
  fs::path out_dir;
  unsigned threads;
};

// Precedence: --out, then FPP_OUT_DIR, then output_dir from the config.
fs::path resolve_out_dir(const Flags& f, const RunConfig& cfg) {
  if (!f.out.empty()) return f.out;
  if (const char* env = std::getenv("FPP_OUT_DIR"); env && *env) return env;
  if (!cfg.output_dir.empty()) return cfg.output_dir;
  return "fpp_out";
}

Run prepare(const Flags& f) {
  Run r;
  r.cfg = f.config.empty() ? fppcli::load_config(YAML::Node()) : fppcli::load_config_file(f.config);
  if (f.seed) r.cfg.simulation.seed = *f.seed;
  if (f.paths) {
    if (*f.paths < 2) throw ConfigError("--paths must be at least 2");
    r.cfg.simulation.n_paths = *f.paths;
  }
  if (!f.preset.empty()) {
    try {
      r.cfg.pool.spec = PoolSpec::preset(f.preset);
    } catch (const DomainError& e) {
      throw ConfigError(std::string("--preset: ") + e.what());
    }
    r.cfg.pool.name = f.preset;
  }
  r.out_dir = resolve_out_dir(f, r.cfg);
  fs::create_directories(r.out_dir);
  r.threads = f.threads ? f.threads : default_thread_count();
  return r;
}

std::ofstream open_out(const Run& r, const std::string& name) {
  std::ofstream out(r.out_dir / name);
  if (!out) throw ConfigError("cannot write " + (r.out_dir / name).string());
  return out;
}

std::string join(const Vector& v) {
  std::string s;
  for (Eigen::Index i = 0; i < v.size(); ++i) s += (i ? "," : "") + format_double(v(i));
  return s;
}

TimeGrid simulation_grid(const RunConfig& c) { return TimeGrid::with_step(c.simulation.horizon, c.simulation.grid_step); }

// ---------------------------------------------------------------------------

int cmd_verify_fpp(const Run& r) {
  const auto& c = r.cfg;
  const auto market = c.market.build();
  const RiskMixture mix(c.mixture.atoms, c.mixture.gamma0);
  VolatilityChoice vol = VolatilityChoice::zero();
  try {
    using H0 = fppcli::MixtureSection::H0;
    if (c.mixture.h0_kind == H0::constant) vol = VolatilityChoice::constant(c.mixture.h0_value);
    if (c.mixture.h0_kind == H0::target_pi) {
      if (c.mixture.h0_value.size() != static_cast<Eigen::Index>(market.n_stocks())) {
        throw DimensionError("target portfolio must have one entry per stock");
      }
      vol = VolatilityChoice::portfolio_inversion(market, mix.gamma0(), c.mixture.h0_value);
    }
    vol.validate(market, mix.size());
  } catch (const Error& e) {
    throw ConfigError(std::string("mixture.h0: ") + e.what());
  }
  const auto grid = simulation_grid(c);
  const auto seed = c.simulation.seed;
  const auto n = c.simulation.n_paths;

  PathUtility utility = [&](const BrownianPaths& paths, const WealthPath& w, const TimeGrid& g) {
    const auto states = trace_fpp(mix, vol, market, paths, g);
    std::vector<double> u(g.size());
    for (std::size_t k = 0; k < g.size(); ++k) u[k] = evaluate_fpp(w.x[k], states[k], mix);
    return u;
  };

  const auto probe = simulate_brownian(grid, market.d_w(), market.d_wperp(), seed, 0);
  const Vector pi0 = optimal_portfolio(market.sharpe(0.0), vol.h0(PathPoint{0, 0.0, &probe}, market.d_w()),
                                       mix.gamma0(), market.sigma(0.0)).pi;
  const Strategy star = optimal_strategy(mix.gamma0(), vol, market);
  Strategy perturbed;
  if (c.mixture.perturbed_pi) {
    if (c.mixture.perturbed_pi->size() != static_cast<Eigen::Index>(market.n_stocks())) {
      throw ConfigError("mixture.perturbed_pi must have one entry per stock");
    }
    perturbed = constant_strategy(*c.mixture.perturbed_pi);
  } else {
    const double k = c.mixture.perturbation_scale;
    perturbed = [star, k](const StrategyContext& ctx) -> Vector { return k * star(ctx); };
  }

  struct Case {
    std::string name;
    Strategy strategy;
    TestMode mode;
  };
  const std::vector<Case> cases{{"pi_star", star, TestMode::martingale},
                                {"null", null_strategy(market.n_stocks()), TestMode::supermartingale},
                                {"perturbed", perturbed, TestMode::supermartingale}};

  std::ostringstream text;
  text << "pi_star_t0: " << join(pi0) << "\n";
  if (c.mixture.h0_kind == fppcli::MixtureSection::H0::target_pi) text << "target_pi: " << join(c.mixture.h0_value) << "\n";
  bool pattern = true;
  for (const auto& cs : cases) {
    const auto rep = martingale_test(utility, cs.strategy, market, c.mixture.x0, n, grid, seed, cs.mode, r.threads);
    auto csv = open_out(r, "verify_" + cs.name + ".csv");
    write_report_csv(csv, rep);
    write_report(text, rep, cs.name);
    pattern = pattern && (cs.mode == TestMode::martingale ? rep.verdict == Verdict::consistent_with_martingale
                                                          : rep.verdict != Verdict::violation);
  }

  // Terminal utilities of a few paths must be increasing and concave in x.
  std::vector<FppState> terminal;
  for (std::uint64_t id = 0; id < std::min<std::size_t>(n, 16); ++id) {
    terminal.push_back(trace_fpp(mix, vol, market, simulate_brownian(grid, market.d_w(), market.d_wperp(), seed, id), grid).back());
  }
  const auto xs = log_grid(1e-2, 1e2, 32);
  const auto scan = structure_scan([&](double x, std::size_t i) { return evaluate_fpp(x, terminal[i], mix); },
                                   terminal.size(), xs);
  write_report(text, scan, "terminal states");
  pattern = pattern && scan.passes;
  text << "result: " << (pattern ? "pass" : "fail") << "\n";

  auto report = open_out(r, "verify_report.txt");
  report << text.str();
  std::cout << text.str();
  return pattern ? kOk : kCheckFailed;
}

// ---------------------------------------------------------------------------

int cmd_pool_surface(const Run& r) {
  const auto& pool = r.cfg.pool;
  std::vector<double> ts;
  for (std::size_t k = 0; k <= pool.spec.periods(); ++k) ts.push_back(static_cast<double>(k) * pool.spec.rebalance_dt);
  const auto s = utility_surface(pool.spec, interior_z_grid(pool.z_points), ts);
  auto out = open_out(r, "surface_" + pool.name + ".csv");
  write_surface_csv(out, s);
  const auto last = static_cast<Eigen::Index>(ts.size() - 1);
  const double first_max = s.values.row(0).maxCoeff();
  const double last_max = s.values.row(last).maxCoeff();
  std::cout << "surface: " << (r.out_dir / ("surface_" + pool.name + ".csv")).string() << "\n"
            << "max_value_t0: " << format_double(first_max) << "\n"
            << "max_value_T: " << format_double(last_max) << "\n"
            << "ratio_T_to_t0: " << format_double(last_max / first_max) << "\n";
  return kOk;
}

int cmd_pool_optimize(const Run& r, std::optional<double> t_flag) {
  const auto& pool = r.cfg.pool;
  const double t = t_flag.value_or(pool.spec.horizon);
  if (!(t >= 0.0)) throw ConfigError("--t must be nonnegative");
  const auto opt = optimize_constant_z(pool.spec, t);
  std::cout << "preset: " << pool.name << "\n"
            << "t: " << format_double(t) << "\n"
            << "z_star: " << format_double(opt.z_star) << "\n"
            << "value: " << format_double(opt.value) << "\n"
            << "local_maxima: " << opt.local_maxima.size() << "\n";
  for (const auto& m : opt.local_maxima) std::cout << "  z: " << format_double(m.x) << " value: " << format_double(m.value) << "\n";
  return kOk;
}

int cmd_pool_compare(const Run& r) {
  const auto& pool = r.cfg.pool;
  const auto res = compare_strategies(pool.spec, r.cfg.simulation.n_paths, r.cfg.simulation.seed, r.threads);
  auto out = open_out(r, "comparison_" + pool.name + ".csv");
  write_comparison_csv(out, res);
  const auto last = res.times.size() - 1;
  std::cout << "preset: " << pool.name << "\n"
            << "constant_z_star: " << format_double(res.z_star) << "\n";
  for (const auto* s : {&res.constant_z_star, &res.pi_star, &res.pi_e}) {
    std::cout << s->name << "_T: " << format_double(s->mean_utility[last]) << " se " << format_double(s->se[last]) << "\n";
  }
  return kOk;
}

// ---------------------------------------------------------------------------

std::vector<std::pair<std::vector<double>, std::vector<double>>> read_power_paths(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open power path file '" + path + "'");
  std::string line;
  if (!std::getline(in, line)) throw ConfigError(path + ": empty file");
  std::vector<std::string> names;
  std::stringstream hs(line);
  for (std::string cell; std::getline(hs, cell, ',');) names.push_back(cell);
  const auto col = [&](const std::string& n) {
    const auto it = std::find(names.begin(), names.end(), n);
    if (it == names.end()) throw ConfigError(path + ": line 1: missing column '" + n + "'");
    return static_cast<std::size_t>(it - names.begin());
  };
  const std::size_t ip = col("p"), iq = col("q");
  const auto ipath = std::find(names.begin(), names.end(), "path_id");
  std::map<std::string, std::pair<std::vector<double>, std::vector<double>>> paths;
  std::vector<std::string> order;
  for (std::size_t ln = 2; std::getline(in, line); ++ln) {
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::stringstream ls(line);
    for (std::string cell; std::getline(ls, cell, ',');) cells.push_back(cell);
    if (cells.size() != names.size()) throw ConfigError(path + ": line " + std::to_string(ln) + ": wrong number of fields");
    const std::string key = ipath == names.end() ? "" : cells[static_cast<std::size_t>(ipath - names.begin())];
    if (!paths.count(key)) order.push_back(key);
    try {
      paths[key].first.push_back(std::stod(cells[ip]));
      paths[key].second.push_back(std::stod(cells[iq]));
    } catch (const std::exception&) {
      throw ConfigError(path + ": line " + std::to_string(ln) + ": not a number");
    }
  }
  std::vector<std::pair<std::vector<double>, std::vector<double>>> out;
  for (const auto& k : order) out.push_back(paths[k]);
  return out;
}

int cmd_two_power(const Run& r, const std::string& action, double y, const std::string& file_flag) {
  const auto& tp = r.cfg.two_power;
  const auto& s = tp.spec;
  const auto market = r.cfg.market.build();
  const Vector& lam = market.sharpe(0.0);
  if (action == "drifts") {
    const auto d = coefficient_drifts(s.p, s.q, lam, s.a_vol, s.d_vol);
    std::cout << "alpha: " << format_double(d.alpha) << "\n"
              << "delta: " << format_double(d.delta) << "\n"
              << "joint_drift: " << format_double(joint_drift(s.p, s.q, s.a0, s.d0, tp.x, lam, s.a_vol, s.d_vol)) << "\n";
    return kOk;
  }
  if (action == "gap") {
    const double gap = consistency_gap(s.p, s.q, lam, s.a_vol, s.d_vol);
    std::cout << "gap: " << format_double(gap) << "\n"
              << "FPP: " << (gap <= kPowerPathTolerance ? "yes" : "no") << "\n";
    return kOk;
  }
  if (action == "dual") {
    if (!(y > 0.0)) throw ConfigError("--y must be positive");
    const auto d = legendre_dual(y, s.a0, s.d0, tp.dual_gamma);
    std::cout << "y: " << format_double(y) << "\n"
              << "x_star: " << format_double(d.x_star) << "\n"
              << "value: " << format_double(d.value) << "\n";
    return kOk;
  }
  // validate
  const std::string file = file_flag.empty() ? tp.power_path : file_flag;
  if (file.empty()) throw ConfigError("two-power validate needs --file or two_power.power_path");
  const auto paths = read_power_paths(file);
  auto out = open_out(r, "power_path_report.txt");
  bool ok = true;
  for (std::size_t i = 0; i < paths.size(); ++i) {
    const auto rep = validate_power_paths(paths[i].first, paths[i].second);
    std::ostringstream text;
    text << "path: " << i << "\n";
    write_report(text, rep);
    out << text.str();
    std::cout << text.str();
    ok = ok && rep.ok();
  }
  std::cout << "result: " << (ok ? "pass" : "fail") << "\n";
  return ok ? kOk : kCheckFailed;
}

// ---------------------------------------------------------------------------

int cmd_three_power(const Run& r) {
  const auto& c = r.cfg;
  const auto& tp = c.three_power;
  const auto market = c.market.build();
  if (market.n_stocks() != market.d_w()) throw ConfigError("three-power runs need a square market (n_stocks = d_w)");

  auto table = open_out(r, "discriminants.csv");
  CsvWriter csv(table);
  csv.header({"gamma", "disc_monotone", "disc_concave"});
  bool negative = true;
  for (std::size_t j = 1; j <= tp.gamma_grid; ++j) {
    const double g = static_cast<double>(j) / (3.0 * static_cast<double>(tp.gamma_grid + 1));
    const auto d = concavity_discriminants(g);
    negative = negative && d.monotone < 0.0 && d.concave < 0.0;
    csv.row(g, d.monotone, d.concave);
  }
  const auto dc = concavity_discriminants(tp.spec.gamma);
  csv.row(tp.spec.gamma, dc.monotone, dc.concave);

  const auto grid = simulation_grid(c);
  const auto seed = c.simulation.seed;
  auto per_path = open_out(r, "three_power_paths.csv");
  for (std::uint64_t id = 0; id < std::min(tp.csv_paths, c.simulation.n_paths); ++id) {
    const auto path = trace_three_power(market, simulate_brownian(grid, market.d_w(), market.d_wperp(), seed, id), grid);
    write_three_power_csv(per_path, id, grid, path, tp.x_values, tp.spec, id == 0);
  }

  const auto spec = tp.spec;
  const auto m = std::make_shared<const MarketSpec>(market);
  const Strategy star = [m, spec](const StrategyContext& ctx) {
    return solve_allocation(three_power_optimal_sp(m->sharpe(ctx.t), spec), m->sigma(ctx.t)).pi;
  };
  PathUtility utility = [m, spec](const BrownianPaths& paths, const WealthPath& w, const TimeGrid& g) {
    const auto zi = trace_three_power(*m, paths, g);
    std::vector<double> u(g.size());
    for (std::size_t k = 0; k < g.size(); ++k) u[k] = three_power_value_log(w.x[k], zi.log_z[k], zi.int_lam2[k], spec);
    return u;
  };
  const auto rep = martingale_test(utility, star, market, c.mixture.x0, c.simulation.n_paths, grid, seed,
                                   TestMode::martingale, r.threads);
  auto csv_rep = open_out(r, "three_power_martingale.csv");
  write_report_csv(csv_rep, rep);

  std::cout << "gamma: " << format_double(spec.gamma) << "\n"
            << "disc_monotone: " << format_double(dc.monotone) << "\n"
            << "disc_concave: " << format_double(dc.concave) << "\n"
            << "discriminants_negative_on_grid: " << (negative ? "yes" : "no") << "\n";
  write_report(std::cout, rep, "three-power at optimum");
  const bool ok = negative && rep.verdict == Verdict::consistent_with_martingale;
  std::cout << "result: " << (ok ? "pass" : "fail") << "\n";
  return ok ? kOk : kCheckFailed;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Forward performance processes: verification and pooling experiments"};
  app.require_subcommand(1);
  Flags f;
  app.add_option("--config", f.config, "YAML configuration file");
  app.add_option("--seed", f.seed, "Override simulation seed");
  app.add_option("--paths", f.paths, "Override number of Monte Carlo paths");
  app.add_option("--out", f.out, "Output directory (overrides FPP_OUT_DIR and config)");
  app.add_option("--threads", f.threads, "Worker threads (default: hardware parallelism)");
  app.add_option("--preset", f.preset, "Pool preset: fig1, fig2, fig3 or fig4");

  auto* verify = app.add_subcommand("verify-fpp", "Martingale and structure checks for the configured mixture FPP");
  auto* pool = app.add_subcommand("pool", "Risk-pooling experiments");
  pool->require_subcommand(1);
  auto* surface = pool->add_subcommand("surface", "Expected utility over (z, t) for constant proportions");
  auto* optimize = pool->add_subcommand("optimize", "Best constant proportion at one horizon");
  optimize->add_option("--t", f.t, "Horizon (default: pool horizon)");
  auto* compare = pool->add_subcommand("compare", "Constant z*, pooled pi* and one-period greedy by simulation");
  auto* two = app.add_subcommand("two-power", "Two-power utility diagnostics");
  two->require_subcommand(1);
  auto* drifts = two->add_subcommand("drifts", "Coefficient drifts and joint drift");
  auto* gap = two->add_subcommand("gap", "Consistency gap between the two powers");
  auto* dual = two->add_subcommand("dual", "Legendre dual point");
  dual->add_option("--y", f.y, "Dual variable")->default_val(2.0);
  auto* validate = two->add_subcommand("validate", "Check candidate random power paths");
  validate->add_option("--file", f.file, "CSV with columns p, q and optional path_id");
  auto* three = app.add_subcommand("three-power", "Signed three-power FPP: discriminants, paths and martingale check");
  for (auto* sub : {verify, pool, surface, optimize, compare, two, drifts, gap, dual, validate, three}) sub->fallthrough();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kConfigError;
  }

  try {
    const Run r = prepare(f);
    if (verify->parsed()) return cmd_verify_fpp(r);
    if (surface->parsed()) return cmd_pool_surface(r);
    if (optimize->parsed()) return cmd_pool_optimize(r, f.t);
    if (compare->parsed()) return cmd_pool_compare(r);
    for (auto* sub : {drifts, gap, dual, validate}) {
      if (sub->parsed()) return cmd_two_power(r, sub->get_name(), f.y, f.file);
    }
    if (three->parsed()) return cmd_three_power(r);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kConfigError;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kConfigError;
  } catch (const fs::filesystem_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kConfigError;
  }
  return kConfigError;
}
