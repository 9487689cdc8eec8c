#pragma once

// Monte Carlo checks of the forward-performance conditions: the utility along
// the optimal wealth is a martingale, along any other wealth a supermartingale,
// and x -> U_t(x) is increasing and strictly concave.

#include "fpp/csv.hpp"
#include "fpp/errors.hpp"
#include "fpp/market.hpp"
#include "fpp/parallel.hpp"
#include "fpp/stats.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <ostream>
#include <span>
#include <string>
#include <vector>

namespace fpp {

/// U_{t_k}(X_{t_k}) for every grid time along one path.
using PathUtility = std::function<std::vector<double>(const BrownianPaths&, const WealthPath&, const TimeGrid&)>;

enum class TestMode { martingale, supermartingale };
enum class Verdict { consistent_with_martingale, supermartingale_strict, violation };

inline const char* to_string(Verdict v) {
  switch (v) {
    case Verdict::consistent_with_martingale: return "consistent-with-martingale";
    case Verdict::supermartingale_strict: return "supermartingale-strict";
    case Verdict::violation: return "violation";
  }
  return "unknown";
}

inline const char* to_string(TestMode m) { return m == TestMode::martingale ? "martingale" : "supermartingale"; }

/// Width of the acceptance band in standard errors.
inline constexpr double kSigmaMultiple = 3.0;
/// Relative slack added to the band so paths without randomness (se = 0) compare
/// exactly up to floating-point rounding.
inline constexpr double kDeterministicSlack = 1e-12;
/// Share of -inf utilities above which a report is flagged as degenerate.
inline constexpr double kDegenerateShare = 1e-3;

struct MartingaleReport {
  TestMode mode = TestMode::martingale;
  std::vector<double> t_grid;
  std::vector<double> mean;
  std::vector<double> se;
  std::vector<double> reference;  // U_0(x) unless replaced by an expected mean curve
  std::vector<double> excess_kurtosis;
  double u0 = 0.0;
  Verdict verdict = Verdict::violation;
  std::size_t n_paths = 0;
  std::uint64_t seed = 0;
  double neg_inf_share = 0.0;
  bool degenerate_warning = false;

  double band(std::size_t k) const { return kSigmaMultiple * se[k] + kDeterministicSlack * std::max(1.0, std::abs(reference[k])); }
  /// Positive when the mean lies inside the band around the reference.
  double margin(std::size_t k) const { return band(k) - std::abs(mean[k] - reference[k]); }
};

struct EnsembleSummary {
  std::vector<SampleSummary> per_time;
  std::size_t neg_inf = 0;
  std::size_t total = 0;
};

/// Per-time moments of an evaluator along evolved wealth, reduced in a fixed order.
inline EnsembleSummary ensemble_utility(const PathUtility& utility, const Strategy& strategy, const MarketSpec& market,
                                        double x0, std::size_t n_paths, const TimeGrid& grid, std::uint64_t seed,
                                        unsigned threads = 0) {
  const std::size_t m = grid.size();
  auto make = [m] { return std::vector<Moments>(m); };
  auto per_path = [&](std::size_t i, std::vector<Moments>& acc) {
    const auto paths = simulate_brownian(grid, market.d_w(), market.d_wperp(), seed, i);
    const auto wealth = evolve_wealth(x0, strategy, market, paths, grid);
    const auto u = utility(paths, wealth, grid);
    if (u.size() != m) throw DimensionError("utility evaluator returned the wrong number of values");
    for (std::size_t k = 0; k < m; ++k) acc[k].add(u[k]);
  };
  auto merge = [](std::vector<Moments>& into, const std::vector<Moments>& from) {
    for (std::size_t k = 0; k < into.size(); ++k) into[k].merge(from[k]);
  };
  const auto total = ensemble_reduce<std::vector<Moments>>(n_paths, threads, make, per_path, merge);
  EnsembleSummary s;
  for (const auto& mo : total) {
    s.per_time.push_back(mo.summary());
    s.neg_inf += mo.neg_inf_count();
    s.total += mo.count();
  }
  return s;
}

// The verdict reads the terminal time only. Checking every grid time at 3 s.e.
// compounds the false-alarm rate; the per-time margins stay in the report.
inline Verdict decide(const MartingaleReport& r) {
  const std::size_t last = r.mean.size() - 1;
  for (double m : r.mean) {
    if (!std::isfinite(m)) return Verdict::violation;
  }
  if (r.mode == TestMode::martingale) return r.margin(last) >= 0.0 ? Verdict::consistent_with_martingale : Verdict::violation;
  if (r.mean[last] > r.reference[last] + r.band(last)) return Verdict::violation;
  return r.mean[last] < r.reference[last] - r.band(last) ? Verdict::supermartingale_strict
                                                         : Verdict::consistent_with_martingale;
}

/// Compares the ensemble mean of U_t(X_t) with U_0 at every grid time.
inline MartingaleReport martingale_test(const PathUtility& utility, const Strategy& strategy, const MarketSpec& market,
                                        double x0, std::size_t n_paths, const TimeGrid& grid, std::uint64_t seed,
                                        TestMode mode, unsigned threads = 0) {
  if (n_paths < 2) throw DomainError("martingale test needs at least two paths");
  const auto s = ensemble_utility(utility, strategy, market, x0, n_paths, grid, seed, threads);
  MartingaleReport r;
  r.mode = mode;
  r.t_grid = grid.times();
  r.n_paths = n_paths;
  r.seed = seed;
  r.u0 = s.per_time.front().mean;
  for (const auto& ps : s.per_time) {
    r.mean.push_back(ps.mean);
    r.se.push_back(ps.se);
    r.excess_kurtosis.push_back(ps.excess_kurtosis);
  }
  r.reference.assign(r.mean.size(), r.u0);
  r.neg_inf_share = s.total ? static_cast<double>(s.neg_inf) / static_cast<double>(s.total) : 0.0;
  r.degenerate_warning = r.neg_inf_share > kDegenerateShare;
  r.verdict = decide(r);
  return r;
}

/// True when the mean stays within the band of an expected mean curve at every grid time.
inline bool tracks_curve(const MartingaleReport& r, const std::function<double(double)>& expected) {
  MartingaleReport c = r;
  for (std::size_t k = 0; k < c.t_grid.size(); ++k) c.reference[k] = expected(c.t_grid[k]);
  for (std::size_t k = 0; k < c.t_grid.size(); ++k) {
    if (!(c.margin(k) >= 0.0)) return false;
  }
  return true;
}

inline void write_report_csv(std::ostream& out, const MartingaleReport& r) {
  CsvWriter csv(out);
  csv.header({"t", "mean", "se", "reference", "margin"});
  for (std::size_t k = 0; k < r.t_grid.size(); ++k) csv.row(r.t_grid[k], r.mean[k], r.se[k], r.reference[k], r.margin(k));
}

inline void write_report(std::ostream& out, const MartingaleReport& r, const std::string& label) {
  const std::size_t last = r.t_grid.size() - 1;
  double worst = std::numeric_limits<double>::infinity();
  double max_kurt = 0.0;
  for (std::size_t k = 0; k < r.t_grid.size(); ++k) {
    worst = std::min(worst, r.margin(k));
    if (std::isfinite(r.excess_kurtosis[k])) max_kurt = std::max(max_kurt, r.excess_kurtosis[k]);
  }
  out << "report: " << label << "\n"
      << "  mode: " << to_string(r.mode) << "\n"
      << "  verdict: " << to_string(r.verdict) << "\n"
      << "  n_paths: " << r.n_paths << "\n"
      << "  seed: " << r.seed << "\n"
      << "  u0: " << format_double(r.u0) << "\n"
      << "  mean_T: " << format_double(r.mean[last]) << "\n"
      << "  se_T: " << format_double(r.se[last]) << "\n"
      << "  worst_margin: " << format_double(worst) << "\n"
      << "  max_excess_kurtosis: " << format_double(max_kurt) << "\n"
      << "  neg_inf_share: " << format_double(r.neg_inf_share) << "\n";
  if (r.degenerate_warning) out << "  warning: utility is -inf on more than 0.1% of paths\n";
}

// ---------------------------------------------------------------------------
// Paired comparison

struct PairedComparison {
  std::vector<double> mean_diff;  // E[U(X^a)] - E[U(X^b)] per grid time
  std::vector<double> se_diff;    // s.e. of the paired difference
  std::vector<double> se_a;
  std::vector<double> se_b;
};

/// Both strategies run on the same increments of every path.
inline PairedComparison paired_comparison(const PathUtility& utility, const Strategy& a, const Strategy& b,
                                          const MarketSpec& market, double x0, std::size_t n_paths,
                                          const TimeGrid& grid, std::uint64_t seed, unsigned threads = 0) {
  const std::size_t m = grid.size();
  struct Acc {
    std::vector<Moments> ua, ub, diff;
  };
  auto make = [m] { return Acc{std::vector<Moments>(m), std::vector<Moments>(m), std::vector<Moments>(m)}; };
  auto per_path = [&](std::size_t i, Acc& acc) {
    const auto paths = simulate_brownian(grid, market.d_w(), market.d_wperp(), seed, i);
    const auto va = utility(paths, evolve_wealth(x0, a, market, paths, grid), grid);
    const auto vb = utility(paths, evolve_wealth(x0, b, market, paths, grid), grid);
    for (std::size_t k = 0; k < m; ++k) {
      acc.ua[k].add(va[k]);
      acc.ub[k].add(vb[k]);
      acc.diff[k].add(va[k] - vb[k]);
    }
  };
  auto merge = [](Acc& into, const Acc& from) {
    for (std::size_t k = 0; k < into.ua.size(); ++k) {
      into.ua[k].merge(from.ua[k]);
      into.ub[k].merge(from.ub[k]);
      into.diff[k].merge(from.diff[k]);
    }
  };
  const Acc total = ensemble_reduce<Acc>(n_paths, threads, make, per_path, merge);
  PairedComparison c;
  for (std::size_t k = 0; k < m; ++k) {
    const auto d = total.diff[k].summary();
    c.mean_diff.push_back(d.mean);
    c.se_diff.push_back(d.se);
    c.se_a.push_back(total.ua[k].summary().se);
    c.se_b.push_back(total.ub[k].summary().se);
  }
  return c;
}

// ---------------------------------------------------------------------------
// Shape of x -> U_t(x)

struct StructureReport {
  bool passes = true;
  double worst_slope = std::numeric_limits<double>::infinity();          // min secant slope, must be > 0
  double worst_slope_change = -std::numeric_limits<double>::infinity();  // max slope increment, must be < 0
  std::size_t worst_state = 0;
  std::size_t states = 0;
};

inline std::vector<double> log_grid(double lo, double hi, std::size_t n) {
  if (!(lo > 0.0) || !(hi > lo) || n < 2) throw DomainError("log grid needs 0 < lo < hi and n >= 2");
  std::vector<double> g(n);
  for (std::size_t i = 0; i < n; ++i) {
    g[i] = std::exp(std::log(lo) + (std::log(hi) - std::log(lo)) * static_cast<double>(i) / static_cast<double>(n - 1));
  }
  return g;
}

/// Secant slopes of U(., state) on the grid must be positive and strictly decreasing.
inline StructureReport structure_scan(const std::function<double(double, std::size_t)>& utility, std::size_t n_states,
                                      std::span<const double> x_grid) {
  if (x_grid.size() < 8) throw DomainError("structure scan needs at least 8 grid points");
  StructureReport r;
  r.states = n_states;
  for (std::size_t s = 0; s < n_states; ++s) {
    std::vector<double> slope(x_grid.size() - 1);
    for (std::size_t i = 0; i + 1 < x_grid.size(); ++i) {
      slope[i] = (utility(x_grid[i + 1], s) - utility(x_grid[i], s)) / (x_grid[i + 1] - x_grid[i]);
    }
    double min_slope = *std::min_element(slope.begin(), slope.end());
    double max_change = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i + 1 < slope.size(); ++i) max_change = std::max(max_change, slope[i + 1] - slope[i]);
    const bool ok = min_slope > 0.0 && max_change < 0.0;
    if (!ok) r.passes = false;
    if (min_slope < r.worst_slope || max_change > r.worst_slope_change) r.worst_state = s;
    r.worst_slope = std::min(r.worst_slope, min_slope);
    r.worst_slope_change = std::max(r.worst_slope_change, max_change);
  }
  return r;
}

inline void write_report(std::ostream& out, const StructureReport& r, const std::string& label) {
  out << "structure: " << label << "\n"
      << "  passes: " << (r.passes ? "yes" : "no") << "\n"
      << "  states: " << r.states << "\n"
      << "  worst_slope: " << format_double(r.worst_slope) << "\n"
      << "  worst_slope_change: " << format_double(r.worst_slope_change) << "\n"
      << "  worst_state: " << r.worst_state << "\n";
}

}  // namespace fpp
