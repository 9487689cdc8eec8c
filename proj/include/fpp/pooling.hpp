#pragma once

// Two power investors pooling wealth under a shared market view: investor 1 has
// U^1_t(x) = A_0 e^{alpha t} x^p, investor 2 has U^2_t(x) = D_0 e^{delta t} x^q, and
// the pool invests sigma*pi = lambda / (1 - z) in a single stock.

#include "fpp/csv.hpp"
#include "fpp/errors.hpp"
#include "fpp/golden_section.hpp"
#include "fpp/market.hpp"
#include "fpp/parallel.hpp"
#include "fpp/stats.hpp"
#include "fpp/two_power.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <ostream>
#include <string>
#include <vector>

namespace fpp {

struct PoolSpec {
  double p = 0.1;
  double q = 0.3;
  double a0 = 1.0;
  double d0 = 1.0;
  double lam = 1.0;
  double x0 = 1.0;
  double horizon = 30.0;
  double rebalance_dt = 1.0;

  void validate() const {
    check_power(p, "p");
    check_power(q, "q");
    if (!(p < q)) throw DomainError("pool needs p < q");
    if (!(a0 > 0.0) || !(d0 > 0.0)) throw DomainError("A0 and D0 must be positive");
    if (!std::isfinite(lam) || lam < 0.0) throw DomainError("Sharpe ratio must be finite and nonnegative");
    if (!(x0 > 0.0) || !std::isfinite(x0)) throw DomainError("initial wealth must be positive");
    if (!(horizon > 0.0) || !(rebalance_dt > 0.0)) throw DomainError("horizon and rebalance step must be positive");
    const double periods = horizon / rebalance_dt;
    if (std::abs(periods - std::round(periods)) > 1e-9 * std::max(1.0, periods)) {
      throw DomainError("horizon must be a multiple of the rebalance step");
    }
  }

  std::size_t periods() const { return static_cast<std::size_t>(std::llround(horizon / rebalance_dt)); }

  /// The four parameter sets illustrated for the pooling problem.
  static PoolSpec preset(const std::string& name) {
    PoolSpec s;
    if (name == "fig1") return s;
    if (name == "fig2") {
      s.lam = 0.5;
      return s;
    }
    if (name == "fig3") {
      s.lam = 4.0;
      return s;
    }
    if (name == "fig4") {
      s.q = 0.6;
      return s;
    }
    throw DomainError("unknown pool preset '" + name + "' (expected fig1, fig2, fig3 or fig4)");
  }
};

inline void check_proportion(double z) {
  if (!(z > 0.0) || !(z < 1.0)) throw DomainError("proportion z must lie in (0, 1), got " + format_double(z));
}

/// Exponent of the expected growth of one investor's utility under constant z.
inline double pool_decay_rate(double power, double z, double lam) {
  const double r = (z - power) / (1.0 - z);
  return -power * r * r * lam * lam / (2.0 * (1.0 - power));
}

/// c1 exp(rate_p * t) + c2 exp(rate_q * t): expected joint utility after t under
/// constant z, starting from investor utilities c1 and c2.
inline double pooled_expectation(double z, double t, double p, double q, double c1, double c2, double lam) {
  check_proportion(z);
  return c1 * std::exp(pool_decay_rate(p, z, lam) * t) + c2 * std::exp(pool_decay_rate(q, z, lam) * t);
}

/// log of pooled_expectation; stays finite where the value itself underflows.
inline double log_pooled_expectation(double z, double t, double p, double q, double log_c1, double log_c2, double lam) {
  check_proportion(z);
  return detail::log_add(log_c1 + pool_decay_rate(p, z, lam) * t, log_c2 + pool_decay_rate(q, z, lam) * t);
}

inline double log_constant_z_expected_utility(double z, double t, const PoolSpec& spec) {
  if (t < 0.0) throw DomainError("time must be nonnegative");
  return log_pooled_expectation(z, t, spec.p, spec.q, std::log(spec.a0) + spec.p * std::log(spec.x0),
                                std::log(spec.d0) + spec.q * std::log(spec.x0), spec.lam);
}

inline double constant_z_expected_utility(double z, double t, const PoolSpec& spec) {
  if (t < 0.0) throw DomainError("time must be nonnegative");
  return pooled_expectation(z, t, spec.p, spec.q, spec.a0 * std::pow(spec.x0, spec.p),
                            spec.d0 * std::pow(spec.x0, spec.q), spec.lam);
}

inline constexpr double kZEdge = 1e-3;
inline constexpr double kZStep = 1e-3;
inline constexpr double kZRefineTolerance = 1e-6;
inline constexpr double kZTieTolerance = 1e-12;

struct ZOptimum {
  double z_star = 0.0;
  double value = 0.0;
  std::vector<Maximum> local_maxima;  // best first
};

/// Grid scan on [kZEdge, 1 - kZEdge] at step kZStep; each interior local maximum
/// is polished by golden section. Without an interior maximum the best grid point wins.
inline ZOptimum maximize_over_z(const std::function<double(double)>& f) {
  const auto n = static_cast<std::size_t>(std::llround((1.0 - 2.0 * kZEdge) / kZStep)) + 1;
  std::vector<double> z(n);
  std::vector<double> v(n);
  for (std::size_t i = 0; i < n; ++i) {
    z[i] = kZEdge + static_cast<double>(i) * kZStep;
    v[i] = f(z[i]);
  }
  ZOptimum out;
  for (std::size_t i = 1; i + 1 < n; ++i) {
    if (v[i] - v[i - 1] > 0.0 && v[i + 1] - v[i] <= 0.0) {
      out.local_maxima.push_back(golden_section_maximize(f, z[i - 1], z[i + 1], kZRefineTolerance));
    }
  }
  if (out.local_maxima.empty()) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < n; ++i) {
      if (v[i] > v[best] + kZTieTolerance) best = i;
    }
    out.z_star = z[best];
    out.value = v[best];
    return out;
  }
  std::stable_sort(out.local_maxima.begin(), out.local_maxima.end(), [](const Maximum& a, const Maximum& b) {
    if (std::abs(a.value - b.value) < kZTieTolerance) return a.x < b.x;
    return a.value > b.value;
  });
  out.z_star = out.local_maxima.front().x;
  out.value = out.local_maxima.front().value;
  return out;
}

inline ZOptimum optimize_constant_z(const PoolSpec& spec, double t) {
  if (!(t > 0.0)) throw DomainError("optimize_constant_z needs t > 0");
  return maximize_over_z([&](double z) { return constant_z_expected_utility(z, t, spec); });
}

/// Constant z for the next period maximizing the conditional expected joint
/// utility, given the investors' current utility levels c1 = U^1_t(X_t), c2 = U^2_t(X_t).
inline double one_period_greedy(double c1, double c2, double dt, const PoolSpec& spec) {
  if (!(c1 >= 0.0) || !(c2 >= 0.0) || !(c1 + c2 > 0.0)) throw DomainError("effective utilities must be nonnegative");
  if (!(dt > 0.0)) throw DomainError("period length must be positive");
  return maximize_over_z([&](double z) { return pooled_expectation(z, dt, spec.p, spec.q, c1, c2, spec.lam); }).z_star;
}

/// z of the wealth-feedback joint optimum, 1 - (p(1-p)c1 + q(1-q)c2)/(p c1 + q c2),
/// with c1 = A_t x^p and c2 = D_t x^q given in log form.
inline double pooled_optimal_z(double log_c1, double log_c2, double p, double q) {
  const double m = std::max(log_c1, log_c2);
  const double c1 = std::exp(log_c1 - m);
  const double c2 = std::exp(log_c2 - m);
  return 1.0 - (p * (1.0 - p) * c1 + q * (1.0 - q) * c2) / (p * c1 + q * c2);
}

struct PoolUtilities {
  double log_c1;  // log U^1_t(x)
  double log_c2;  // log U^2_t(x)
};

inline PoolUtilities pool_utilities(const PoolSpec& spec, double t, double x) {
  const Vector lam = Vector::Constant(1, spec.lam);
  const Vector zero = Vector::Zero(1);
  const auto drifts = coefficient_drifts(spec.p, spec.q, lam, zero, zero);
  const double lx = std::log(x);
  return {std::log(spec.a0) + drifts.alpha * t + spec.p * lx, std::log(spec.d0) + drifts.delta * t + spec.q * lx};
}

struct StrategySeries {
  std::string name;
  std::vector<double> mean_utility;  // per grid time, length periods + 1
  std::vector<double> se;
  std::vector<double> mean_z;  // per period, length periods
};

struct ComparisonResult {
  std::vector<double> times;
  StrategySeries constant_z_star;
  StrategySeries pi_star;
  StrategySeries pi_e;
  double z_star = 0.0;
  std::size_t n_paths = 0;
  std::uint64_t seed = 0;
};

inline ComparisonResult compare_strategies(const PoolSpec& spec, std::size_t n_paths, std::uint64_t seed,
                                           unsigned threads = 0) {
  spec.validate();
  if (n_paths < 1) throw DomainError("comparison needs at least one path");
  const std::size_t n = spec.periods();
  const TimeGrid grid = TimeGrid::uniform(spec.horizon, n);
  const MarketSpec market = MarketSpec::scalar(spec.lam);
  const double z_const = optimize_constant_z(spec, spec.horizon).z_star;

  struct Acc {
    std::vector<Moments> utility[3];
    std::vector<Moments> z[3];
  };
  auto make = [n] {
    Acc a;
    for (int s = 0; s < 3; ++s) {
      a.utility[s].resize(n + 1);
      a.z[s].resize(n);
    }
    return a;
  };
  auto per_path = [&](std::size_t i, Acc& acc) {
    const auto paths = simulate_brownian(grid, 1, 0, seed, i);
    for (int s = 0; s < 3; ++s) {
      std::vector<double> zs(n);
      const Strategy rule = [&, s](const StrategyContext& ctx) {
        double z = z_const;
        if (s > 0) {
          const auto u = pool_utilities(spec, ctx.t, ctx.wealth);
          z = s == 1 ? pooled_optimal_z(u.log_c1, u.log_c2, spec.p, spec.q)
                     : one_period_greedy(std::exp(u.log_c1), std::exp(u.log_c2), grid.dt(ctx.step), spec);
        }
        zs[ctx.step] = z;
        return Vector::Constant(1, spec.lam / (1.0 - z));
      };
      const auto w = evolve_wealth(spec.x0, rule, market, paths, grid);
      for (std::size_t k = 0; k <= n; ++k) {
        const auto u = pool_utilities(spec, grid[k], w.x[k]);
        acc.utility[s][k].add(std::exp(u.log_c1) + std::exp(u.log_c2));
        if (k < n) acc.z[s][k].add(zs[k]);
      }
    }
  };
  auto merge = [](Acc& into, const Acc& from) {
    for (int s = 0; s < 3; ++s) {
      for (std::size_t k = 0; k < into.utility[s].size(); ++k) into.utility[s][k].merge(from.utility[s][k]);
      for (std::size_t k = 0; k < into.z[s].size(); ++k) into.z[s][k].merge(from.z[s][k]);
    }
  };
  const Acc total = ensemble_reduce<Acc>(n_paths, threads, make, per_path, merge);

  ComparisonResult r;
  r.times = grid.times();
  r.z_star = z_const;
  r.n_paths = n_paths;
  r.seed = seed;
  StrategySeries* out[3] = {&r.constant_z_star, &r.pi_star, &r.pi_e};
  const char* names[3] = {"constant_z_star", "pi_star", "pi_e"};
  for (int s = 0; s < 3; ++s) {
    out[s]->name = names[s];
    for (const auto& m : total.utility[s]) {
      const auto sm = m.summary();
      out[s]->mean_utility.push_back(sm.mean);
      out[s]->se.push_back(sm.se);
    }
    for (const auto& m : total.z[s]) out[s]->mean_z.push_back(m.summary().mean);
  }
  return r;
}

struct UtilitySurface {
  std::vector<double> z_grid;
  std::vector<double> t_grid;
  Matrix values;  // values(i, j) at t_grid[i], z_grid[j]
};

inline UtilitySurface utility_surface(const PoolSpec& spec, std::vector<double> z_grid, std::vector<double> t_grid) {
  if (z_grid.empty() || t_grid.empty()) throw DomainError("surface grids must be nonempty");
  for (std::size_t j = 1; j < z_grid.size(); ++j) {
    if (!(z_grid[j] > z_grid[j - 1])) throw DomainError("z grid must be increasing");
  }
  UtilitySurface s{std::move(z_grid), std::move(t_grid), Matrix()};
  s.values.resize(static_cast<Eigen::Index>(s.t_grid.size()), static_cast<Eigen::Index>(s.z_grid.size()));
  for (std::size_t i = 0; i < s.t_grid.size(); ++i) {
    for (std::size_t j = 0; j < s.z_grid.size(); ++j) {
      s.values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
          constant_z_expected_utility(s.z_grid[j], s.t_grid[i], spec);
    }
  }
  return s;
}

/// n points evenly spaced strictly inside (0, 1).
inline std::vector<double> interior_z_grid(std::size_t n) {
  std::vector<double> z(n);
  for (std::size_t j = 0; j < n; ++j) z[j] = (static_cast<double>(j) + 1.0) / (static_cast<double>(n) + 1.0);
  return z;
}

inline void write_surface_csv(std::ostream& out, const UtilitySurface& s) {
  CsvWriter csv(out);
  csv.header({"z", "t", "value"});
  for (std::size_t i = 0; i < s.t_grid.size(); ++i) {
    for (std::size_t j = 0; j < s.z_grid.size(); ++j) {
      csv.row(s.z_grid[j], s.t_grid[i], s.values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)));
    }
  }
}

/// mean_allocation is the mean z applied over [t, t + dt); empty at the horizon.
inline void write_comparison_csv(std::ostream& out, const ComparisonResult& r) {
  CsvWriter csv(out);
  csv.header({"t", "strategy", "mean_utility", "se", "mean_allocation"});
  for (const StrategySeries* s : {&r.constant_z_star, &r.pi_star, &r.pi_e}) {
    for (std::size_t k = 0; k < r.times.size(); ++k) {
      csv.row(r.times[k], s->name, s->mean_utility[k], s->se[k], k < s->mean_z.size() ? format_double(s->mean_z[k]) : "");
    }
  }
}

}  // namespace fpp
