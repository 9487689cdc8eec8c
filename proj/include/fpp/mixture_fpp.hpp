#pragma once

// Power-mixture forward performance processes
//
//   U_t(x) = sum_i w_i x^{1-g_i} / (1-g_i) * E(M^{g_i})_t * exp(V^{g_i}_t),
//
// with M^g = int H^g dW + int J^g dW-perp and V^g = int v^g ds, where
//   H^g = (g - g0)/g0 * lambda + g/g0 * H^{g0},
//   v^g = -(1-g)/(2g) * |lambda + H^g|^2.
// The optimal portfolio solves sigma pi* = (lambda + H^{g0}) / g0.

#include "fpp/csv.hpp"
#include "fpp/errors.hpp"
#include "fpp/linalg.hpp"
#include "fpp/market.hpp"
#include "fpp/parallel.hpp"
#include "fpp/stats.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <memory>
#include <ostream>
#include <span>
#include <string>
#include <utility>
#include <variant>
#include <vector>

namespace fpp {

/// Risk aversions closer than this to 1 are rejected (log utility is not modelled).
inline constexpr double kGammaOneExclusion = 1e-9;

inline void check_risk_aversion(double gamma, const std::string& what) {
  if (!std::isfinite(gamma) || !(gamma > 0.0)) throw DomainError(what + " must be positive, got " + format_double(gamma));
  if (std::abs(gamma - 1.0) <= kGammaOneExclusion) throw DomainError(what + " must differ from 1, got " + format_double(gamma));
}

struct Atom {
  double gamma;
  double weight;
};

/// Finite positive measure nu on risk aversions plus the base aversion g0.
class RiskMixture {
public:
  RiskMixture(std::vector<Atom> atoms, double gamma0) : atoms_(std::move(atoms)), gamma0_(gamma0) {
    if (atoms_.empty()) throw DomainError("mixture needs at least one atom");
    double lo = std::numeric_limits<double>::infinity();
    double hi = -lo;
    for (std::size_t i = 0; i < atoms_.size(); ++i) {
      const std::string where = "atom " + std::to_string(i);
      check_risk_aversion(atoms_[i].gamma, where + " gamma");
      if (!std::isfinite(atoms_[i].weight) || !(atoms_[i].weight > 0.0)) {
        throw DomainError(where + " weight must be positive, got " + format_double(atoms_[i].weight));
      }
      lo = std::min(lo, atoms_[i].gamma);
      hi = std::max(hi, atoms_[i].gamma);
    }
    check_risk_aversion(gamma0_, "gamma0");
    if (gamma0_ < lo || gamma0_ > hi) {
      throw DomainError("gamma0 = " + format_double(gamma0_) + " lies outside the atom range [" + format_double(lo) +
                        ", " + format_double(hi) + "]");
    }
  }

  /// Single CRRA investor: one atom of weight 1 at gamma, g0 = gamma.
  static RiskMixture power(double gamma, double weight = 1.0) { return RiskMixture({{gamma, weight}}, gamma); }

  const std::vector<Atom>& atoms() const noexcept { return atoms_; }
  std::size_t size() const noexcept { return atoms_.size(); }
  double gamma0() const noexcept { return gamma0_; }

  std::vector<double> gammas() const {
    std::vector<double> g;
    for (const auto& a : atoms_) g.push_back(a.gamma);
    return g;
  }
  std::vector<double> weights() const {
    std::vector<double> w;
    for (const auto& a : atoms_) w.push_back(a.weight);
    return w;
  }

  /// U_0(x) = sum_i w_i x^{1-g_i} / (1-g_i).
  double initial_utility(double x) const {
    double u = 0.0;
    for (const auto& a : atoms_) u += a.weight * std::pow(x, 1.0 - a.gamma) / (1.0 - a.gamma);
    return u;
  }

private:
  std::vector<Atom> atoms_;
  double gamma0_;
};

// ---------------------------------------------------------------------------
// Pointwise formulas

inline Vector hgamma(double gamma, double gamma0, const Vector& lam, const Vector& h0) {
  if (gamma0 == 0.0) throw DomainError("hgamma: gamma0 must be nonzero");
  return ((gamma - gamma0) / gamma0) * lam + (gamma / gamma0) * h0;
}

inline double vgamma_rate(double gamma, const Vector& lam, const Vector& hg) {
  if (gamma == 0.0) throw DomainError("vgamma_rate: gamma must be nonzero");
  return -(1.0 - gamma) / (2.0 * gamma) * (lam + hg).squaredNorm();
}

/// D^g(pi) = v^g/(1-g) + (sigma pi)^T (lambda + H^g) - g/2 |sigma pi|^2: the drift of
/// U^g(X^pi) per unit of X^{1-g} E(M^g) E(V^g).
inline double drift_term(double gamma, const Vector& sp, const Vector& lam, const Vector& hg) {
  if (gamma == 0.0 || std::abs(gamma - 1.0) <= kGammaOneExclusion) throw DomainError("drift_term: gamma must lie in (0,inf)\\{1}");
  return vgamma_rate(gamma, lam, hg) / (1.0 - gamma) + sp.dot(lam + hg) - 0.5 * gamma * sp.squaredNorm();
}

/// J^g = A (rho^T rho)^{-1} rho^T H^g for a factor B = rho^T W + A^T W-perp.
inline Vector factor_j(const Matrix& rho, const Matrix& a, const Vector& hg) {
  if (rho.rows() != hg.size()) throw DimensionError("factor_j: rho must have d_w rows");
  if (a.cols() != rho.cols()) throw DimensionError("factor_j: A and rho must have d_b columns");
  const Matrix gram = rho.transpose() * rho;
  Eigen::FullPivLU<Matrix> lu(gram);
  lu.setThreshold(kPinvRelativeTolerance);
  if (gram.size() == 0 || !lu.isInvertible()) throw FactorDegeneracyError("factor_j: rho^T rho is singular");
  return a * lu.solve(rho.transpose() * hg);
}

struct OptimalPortfolio {
  Vector pi;
  Vector sigma_pi;  // sigma * pi, equal to the target up to `residual`
  double residual = 0.0;
};

/// Residual tolerance for sigma*pi = target, relative to max(1, |target|).
inline constexpr double kHedgeResidualTolerance = 1e-10;

/// Minimum-norm pi solving sigma pi = target.
inline OptimalPortfolio solve_allocation(const Vector& target, const Matrix& sigma) {
  if (sigma.rows() != target.size()) throw DimensionError("allocation target must have length d_w");
  const auto pinv = pseudoinverse(sigma);
  if (pinv.rank < sigma.cols()) throw SingularMarketError("volatility matrix is rank deficient");
  OptimalPortfolio out;
  out.pi = pinv.inverse * target;
  out.sigma_pi = sigma * out.pi;
  out.residual = (out.sigma_pi - target).norm();
  if (out.residual > kHedgeResidualTolerance * std::max(1.0, target.norm())) {
    throw NoExactSolutionError("target sigma*pi is not in the column space of sigma (residual " +
                                   format_double(out.residual) + ")",
                               out.residual);
  }
  return out;
}

/// pi* with sigma pi* = (lambda + H^{g0}) / g0.
inline OptimalPortfolio optimal_portfolio(const Vector& lam, const Vector& h0, double gamma0, const Matrix& sigma) {
  check_risk_aversion(gamma0, "gamma0");
  return solve_allocation((lam + h0) / gamma0, sigma);
}

/// H^{g0} = g0 sigma pi - lambda makes pi optimal.
inline Vector h0_for_portfolio(const Vector& pi, double gamma0, const Matrix& sigma, const Vector& lam) {
  return gamma0 * (sigma * pi) - lam;
}

/// (x e^{-|lambda + H|^2 / (2g)})^{1-g} / (1-g), the time-monotone power value.
inline double monotone_power_value(double x, const Vector& lam_plus_h, double gamma) {
  if (!(x > 0.0)) throw DomainError("monotone_power_value: wealth must be positive");
  check_risk_aversion(gamma, "gamma");
  const double log_arg = std::log(x) - lam_plus_h.squaredNorm() / (2.0 * gamma);
  return std::exp((1.0 - gamma) * log_arg) / (1.0 - gamma);
}

// ---------------------------------------------------------------------------
// Volatility choice

struct PathPoint {
  std::size_t step = 0;
  double t = 0.0;
  const BrownianPaths* paths = nullptr;  // observed increments are rows [0, step)
};

/// A d-dimensional process evaluated at grid points.
using VectorProcess = std::function<Vector(const PathPoint&)>;

struct JZero {};
struct JConstant {
  Vector value;
};
struct JFactor {
  Matrix rho;  // d_w x d_b
  Matrix a;    // d_wperp x d_b
};
using JSpec = std::variant<JZero, JConstant, JFactor>;

/// The free inputs of the construction: H^{g0} and the J^g family.
class VolatilityChoice {
public:
  enum class H0Kind { zero, constant, rule, portfolio_inversion };

  static VolatilityChoice zero() { return VolatilityChoice(H0Kind::zero, {}); }

  static VolatilityChoice constant(Vector h0) {
    auto v = VolatilityChoice(H0Kind::constant, [h0](const PathPoint&) { return h0; });
    v.constant_ = std::move(h0);
    return v;
  }

  static VolatilityChoice rule(VectorProcess h0) { return VolatilityChoice(H0Kind::rule, std::move(h0)); }

  /// H^{g0}_t = g0 sigma_t pi_t - lambda_t, so that pi becomes the optimal portfolio.
  static VolatilityChoice portfolio_inversion(const MarketSpec& market, double gamma0, VectorProcess target_pi) {
    auto m = std::make_shared<const MarketSpec>(market);
    return VolatilityChoice(H0Kind::portfolio_inversion, [m, gamma0, target_pi = std::move(target_pi)](const PathPoint& p) {
      const Vector pi = target_pi(p);
      if (pi.size() != static_cast<Eigen::Index>(m->n_stocks())) throw DimensionError("target portfolio has wrong length");
      return h0_for_portfolio(pi, gamma0, m->sigma(p.t), m->sharpe(p.t));
    });
  }

  static VolatilityChoice portfolio_inversion(const MarketSpec& market, double gamma0, const Vector& target_pi) {
    return portfolio_inversion(market, gamma0, [target_pi](const PathPoint&) { return target_pi; });
  }

  /// One spec shared by every atom, or one per atom.
  VolatilityChoice& with_j(std::vector<JSpec> specs) {
    j_ = std::move(specs);
    return *this;
  }

  H0Kind h0_kind() const noexcept { return kind_; }

  Vector h0(const PathPoint& p, std::size_t d_w) const {
    if (kind_ == H0Kind::zero) return Vector::Zero(static_cast<Eigen::Index>(d_w));
    Vector h = h0_(p);
    if (h.size() != static_cast<Eigen::Index>(d_w)) throw DimensionError("H^{g0} has length " + std::to_string(h.size()) + ", expected d_w = " + std::to_string(d_w));
    return h;
  }

  const JSpec& j_spec(std::size_t atom) const {
    static const JSpec zero_spec = JZero{};
    if (j_.empty()) return zero_spec;
    return j_.size() == 1 ? j_.front() : j_.at(atom);
  }

  Vector j(std::size_t atom, const Vector& hg, std::size_t d_wperp) const {
    const JSpec& spec = j_spec(atom);
    if (std::holds_alternative<JZero>(spec)) return Vector::Zero(static_cast<Eigen::Index>(d_wperp));
    if (const auto* c = std::get_if<JConstant>(&spec)) return c->value;
    const auto& f = std::get<JFactor>(spec);
    return factor_j(f.rho, f.a, hg);
  }

  /// Dimension and well-posedness checks against a market and mixture.
  void validate(const MarketSpec& market, std::size_t n_atoms) const {
    if (kind_ == H0Kind::constant && constant_.size() != static_cast<Eigen::Index>(market.d_w())) {
      throw DimensionError("constant H^{g0} must have length d_w = " + std::to_string(market.d_w()));
    }
    if (!j_.empty() && j_.size() != 1 && j_.size() != n_atoms) {
      throw DimensionError("J family must have one spec or one per atom");
    }
    const auto dwp = static_cast<Eigen::Index>(market.d_wperp());
    const auto dw = static_cast<Eigen::Index>(market.d_w());
    for (const auto& spec : j_) {
      if (const auto* c = std::get_if<JConstant>(&spec)) {
        if (c->value.size() != dwp) throw DimensionError("constant J must have length d_wperp = " + std::to_string(dwp));
      } else if (const auto* f = std::get_if<JFactor>(&spec)) {
        if (f->rho.rows() != dw) throw DimensionError("factor rho must have d_w rows");
        if (f->a.rows() != dwp || f->a.cols() != f->rho.cols()) throw DimensionError("factor A must be d_wperp x d_b");
        // Probe invertibility of rho^T rho once.
        (void)factor_j(f->rho, f->a, Vector::Zero(dw));
      }
    }
  }

private:
  VolatilityChoice(H0Kind kind, VectorProcess h0) : kind_(kind), h0_(std::move(h0)) {}

  H0Kind kind_;
  VectorProcess h0_;
  Vector constant_;
  std::vector<JSpec> j_;
};

// ---------------------------------------------------------------------------
// Path state

struct AtomState {
  double m = 0.0;     // M^g_t
  double qv_m = 0.0;  // <M^g>_t
  double v = 0.0;     // V^g_t
};

struct FppState {
  std::vector<AtomState> atoms;

  static FppState initial(std::size_t n_atoms) { return FppState{std::vector<AtomState>(n_atoms)}; }
};

/// Market and noise seen over one grid cell [t, t + dt).
struct FppStep {
  std::size_t step = 0;
  double t = 0.0;
  double dt = 0.0;
  Vector lambda;
  Vector dw;
  Vector dwperp;
  const BrownianPaths* paths = nullptr;
};

inline FppStep fpp_step(const MarketSpec& market, const BrownianPaths& paths, const TimeGrid& grid, std::size_t k) {
  const auto row = static_cast<Eigen::Index>(k);
  return FppStep{k, grid[k], grid.dt(k), market.sharpe(grid[k]), paths.dw.row(row).transpose(),
                 paths.dwperp.row(row).transpose(), &paths};
}

/// Left-endpoint update of (M, <M>, V) for each atom over one cell.
inline FppState accumulate_fpp_state(FppState state, std::span<const double> gammas, double gamma0,
                                     const VolatilityChoice& vol, const FppStep& step) {
  if (state.atoms.size() != gammas.size()) throw DimensionError("state and mixture have different atom counts");
  const auto d_w = static_cast<std::size_t>(step.lambda.size());
  if (step.dw.size() != step.lambda.size()) throw DimensionError("dW length differs from lambda length");
  const auto d_wperp = static_cast<std::size_t>(step.dwperp.size());
  const Vector h0 = vol.h0(PathPoint{step.step, step.t, step.paths}, d_w);
  for (std::size_t i = 0; i < gammas.size(); ++i) {
    const Vector hg = hgamma(gammas[i], gamma0, step.lambda, h0);
    const Vector jg = vol.j(i, hg, d_wperp);
    if (jg.size() != step.dwperp.size()) throw DimensionError("J^g length differs from d_wperp");
    auto& a = state.atoms[i];
    a.m += hg.dot(step.dw) + jg.dot(step.dwperp);
    a.qv_m += (hg.squaredNorm() + jg.squaredNorm()) * step.dt;
    a.v += vgamma_rate(gammas[i], step.lambda, hg) * step.dt;
  }
  return state;
}

inline FppState accumulate_fpp_state(FppState state, const RiskMixture& mixture, const VolatilityChoice& vol,
                                     const FppStep& step) {
  const auto g = mixture.gammas();
  return accumulate_fpp_state(std::move(state), g, mixture.gamma0(), vol, step);
}

/// States at every grid time t_0..t_N along one Brownian path.
inline std::vector<FppState> trace_fpp(std::span<const double> gammas, double gamma0, const VolatilityChoice& vol,
                                       const MarketSpec& market, const BrownianPaths& paths, const TimeGrid& grid) {
  std::vector<FppState> out;
  out.reserve(grid.size());
  out.push_back(FppState::initial(gammas.size()));
  for (std::size_t k = 0; k < grid.steps(); ++k) {
    out.push_back(accumulate_fpp_state(out.back(), gammas, gamma0, vol, fpp_step(market, paths, grid, k)));
  }
  return out;
}

inline std::vector<FppState> trace_fpp(const RiskMixture& mixture, const VolatilityChoice& vol, const MarketSpec& market,
                                       const BrownianPaths& paths, const TimeGrid& grid) {
  const auto g = mixture.gammas();
  return trace_fpp(g, mixture.gamma0(), vol, market, paths, grid);
}

/// dQ/dP on F_t for one atom: E(M)_t = exp(m - <M>/2).
inline double market_view_density(const AtomState& s) { return std::exp(s.m - 0.5 * s.qv_m); }

namespace detail {

/// log |w x^{1-g}/(1-g) E(M) exp(V)| and its sign.
inline std::pair<double, int> atom_log_term(double log_x, double gamma, double weight, const AtomState& s) {
  const double c = 1.0 - gamma;
  const int sign = (weight > 0.0) == (c > 0.0) ? 1 : -1;
  const double lg = std::log(std::abs(weight)) + c * log_x - std::log(std::abs(c)) + s.m - 0.5 * s.qv_m + s.v;
  return {lg, sign};
}

/// sum of signed atoms evaluated in log space; -inf when a negative term overflows.
inline double evaluate_signed(double x, std::span<const double> gammas, std::span<const double> weights,
                              const FppState& state) {
  if (!(x > 0.0)) throw DomainError("utility evaluated at nonpositive wealth " + format_double(x));
  if (gammas.size() != weights.size() || gammas.size() != state.atoms.size()) {
    throw DimensionError("atoms, weights and state differ in size");
  }
  constexpr double inf = std::numeric_limits<double>::infinity();
  const double log_x = std::log(x);
  double pos_max = -inf;
  double neg_max = -inf;
  std::vector<std::pair<double, int>> terms;
  terms.reserve(gammas.size());
  for (std::size_t i = 0; i < gammas.size(); ++i) {
    terms.push_back(atom_log_term(log_x, gammas[i], weights[i], state.atoms[i]));
    auto& mx = terms.back().second > 0 ? pos_max : neg_max;
    mx = std::max(mx, terms.back().first);
  }
  if (neg_max == inf) return -inf;
  if (pos_max == inf) return inf;
  const double scale = std::max(pos_max, neg_max);
  if (scale == -inf) return 0.0;
  double pos = 0.0;
  double neg = 0.0;
  for (const auto& [lg, sign] : terms) (sign > 0 ? pos : neg) += std::exp(lg - scale);
  const double v = (pos - neg) * std::exp(scale);
  if (std::isnan(v)) return -inf;
  return v;
}

}  // namespace detail

/// U_t(x) for the state reached at time t.
inline double evaluate_fpp(double x, const FppState& state, const RiskMixture& mixture) {
  const auto g = mixture.gammas();
  const auto w = mixture.weights();
  return detail::evaluate_signed(x, g, w, state);
}

/// Strategy pi* for a mixture and volatility choice.
inline Strategy optimal_strategy(double gamma0, const VolatilityChoice& vol, const MarketSpec& market) {
  auto m = std::make_shared<const MarketSpec>(market);
  return [m, gamma0, vol](const StrategyContext& ctx) {
    const Vector h0 = vol.h0(PathPoint{ctx.step, ctx.t, &ctx.paths}, m->d_w());
    return optimal_portfolio(m->sharpe(ctx.t), h0, gamma0, m->sigma(ctx.t)).pi;
  };
}

/// Per-path CSV rows (path_id, t, atom, m, qv_m, v, utility); `utility` is the atom's
/// weighted term evaluated at the supplied wealth path.
inline void write_fpp_csv(std::ostream& out, std::uint64_t path_id, const TimeGrid& grid,
                          const std::vector<FppState>& states, const RiskMixture& mixture, std::span<const double> wealth,
                          bool with_header) {
  CsvWriter csv(out);
  if (with_header) csv.header({"path_id", "t", "atom", "m", "qv_m", "v", "utility"});
  for (std::size_t k = 0; k < states.size(); ++k) {
    for (std::size_t i = 0; i < mixture.size(); ++i) {
      const auto& s = states[k].atoms[i];
      const double g = mixture.atoms()[i].gamma;
      const double w = mixture.atoms()[i].weight;
      const double term = detail::evaluate_signed(wealth[k], std::span<const double>(&g, 1), std::span<const double>(&w, 1),
                                                  FppState{{s}});
      csv.row(path_id, grid[k], i, s.m, s.qv_m, s.v, term);
    }
  }
}

// ---------------------------------------------------------------------------
// True-FPP integrability constants

struct TrueFppConstants {
  double v = 0.0;
  double u = 0.0;
  double p1 = 0.0;
  double p2 = 0.0;
  double p3 = 0.0;
  double q = 0.0;
  double cj_lower = 0.0;
  std::vector<std::pair<double, double>> ch_lower;  // (gamma, lower bound for c_H(gamma))
};

/// The two candidate lower bounds for c_H(gamma); the binding one is their max.
inline std::pair<double, double> ch_lower_branches(double gamma, double gamma0, double v, double u, double p1,
                                                   double p3) {
  const double q = 2.0 * v / (v - 1.0);
  const double g02 = gamma0 * gamma0;
  const double first = u * v * p3 * (1.0 - gamma) * (2.0 * u * v * p1 * (1.0 - gamma) - 1.0) / g02;
  const double second = 0.5 * q * p3 * gamma * (q * p1 * gamma - 1.0) / g02;
  return {first, second};
}

inline TrueFppConstants true_fpp_constants(double v, double u, double p1, double p2, double p3, double gamma0,
                                           const RiskMixture& mixture) {
  for (const auto& [name, e] : {std::pair{"v", v}, {"u", u}, {"p1", p1}, {"p2", p2}, {"p3", p3}}) {
    if (!std::isfinite(e) || !(e > 1.0)) throw InvalidExponentError(std::string(name) + " must exceed 1, got " + format_double(e));
  }
  if (!(1.0 / p1 + 1.0 / p2 + 1.0 / p3 < 1.0)) throw InvalidExponentError("1/p1 + 1/p2 + 1/p3 must be < 1");
  check_risk_aversion(gamma0, "gamma0");
  TrueFppConstants c{v, u, p1, p2, p3, 2.0 * v / (v - 1.0), 0.0, {}};
  c.cj_lower = 0.5 * c.q * p2 * (c.q * p1 - 1.0);
  for (const auto& a : mixture.atoms()) {
    const auto [first, second] = ch_lower_branches(a.gamma, gamma0, v, u, p1, p3);
    c.ch_lower.emplace_back(a.gamma, std::max(first, second));
  }
  return c;
}

// ---------------------------------------------------------------------------
// Admissibility moment indicators

struct AdmissibilityReport {
  double integral_estimate = 0.0;  // int_0^T sum_i w_i E[X^{2v(1-g_i)} |sigma pi|^{2v}] dt
  double integral_se = 0.0;
  std::vector<double> integrand_mean;  // per cell, left endpoint
  std::vector<double> integrand_se;
  std::vector<double> sup_moment_mean;  // per grid time: sum_i w_i E[X^{2uv(1-g_i)}]
  std::vector<double> sup_moment_se;
  double sup_estimate = 0.0;
  double sup_time = 0.0;
  bool finite = true;
  std::string note =
      "sampling-based indicator: finite sample moments do not certify finiteness of the expectations";
};

inline AdmissibilityReport check_admissibility_moments(const Strategy& strategy, const MarketSpec& market,
                                                       const RiskMixture& mixture, double v, double u, double x0,
                                                       std::size_t n_paths, const TimeGrid& grid, std::uint64_t seed,
                                                       unsigned threads = 0) {
  if (!std::isfinite(v) || !(v > 1.0)) throw InvalidExponentError("admissibility exponent v must exceed 1");
  if (!std::isfinite(u) || !(u > 1.0)) throw InvalidExponentError("auxiliary exponent u must exceed 1");
  const std::size_t n = grid.steps();
  struct Acc {
    Moments integral;
    std::vector<Moments> integrand;
    std::vector<Moments> sup_moment;
  };
  auto make = [n] { return Acc{Moments{}, std::vector<Moments>(n), std::vector<Moments>(n + 1)}; };
  auto per_path = [&](std::size_t i, Acc& acc) {
    const auto paths = simulate_brownian(grid, market.d_w(), market.d_wperp(), seed, i);
    const auto w = evolve_wealth(x0, strategy, market, paths, grid);
    double integral = 0.0;
    for (std::size_t k = 0; k <= n; ++k) {
      double moment = 0.0;
      for (const auto& a : mixture.atoms()) moment += a.weight * std::exp(2.0 * u * v * (1.0 - a.gamma) * w.log_x[k]);
      acc.sup_moment[k].add(moment);
      if (k == n) break;
      const double sp_norm = w.allocations.row(static_cast<Eigen::Index>(k)).norm();
      double integrand = 0.0;
      if (sp_norm > 0.0) {
        for (const auto& a : mixture.atoms()) {
          integrand += a.weight * std::exp(2.0 * v * (1.0 - a.gamma) * w.log_x[k] + 2.0 * v * std::log(sp_norm));
        }
      }
      acc.integrand[k].add(integrand);
      integral += integrand * grid.dt(k);
    }
    acc.integral.add(integral);
  };
  auto merge = [](Acc& into, const Acc& from) {
    into.integral.merge(from.integral);
    for (std::size_t k = 0; k < into.integrand.size(); ++k) into.integrand[k].merge(from.integrand[k]);
    for (std::size_t k = 0; k < into.sup_moment.size(); ++k) into.sup_moment[k].merge(from.sup_moment[k]);
  };
  const Acc total = ensemble_reduce<Acc>(n_paths, threads, make, per_path, merge);

  AdmissibilityReport r;
  const auto s = total.integral.summary();
  r.integral_estimate = s.mean;
  r.integral_se = s.se;
  r.finite = std::isfinite(s.mean) && total.integral.nonfinite_count() == 0;
  for (const auto& m : total.integrand) {
    const auto ms = m.summary();
    r.integrand_mean.push_back(ms.mean);
    r.integrand_se.push_back(ms.se);
    r.finite = r.finite && std::isfinite(ms.mean);
  }
  r.sup_estimate = -std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < total.sup_moment.size(); ++k) {
    const auto ms = total.sup_moment[k].summary();
    r.sup_moment_mean.push_back(ms.mean);
    r.sup_moment_se.push_back(ms.se);
    r.finite = r.finite && std::isfinite(ms.mean);
    if (ms.mean > r.sup_estimate) {
      r.sup_estimate = ms.mean;
      r.sup_time = grid[k];
    }
  }
  return r;
}

}  // namespace fpp
