#pragma once

#include "fpp/csv.hpp"
#include "fpp/errors.hpp"
#include "fpp/linalg.hpp"
#include "fpp/rng.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <ostream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

namespace fpp {

/// Discretization 0 = t_0 < t_1 < ... < t_N = T of the time axis (years).
class TimeGrid {
public:
  explicit TimeGrid(std::vector<double> times) : times_(std::move(times)) {
    if (times_.size() < 2) throw DomainError("time grid needs at least two points");
    if (times_.front() != 0.0) throw DomainError("time grid must start at t = 0");
    for (std::size_t k = 1; k < times_.size(); ++k) {
      if (!(times_[k] > times_[k - 1]) || !std::isfinite(times_[k])) {
        std::ostringstream msg;
        msg << "time grid not strictly increasing at index " << k;
        throw DomainError(msg.str());
      }
    }
  }

  /// `steps` equal cells on [0, horizon].
  static TimeGrid uniform(double horizon, std::size_t steps) {
    if (steps == 0 || !(horizon > 0.0)) throw DomainError("uniform grid needs horizon > 0 and steps > 0");
    std::vector<double> t(steps + 1);
    for (std::size_t k = 0; k <= steps; ++k) t[k] = horizon * static_cast<double>(k) / static_cast<double>(steps);
    t.back() = horizon;
    return TimeGrid(std::move(t));
  }

  /// Grid with step `dt`; the horizon must be an integer multiple of dt (to 1e-9 relative).
  static TimeGrid with_step(double horizon, double dt) {
    if (!(dt > 0.0)) throw DomainError("grid step must be positive");
    const double ratio = horizon / dt;
    const double rounded = std::round(ratio);
    if (rounded < 1.0 || std::abs(ratio - rounded) > 1e-9 * std::max(1.0, ratio)) {
      throw DomainError("horizon must be a positive multiple of the grid step");
    }
    return uniform(horizon, static_cast<std::size_t>(rounded));
  }

  std::size_t steps() const noexcept { return times_.size() - 1; }
  std::size_t size() const noexcept { return times_.size(); }
  double operator[](std::size_t k) const noexcept { return times_[k]; }
  double dt(std::size_t k) const noexcept { return times_[k + 1] - times_[k]; }
  double horizon() const noexcept { return times_.back(); }
  const std::vector<double>& times() const noexcept { return times_; }

private:
  std::vector<double> times_;
};

/// Piecewise-constant schedule: the value of the last knot with time <= t.
template <class T>
class Schedule {
public:
  Schedule() = default;
  explicit Schedule(T constant) { knots_.emplace_back(0.0, std::move(constant)); }
  explicit Schedule(std::vector<std::pair<double, T>> knots) : knots_(std::move(knots)) {
    if (knots_.empty()) throw DomainError("schedule needs at least one knot");
    if (knots_.front().first != 0.0) throw DomainError("schedule must start at t = 0");
    for (std::size_t i = 1; i < knots_.size(); ++i) {
      if (!(knots_[i].first > knots_[i - 1].first)) throw DomainError("schedule knots must be strictly increasing");
    }
  }

  std::size_t piece_index(double t) const noexcept {
    std::size_t i = 0;
    while (i + 1 < knots_.size() && knots_[i + 1].first <= t) ++i;
    return i;
  }
  const T& at(double t) const noexcept { return knots_[piece_index(t)].second; }
  const std::vector<std::pair<double, T>>& knots() const noexcept { return knots_; }

private:
  std::vector<std::pair<double, T>> knots_;
};

/// lambda = (sigma^+)^T mu, sigma^+ the Moore-Penrose inverse of the d_w x n volatility.
inline Vector sharpe_ratio(const Matrix& sigma, const Vector& mu) {
  if (sigma.cols() != mu.size()) throw DimensionError("sharpe_ratio: sigma has " + std::to_string(sigma.cols()) +
                                                      " columns but mu has length " + std::to_string(mu.size()));
  const auto pinv = pseudoinverse(sigma);
  if (pinv.rank < sigma.cols()) {
    throw SingularMarketError("volatility matrix is rank deficient (rank " + std::to_string(pinv.rank) + " < " +
                              std::to_string(sigma.cols()) + " stocks)");
  }
  return pinv.inverse.transpose() * mu;
}

/// Market of n stocks driven by (W, W-perp) with deterministic piecewise-constant coefficients.
class MarketSpec {
public:
  MarketSpec(std::size_t n_stocks, std::size_t d_w, std::size_t d_wperp, Schedule<Matrix> sigma, Schedule<Vector> mu)
      : n_(n_stocks), d_w_(d_w), d_wperp_(d_wperp), sigma_(std::move(sigma)), mu_(std::move(mu)) {
    if (n_ == 0 || d_w_ == 0) throw DimensionError("market needs n_stocks >= 1 and d_w >= 1");
    // One cached (lambda, sigma^+) per distinct piece of either schedule.
    std::vector<double> knots;
    for (const auto& k : sigma_.knots()) knots.push_back(k.first);
    for (const auto& k : mu_.knots()) knots.push_back(k.first);
    std::sort(knots.begin(), knots.end());
    knots.erase(std::unique(knots.begin(), knots.end()), knots.end());
    for (double t : knots) {
      const Matrix& s = sigma_.at(t);
      const Vector& m = mu_.at(t);
      if (s.rows() != static_cast<Eigen::Index>(d_w_) || s.cols() != static_cast<Eigen::Index>(n_)) {
        throw DimensionError("sigma must be d_w x n_stocks");
      }
      if (m.size() != static_cast<Eigen::Index>(n_)) throw DimensionError("mu must have length n_stocks");
      Vector lam = sharpe_ratio(s, m);
      if (!lam.allFinite()) throw SingularMarketError("Sharpe ratio is not finite");
      pieces_.push_back(Piece{t, std::move(lam), pseudoinverse(s).inverse});
    }
  }

  /// Single-piece market with constant coefficients.
  static MarketSpec constant(const Matrix& sigma, const Vector& mu, std::size_t d_wperp = 0) {
    return MarketSpec(static_cast<std::size_t>(sigma.cols()), static_cast<std::size_t>(sigma.rows()), d_wperp,
                      Schedule<Matrix>(sigma), Schedule<Vector>(mu));
  }

  /// One stock, one Brownian factor, sigma = 1 so that sigma*pi = pi and mu = lambda.
  static MarketSpec scalar(double lambda, double sigma = 1.0) {
    Matrix s(1, 1);
    s(0, 0) = sigma;
    Vector m(1);
    m(0) = lambda * sigma;
    return constant(s, m);
  }

  std::size_t n_stocks() const noexcept { return n_; }
  std::size_t d_w() const noexcept { return d_w_; }
  std::size_t d_wperp() const noexcept { return d_wperp_; }
  bool complete() const noexcept { return d_wperp_ == 0; }

  const Matrix& sigma(double t) const noexcept { return sigma_.at(t); }
  const Vector& mu(double t) const noexcept { return mu_.at(t); }
  const Vector& sharpe(double t) const noexcept { return piece(t).lambda; }
  const Matrix& sigma_pinv(double t) const noexcept { return piece(t).sigma_pinv; }

  /// sup over pieces of ||lambda||; finite by construction.
  double sharpe_bound() const noexcept {
    double m = 0.0;
    for (const auto& p : pieces_) m = std::max(m, p.lambda.norm());
    return m;
  }

private:
  struct Piece {
    double start;
    Vector lambda;
    Matrix sigma_pinv;
  };
  const Piece& piece(double t) const noexcept {
    std::size_t i = 0;
    while (i + 1 < pieces_.size() && pieces_[i + 1].start <= t) ++i;
    return pieces_[i];
  }

  std::size_t n_;
  std::size_t d_w_;
  std::size_t d_wperp_;
  Schedule<Matrix> sigma_;
  Schedule<Vector> mu_;
  std::vector<Piece> pieces_;
};

/// Brownian increments on a grid; row k holds the increment over [t_k, t_{k+1}].
struct BrownianPaths {
  Matrix dw;
  Matrix dwperp;
  std::uint64_t seed = 0;
  std::uint64_t path_id = 0;

  std::size_t steps() const noexcept { return static_cast<std::size_t>(dw.rows()); }
};

/// Path `path_id` of the ensemble keyed by `seed`. Normals are consumed step by
/// step, W before W-perp, so a path is the same whether drawn alone or in a batch.
inline BrownianPaths simulate_brownian(const TimeGrid& grid, std::size_t d_w, std::size_t d_wperp,
                                       std::uint64_t seed, std::uint64_t path_id) {
  const auto n = static_cast<Eigen::Index>(grid.steps());
  BrownianPaths out{Matrix(n, static_cast<Eigen::Index>(d_w)), Matrix(n, static_cast<Eigen::Index>(d_wperp)), seed,
                    path_id};
  NormalStream normals(seed, path_id);
  for (Eigen::Index k = 0; k < n; ++k) {
    const double sd = std::sqrt(grid.dt(static_cast<std::size_t>(k)));
    for (Eigen::Index j = 0; j < out.dw.cols(); ++j) out.dw(k, j) = sd * normals.next();
    for (Eigen::Index j = 0; j < out.dwperp.cols(); ++j) out.dwperp(k, j) = sd * normals.next();
  }
  return out;
}

/// What an allocation rule may look at when choosing pi on [t_k, t_{k+1}).
struct StrategyContext {
  std::size_t step;
  double t;
  double wealth;
  const BrownianPaths& paths;  // increments before `step` are the observed past
};

/// Allocation rule returning pi (fractions of wealth per stock, length n).
using Strategy = std::function<Vector(const StrategyContext&)>;

inline Strategy constant_strategy(Vector pi) {
  return [pi = std::move(pi)](const StrategyContext&) { return pi; };
}

inline Strategy null_strategy(std::size_t n_stocks) {
  return constant_strategy(Vector::Zero(static_cast<Eigen::Index>(n_stocks)));
}

struct WealthPath {
  std::vector<double> x;
  std::vector<double> log_x;
  Matrix allocations;  // row k: sigma*pi applied on cell k (length d_w)
  Matrix portfolio;    // row k: pi applied on cell k (length n)
};

/// Log-Euler wealth update:
///   log X_{k+1} = log X_k + ((sigma pi)^T lambda - |sigma pi|^2 / 2) dt + (sigma pi)^T dW,
/// exact for sigma*pi constant on each cell.
inline WealthPath evolve_wealth(double x0, const Strategy& strategy, const MarketSpec& market,
                                const BrownianPaths& paths, const TimeGrid& grid) {
  if (!(x0 > 0.0) || !std::isfinite(x0)) throw DomainError("initial wealth must be positive and finite");
  const std::size_t n = grid.steps();
  if (paths.steps() != n) throw DimensionError("Brownian paths do not match the time grid");
  if (paths.dw.cols() != static_cast<Eigen::Index>(market.d_w())) throw DimensionError("Brownian dimension != d_w");
  WealthPath out;
  out.x.resize(n + 1);
  out.log_x.resize(n + 1);
  out.allocations.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(market.d_w()));
  out.portfolio.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(market.n_stocks()));
  out.x[0] = x0;
  out.log_x[0] = std::log(x0);
  for (std::size_t k = 0; k < n; ++k) {
    const double t = grid[k];
    const Vector pi = strategy(StrategyContext{k, t, out.x[k], paths});
    if (pi.size() != static_cast<Eigen::Index>(market.n_stocks()) || !pi.allFinite()) {
      std::ostringstream msg;
      msg << "strategy returned a non-finite or mis-sized allocation at t = " << t;
      throw StrategyError(msg.str(), t);
    }
    const Vector sp = market.sigma(t) * pi;
    const auto row = static_cast<Eigen::Index>(k);
    const double increment =
        (sp.dot(market.sharpe(t)) - 0.5 * sp.squaredNorm()) * grid.dt(k) + sp.dot(paths.dw.row(row).transpose());
    out.allocations.row(row) = sp.transpose();
    out.portfolio.row(row) = pi.transpose();
    out.log_x[k + 1] = out.log_x[k] + increment;
    out.x[k + 1] = out.x[k] * std::exp(increment);
    if (!(out.x[k + 1] > 0.0) || !std::isfinite(out.x[k + 1])) {
      std::ostringstream msg;
      msg << "wealth left (0, inf) at t = " << grid[k + 1];
      throw StrategyError(msg.str(), grid[k + 1]);
    }
  }
  return out;
}

/// CSV with columns path_id, t, W_1..W_dw, Wp_1..Wp_dwperp (cumulative values, W_0 = 0).
inline void write_paths_csv(std::ostream& out, const std::vector<BrownianPaths>& bundle, const TimeGrid& grid) {
  CsvWriter csv(out);
  if (bundle.empty()) return;
  std::vector<std::string> names{"path_id", "t"};
  for (Eigen::Index j = 0; j < bundle.front().dw.cols(); ++j) names.push_back("W_" + std::to_string(j + 1));
  for (Eigen::Index j = 0; j < bundle.front().dwperp.cols(); ++j) names.push_back("Wp_" + std::to_string(j + 1));
  csv.header(names);
  for (const auto& p : bundle) {
    Vector w = Vector::Zero(p.dw.cols());
    Vector wp = Vector::Zero(p.dwperp.cols());
    for (std::size_t k = 0; k <= p.steps(); ++k) {
      if (k > 0) {
        w += p.dw.row(static_cast<Eigen::Index>(k - 1)).transpose();
        wp += p.dwperp.row(static_cast<Eigen::Index>(k - 1)).transpose();
      }
      std::vector<std::string> cells{std::to_string(p.path_id), format_double(grid[k])};
      for (Eigen::Index j = 0; j < w.size(); ++j) cells.push_back(format_double(w(j)));
      for (Eigen::Index j = 0; j < wp.size(); ++j) cells.push_back(format_double(wp(j)));
      csv.line(cells);
    }
  }
}

}  // namespace fpp
