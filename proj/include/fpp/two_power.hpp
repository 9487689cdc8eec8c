#pragma once

// Two-power mixtures U_t(x) = A_t x^p + D_t x^q with constant powers 0 < p < q < 1.

#include "fpp/csv.hpp"
#include "fpp/errors.hpp"
#include "fpp/linalg.hpp"
#include "fpp/market.hpp"
#include "fpp/mixture_fpp.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <span>
#include <string>
#include <vector>

namespace fpp {

inline void check_power(double p, const std::string& what) {
  if (!std::isfinite(p) || !(p > 0.0) || !(p < 1.0)) throw DomainError(what + " must lie in (0, 1), got " + format_double(p));
}

struct TwoPowerSpec {
  double p = 0.1;
  double q = 0.3;
  double a0 = 1.0;
  double d0 = 1.0;
  Vector a_vol;   // loading of A on W
  Vector d_vol;   // loading of D on W
  Vector a_perp;  // loading of A on W-perp
  Vector d_perp;  // loading of D on W-perp

  void validate(std::size_t d_w, std::size_t d_wperp) const {
    check_power(p, "p");
    check_power(q, "q");
    if (!(p < q)) throw DomainError("two-power spec needs p < q");
    if (!(a0 > 0.0) || !std::isfinite(a0)) throw DomainError("A0 must be positive");
    if (!(d0 > 0.0) || !std::isfinite(d0)) throw DomainError("D0 must be positive");
    const auto dw = static_cast<Eigen::Index>(d_w);
    const auto dwp = static_cast<Eigen::Index>(d_wperp);
    if (a_vol.size() != dw || d_vol.size() != dw) throw DimensionError("a and d loadings must have length d_w");
    if (a_perp.size() != dwp || d_perp.size() != dwp) throw DimensionError("perpendicular loadings must have length d_wperp");
  }
};

struct CoefficientDrifts {
  double alpha;
  double delta;
};

/// alpha = -p/(2(1-p)) |lambda + a|^2 and the same for (q, d).
inline CoefficientDrifts coefficient_drifts(double p, double q, const Vector& lam, const Vector& a, const Vector& d) {
  check_power(p, "p");
  check_power(q, "q");
  return {-p / (2.0 * (1.0 - p)) * (lam + a).squaredNorm(), -q / (2.0 * (1.0 - q)) * (lam + d).squaredNorm()};
}

/// |(lambda + a)/(1-p) - (lambda + d)/(1-q)|; zero exactly when A x^p + D x^q is an FPP.
inline double consistency_gap(double p, double q, const Vector& lam, const Vector& a, const Vector& d) {
  check_power(p, "p");
  check_power(q, "q");
  return ((lam + a) / (1.0 - p) - (lam + d) / (1.0 - q)).norm();
}

namespace detail {

inline double log_add(double a, double b) {
  const double m = std::max(a, b);
  return m + std::log(std::exp(a - m) + std::exp(b - m));
}

inline void check_two_power_state(double a_coeff, double d_coeff, double x) {
  if (!(a_coeff > 0.0) || !(d_coeff > 0.0)) throw DomainError("coefficients A and D must be positive");
  if (!(x > 0.0)) throw DomainError("wealth must be positive");
}

}  // namespace detail

/// Wealth-feedback target sigma*pi: the curvature-weighted average of
/// (lambda + a)/(1-p) and (lambda + d)/(1-q).
inline Vector mixture_target(double p, double q, double a_coeff, double d_coeff, double x, const Vector& lam,
                             const Vector& a, const Vector& d) {
  check_power(p, "p");
  check_power(q, "q");
  detail::check_two_power_state(a_coeff, d_coeff, x);
  const double lx = std::log(x);
  // Weights p(1-p)A x^p and q(1-q)D x^q, normalized in log space.
  const double la = std::log(p * (1.0 - p) * a_coeff) + p * lx;
  const double ld = std::log(q * (1.0 - q) * d_coeff) + q * lx;
  const double m = std::max(la, ld);
  const double wa = std::exp(la - m);
  const double wd = std::exp(ld - m);
  return (wa * (lam + a) / (1.0 - p) + wd * (lam + d) / (1.0 - q)) / (wa + wd);
}

inline OptimalPortfolio mixture_portfolio(double p, double q, double a_coeff, double d_coeff, double x,
                                          const Vector& lam, const Vector& a, const Vector& d, const Matrix& sigma) {
  return solve_allocation(mixture_target(p, q, a_coeff, d_coeff, x, lam, a, d), sigma);
}

/// Drift of A_t X^p + D_t X^q at the joint optimum:
///   -pq(1-p)(1-q) A D x^{p+q} / (p(1-p)A x^p + q(1-q)D x^q) * gap^2.
inline double joint_drift(double p, double q, double a_coeff, double d_coeff, double x, const Vector& lam,
                          const Vector& a, const Vector& d) {
  const double gap = consistency_gap(p, q, lam, a, d);
  detail::check_two_power_state(a_coeff, d_coeff, x);
  if (gap == 0.0) return 0.0;
  const double lx = std::log(x);
  const double log_num = std::log(p * q * (1.0 - p) * (1.0 - q)) + std::log(a_coeff) + std::log(d_coeff) + (p + q) * lx;
  const double log_den =
      detail::log_add(std::log(p * (1.0 - p) * a_coeff) + p * lx, std::log(q * (1.0 - q) * d_coeff) + q * lx);
  return -std::exp(log_num - log_den) * gap * gap;
}

struct DualPoint {
  double x_star;
  double value;  // U(x*) - x* y
};

/// Conjugate of U(x) = A x^{1-2g}/(1-2g) + D x^{1-g}/(1-g). With s = x^{-g} the
/// first-order condition A s^2 + D s = y is a quadratic; the root is written as
/// 2y / (D + sqrt(D^2 + 4Ay)) to avoid cancellation when 4Ay << D^2.
inline DualPoint legendre_dual(double y, double a_coeff, double d_coeff, double gamma) {
  if (!(y > 0.0) || !std::isfinite(y)) throw DomainError("dual variable y must be positive");
  detail::check_two_power_state(a_coeff, d_coeff, 1.0);
  if (!(gamma > 0.0) || !(gamma < 0.5)) throw DomainError("dual needs gamma in (0, 1/2)");
  const double s = 2.0 * y / (d_coeff + std::sqrt(d_coeff * d_coeff + 4.0 * a_coeff * y));
  const double x = std::pow(s, -1.0 / gamma);
  const double u = a_coeff * std::pow(x, 1.0 - 2.0 * gamma) / (1.0 - 2.0 * gamma) +
                   d_coeff * std::pow(x, 1.0 - gamma) / (1.0 - gamma);
  return {x, u - x * y};
}

/// U'(x) for the dual's utility family.
inline double two_power_marginal(double x, double a_coeff, double d_coeff, double gamma) {
  return a_coeff * std::pow(x, -2.0 * gamma) + d_coeff * std::pow(x, -gamma);
}

// ---------------------------------------------------------------------------
// Validators for candidate random powers

inline constexpr double kPowerPathTolerance = 1e-12;

struct PathFinding {
  std::size_t index;
  std::string quantity;
  double value;
};

struct PowerPathReport {
  std::vector<PathFinding> findings;
  bool ok() const noexcept { return findings.empty(); }
};

/// p must be non-decreasing, q non-increasing and p < q; a constant p forces a constant q.
inline PowerPathReport validate_power_paths(std::span<const double> p_path, std::span<const double> q_path,
                                            double tol = kPowerPathTolerance) {
  if (p_path.size() != q_path.size()) throw DimensionError("power paths differ in length");
  PowerPathReport r;
  for (std::size_t k = 0; k < p_path.size(); ++k) {
    if (!(p_path[k] < q_path[k])) r.findings.push_back({k, "p_not_below_q", p_path[k] - q_path[k]});
    if (k == 0) continue;
    const double dp = p_path[k] - p_path[k - 1];
    const double dq = q_path[k] - q_path[k - 1];
    if (dp < -tol) r.findings.push_back({k, "p_decrease", dp});
    if (dq > tol) r.findings.push_back({k, "q_increase", dq});
  }
  if (!p_path.empty()) {
    double p_dev = 0.0;
    double q_dev = 0.0;
    std::size_t q_at = 0;
    for (std::size_t k = 0; k < p_path.size(); ++k) {
      p_dev = std::max(p_dev, std::abs(p_path[k] - p_path[0]));
      if (std::abs(q_path[k] - q_path[0]) > q_dev) {
        q_dev = std::abs(q_path[k] - q_path[0]);
        q_at = k;
      }
    }
    if (p_dev <= tol && q_dev > tol) r.findings.push_back({q_at, "q_not_constant_with_constant_p", q_dev});
  }
  return r;
}

inline void write_report(std::ostream& out, const PowerPathReport& r) {
  out << "power_path_check: " << (r.ok() ? "pass" : "fail") << "\n";
  out << "violations: " << r.findings.size() << "\n";
  for (const auto& f : r.findings) {
    out << "- index: " << f.index << "\n  quantity: " << f.quantity << "\n  value: " << format_double(f.value) << "\n";
  }
}

// ---------------------------------------------------------------------------
// Coefficient paths

/// log A_t and log D_t along a path: dA/A = alpha dt + a.dW + a_perp.dW-perp and the same for D.
struct CoefficientPaths {
  std::vector<double> log_a;
  std::vector<double> log_d;
};

inline CoefficientPaths simulate_coefficients(const TwoPowerSpec& spec, const MarketSpec& market,
                                              const BrownianPaths& paths, const TimeGrid& grid) {
  spec.validate(market.d_w(), market.d_wperp());
  const std::size_t n = grid.steps();
  CoefficientPaths c;
  c.log_a.assign(n + 1, std::log(spec.a0));
  c.log_d.assign(n + 1, std::log(spec.d0));
  const double qa = spec.a_vol.squaredNorm() + spec.a_perp.squaredNorm();
  const double qd = spec.d_vol.squaredNorm() + spec.d_perp.squaredNorm();
  for (std::size_t k = 0; k < n; ++k) {
    const auto row = static_cast<Eigen::Index>(k);
    const auto drifts = coefficient_drifts(spec.p, spec.q, market.sharpe(grid[k]), spec.a_vol, spec.d_vol);
    const Vector dw = paths.dw.row(row).transpose();
    const Vector dwp = paths.dwperp.row(row).transpose();
    c.log_a[k + 1] = c.log_a[k] + (drifts.alpha - 0.5 * qa) * grid.dt(k) + spec.a_vol.dot(dw) + spec.a_perp.dot(dwp);
    c.log_d[k + 1] = c.log_d[k] + (drifts.delta - 0.5 * qd) * grid.dt(k) + spec.d_vol.dot(dw) + spec.d_perp.dot(dwp);
  }
  return c;
}

/// A x^p + D x^q from log-coefficients.
inline double two_power_value(double x, double log_a, double log_d, double p, double q) {
  if (!(x > 0.0)) throw DomainError("wealth must be positive");
  const double lx = std::log(x);
  return std::exp(log_a + p * lx) + std::exp(log_d + q * lx);
}

}  // namespace fpp
