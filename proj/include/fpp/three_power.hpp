#pragma once

// The signed three-power mixture
//   U_t(x) = x^{1-g}/(1-g) E_g - x^{1-2g}/(1-2g) E_{2g} + x^{1-3g}/(1-3g) E_{3g},
// built with g0 = 2g, H^{2g} = 0 and J = 0. In terms of Z_t = exp(1/2 int lambda.dW)
// and I_t = int |lambda|^2 ds,
//   U_t(x) = Z^{-1} (x^{1-g}/(1-g) c1 - x^{1-2g}/(1-2g) c2 Z + x^{1-3g}/(1-3g) c3 Z^2),
// c1 = e^{-I/(8g)}, c2 = e^{-(1-2g) I/(4g)}, c3 = e^{(1 - 3/(8g)) I}.

#include "fpp/csv.hpp"
#include "fpp/errors.hpp"
#include "fpp/linalg.hpp"
#include "fpp/market.hpp"
#include "fpp/mixture_fpp.hpp"

#include <array>
#include <cmath>
#include <limits>
#include <vector>

namespace fpp {

struct ThreePowerSpec {
  double gamma = 0.25;

  void validate() const {
    if (!std::isfinite(gamma) || !(gamma > 0.0) || !(gamma < 1.0 / 3.0)) {
      throw DomainError("three-power gamma must lie in (0, 1/3), got " + format_double(gamma));
    }
  }

  std::array<double, 3> gammas() const { return {gamma, 2.0 * gamma, 3.0 * gamma}; }
  static constexpr std::array<double, 3> weights() { return {1.0, -1.0, 1.0}; }
  double gamma0() const { return 2.0 * gamma; }
};

namespace detail {

struct ThreeCoefficients {
  double log_c1;
  double log_c2;
  double log_c3;
};

inline ThreeCoefficients three_coefficients(double g, double int_lam2) {
  return {-int_lam2 / (8.0 * g), -(1.0 - 2.0 * g) * int_lam2 / (4.0 * g), (1.0 - 3.0 / (8.0 * g)) * int_lam2};
}

}  // namespace detail

/// U_t(x) from log Z_t and I_t, summed in log space.
inline double three_power_value_log(double x, double log_z, double int_lam2, const ThreePowerSpec& spec) {
  spec.validate();
  if (!(x > 0.0)) throw DomainError("wealth must be positive");
  if (!std::isfinite(log_z)) throw DomainError("Z must be positive and finite");
  const double g = spec.gamma;
  const double lx = std::log(x);
  const auto c = detail::three_coefficients(g, int_lam2);
  const double t1 = -log_z + (1.0 - g) * lx - std::log(1.0 - g) + c.log_c1;
  const double t2 = (1.0 - 2.0 * g) * lx - std::log(1.0 - 2.0 * g) + c.log_c2;
  const double t3 = log_z + (1.0 - 3.0 * g) * lx - std::log(1.0 - 3.0 * g) + c.log_c3;
  const double m = std::max({t1, t2, t3});
  return (std::exp(t1 - m) - std::exp(t2 - m) + std::exp(t3 - m)) * std::exp(m);
}

inline double three_power_value(double x, double z_factor, double int_lam2, const ThreePowerSpec& spec) {
  if (!(z_factor > 0.0)) throw DomainError("Z must be positive");
  return three_power_value_log(x, std::log(z_factor), int_lam2, spec);
}

struct Discriminants {
  double monotone;  // of c1 - c2 y + c3 y^2
  double concave;   // of c1 - 2 c2 y + 3 c3 y^2
};

/// Discriminants of the two quadratics in y = Z x^{-g} at accumulated I.
/// Both equal a negative multiple of e^{-(1-2g) I/(2g)}.
inline Discriminants concavity_discriminants(double gamma, double int_lam2) {
  ThreePowerSpec{gamma}.validate();
  const double e = std::exp(-(1.0 - 2.0 * gamma) * int_lam2 / (2.0 * gamma));
  return {-3.0 * e, -8.0 * e};
}

/// The tabulated form, normalized to I = 1.
inline Discriminants concavity_discriminants(double gamma) { return concavity_discriminants(gamma, 1.0); }

struct ThreePowerDrift {
  double positive_factor;   // c1 - 2 c2 y + 3 c3 y^2 with y = Z x^{-g}
  double quadratic_factor;  // |lambda|^2/(8g) - (sigma pi).lambda/2 + g/2 |sigma pi|^2
  double drift;             // -Z^{-1} x^{1-g} * positive_factor * quadratic_factor
};

inline ThreePowerDrift three_power_drift_factors(double x, double z_factor, double int_lam2, const Vector& lam,
                                                 const Vector& sp, const ThreePowerSpec& spec) {
  spec.validate();
  if (!(x > 0.0) || !(z_factor > 0.0)) throw DomainError("wealth and Z must be positive");
  if (lam.size() != sp.size()) throw DimensionError("lambda and sigma*pi differ in length");
  const double g = spec.gamma;
  const auto c = detail::three_coefficients(g, int_lam2);
  // Factor out c1 so the polynomial is evaluated on a moderate scale.
  const double log_y = std::log(z_factor) - g * std::log(x);
  const double a1 = std::exp(c.log_c2 - c.log_c1 + log_y);
  const double a2 = std::exp(c.log_c3 - c.log_c1 + 2.0 * log_y);
  const double reduced = 1.0 - 2.0 * a1 + 3.0 * a2;
  ThreePowerDrift d;
  d.positive_factor = std::exp(c.log_c1) * reduced;
  d.quadratic_factor = lam.squaredNorm() / (8.0 * g) - 0.5 * sp.dot(lam) + 0.5 * g * sp.squaredNorm();
  d.drift = -std::exp(-std::log(z_factor) + (1.0 - g) * std::log(x) + c.log_c1) * reduced * d.quadratic_factor;
  return d;
}

/// sigma pi* = lambda / (2g).
inline Vector three_power_optimal_sp(const Vector& lam, const ThreePowerSpec& spec) {
  spec.validate();
  return lam / (2.0 * spec.gamma);
}

/// Signed evaluation through the generic mixture machinery.
inline double three_power_value_generic(double x, const FppState& state, const ThreePowerSpec& spec) {
  spec.validate();
  const auto g = spec.gammas();
  const auto w = ThreePowerSpec::weights();
  return detail::evaluate_signed(x, g, w, state);
}

/// Generic per-atom states (M, <M>, V) along a path for the three atoms.
inline std::vector<FppState> trace_three_power_generic(const ThreePowerSpec& spec, const MarketSpec& market,
                                                       const BrownianPaths& paths, const TimeGrid& grid) {
  spec.validate();
  const auto g = spec.gammas();
  return trace_fpp(g, spec.gamma0(), VolatilityChoice::zero(), market, paths, grid);
}

struct ThreePowerPath {
  std::vector<double> log_z;     // 1/2 int lambda.dW
  std::vector<double> int_lam2;  // int |lambda|^2 ds
};

inline ThreePowerPath trace_three_power(const MarketSpec& market, const BrownianPaths& paths, const TimeGrid& grid) {
  ThreePowerPath out;
  out.log_z.assign(grid.size(), 0.0);
  out.int_lam2.assign(grid.size(), 0.0);
  for (std::size_t k = 0; k < grid.steps(); ++k) {
    const Vector& lam = market.sharpe(grid[k]);
    const Vector dw = paths.dw.row(static_cast<Eigen::Index>(k)).transpose();
    out.log_z[k + 1] = out.log_z[k] + 0.5 * lam.dot(dw);
    out.int_lam2[k + 1] = out.int_lam2[k] + lam.squaredNorm() * grid.dt(k);
  }
  return out;
}

/// Per-path CSV: t, Z, I and U(x) for each requested wealth level.
inline void write_three_power_csv(std::ostream& out, std::uint64_t path_id, const TimeGrid& grid,
                                  const ThreePowerPath& path, const std::vector<double>& xs,
                                  const ThreePowerSpec& spec, bool with_header) {
  CsvWriter csv(out);
  if (with_header) {
    std::vector<std::string> names{"path_id", "t", "Z", "I"};
    for (double x : xs) names.push_back("U_x" + format_double(x));
    csv.header(names);
  }
  for (std::size_t k = 0; k < grid.size(); ++k) {
    std::vector<std::string> cells{std::to_string(path_id), format_double(grid[k]), format_double(std::exp(path.log_z[k])),
                                   format_double(path.int_lam2[k])};
    for (double x : xs) cells.push_back(format_double(three_power_value_log(x, path.log_z[k], path.int_lam2[k], spec)));
    csv.line(cells);
  }
}

}  // namespace fpp
