#pragma once

#include <cmath>
#include <utility>

namespace fpp {

struct Maximum {
  double x;
  double value;
};

/// Golden-section search for a maximum of a unimodal f on [lo, hi]; stops when
/// the bracket is narrower than tol.
template <class F>
Maximum golden_section_maximize(F&& f, double lo, double hi, double tol = 1e-6) {
  const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
  double c = hi - inv_phi * (hi - lo);
  double d = lo + inv_phi * (hi - lo);
  double fc = f(c);
  double fd = f(d);
  while (hi - lo > tol) {
    if (fc >= fd) {
      hi = d;
      d = c;
      fd = fc;
      c = hi - inv_phi * (hi - lo);
      fc = f(c);
    } else {
      lo = c;
      c = d;
      fc = fd;
      d = lo + inv_phi * (hi - lo);
      fd = f(d);
    }
  }
  const double x = 0.5 * (lo + hi);
  const double fx = f(x);
  // The midpoint can fall just below a probe on a flat top; keep the best seen.
  if (fc > fx && fc >= fd) return {c, fc};
  if (fd > fx) return {d, fd};
  return {x, fx};
}

}  // namespace fpp
