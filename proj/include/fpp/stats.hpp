#pragma once

#include <cmath>
#include <cstddef>
#include <limits>
#include <span>

namespace fpp {

struct SampleSummary {
  std::size_t n = 0;
  double mean = 0.0;
  double variance = 0.0;  // unbiased
  double se = 0.0;
  double excess_kurtosis = 0.0;
  std::size_t n_neg_inf = 0;
};

/// Streaming central moments up to order four with an exact pairwise merge
/// (Chan, Golub, LeVeque; Pebay). Merging in a fixed order gives a result
/// that does not depend on how the samples were split across workers.
/// Non-finite samples are counted separately and do not enter the moments.
class Moments {
public:
  void add(double x) noexcept {
    if (!std::isfinite(x)) {
      if (x == -std::numeric_limits<double>::infinity()) ++n_neg_inf_;
      else ++n_other_nonfinite_;
      return;
    }
    Moments one;
    one.n_ = 1;
    one.mean_ = x;
    merge(one);
  }

  void merge(const Moments& b) noexcept {
    n_neg_inf_ += b.n_neg_inf_;
    n_other_nonfinite_ += b.n_other_nonfinite_;
    if (b.n_ == 0) return;
    if (n_ == 0) {
      n_ = b.n_;
      mean_ = b.mean_;
      m2_ = b.m2_;
      m3_ = b.m3_;
      m4_ = b.m4_;
      return;
    }
    const double na = static_cast<double>(n_);
    const double nb = static_cast<double>(b.n_);
    const double n = na + nb;
    const double delta = b.mean_ - mean_;
    const double d_n = delta / n;
    const double d_n2 = d_n * d_n;
    const double m2 = m2_ + b.m2_ + delta * d_n * na * nb;
    const double m3 = m3_ + b.m3_ + delta * d_n2 * na * nb * (na - nb) + 3.0 * d_n * (na * b.m2_ - nb * m2_);
    const double m4 = m4_ + b.m4_ + delta * d_n2 * d_n * na * nb * (na * na - na * nb + nb * nb) +
                      6.0 * d_n2 * (na * na * b.m2_ + nb * nb * m2_) + 4.0 * d_n * (na * b.m3_ - nb * m3_);
    n_ += b.n_;
    mean_ += d_n * nb;
    m2_ = m2;
    m3_ = m3;
    m4_ = m4;
  }

  std::size_t count() const noexcept { return n_ + n_neg_inf_ + n_other_nonfinite_; }
  std::size_t finite_count() const noexcept { return n_; }
  std::size_t neg_inf_count() const noexcept { return n_neg_inf_; }
  std::size_t nonfinite_count() const noexcept { return n_neg_inf_ + n_other_nonfinite_; }

  SampleSummary summary() const noexcept {
    SampleSummary s;
    s.n = count();
    s.n_neg_inf = n_neg_inf_;
    if (n_other_nonfinite_ > 0) {
      s.mean = s.variance = s.se = std::numeric_limits<double>::quiet_NaN();
      return s;
    }
    if (n_neg_inf_ > 0) {
      s.mean = -std::numeric_limits<double>::infinity();
      s.variance = s.se = std::numeric_limits<double>::quiet_NaN();
      return s;
    }
    s.mean = mean_;
    if (n_ < 2) return s;
    const double n = static_cast<double>(n_);
    s.variance = m2_ / (n - 1.0);
    s.se = std::sqrt(s.variance / n);
    s.excess_kurtosis = m2_ > 0.0 ? n * m4_ / (m2_ * m2_) - 3.0 : 0.0;
    return s;
  }

private:
  std::size_t n_ = 0;
  std::size_t n_neg_inf_ = 0;
  std::size_t n_other_nonfinite_ = 0;
  double mean_ = 0.0;
  double m2_ = 0.0;
  double m3_ = 0.0;
  double m4_ = 0.0;
};

inline SampleSummary summarize(std::span<const double> xs) {
  Moments m;
  for (double x : xs) m.add(x);
  return m.summary();
}

}  // namespace fpp
