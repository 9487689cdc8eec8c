#include "fpp/market.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

using namespace fpp;

namespace {

Matrix mat(std::initializer_list<std::initializer_list<double>> rows) {
  Matrix m(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows.begin()->size()));
  Eigen::Index i = 0;
  for (const auto& r : rows) {
    Eigen::Index j = 0;
    for (double v : r) m(i, j++) = v;
    ++i;
  }
  return m;
}

Vector vec(std::initializer_list<double> xs) {
  Vector v(static_cast<Eigen::Index>(xs.size()));
  Eigen::Index i = 0;
  for (double x : xs) v(i++) = x;
  return v;
}

}  // namespace

// Known-answer vectors published with the Random123 distribution (kat_vectors).
TEST(Philox, KnownAnswers) {
  using P = Philox4x32;
  EXPECT_EQ(P::block({0, 0, 0, 0}, {0, 0}), (P::Counter{0x6627e8d5u, 0xe169c58du, 0xbc57ac4cu, 0x9b00dbd8u}));
  EXPECT_EQ(P::block({0xffffffffu, 0xffffffffu, 0xffffffffu, 0xffffffffu}, {0xffffffffu, 0xffffffffu}),
            (P::Counter{0x408f276du, 0x41c83b0eu, 0xa20bc7c6u, 0x6d5451fdu}));
  EXPECT_EQ(P::block({0x243f6a88u, 0x85a308d3u, 0x13198a2eu, 0x03707344u}, {0xa4093822u, 0x299f31d0u}),
            (P::Counter{0xd16cfe09u, 0x94fdcceb, 0x5001e420u, 0x24126ea1u}));
}

TEST(TimeGrid, RejectsBadGrids) {
  EXPECT_THROW(TimeGrid({0.0}), DomainError);
  EXPECT_THROW(TimeGrid({0.1, 0.2}), DomainError);
  EXPECT_THROW(TimeGrid({0.0, 0.5, 0.5}), DomainError);
  EXPECT_THROW(TimeGrid::with_step(1.0, 0.3), DomainError);
  const auto g = TimeGrid::with_step(1.0, 1.0 / 252.0);
  EXPECT_EQ(g.steps(), 252u);
  EXPECT_DOUBLE_EQ(g.horizon(), 1.0);
}

TEST(SharpeRatio, ScalarAndIdentity) {
  EXPECT_NEAR(sharpe_ratio(mat({{0.2}}), vec({0.04}))(0), 0.2, 1e-15);
  const Vector lam = sharpe_ratio(Matrix::Identity(2, 2), vec({1.0, 0.0}));
  EXPECT_NEAR(lam(0), 1.0, 1e-15);
  EXPECT_NEAR(lam(1), 0.0, 1e-15);
}

TEST(SharpeRatio, TallVolatilityMatchesNormalEquations) {
  const Matrix s = mat({{0.2}, {0.1}});
  const Vector mu = vec({0.05});
  const Vector lam = sharpe_ratio(s, mu);
  // Oracle: lambda = sigma (sigma^T sigma)^{-1} mu, with the 1x1 Gram inverted by hand.
  const double gram = 0.2 * 0.2 + 0.1 * 0.1;
  EXPECT_NEAR(lam(0), 0.2 * 0.05 / gram, 1e-14);
  EXPECT_NEAR(lam(1), 0.1 * 0.05 / gram, 1e-14);
  EXPECT_NEAR(lam(0), 0.2, 1e-14);
  EXPECT_NEAR(lam(1), 0.1, 1e-14);
  // and lambda solves sigma^T lambda = mu
  EXPECT_NEAR((s.transpose() * lam)(0), 0.05, 1e-15);
}

TEST(SharpeRatio, SquareMatchesExactInverse) {
  const Matrix s = mat({{0.3, 0.1}, {-0.05, 0.25}});
  const Vector mu = vec({0.07, 0.02});
  const Vector expected = s.inverse().transpose() * mu;
  EXPECT_LT((sharpe_ratio(s, mu) - expected).norm(), 1e-13);
}

TEST(SharpeRatio, RankDeficientThrows) {
  EXPECT_THROW(sharpe_ratio(mat({{1.0, 2.0}, {2.0, 4.0}}), vec({0.1, 0.1})), SingularMarketError);
  EXPECT_THROW(sharpe_ratio(mat({{1.0}}), vec({0.1, 0.1})), DimensionError);
}

TEST(MarketSpec, PiecewiseSchedules) {
  Schedule<Matrix> sigma({{0.0, mat({{0.2}})}, {0.5, mat({{0.4}})}});
  Schedule<Vector> mu(vec({0.04}));
  MarketSpec m(1, 1, 0, sigma, mu);
  EXPECT_NEAR(m.sharpe(0.1)(0), 0.2, 1e-15);
  EXPECT_NEAR(m.sharpe(0.7)(0), 0.1, 1e-15);
  EXPECT_NEAR(m.sharpe_bound(), 0.2, 1e-15);
  EXPECT_TRUE(m.complete());
  EXPECT_THROW(MarketSpec(2, 1, 0, Schedule<Matrix>(mat({{0.2}})), mu), DimensionError);
}

TEST(Brownian, DeterministicPerPath) {
  const auto g = TimeGrid::uniform(1.0, 1);
  const auto a = simulate_brownian(g, 1, 0, 7, 0);
  const auto b = simulate_brownian(g, 1, 0, 7, 0);
  EXPECT_EQ(a.dw(0, 0), b.dw(0, 0));
  EXPECT_EQ(a.dwperp.cols(), 0);
  EXPECT_NE(simulate_brownian(g, 1, 0, 7, 1).dw(0, 0), a.dw(0, 0));
  EXPECT_NE(simulate_brownian(g, 1, 0, 8, 0).dw(0, 0), a.dw(0, 0));
}

TEST(Brownian, PathDoesNotDependOnBatch) {
  const auto g = TimeGrid::uniform(2.0, 10);
  std::vector<BrownianPaths> batch;
  for (std::uint64_t i = 0; i < 5; ++i) batch.push_back(simulate_brownian(g, 2, 1, 11, i));
  const auto alone = simulate_brownian(g, 2, 1, 11, 3);
  EXPECT_EQ((alone.dw - batch[3].dw).norm(), 0.0);
  EXPECT_EQ((alone.dwperp - batch[3].dwperp).norm(), 0.0);
}

TEST(Brownian, EnsembleMomentsMatchNormalLaw) {
  const auto g = TimeGrid::uniform(1.0, 1);
  const std::size_t n = 100000;
  double s1 = 0.0, s2 = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double x = simulate_brownian(g, 1, 0, 2024, i).dw(0, 0);
    s1 += x;
    s2 += x * x;
  }
  const double mean = s1 / n;
  const double var = (s2 - n * mean * mean) / (n - 1);
  EXPECT_LT(std::abs(mean), 3.0 / std::sqrt(static_cast<double>(n)));
  EXPECT_NEAR(var, 1.0, 0.01);
}

TEST(Brownian, IncrementVarianceScalesWithStep) {
  const auto g = TimeGrid({0.0, 0.25, 1.0});
  const std::size_t n = 40000;
  double v0 = 0.0, v1 = 0.0, cross = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const auto p = simulate_brownian(g, 1, 1, 5, i);
    v0 += p.dw(0, 0) * p.dw(0, 0);
    v1 += p.dw(1, 0) * p.dw(1, 0);
    cross += p.dw(1, 0) * p.dwperp(1, 0);
  }
  EXPECT_NEAR(v0 / n, 0.25, 0.25 * 0.03);
  EXPECT_NEAR(v1 / n, 0.75, 0.75 * 0.03);
  EXPECT_LT(std::abs(cross / n), 4.0 * 0.75 / std::sqrt(static_cast<double>(n)));
}

TEST(Wealth, NullPortfolioKeepsWealthExactly) {
  const auto m = MarketSpec::scalar(0.3, 0.2);
  const auto g = TimeGrid::uniform(5.0, 50);
  const auto w = evolve_wealth(1.7, null_strategy(1), m, simulate_brownian(g, 1, 0, 1, 0), g);
  for (double x : w.x) EXPECT_EQ(x, 1.7);
}

TEST(Wealth, OneStepArithmetic) {
  const auto m = MarketSpec::scalar(0.2);
  const auto g = TimeGrid::uniform(1.0, 1);
  BrownianPaths p{Matrix::Constant(1, 1, 0.5), Matrix(1, 0), 0, 0};
  const auto w = evolve_wealth(1.0, constant_strategy(Vector::Constant(1, 0.4)), m, p, g);
  EXPECT_NEAR(w.log_x[1] - w.log_x[0], 0.2, 1e-15);
  EXPECT_NEAR(w.allocations(0, 0), 0.4, 1e-15);
}

TEST(Wealth, ConstantAllocationMatchesStochasticExponential) {
  const double lam = 0.35, c = 0.8, x0 = 2.0, T = 3.0;
  const auto m = MarketSpec::scalar(lam, 0.5);  // sigma = 0.5, so pi = c / 0.5
  const auto g = TimeGrid::uniform(T, 300);
  for (std::uint64_t id = 0; id < 20; ++id) {
    const auto p = simulate_brownian(g, 1, 0, 99, id);
    const auto w = evolve_wealth(x0, constant_strategy(Vector::Constant(1, c / 0.5)), m, p, g);
    const double wT = p.dw.sum();
    const double closed = x0 * std::exp((c * lam - 0.5 * c * c) * T + c * wT);
    EXPECT_NEAR(w.x.back() / closed - 1.0, 0.0, 1e-12);
    for (double x : w.x) EXPECT_GT(x, 0.0);
  }
}

TEST(Wealth, NonFiniteAllocationIsReportedWithTime) {
  const auto m = MarketSpec::scalar(0.2);
  const auto g = TimeGrid::uniform(1.0, 4);
  const Strategy bad = [](const StrategyContext& ctx) {
    return Vector::Constant(1, ctx.step == 2 ? std::nan("") : 0.1);
  };
  try {
    evolve_wealth(1.0, bad, m, simulate_brownian(g, 1, 0, 1, 0), g);
    FAIL() << "expected StrategyError";
  } catch (const StrategyError& e) {
    EXPECT_DOUBLE_EQ(e.time(), 0.5);
  }
}

TEST(Wealth, PathsCsvHasCumulativeColumns) {
  const auto g = TimeGrid::uniform(1.0, 2);
  BrownianPaths p{Matrix::Constant(2, 1, 0.5), Matrix::Constant(2, 1, -1.0), 3, 4};
  std::ostringstream out;
  write_paths_csv(out, {p}, g);
  EXPECT_EQ(out.str(), "path_id,t,W_1,Wp_1\n4,0,0,0\n4,0.5,0.5,-1\n4,1,1,-2\n");
}
