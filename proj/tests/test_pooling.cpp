#include "fpp/pooling.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

using namespace fpp;

namespace {

double brute_force_argmax(const std::function<double(double)>& f, double step) {
  double best_z = 0.0, best = -1e300;
  for (double z = 1e-3; z <= 1 - 1e-3; z += step) {
    const double v = f(z);
    if (v > best) {
      best = v;
      best_z = z;
    }
  }
  return best_z;
}

}  // namespace

TEST(PoolSpec, PresetsAndValidation) {
  EXPECT_EQ(PoolSpec::preset("fig2").lam, 0.5);
  EXPECT_EQ(PoolSpec::preset("fig3").lam, 4.0);
  EXPECT_EQ(PoolSpec::preset("fig4").q, 0.6);
  EXPECT_THROW(PoolSpec::preset("fig9"), DomainError);
  PoolSpec bad;
  bad.rebalance_dt = 0.7;
  EXPECT_THROW(bad.validate(), DomainError);
  EXPECT_EQ(PoolSpec{}.periods(), 30u);
}

TEST(ConstantZ, Examples) {
  const PoolSpec spec;
  EXPECT_EQ(constant_z_expected_utility(0.4, 0.0, spec), 2.0);
  // at z = p only the second investor's term decays
  const double rate_q = -0.3 * std::pow((0.1 - 0.3) / 0.9, 2) / (2 * 0.7);
  EXPECT_NEAR(constant_z_expected_utility(0.1, 7.0, spec), 1.0 + std::exp(rate_q * 7.0), 1e-15);
  EXPECT_THROW(constant_z_expected_utility(1.0, 1.0, spec), DomainError);
  EXPECT_THROW(constant_z_expected_utility(0.0, 1.0, spec), DomainError);
}

// The closed form is E[A0 e^{alpha t} X^p + D0 e^{delta t} X^q] for lognormal X.
TEST(ConstantZ, AgreesWithMonteCarlo) {
  const PoolSpec spec;
  const auto market = MarketSpec::scalar(spec.lam);
  for (auto [z, t] : {std::pair{0.25, 5.0}, std::pair{0.6, 2.0}}) {
    const auto g = TimeGrid::uniform(t, 1);
    const auto rule = constant_strategy(Vector::Constant(1, spec.lam / (1 - z)));
    Moments m;
    for (std::size_t i = 0; i < 20000; ++i) {
      const auto w = evolve_wealth(spec.x0, rule, market, simulate_brownian(g, 1, 0, 606, i), g);
      const auto u = pool_utilities(spec, t, w.x.back());
      m.add(std::exp(u.log_c1) + std::exp(u.log_c2));
    }
    const auto sm = m.summary();
    EXPECT_LT(std::abs(sm.mean - constant_z_expected_utility(z, t, spec)), 3 * sm.se) << z << " " << t;
  }
}

TEST(Optimizer, Fig1StableNearQuarter) {
  const PoolSpec spec;
  for (double t : {1.0, 10.0, 30.0}) {
    const auto r = optimize_constant_z(spec, t);
    EXPECT_GE(r.z_star, 0.20);
    EXPECT_LE(r.z_star, 0.30);
    EXPECT_EQ(r.local_maxima.size(), 1u);
  }
}

TEST(Optimizer, Fig3HasTwoLocalMaxima) {
  const auto r = optimize_constant_z(PoolSpec::preset("fig3"), 30.0);
  ASSERT_EQ(r.local_maxima.size(), 2u);
  double lo = std::min(r.local_maxima[0].x, r.local_maxima[1].x);
  double hi = std::max(r.local_maxima[0].x, r.local_maxima[1].x);
  EXPECT_GT(lo, 0.05);
  EXPECT_LT(lo, 0.18);
  EXPECT_GT(hi, 0.22);
  EXPECT_LT(hi, 0.40);
  EXPECT_GE(r.local_maxima[0].value, r.local_maxima[1].value);
}

TEST(Optimizer, MatchesFineGridScan) {
  for (const char* name : {"fig1", "fig2", "fig3", "fig4"}) {
    const auto spec = PoolSpec::preset(name);
    for (double t : {0.5, 3.0, 30.0}) {
      const auto f = [&](double z) { return constant_z_expected_utility(z, t, spec); };
      EXPECT_NEAR(optimize_constant_z(spec, t).z_star, brute_force_argmax(f, 1e-5), 2e-5) << name << " " << t;
    }
  }
}

TEST(Optimizer, FlatObjectivePicksSmallestZ) {
  const auto r = maximize_over_z([](double) { return 1.0; });
  EXPECT_TRUE(r.local_maxima.empty());
  EXPECT_NEAR(r.z_star, kZEdge, 1e-15);
}

TEST(Greedy, LimitsAndBruteForce) {
  const PoolSpec spec;
  // investor 1 dominates: Merton proportion for power p
  EXPECT_NEAR(one_period_greedy(1.0, 1e-200, 1.0, spec), 0.1, 1e-5);
  EXPECT_NEAR(one_period_greedy(1e-200, 1.0, 1.0, spec), 0.3, 1e-5);
  const auto f = [&](double z) { return pooled_expectation(z, 1.0, spec.p, spec.q, 1.0, 1.0, spec.lam); };
  EXPECT_NEAR(one_period_greedy(1.0, 1.0, 1.0, spec), brute_force_argmax(f, 1e-5), 1e-4);
  // short periods approach the small-t optimizer for the same coefficients
  const double tiny = one_period_greedy(1.0, 1.0, 1e-4, spec);
  EXPECT_NEAR(tiny, optimize_constant_z(spec, 1e-4).z_star, 1e-4);
}

TEST(PooledZ, MatchesMixturePortfolio) {
  const PoolSpec spec;
  for (double t : {0.0, 4.0, 20.0}) {
    for (double x : {0.01, 1.0, 300.0}) {
      const auto u = pool_utilities(spec, t, x);
      const double z = pooled_optimal_z(u.log_c1, u.log_c2, spec.p, spec.q);
      const Vector lam = Vector::Constant(1, spec.lam);
      const double target = mixture_target(spec.p, spec.q, std::exp(u.log_c1 - spec.p * std::log(x)),
                                           std::exp(u.log_c2 - spec.q * std::log(x)), x, lam, Vector::Zero(1),
                                           Vector::Zero(1))(0);
      EXPECT_NEAR(spec.lam / (1 - z), target, 1e-12);
      EXPECT_GT(z, spec.p);
      EXPECT_LT(z, spec.q);
    }
  }
}

TEST(Surface, TimeDecayAndBounds) {
  for (const char* name : {"fig1", "fig2", "fig3", "fig4"}) {
    const auto spec = PoolSpec::preset(name);
    std::vector<double> ts;
    for (int i = 0; i <= 30; ++i) ts.push_back(i);
    const auto s = utility_surface(spec, interior_z_grid(99), ts);
    for (Eigen::Index j = 0; j < s.values.cols(); ++j) {
      EXPECT_DOUBLE_EQ(s.values(0, j), 2.0);
      for (Eigen::Index i = 1; i < s.values.rows(); ++i) {
        EXPECT_LE(s.values(i, j), s.values(i - 1, j));
        EXPECT_LE(s.values(i, j), s.values(0, j));
        EXPECT_GE(s.values(i, j), 0.0);
        // strict decrease, read in log space because fig3 underflows near z = 1
        const double z = s.z_grid[j];
        EXPECT_LT(log_constant_z_expected_utility(z, ts[i], spec), log_constant_z_expected_utility(z, ts[i - 1], spec));
      }
    }
  }
}

TEST(Surface, Fig4DeterioratesBelowSixtyPercent) {
  const auto spec = PoolSpec::preset("fig4");
  EXPECT_LT(optimize_constant_z(spec, 30.0).value, 0.6 * constant_z_expected_utility(0.5, 0.0, spec));
}

TEST(Surface, CsvLayout) {
  const auto s = utility_surface(PoolSpec{}, {0.25}, {0.0});
  std::ostringstream out;
  write_surface_csv(out, s);
  EXPECT_EQ(out.str(), "z,t,value\n0.25,0,2\n");
}

TEST(Compare, DegenerateMarketCoincides) {
  PoolSpec spec;
  spec.lam = 0.0;
  spec.horizon = 3.0;
  const auto r = compare_strategies(spec, 1, 5, 1);
  for (std::size_t k = 0; k < r.times.size(); ++k) {
    EXPECT_DOUBLE_EQ(r.constant_z_star.mean_utility[k], r.pi_star.mean_utility[k]);
    EXPECT_DOUBLE_EQ(r.constant_z_star.mean_utility[k], r.pi_e.mean_utility[k]);
  }
}

TEST(Compare, ReproducibleAcrossThreadCounts) {
  PoolSpec spec;
  spec.horizon = 5.0;
  const auto a = compare_strategies(spec, 300, 77, 1);
  const auto b = compare_strategies(spec, 300, 77, 3);
  std::ostringstream oa, ob;
  write_comparison_csv(oa, a);
  write_comparison_csv(ob, b);
  EXPECT_EQ(oa.str(), ob.str());
  EXPECT_EQ(a.pi_star.mean_z.size(), 5u);
  EXPECT_EQ(a.constant_z_star.mean_utility.size(), 6u);
}
