#include "fpp/mixture_fpp.hpp"
#include "fpp/three_power.hpp"
#include "fpp/verify.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

using namespace fpp;

namespace {

PathUtility mixture_utility(const RiskMixture& mix, const VolatilityChoice& vol, const MarketSpec& market) {
  return [=](const BrownianPaths& paths, const WealthPath& w, const TimeGrid& grid) {
    const auto states = trace_fpp(mix, vol, market, paths, grid);
    std::vector<double> u(grid.size());
    for (std::size_t k = 0; k < grid.size(); ++k) u[k] = evaluate_fpp(w.x[k], states[k], mix);
    return u;
  };
}

Strategy optimal_for(const RiskMixture& mix, const VolatilityChoice& vol, const MarketSpec& market) {
  return optimal_strategy(mix.gamma0(), vol, market);
}

}  // namespace

TEST(Martingale, PowerAtomAtOptimum) {
  const auto market = MarketSpec::scalar(0.2);
  const auto mix = RiskMixture::power(0.5);
  const auto vol = VolatilityChoice::zero();
  const auto g = TimeGrid::uniform(1.0, 12);
  const auto r = martingale_test(mixture_utility(mix, vol, market), optimal_for(mix, vol, market), market, 1.0, 20000,
                                 g, 2718, TestMode::martingale);
  EXPECT_EQ(r.verdict, Verdict::consistent_with_martingale);
  EXPECT_NEAR(r.u0, 2.0, 1e-15);
  EXPECT_FALSE(r.degenerate_warning);
}

TEST(Martingale, NullPortfolioDecaysAtDriftRate) {
  // pi = 0 keeps X = x0, so U_t = U_0 exp(v t) with v = -(1-g)/(2g) lam^2: deterministic.
  const double lam = 1.0, gamma = 0.5;
  const auto market = MarketSpec::scalar(lam);
  const auto mix = RiskMixture::power(gamma);
  const auto vol = VolatilityChoice::zero();
  const auto g = TimeGrid::uniform(1.0, 10);
  const auto r = martingale_test(mixture_utility(mix, vol, market), null_strategy(1), market, 1.0, 200, g, 1,
                                 TestMode::supermartingale);
  EXPECT_EQ(r.verdict, Verdict::supermartingale_strict);
  const double rate = (1 - gamma) * drift_term(gamma, Vector::Zero(1), Vector::Constant(1, lam), Vector::Zero(1));
  EXPECT_TRUE(tracks_curve(r, [&](double t) { return r.u0 * std::exp(rate * t); }));
  EXPECT_FALSE(tracks_curve(r, [&](double t) { return r.u0 * std::exp(rate * t / (1 - gamma)); }));
}

TEST(Martingale, ZeroSharpeIsExactlyConstant) {
  const auto market = MarketSpec::scalar(0.0);
  const auto mix = RiskMixture({{0.4, 1.0}, {2.0, 1.0}}, 0.4);
  const auto vol = VolatilityChoice::zero();
  const auto g = TimeGrid::uniform(2.0, 8);
  const auto r = martingale_test(mixture_utility(mix, vol, market), null_strategy(1), market, 1.5, 50, g, 3,
                                 TestMode::martingale);
  for (double m : r.mean) EXPECT_EQ(m, r.u0);
  EXPECT_EQ(r.verdict, Verdict::consistent_with_martingale);
}

TEST(Martingale, SuboptimalPortfolioIsStrictSupermartingale) {
  const auto market = MarketSpec::scalar(1.0);
  const auto mix = RiskMixture::power(0.5);
  const auto vol = VolatilityChoice::zero();
  const auto g = TimeGrid::uniform(1.0, 10);
  const auto r = martingale_test(mixture_utility(mix, vol, market), constant_strategy(Vector::Constant(1, 4.0)), market,
                                 1.0, 5000, g, 8, TestMode::supermartingale);
  EXPECT_EQ(r.verdict, Verdict::supermartingale_strict);
  const auto m = martingale_test(mixture_utility(mix, vol, market), constant_strategy(Vector::Constant(1, 4.0)), market,
                                 1.0, 5000, g, 8, TestMode::martingale);
  EXPECT_EQ(m.verdict, Verdict::violation);
}

TEST(Martingale, ReportsAreThreadIndependent) {
  const auto market = MarketSpec::scalar(0.3);
  const auto mix = RiskMixture::power(0.7);
  const auto vol = VolatilityChoice::constant(Vector::Constant(1, 0.1));
  const auto g = TimeGrid::uniform(1.0, 5);
  const auto u = mixture_utility(mix, vol, market);
  const auto s = optimal_for(mix, vol, market);
  const auto a = martingale_test(u, s, market, 1.0, 700, g, 4, TestMode::martingale, 1);
  const auto b = martingale_test(u, s, market, 1.0, 700, g, 4, TestMode::martingale, 4);
  std::ostringstream oa, ob;
  write_report_csv(oa, a);
  write_report_csv(ob, b);
  EXPECT_EQ(oa.str(), ob.str());
  EXPECT_EQ(oa.str().substr(0, 27), "t,mean,se,reference,margin\n");
}

TEST(Martingale, DegenerateUtilityWarning) {
  const auto market = MarketSpec::scalar(0.2);
  const auto g = TimeGrid::uniform(1.0, 2);
  PathUtility u = [](const BrownianPaths& p, const WealthPath&, const TimeGrid&) {
    const double last = p.path_id % 100 == 0 ? -std::numeric_limits<double>::infinity() : 1.0;
    return std::vector<double>{1.0, 1.0, last};
  };
  const auto r = martingale_test(u, null_strategy(1), market, 1.0, 1000, g, 1, TestMode::martingale);
  EXPECT_TRUE(r.degenerate_warning);
  EXPECT_EQ(r.verdict, Verdict::violation);
  std::ostringstream out;
  write_report(out, r, "degenerate");
  EXPECT_NE(out.str().find("warning"), std::string::npos);
}

TEST(Paired, CommonNumbersReduceVariance) {
  const auto market = MarketSpec::scalar(0.4);
  const auto mix = RiskMixture::power(0.5);
  const auto vol = VolatilityChoice::zero();
  const auto g = TimeGrid::uniform(1.0, 10);
  const auto c = paired_comparison(mixture_utility(mix, vol, market), optimal_for(mix, vol, market),
                                   constant_strategy(Vector::Constant(1, 1.0)), market, 1.0, 4000, g, 6);
  const std::size_t last = g.steps();
  EXPECT_LT(c.se_diff[last] * c.se_diff[last], c.se_a[last] * c.se_a[last] + c.se_b[last] * c.se_b[last]);
  EXPECT_GT(c.mean_diff[last], 0.0);
}

// Under the null, the 3-s.e. rule over the grid should rarely fire.
TEST(Calibration, FalseAlarmRate) {
  const auto market = MarketSpec::scalar(0.2);
  const auto mix = RiskMixture::power(0.5);
  const auto vol = VolatilityChoice::zero();
  const auto g = TimeGrid::uniform(1.0, 4);
  const auto u = mixture_utility(mix, vol, market);
  const auto s = optimal_for(mix, vol, market);
  int alarms = 0;
  for (std::uint64_t seed = 1000; seed < 1100; ++seed) {
    alarms += martingale_test(u, s, market, 1.0, 2000, g, seed, TestMode::martingale).verdict != Verdict::consistent_with_martingale;
  }
  EXPECT_LE(alarms, 1);
}

TEST(Structure, PowerAtomMarginsMatchDerivatives) {
  const double gamma = 0.5;
  const auto grid = log_grid(0.1, 10.0, 16);
  const auto r = structure_scan([&](double x, std::size_t) { return std::pow(x, 1 - gamma) / (1 - gamma); }, 1, grid);
  EXPECT_TRUE(r.passes);
  // smallest secant slope is on the last cell: between x^{-g} at its endpoints
  EXPECT_GT(r.worst_slope, std::pow(grid.back(), -gamma));
  EXPECT_LT(r.worst_slope, std::pow(grid[grid.size() - 2], -gamma));
}

TEST(Structure, ThreePowerStatesPass) {
  const auto market = MarketSpec::scalar(0.8);
  const auto g = TimeGrid::uniform(3.0, 30);
  const ThreePowerSpec spec{0.25};
  std::vector<ThreePowerPath> paths;
  for (std::uint64_t id = 0; id < 20; ++id) paths.push_back(trace_three_power(market, simulate_brownian(g, 1, 0, 2, id), g));
  const auto r = structure_scan(
      [&](double x, std::size_t i) { return three_power_value_log(x, paths[i].log_z.back(), paths[i].int_lam2.back(), spec); },
      paths.size(), log_grid(1e-2, 1e2, 24));
  EXPECT_TRUE(r.passes);
}

TEST(Structure, CorruptedMixtureFails) {
  // A x^p - D x^q with p < q eventually decreases: flipping a weight is detected.
  const auto r = structure_scan([](double x, std::size_t) { return std::pow(x, 0.2) / 0.2 - std::pow(x, 0.6) / 0.6; }, 1,
                                log_grid(0.1, 10.0, 12));
  EXPECT_FALSE(r.passes);
  EXPECT_LT(r.worst_slope, 0.0);
  EXPECT_THROW(structure_scan([](double, std::size_t) { return 0.0; }, 1, log_grid(1, 2, 5)), DomainError);
}
