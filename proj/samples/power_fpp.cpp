// Two-atom mixture FPP in a one-stock market: simulate a few paths under the
// optimal portfolio and print U_t(X_t) next to the initial utility.

#include "fpp/mixture_fpp.hpp"
#include "fpp/verify.hpp"

#include <iostream>

int main() {
  using namespace fpp;
  const auto market = MarketSpec::scalar(0.3);
  const RiskMixture mix({{0.5, 1.0}, {3.0, 0.2}}, 0.5);
  const auto vol = VolatilityChoice::constant(Vector::Constant(1, 0.1));
  const auto grid = TimeGrid::uniform(2.0, 24);
  const auto strategy = optimal_strategy(mix.gamma0(), vol, market);

  std::cout << "U_0(1) = " << mix.initial_utility(1.0) << "\n";
  for (std::uint64_t id = 0; id < 3; ++id) {
    const auto paths = simulate_brownian(grid, 1, 0, 42, id);
    const auto wealth = evolve_wealth(1.0, strategy, market, paths, grid);
    const auto states = trace_fpp(mix, vol, market, paths, grid);
    std::cout << "path " << id << ": X_T = " << wealth.x.back()
              << ", U_T(X_T) = " << evaluate_fpp(wealth.x.back(), states.back(), mix) << "\n";
  }

  // The ensemble mean should stay at U_0 within sampling error.
  PathUtility u = [&](const BrownianPaths& p, const WealthPath& w, const TimeGrid& g) {
    const auto st = trace_fpp(mix, vol, market, p, g);
    std::vector<double> out(g.size());
    for (std::size_t k = 0; k < g.size(); ++k) out[k] = evaluate_fpp(w.x[k], st[k], mix);
    return out;
  };
  const auto report = martingale_test(u, strategy, market, 1.0, 20000, grid, 42, TestMode::martingale);
  write_report(std::cout, report, "optimal portfolio");
}
