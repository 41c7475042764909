// Simulate a modest tape, measure how the generalized imbalance variance
// scales with T for a few a, and compare with the oracle exponent.
#include <cstdio>
#include <cstdlib>
#include <vector>

#include "orderflow/pipeline.hpp"

using namespace orderflow;

int main(int argc, char** argv) {
  RunConfig cfg;
  cfg.horizon_trades = argc > 1 ? std::atoll(argv[1]) : 2000000;
  cfg.model.seed = 11;
  auto sim = simulate_realization(cfg, 0, false);
  auto st = flow_statistics(sim.tape);
  std::printf("%lld trades, %zu metaorders, %.3f active on average\n", static_cast<long long>(sim.tape.size()),
              sim.tape.metaorders.size(), st.active_mean);

  auto tape = clip_volumes(sim.tape, cfg.clip_fraction, cfg.day_block);
  std::vector<Realization> r{{&tape, nullptr}};
  auto T = T_values(cfg.T_grid);
  std::vector<double> a{0.0, 0.5, 1.0, 1.5, 2.0, 2.5};
  std::vector<int> orders{1};
  auto m = moment_scaling(r, T, a, orders, {false, cfg.fit_lo, cfg.fit_hi});

  std::printf("%6s %10s %10s\n", "a", "measured", "oracle");
  for (std::size_t i = 0; i < a.size(); ++i)
    std::printf("%6.2f %10.3f %10.3f\n", a[i], m.fits[0][i].exponent, predict_sigma_a_exponent(cfg.model, a[i], 1).diagonal);
}
