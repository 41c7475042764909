#pragma once

#include <cmath>
#include <filesystem>
#include <functional>
#include <ostream>
#include <string>
#include <vector>

#include "orderflow/estimators.hpp"
#include "orderflow/io.hpp"
#include "orderflow/kernels.hpp"
#include "orderflow/oracle.hpp"
#include "orderflow/pipeline.hpp"

namespace orderflow {

struct SelfTestCase {
  std::string name;
  std::function<bool()> run;
};

inline TradeTape tiny_tape(std::vector<std::pair<int, double>> trades) {
  TradeTape t;
  for (std::size_t i = 0; i < trades.size(); ++i)
    t.trades.push_back({static_cast<std::int64_t>(i), static_cast<double>(i), -1, trades[i].first, trades[i].second});
  t.horizon_time = static_cast<double>(trades.size());
  return t;
}

// Small closed-form checks; each case takes well under a second.
inline std::vector<SelfTestCase> selftest_cases(const std::filesystem::path& scratch) {
  auto near = [](double x, double y, double tol) { return std::abs(x - y) <= tol; };
  std::vector<SelfTestCase> c;
  c.push_back({"pareto sample mean at mu 1.5", [=] {
                 ModelParams p;
                 p.s0 = 1.0;
                 p.lambda = 0.0;
                 RandomStream rng(7);
                 double s = 0.0;
                 const int n = 1000000;
                 for (int i = 0; i < n; ++i) s += sample_duration(p, 1.0, rng);
                 return near(s / n, 3.0, 0.1);
               }});
  c.push_back({"degenerate child volume", [] {
                 ModelParams p;
                 p.sigma_logq = 0.0;
                 RandomStream rng(1);
                 for (int i = 0; i < 100; ++i)
                   if (sample_child_volume(p, rng) != 1.0) return false;
                 return true;
               }});
  c.push_back({"iid signs without cross-correlation", [] {
                 ModelParams p;
                 RandomStream rng(3);
                 auto s = generate_correlated_signs(1000, p, rng);
                 for (auto v : s.signs)
                   if (v != 1 && v != -1) return false;
                 return s.signs.size() == 1000;
               }});
  c.push_back({"sign correlation target at perfect correlation", [=] {
                 ModelParams p;
                 p.Gamma_amp = 1.0;
                 return near(sign_correlation_target(1, p), 1.0, 1e-15);
               }});
  c.push_back({"generalized imbalance a = 0, 1, 2", [=] {
                 auto t = tiny_tape({{1, 2.0}, {1, 3.0}, {-1, 1.0}});
                 return generalized_imbalance(t, 3, 0.0).values.at(0) == 1.0 &&
                        generalized_imbalance(t, 3, 1.0).values.at(0) == 4.0 &&
                        generalized_imbalance(t, 3, 2.0).values.at(0) == 12.0;
               }});
  c.push_back({"power-law fit, pure and offset", [=] {
                 std::vector<double> x, y, z;
                 for (int i = 1; i <= 20; ++i) {
                   x.push_back(i * 10.0);
                   y.push_back(2.0 * std::pow(i * 10.0, 1.5));
                   z.push_back(5.0 + 2.0 * i * 10.0);
                 }
                 auto f = fit_power_law(x, y);
                 auto g = fit_power_law(x, z, {true});
                 return near(f.exponent, 1.5, 1e-12) && near(f.prefactor, 2.0, 1e-10) && near(*g.offset, 5.0, 1e-6) &&
                        near(g.exponent, 1.0, 1e-6);
               }});
  c.push_back({"clip single day-sized trade", [] {
                 auto t = tiny_tape({{1, 100.0}});
                 return clip_volumes(t, 0.01, 10000).trades[0].volume == 1.0;
               }});
  c.push_back({"impact constant at beta 0", [=] { return near(b_beta(0.0), 2.0, 1e-14); }});
  c.push_back({"sigma2 exponent at defaults", [=] {
                 return near(predict_sigma_a_exponent(ModelParams{}, 0.0, 1).diagonal, 1.5, 1e-12);
               }});
  c.push_back({"config round trip", [=] {
                 RunConfig cfg;
                 cfg.model.nu = 0.0123;
                 auto path = scratch / "selftest_config.json";
                 write_config(cfg, path);
                 auto back = read_config(path);
                 std::filesystem::remove(path);
                 return canonical_config(back) == canonical_config(cfg);
               }});
  c.push_back({"mu1 below one rejected", [] {
                 ModelParams p;
                 p.mu1 = 0.9;
                 try {
                   validate(p);
                 } catch (const ConfigError& e) {
                   return std::string(e.what()).find("mu1") != std::string::npos;
                 }
                 return false;
               }});
  c.push_back({"tape round trip", [=] {
                 RunConfig cfg;
                 cfg.horizon_trades = 2000;
                 auto sim = simulate_realization(cfg, 0);
                 auto path = scratch / "selftest_tape.csv";
                 write_tape_csv(sim.tape, path, &*sim.price);
                 auto back = read_tape_file(path);
                 auto files = tape_files(path);
                 std::filesystem::remove(files.trades);
                 std::filesystem::remove(files.metaorders);
                 std::filesystem::remove(files.meta);
                 return back.tape.trades == sim.tape.trades && back.tape.metaorders == sim.tape.metaorders &&
                        back.price->total == sim.price->total;
               }});
  c.push_back({"sign zero rejected with line number", [=] {
                 auto path = scratch / "selftest_bad.csv";
                 write_atomic(path, "trade_idx,time,sign,volume\n0,0.5,1,1\n1,0.7,0,1\n");
                 bool ok = false;
                 try {
                   read_tape_csv(path);
                 } catch (const IoError& e) {
                   ok = std::string(e.what()).find(":3") != std::string::npos;
                 }
                 std::filesystem::remove(path);
                 return ok;
               }});
  return c;
}

inline int run_selftest(std::ostream& out, const std::filesystem::path& scratch) {
  int failed = 0;
  for (const auto& tc : selftest_cases(scratch)) {
    bool ok = false;
    std::string why;
    try {
      ok = tc.run();
    } catch (const std::exception& e) {
      why = std::string(" (") + e.what() + ")";
    }
    out << (ok ? "PASS " : "FAIL ") << tc.name << why << "\n";
    failed += ok ? 0 : 1;
  }
  return failed;
}

}  // namespace orderflow
