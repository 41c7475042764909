// orderflow: simulate -> analyze -> predict -> report driver.

#include <chrono>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "orderflow/io.hpp"
#include "orderflow/pipeline.hpp"
#include "orderflow/selftest.hpp"

namespace fs = std::filesystem;
using namespace orderflow;

namespace {

RunConfig load_config(const std::string& path, const std::optional<std::uint64_t>& seed) {
  RunConfig cfg = path.empty() ? RunConfig{} : read_config(path);
  if (seed) cfg.model.seed = *seed;
  validate(cfg);
  return cfg;
}

void announce(const RunConfig& cfg) {
  std::cerr << "seed " << cfg.model.seed << " config_hash " << config_hash(cfg) << "\n";
}

std::vector<fs::path> tape_inputs(const fs::path& p) {
  if (!fs::is_directory(p)) {
    if (!fs::exists(p)) throw IoError("no such tape: " + p.string());
    return {p};
  }
  std::vector<fs::path> out;
  for (const auto& e : fs::directory_iterator(p)) {
    auto name = e.path().filename().string();
    if (!e.is_regular_file() || e.path().extension() != ".csv") continue;
    if (name.ends_with(".metaorders.csv")) continue;
    out.push_back(e.path());
  }
  std::sort(out.begin(), out.end());
  if (out.empty()) throw IoError("no tape CSVs in " + p.string());
  return out;
}

int cmd_simulate(const std::string& config, const std::optional<std::uint64_t>& seed, const fs::path& out) {
  auto cfg = load_config(config, seed);
  announce(cfg);
  auto t0 = std::chrono::steady_clock::now();
  auto sims = simulate_all(cfg, true);
  Provenance prov{cfg.model.seed, config_hash(cfg)};
  for (std::size_t r = 0; r < sims.size(); ++r) {
    auto path = realization_path(out, static_cast<int>(r), cfg.n_realizations);
    write_tape_csv(sims[r].tape, path, &*sims[r].price, prov);
    std::cerr << "wrote " << path.string() << " (" << sims[r].tape.size() << " trades, " << sims[r].tape.metaorders.size()
              << " metaorders)\n";
  }
  double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  std::cerr << "simulate took " << secs << " s\n";
  return 0;
}

int cmd_analyze(const std::string& config, const std::optional<std::uint64_t>& seed, const fs::path& tape_arg,
                const std::string& price_arg, const fs::path& out) {
  auto cfg = load_config(config, seed);
  announce(cfg);
  auto inputs = tape_inputs(tape_arg);
  if (!price_arg.empty() && inputs.size() != 1) throw ConfigError("--price: only valid with a single tape");
  std::vector<LoadedTape> loaded(inputs.size());
  parallel_for(inputs.size(), [&](std::size_t i) { loaded[i] = read_tape_file(inputs[i]); });
  if (!price_arg.empty()) loaded[0].price = read_price_csv(price_arg, loaded[0].tape);

  std::vector<const TradeTape*> tapes;
  std::vector<const PricePath*> prices;
  for (auto& l : loaded) {
    tapes.push_back(&l.tape);
    prices.push_back(l.price ? &*l.price : nullptr);
  }
  auto res = analyze(tapes, prices, cfg);
  fs::create_directories(out);
  write_analysis(res, cfg, out);
  std::cerr << "wrote analysis to " << out.string() << " (" << inputs.size() << " tape(s)"
            << (res.has_price ? ", with prices" : ", no prices") << ")\n";
  return 0;
}

int cmd_predict(const std::string& config, const std::optional<std::uint64_t>& seed, const fs::path& out) {
  auto cfg = load_config(config, seed);
  announce(cfg);
  write_prediction_csv(predictions(cfg), out);
  return 0;
}

int cmd_report(const fs::path& measured, const fs::path& pred, const fs::path& out) {
  auto rows = read_exponent_csv(measured / "exponents.csv");
  auto preds = read_prediction_csv(pred);
  auto rep = build_report(rows, preds);
  auto prov_path = measured / "provenance.json";
  if (fs::exists(prov_path)) {
    try {
      auto prov = ojson::parse(read_text(prov_path));
      rep.seed = prov.at("seed").get<std::uint64_t>();
      rep.config_hash = prov.at("config_hash").get<std::string>();
    } catch (const std::exception& e) {
      throw IoError(prov_path.string() + ": " + e.what());
    }
  }
  auto j = report_to_json(rep);
  write_atomic(out, j.dump(2) + "\n");
  std::cerr << "seed " << rep.seed << " config_hash " << rep.config_hash << "\n";
  std::cerr << "report: " << j["summary"]["passed"] << " passed, " << j["summary"]["failed"] << " failed, "
            << j["summary"]["unpaired"] << " unpaired\n";
  return rep.all_pass() ? 0 : 4;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Metaorder order-flow simulator and scaling-law estimator"};
  app.require_subcommand(1);
  std::optional<std::uint64_t> seed;

  std::string config;
  std::string out, tape, price, measured, pred;

  auto* sim = app.add_subcommand("simulate", "Simulate tapes with prices");
  sim->add_option("--config", config, "Run config JSON")->check(CLI::ExistingFile);
  sim->add_option("--out", out, "Tape CSV path (suffixed _rK per realization)")->required();
  sim->add_option("--seed", seed, "Override model.seed");

  auto* ana = app.add_subcommand("analyze", "Estimate scaling surfaces and exponents");
  ana->add_option("--config", config, "Run config JSON")->check(CLI::ExistingFile);
  ana->add_option("--tape", tape, "Tape CSV or directory of tapes")->required();
  ana->add_option("--price", price, "External price CSV (trade_idx,price)")->check(CLI::ExistingFile);
  ana->add_option("--out", out, "Output directory")->required();
  ana->add_option("--seed", seed, "Override model.seed");

  auto* pre = app.add_subcommand("predict", "Write oracle predictions");
  pre->add_option("--config", config, "Run config JSON")->check(CLI::ExistingFile);
  pre->add_option("--out", out, "Prediction CSV path")->required();
  pre->add_option("--seed", seed, "Override model.seed");

  auto* rep = app.add_subcommand("report", "Pair measured exponents with predictions");
  rep->add_option("--measured", measured, "Analysis directory")->required()->check(CLI::ExistingDirectory);
  rep->add_option("--pred", pred, "Prediction CSV")->required()->check(CLI::ExistingFile);
  rep->add_option("--out", out, "Report JSON path")->required();

  auto* self = app.add_subcommand("selftest", "Run the built-in closed-form checks");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    if (code != 0) std::cerr << app.help();
    return code == 0 ? 0 : 1;
  }

  try {
    if (*sim) return cmd_simulate(config, seed, out);
    if (*ana) return cmd_analyze(config, seed, tape, price, out);
    if (*pre) return cmd_predict(config, seed, out);
    if (*rep) return cmd_report(measured, pred, out);
    if (*self) {
      int failed = run_selftest(std::cout, fs::temp_directory_path());
      return failed == 0 ? 0 : 3;
    }
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_code(e);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
  return 1;
}
