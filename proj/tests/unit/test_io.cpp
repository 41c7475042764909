#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include <gtest/gtest.h>

#include "orderflow/io.hpp"
#include "orderflow/pipeline.hpp"

using namespace orderflow;
namespace fs = std::filesystem;

namespace {

class TempDir : public ::testing::Test {
 protected:
  void SetUp() override {
    const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
    dir_ = fs::temp_directory_path() / ("orderflow_io_" + std::string(info->name()) + "_" + std::to_string(::getpid()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }
  fs::path dir_;
};

std::string error_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const std::exception& e) {
    return e.what();
  }
  return "";
}

RunConfig small_run() {
  RunConfig c;
  c.horizon_trades = 60000;
  c.T_grid = {16, 1024, 2};
  c.a_grid = {0.0, 1.0, 0.5};
  c.fit_lo = 16;
  c.fit_hi = 1024;
  c.day_block = 5000;
  c.volume_bins = 3;
  c.model.seed = 4;
  return c;
}

}  // namespace

TEST(Config, DefaultsFromEmptyDocument) {
  RunConfig d;
  EXPECT_NO_THROW(validate(d));
  EXPECT_EQ(canonical_config(config_from_json(ojson::object())), canonical_config(d));
  EXPECT_EQ(d.model.nu, 0.05);
  EXPECT_EQ(d.model.s0, 0.3);
}

TEST(Config, PartialOverride) {
  auto c = config_from_json(ojson::parse(R"({"model": {"mu1": 1.4, "mode": "standard"}, "run": {"fit_range": [50, 500]}})"));
  EXPECT_EQ(c.model.mu1, 1.4);
  EXPECT_EQ(c.model.mode, PropagatorMode::standard);
  EXPECT_EQ(c.fit_lo, 50.0);
  EXPECT_EQ(c.fit_hi, 500.0);
  EXPECT_EQ(c.model.nu, RunConfig{}.model.nu);
}

TEST(Config, RejectsInfiniteMeanDuration) {
  auto msg = error_of([] { config_from_json(ojson::parse(R"({"model": {"mu1": 0.9}})")); });
  EXPECT_NE(msg.find("mu1"), std::string::npos) << msg;
}

TEST(Config, RejectsUnknownKeys) {
  auto msg = error_of([] { config_from_json(ojson::parse(R"({"model": {"nuu": 1.0}})")); });
  EXPECT_NE(msg.find("nuu"), std::string::npos) << msg;
  msg = error_of([] { config_from_json(ojson::parse(R"({"runs": {}})")); });
  EXPECT_NE(msg.find("runs"), std::string::npos) << msg;
  EXPECT_THROW(config_from_json(ojson::parse(R"({"model": {"mode": "linear"}})")), ConfigError);
  EXPECT_THROW(config_from_json(ojson::parse(R"({"run": {"fit_range": [10]}})")), ConfigError);
}

// docs/config.schema.json lists exactly the serialized keys, with matching defaults
TEST(Config, SchemaMatchesSerializer) {
  auto schema = ojson::parse(read_text(fs::path(ORDERFLOW_SOURCE_DIR) / "docs" / "config.schema.json"));
  auto doc = config_to_json(RunConfig{});
  std::function<void(const ojson&, const ojson&, const std::string&)> walk = [&](const ojson& sc, const ojson& v,
                                                                               const std::string& at) {
    if (v.is_object()) {
      const auto& props = sc.at("properties");
      ASSERT_EQ(props.size(), v.size()) << at;
      for (auto it = v.begin(); it != v.end(); ++it) {
        ASSERT_TRUE(props.contains(it.key())) << at << "." << it.key();
        walk(props[it.key()], it.value(), at + "." + it.key());
      }
    } else {
      ASSERT_TRUE(sc.contains("default")) << at;
      EXPECT_EQ(sc["default"], v) << at;
    }
  };
  walk(schema, doc, "");
}

TEST_F(TempDir, ConfigRoundTripAndHash) {
  auto c = small_run();
  c.model.Gamma_amp = 0.3;
  c.model.nu = 0.0123;
  write_config(c, dir_ / "c.json");
  auto back = read_config(dir_ / "c.json");
  EXPECT_EQ(canonical_config(back), canonical_config(c));
  EXPECT_EQ(config_hash(back), config_hash(c));
  auto other = c;
  other.model.seed = 5;
  EXPECT_NE(config_hash(other), config_hash(c));
  // the temp file is renamed away
  for (const auto& e : fs::directory_iterator(dir_)) EXPECT_EQ(e.path().filename(), "c.json");
}

TEST_F(TempDir, MalformedJson) {
  write_atomic(dir_ / "bad.json", "{\"model\": ");
  EXPECT_THROW(read_config(dir_ / "bad.json"), ConfigError);
  EXPECT_THROW(read_config(dir_ / "missing.json"), IoError);
}

TEST_F(TempDir, TapeRoundTripIsLossless) {
  auto cfg = small_run();
  cfg.horizon_trades = 5000;
  cfg.model.Gamma_amp = 0.3;
  auto sim = simulate_realization(cfg, 0);
  auto path = dir_ / "tape.csv";
  write_tape_csv(sim.tape, path, &*sim.price, {cfg.model.seed, config_hash(cfg)});
  auto back = read_tape_file(path);
  EXPECT_EQ(back.tape.trades, sim.tape.trades);
  EXPECT_EQ(back.tape.metaorders, sim.tape.metaorders);
  EXPECT_EQ(back.tape.horizon_time, sim.tape.horizon_time);
  EXPECT_EQ(canonical_config(RunConfig{back.tape.params}), canonical_config(RunConfig{sim.tape.params}));
  ASSERT_TRUE(back.price.has_value());
  EXPECT_EQ(back.price->total, sim.price->total);
  auto meta = ojson::parse(read_text(tape_files(path).meta));
  EXPECT_EQ(meta["config_hash"], config_hash(cfg));
  EXPECT_EQ(meta["seed"], cfg.model.seed);
}

TEST_F(TempDir, ExternalTapeIsAnalysisOnly) {
  auto path = dir_ / "ext.csv";
  write_atomic(path, "trade_idx,time,sign,volume\n0,0.5,1,2\n1,0.7,-1,1\n2,1.5,1,3\n");
  auto t = read_tape_csv(path);
  ASSERT_EQ(t.size(), 3);
  EXPECT_TRUE(t.analysis_only());
  EXPECT_EQ(t.trades[1].metaorder_id, -1);
  EXPECT_EQ(t.trades[2].volume, 3.0);
  EXPECT_EQ(generalized_imbalance(t, 3, 1.0).values.at(0), 4.0);
}

TEST_F(TempDir, RejectsBadRowsWithLineNumbers) {
  auto check = [&](const std::string& body, const std::string& needle) {
    auto path = dir_ / "bad.csv";
    write_atomic(path, "trade_idx,time,sign,volume\n" + body);
    auto msg = error_of([&] { read_tape_csv(path); });
    EXPECT_NE(msg.find(needle), std::string::npos) << msg;
  };
  check("0,0.5,1,1\n1,0.7,0,1\n", ":3");
  check("0,0.5,1,1\n0,0.7,1,1\n", ":3");
  check("0,0.5,1,-1\n", ":2");
  check("0,0.5,1\n", ":2");
  check("0,0.5,1,abc\n", ":2");
  check("", "no trades");
  write_atomic(dir_ / "hdr.csv", "idx,time,sign,volume\n0,1,1,1\n");
  EXPECT_THROW(read_tape_csv(dir_ / "hdr.csv"), IoError);
}

TEST_F(TempDir, PredictionCsv) {
  RunConfig cfg;
  auto rows = predictions(cfg);
  bool found = false;
  for (const auto& r : rows)
    if (r.statistic == "sigma2_exponent" && r.a == 0.0 && r.n == 1) {
      EXPECT_DOUBLE_EQ(r.value, 1.5);
      found = true;
    }
  EXPECT_TRUE(found);
  write_prediction_csv(rows, dir_ / "pred.csv");
  auto back = read_prediction_csv(dir_ / "pred.csv");
  ASSERT_EQ(back.size(), rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    EXPECT_EQ(back[i].statistic, rows[i].statistic);
    EXPECT_EQ(back[i].n, rows[i].n);
    if (std::isfinite(rows[i].value)) EXPECT_EQ(back[i].value, rows[i].value);
    else EXPECT_EQ(std::isinf(back[i].value), std::isinf(rows[i].value));
  }
}

TEST_F(TempDir, ClosedLoopAnalysis) {
  auto cfg = small_run();
  cfg.model.theta0 = 1.0;
  auto sim = simulate_realization(cfg, 0);
  auto res = analyze({&sim.tape}, {&*sim.price}, cfg);
  write_analysis(res, cfg, dir_);
  for (const char* f : {"moments.csv", "covariance.csv", "correlation.csv"}) {
    auto t = read_csv_table(dir_ / f);
    EXPECT_EQ(t.header, (std::vector<std::string>{"statistic", "T", "a", "value", "stderr"})) << f;
    EXPECT_FALSE(t.rows.empty()) << f;
  }
  for (const char* f : {"impact_curve.csv", "collapse.csv", "volume_bins.csv", "exponents.csv", "provenance.json"})
    EXPECT_TRUE(fs::exists(dir_ / f)) << f;
  auto prov = ojson::parse(read_text(dir_ / "provenance.json"));
  EXPECT_EQ(prov["config_hash"], config_hash(cfg));

  auto measured = read_exponent_csv(dir_ / "exponents.csv");
  auto rep = build_report(measured, predictions(cfg, res.ratio_T));
  bool paired = false;
  for (const auto& e : rep.entries)
    if (e.measured.statistic == "sigma2_exponent" && e.measured.a == 0.0) {
      ASSERT_TRUE(e.predicted.has_value());
      EXPECT_DOUBLE_EQ(*e.predicted, 1.5);
      EXPECT_TRUE(e.tolerance.has_value());
      EXPECT_TRUE(e.pass.has_value());
      paired = true;
    }
  EXPECT_TRUE(paired);
  auto j = report_to_json(rep);
  EXPECT_TRUE(j.contains("provenance"));
}

TEST_F(TempDir, AnalysisIsDeterministic) {
  auto cfg = small_run();
  auto a = simulate_realization(cfg, 0), b = simulate_realization(cfg, 0);
  write_analysis(analyze({&a.tape}, {&*a.price}, cfg), cfg, dir_ / "a");
  write_analysis(analyze({&b.tape}, {&*b.price}, cfg), cfg, dir_ / "b");
  for (const char* f : {"moments.csv", "covariance.csv", "exponents.csv", "provenance.json"})
    EXPECT_EQ(read_text(dir_ / "a" / f), read_text(dir_ / "b" / f)) << f;
  // realizations use distinct streams
  EXPECT_NE(simulate_realization(cfg, 1).tape.trades, a.tape.trades);
}

TEST(Report, ToleranceBands) {
  ExponentRow m;
  m.statistic = "sigma2_exponent";
  m.a = 0.0;
  m.value = 1.58;
  std::vector<PredictionRow> pred{{"sigma2_exponent", 0.0, 1, 1.5}};
  auto rep = build_report({m}, pred);
  ASSERT_EQ(rep.entries.size(), 1u);
  EXPECT_TRUE(*rep.entries[0].pass);
  m.value = 1.65;
  EXPECT_FALSE(*build_report({m}, pred).entries[0].pass);
  m.statistic = "unpredicted";
  EXPECT_FALSE(build_report({m}, pred).entries[0].pass.has_value());
}
