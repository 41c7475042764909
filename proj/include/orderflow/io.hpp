#pragma once

#include <charconv>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <unistd.h>
#include <vector>

#include <json.hpp>

#include "orderflow/error.hpp"
#include "orderflow/flow.hpp"
#include "orderflow/params.hpp"
#include "orderflow/price.hpp"

namespace orderflow {

inline constexpr const char* kCodeVersion = "0.1.0";

using ojson = nlohmann::ordered_json;

struct TGridSpec {
  std::int64_t min = 16;
  std::int64_t max = 16384;
  int per_octave = 4;
};

struct AGridSpec {
  double start = 0.0;
  double stop = 3.0;
  double step = 0.25;
};

struct RunConfig {
  ModelParams model;
  std::int64_t horizon_trades = 1000000;
  TGridSpec T_grid;
  AGridSpec a_grid;
  double fit_lo = 100.0, fit_hi = 1000.0;
  int n_realizations = 1;
  std::string output_dir = "out";
  double clip_fraction = 0.01;
  std::int64_t day_block = 10000;
  int volume_bins = 5;
};

// Geometric, per_octave points per doubling, rounded and deduplicated.
inline std::vector<std::int64_t> T_values(const TGridSpec& g) {
  std::vector<std::int64_t> out;
  for (int k = 0;; ++k) {
    double v = static_cast<double>(g.min) * std::pow(2.0, static_cast<double>(k) / g.per_octave);
    auto r = static_cast<std::int64_t>(std::llround(v));
    if (r > g.max) break;
    if (out.empty() || r > out.back()) out.push_back(r);
  }
  return out;
}

inline std::vector<double> a_values(const AGridSpec& g) {
  std::vector<double> out;
  int n = static_cast<int>(std::floor((g.stop - g.start) / g.step + 1e-9));
  for (int i = 0; i <= n; ++i) out.push_back(g.start + i * g.step);
  return out;
}

inline void validate(const RunConfig& c) {
  validate(c.model);
  auto fail = [](const std::string& key, const std::string& what) { throw ConfigError(key + ": " + what); };
  if (c.horizon_trades < 1) fail("run.horizon_trades", "must be >= 1");
  if (c.T_grid.min < 1 || c.T_grid.max < c.T_grid.min) fail("run.T_grid", "need 1 <= min <= max");
  if (c.T_grid.per_octave < 1) fail("run.T_grid.per_octave", "must be >= 1");
  if (!(c.a_grid.step > 0.0) || c.a_grid.stop < c.a_grid.start || c.a_grid.start < 0.0)
    fail("run.a_grid", "need 0 <= start <= stop and step > 0");
  if (!(c.fit_lo > 0.0) || !(c.fit_hi > c.fit_lo)) fail("run.fit_range", "need 0 < lo < hi");
  if (c.n_realizations < 1) fail("run.n_realizations", "must be >= 1");
  if (!(c.clip_fraction > 0.0) || c.clip_fraction > 1.0) fail("run.clip_fraction", "must lie in (0, 1]");
  if (c.day_block < 1) fail("run.day_block", "must be >= 1");
  if (c.volume_bins < 2) fail("run.volume_bins", "must be >= 2");
  if (T_values(c.T_grid).empty()) fail("run.T_grid", "grid is empty");
}

inline ojson model_to_json(const ModelParams& p) {
  ojson j;
  j["nu"] = p.nu;
  j["phi_child"] = p.phi_child;
  j["tau0"] = p.tau0;
  j["s0"] = p.s0;
  j["mu1"] = p.mu1;
  j["lambda"] = p.lambda;
  j["mu_floor"] = p.mu_floor;
  j["m_logq"] = p.m_logq;
  j["sigma_logq"] = p.sigma_logq;
  j["gamma_cross"] = p.gamma_cross;
  j["Gamma_amp"] = p.Gamma_amp;
  j["beta1"] = p.beta1;
  j["lambda_prime"] = p.lambda_prime;
  j["n0"] = p.n0;
  j["theta0"] = p.theta0;
  j["z_inf"] = p.z_inf;
  j["sigma_F"] = p.sigma_F;
  j["rho"] = p.rho;
  j["psi"] = p.psi;
  j["seed"] = p.seed;
  j["mode"] = to_string(p.mode);
  return j;
}

inline ojson config_to_json(const RunConfig& c) {
  ojson j;
  j["model"] = model_to_json(c.model);
  ojson r;
  r["horizon_trades"] = c.horizon_trades;
  r["T_grid"] = {{"min", c.T_grid.min}, {"max", c.T_grid.max}, {"per_octave", c.T_grid.per_octave}};
  r["a_grid"] = {{"start", c.a_grid.start}, {"stop", c.a_grid.stop}, {"step", c.a_grid.step}};
  r["fit_range"] = ojson::array({c.fit_lo, c.fit_hi});
  r["n_realizations"] = c.n_realizations;
  r["output_dir"] = c.output_dir;
  r["clip_fraction"] = c.clip_fraction;
  r["day_block"] = c.day_block;
  r["volume_bins"] = c.volume_bins;
  j["run"] = r;
  return j;
}

namespace detail {

class JsonReader {
 public:
  JsonReader(const ojson& obj, std::string path) : obj_(obj), path_(std::move(path)) {
    if (!obj_.is_object()) throw ConfigError(path_ + ": expected an object");
    for (auto it = obj_.begin(); it != obj_.end(); ++it) keys_.push_back(it.key());
  }

  template <class T>
  void get(const std::string& key, T& out) {
    auto it = obj_.find(key);
    if (it == obj_.end()) return;  // default stays
    used_.push_back(key);
    try {
      if constexpr (std::is_same_v<T, double>) {
        if (!it->is_number()) throw ConfigError("");
      } else if constexpr (std::is_integral_v<T>) {
        if (!it->is_number_integer()) throw ConfigError("");
        if constexpr (std::is_unsigned_v<T>)
          if (it->is_number_integer() && !it->is_number_unsigned()) throw ConfigError("");
      } else if constexpr (std::is_same_v<T, std::string>) {
        if (!it->is_string()) throw ConfigError("");
      }
      out = it->template get<T>();
    } catch (const std::exception&) {
      throw ConfigError(name(key) + ": wrong type");
    }
  }

  const ojson* child(const std::string& key) {
    auto it = obj_.find(key);
    if (it == obj_.end()) return nullptr;
    used_.push_back(key);
    return &*it;
  }

  std::string name(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

  void finish() const {
    for (const auto& k : keys_)
      if (std::find(used_.begin(), used_.end(), k) == used_.end()) throw ConfigError(name(k) + ": unknown key");
  }

 private:
  const ojson& obj_;
  std::string path_;
  std::vector<std::string> keys_, used_;
};

}  // namespace detail

inline ModelParams model_from_json(const ojson& j, const std::string& path = "model") {
  ModelParams p;
  detail::JsonReader r(j, path);
  r.get("nu", p.nu);
  r.get("phi_child", p.phi_child);
  r.get("tau0", p.tau0);
  r.get("s0", p.s0);
  r.get("mu1", p.mu1);
  r.get("lambda", p.lambda);
  r.get("mu_floor", p.mu_floor);
  r.get("m_logq", p.m_logq);
  r.get("sigma_logq", p.sigma_logq);
  r.get("gamma_cross", p.gamma_cross);
  r.get("Gamma_amp", p.Gamma_amp);
  r.get("beta1", p.beta1);
  r.get("lambda_prime", p.lambda_prime);
  r.get("n0", p.n0);
  r.get("theta0", p.theta0);
  r.get("z_inf", p.z_inf);
  r.get("sigma_F", p.sigma_F);
  r.get("rho", p.rho);
  r.get("psi", p.psi);
  r.get("seed", p.seed);
  std::string mode = to_string(p.mode);
  r.get("mode", mode);
  try {
    p.mode = propagator_mode_from_string(mode);
  } catch (const ConfigError& e) {
    throw ConfigError(path + "." + e.what());
  }
  r.finish();
  return p;
}

inline RunConfig config_from_json(const ojson& j) {
  RunConfig c;
  detail::JsonReader top(j, "");
  if (const auto* m = top.child("model")) c.model = model_from_json(*m);
  if (const auto* rj = top.child("run")) {
    detail::JsonReader r(*rj, "run");
    r.get("horizon_trades", c.horizon_trades);
    if (const auto* g = r.child("T_grid")) {
      detail::JsonReader gr(*g, "run.T_grid");
      gr.get("min", c.T_grid.min);
      gr.get("max", c.T_grid.max);
      gr.get("per_octave", c.T_grid.per_octave);
      gr.finish();
    }
    if (const auto* g = r.child("a_grid")) {
      detail::JsonReader gr(*g, "run.a_grid");
      gr.get("start", c.a_grid.start);
      gr.get("stop", c.a_grid.stop);
      gr.get("step", c.a_grid.step);
      gr.finish();
    }
    if (const auto* f = r.child("fit_range")) {
      if (!f->is_array() || f->size() != 2 || !(*f)[0].is_number() || !(*f)[1].is_number())
        throw ConfigError("run.fit_range: expected [lo, hi]");
      c.fit_lo = (*f)[0].get<double>();
      c.fit_hi = (*f)[1].get<double>();
    }
    r.get("n_realizations", c.n_realizations);
    r.get("output_dir", c.output_dir);
    r.get("clip_fraction", c.clip_fraction);
    r.get("day_block", c.day_block);
    r.get("volume_bins", c.volume_bins);
    r.finish();
  }
  top.finish();
  validate(c);
  return c;
}

inline std::string canonical_config(const RunConfig& c) { return config_to_json(c).dump(2) + "\n"; }

inline std::string config_hash(const RunConfig& c) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : canonical_config(c)) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

inline std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Write to a sibling temp file, then rename over the target.
inline void write_atomic(const std::filesystem::path& path, const std::string& content) {
  if (path.has_parent_path()) {
    std::error_code ec;
    std::filesystem::create_directories(path.parent_path(), ec);
  }
  auto tmp = path;
  tmp += ".tmp" + std::to_string(::getpid());
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + tmp.string());
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!out) throw IoError("write failed for " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw IoError("cannot rename " + tmp.string() + " to " + path.string() + ": " + ec.message());
}

inline RunConfig read_config(const std::filesystem::path& path) {
  std::string text = read_text(path);
  ojson j;
  try {
    j = ojson::parse(text);
  } catch (const std::exception& e) {
    throw ConfigError(path.string() + ": not valid JSON (" + e.what() + ")");
  }
  return config_from_json(j);
}

inline void write_config(const RunConfig& c, const std::filesystem::path& path) { write_atomic(path, canonical_config(c)); }

// ---------------------------------------------------------------- CSV

namespace detail {

inline void append_double(std::string& out, double v) {
  char buf[40];
  int n = std::snprintf(buf, sizeof buf, "%.17g", v);
  out.append(buf, static_cast<std::size_t>(n));
}

inline void append_int(std::string& out, long long v) {
  char buf[24];
  auto r = std::to_chars(buf, buf + sizeof buf, v);
  out.append(buf, r.ptr);
}

inline std::vector<std::string_view> split_csv(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t pos = 0;
  for (;;) {
    std::size_t c = line.find(',', pos);
    out.push_back(line.substr(pos, c == std::string_view::npos ? std::string_view::npos : c - pos));
    if (c == std::string_view::npos) break;
    pos = c + 1;
  }
  return out;
}

template <class T>
T parse_field(std::string_view f, const std::string& where) {
  T v{};
  auto r = std::from_chars(f.data(), f.data() + f.size(), v);
  if (r.ec != std::errc() || r.ptr != f.data() + f.size())
    throw IoError(where + ": cannot parse '" + std::string(f) + "'");
  return v;
}

// Line-by-line reader over a whole file; strips a trailing CR.
class LineReader {
 public:
  explicit LineReader(const std::filesystem::path& path) : path_(path), text_(read_text(path)) {}
  bool next(std::string_view& line) {
    if (pos_ >= text_.size()) return false;
    std::size_t e = text_.find('\n', pos_);
    if (e == std::string::npos) e = text_.size();
    line = std::string_view(text_).substr(pos_, e - pos_);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    pos_ = e + 1;
    ++lineno_;
    return true;
  }
  std::string where() const { return path_.string() + ":" + std::to_string(lineno_); }

 private:
  std::filesystem::path path_;
  std::string text_;
  std::size_t pos_ = 0;
  std::size_t lineno_ = 0;
};

}  // namespace detail

struct TapeFiles {
  std::filesystem::path trades, metaorders, meta;
};

inline TapeFiles tape_files(const std::filesystem::path& csv) {
  auto stem = csv.parent_path() / csv.stem();
  return {csv, stem.string() + ".metaorders.csv", stem.string() + ".meta.json"};
}

struct Provenance {
  std::uint64_t seed = 0;
  std::string config_hash;
};

// Trades CSV plus, for tapes with a registry, <stem>.metaorders.csv and
// <stem>.meta.json. A price path on the full grid adds the price column
// (price after each trade).
inline void write_tape_csv(const TradeTape& tape, const std::filesystem::path& path, const PricePath* price = nullptr,
                           const Provenance& prov = {}) {
  if (price && (!price->dense() || price->total.size() != tape.trades.size() + 1))
    throw IoError("write_tape_csv: price path must cover every trade boundary");
  std::string out;
  out.reserve(tape.trades.size() * 80);
  out += price ? "trade_idx,time,metaorder_id,sign,volume,price\n" : "trade_idx,time,metaorder_id,sign,volume\n";
  for (std::size_t i = 0; i < tape.trades.size(); ++i) {
    const auto& t = tape.trades[i];
    detail::append_int(out, t.trade_idx);
    out += ',';
    detail::append_double(out, t.time);
    out += ',';
    detail::append_int(out, t.metaorder_id);
    out += ',';
    detail::append_int(out, t.sign);
    out += ',';
    detail::append_double(out, t.volume);
    if (price) {
      out += ',';
      detail::append_double(out, price->total[i + 1]);
    }
    out += '\n';
  }
  auto files = tape_files(path);
  write_atomic(files.trades, out);
  if (tape.analysis_only()) return;

  std::string mo;
  mo.reserve(tape.metaorders.size() * 100);
  mo += "id,start_time,sign,q,duration,participation\n";
  for (const auto& m : tape.metaorders) {
    detail::append_int(mo, m.id);
    mo += ',';
    detail::append_double(mo, m.start_time);
    mo += ',';
    detail::append_int(mo, m.sign);
    mo += ',';
    detail::append_double(mo, m.q);
    mo += ',';
    detail::append_double(mo, m.duration);
    mo += ',';
    detail::append_double(mo, m.participation);
    mo += '\n';
  }
  write_atomic(files.metaorders, mo);

  ojson meta;
  meta["n_trades"] = tape.trades.size();
  meta["n_metaorders"] = tape.metaorders.size();
  meta["horizon_time"] = tape.horizon_time;
  meta["initial_price"] = price ? ojson(price->total[0]) : ojson(nullptr);
  meta["sign_amplitude"] = tape.sign_meta.realized_amplitude;
  meta["sign_taper_fraction"] = tape.sign_meta.taper_fraction;
  meta["seed"] = prov.seed;
  meta["config_hash"] = prov.config_hash;
  meta["code_version"] = kCodeVersion;
  meta["params"] = model_to_json(tape.params);
  write_atomic(files.meta, meta.dump(2) + "\n");
}

struct LoadedTape {
  TradeTape tape;
  std::optional<PricePath> price;
};

inline LoadedTape read_tape_file(const std::filesystem::path& path) {
  detail::LineReader rd(path);
  std::string_view line;
  if (!rd.next(line)) throw IoError(path.string() + ": empty file");
  bool has_mid = false, has_price = false;
  if (line == "trade_idx,time,metaorder_id,sign,volume,price") has_mid = has_price = true;
  else if (line == "trade_idx,time,metaorder_id,sign,volume") has_mid = true;
  else if (line == "trade_idx,time,sign,volume,price") has_price = true;
  else if (line != "trade_idx,time,sign,volume")
    throw IoError(rd.where() + ": unexpected header '" + std::string(line) + "'");
  std::size_t ncol = 4 + (has_mid ? 1 : 0) + (has_price ? 1 : 0);

  LoadedTape out;
  auto& tape = out.tape;
  std::vector<double> prices;
  while (rd.next(line)) {
    if (line.empty()) continue;
    auto f = detail::split_csv(line);
    if (f.size() != ncol)
      throw IoError(rd.where() + ": expected " + std::to_string(ncol) + " fields, got " + std::to_string(f.size()));
    std::size_t c = 0;
    Trade t;
    t.trade_idx = detail::parse_field<long long>(f[c++], rd.where());
    t.time = detail::parse_field<double>(f[c++], rd.where());
    t.metaorder_id = has_mid ? detail::parse_field<long long>(f[c++], rd.where()) : -1;
    t.sign = detail::parse_field<int>(f[c++], rd.where());
    t.volume = detail::parse_field<double>(f[c++], rd.where());
    if (t.sign != 1 && t.sign != -1) throw IoError(rd.where() + ": sign must be -1 or 1, got " + std::to_string(t.sign));
    if (!(t.volume > 0.0) || !std::isfinite(t.volume)) throw IoError(rd.where() + ": volume must be > 0");
    if (!std::isfinite(t.time)) throw IoError(rd.where() + ": time must be finite");
    if (!tape.trades.empty()) {
      if (t.trade_idx <= tape.trades.back().trade_idx) throw IoError(rd.where() + ": trade_idx must increase");
      if (t.time < tape.trades.back().time) throw IoError(rd.where() + ": time must not decrease");
    }
    if (has_price) prices.push_back(detail::parse_field<double>(f[c++], rd.where()));
    tape.trades.push_back(t);
  }
  if (tape.trades.empty()) throw IoError(path.string() + ": no trades");
  tape.horizon_time = tape.trades.back().time;

  auto files = tape_files(path);
  std::optional<double> p0;
  if (has_mid && std::filesystem::exists(files.metaorders) && std::filesystem::exists(files.meta)) {
    ojson meta;
    try {
      meta = ojson::parse(read_text(files.meta));
      tape.params = model_from_json(meta.at("params"), "params");
      tape.horizon_time = meta.at("horizon_time").get<double>();
      tape.sign_meta.realized_amplitude = meta.value("sign_amplitude", 0.0);
      tape.sign_meta.taper_fraction = meta.value("sign_taper_fraction", 0.0);
      if (meta.contains("initial_price") && meta["initial_price"].is_number()) p0 = meta["initial_price"].get<double>();
    } catch (const ConfigError& e) {
      throw IoError(files.meta.string() + ": " + e.what());
    } catch (const std::exception& e) {
      throw IoError(files.meta.string() + ": malformed metadata (" + e.what() + ")");
    }
    detail::LineReader mr(files.metaorders);
    if (!mr.next(line) || line != "id,start_time,sign,q,duration,participation")
      throw IoError(mr.where() + ": unexpected metaorder header");
    while (mr.next(line)) {
      if (line.empty()) continue;
      auto f = detail::split_csv(line);
      if (f.size() != 6) throw IoError(mr.where() + ": expected 6 fields");
      Metaorder m;
      m.id = detail::parse_field<long long>(f[0], mr.where());
      m.start_time = detail::parse_field<double>(f[1], mr.where());
      m.sign = detail::parse_field<int>(f[2], mr.where());
      m.q = detail::parse_field<double>(f[3], mr.where());
      m.duration = detail::parse_field<double>(f[4], mr.where());
      m.participation = detail::parse_field<double>(f[5], mr.where());
      if (m.id != static_cast<std::int64_t>(tape.metaorders.size())) throw IoError(mr.where() + ": ids must be 0, 1, 2, ...");
      if (m.sign != 1 && m.sign != -1) throw IoError(mr.where() + ": sign must be -1 or 1");
      tape.metaorders.push_back(m);
    }
    for (const auto& t : tape.trades) {
      if (t.metaorder_id < 0 || t.metaorder_id >= static_cast<std::int64_t>(tape.metaorders.size()))
        throw IoError(path.string() + ": trade " + std::to_string(t.trade_idx) + " references unknown metaorder");
    }
  }
  if (has_price) {
    PricePath pp;
    pp.grid = full_grid(tape.size());
    pp.total.resize(prices.size() + 1);
    pp.total[0] = p0 ? *p0 : prices.front();
    std::copy(prices.begin(), prices.end(), pp.total.begin() + 1);
    out.price = std::move(pp);
  }
  return out;
}

inline TradeTape read_tape_csv(const std::filesystem::path& path) { return read_tape_file(path).tape; }

// External prices: `trade_idx,price`, one row per trade (price after the trade).
inline PricePath read_price_csv(const std::filesystem::path& path, const TradeTape& tape) {
  detail::LineReader rd(path);
  std::string_view line;
  if (!rd.next(line) || line != "trade_idx,price") throw IoError(rd.where() + ": expected header trade_idx,price");
  std::vector<double> prices;
  while (rd.next(line)) {
    if (line.empty()) continue;
    auto f = detail::split_csv(line);
    if (f.size() != 2) throw IoError(rd.where() + ": expected 2 fields");
    auto idx = detail::parse_field<long long>(f[0], rd.where());
    if (idx != tape.trades[std::min(prices.size(), tape.trades.size() - 1)].trade_idx || prices.size() >= tape.trades.size())
      throw IoError(rd.where() + ": trade_idx does not match the tape");
    prices.push_back(detail::parse_field<double>(f[1], rd.where()));
  }
  if (prices.size() != tape.trades.size()) throw IoError(path.string() + ": price rows do not cover the tape");
  PricePath pp;
  pp.grid = full_grid(tape.size());
  pp.total.resize(prices.size() + 1);
  pp.total[0] = prices.front();
  std::copy(prices.begin(), prices.end(), pp.total.begin() + 1);
  return pp;
}

inline void write_price_csv(const PricePath& price, const TradeTape& tape, const std::filesystem::path& path) {
  if (!price.dense() || price.total.size() != tape.trades.size() + 1) throw IoError("write_price_csv: need a full-grid price path");
  std::string out = "trade_idx,price\n";
  for (std::size_t i = 0; i < tape.trades.size(); ++i) {
    detail::append_int(out, tape.trades[i].trade_idx);
    out += ',';
    detail::append_double(out, price.total[i + 1]);
    out += '\n';
  }
  write_atomic(path, out);
}

// Generic numeric table with a string first column (result CSVs).
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  std::size_t column(const std::string& name) const {
    for (std::size_t i = 0; i < header.size(); ++i)
      if (header[i] == name) return i;
    throw IoError("missing column '" + name + "'");
  }
};

inline CsvTable read_csv_table(const std::filesystem::path& path) {
  detail::LineReader rd(path);
  std::string_view line;
  CsvTable t;
  if (!rd.next(line)) throw IoError(path.string() + ": empty file");
  for (auto f : detail::split_csv(line)) t.header.emplace_back(f);
  while (rd.next(line)) {
    if (line.empty()) continue;
    auto f = detail::split_csv(line);
    if (f.size() != t.header.size()) throw IoError(rd.where() + ": wrong number of fields");
    std::vector<std::string> row;
    for (auto x : f) row.emplace_back(x);
    t.rows.push_back(std::move(row));
  }
  return t;
}

inline std::string format_double(double v) {
  std::string s;
  detail::append_double(s, v);
  return s;
}

inline double parse_double(const std::string& s) {
  if (s == "nan" || s == "-nan" || s.empty()) return std::numeric_limits<double>::quiet_NaN();
  if (s == "inf") return std::numeric_limits<double>::infinity();
  if (s == "-inf") return -std::numeric_limits<double>::infinity();
  return detail::parse_field<double>(s, "value");
}

inline void write_csv_table(const CsvTable& t, const std::filesystem::path& path) {
  std::string out;
  for (std::size_t i = 0; i < t.header.size(); ++i) out += (i ? "," : "") + t.header[i];
  out += '\n';
  for (const auto& r : t.rows) {
    for (std::size_t i = 0; i < r.size(); ++i) out += (i ? "," : "") + r[i];
    out += '\n';
  }
  write_atomic(path, out);
}

}  // namespace orderflow
