#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <queue>
#include <utility>
#include <vector>

#include "orderflow/error.hpp"
#include "orderflow/kernels.hpp"
#include "orderflow/params.hpp"
#include "orderflow/random.hpp"

namespace orderflow {

struct Metaorder {
  std::int64_t id = 0;
  double start_time = 0.0;  // negative for metaorders alive at t = 0
  int sign = 0;             // 0 until a sign sequence is attached
  double q = 1.0;
  double duration = 0.0;
  double participation = 1.0;

  double end_time() const { return start_time + duration; }
  double total_size() const { return q * participation * duration; }
};

struct Trade {
  std::int64_t trade_idx = 0;
  double time = 0.0;
  std::int64_t metaorder_id = -1;  // -1: unknown (external tape)
  int sign = 0;
  double volume = 0.0;

  bool operator==(const Trade&) const = default;
};

inline bool operator==(const Metaorder& a, const Metaorder& b) {
  return a.id == b.id && a.start_time == b.start_time && a.sign == b.sign && a.q == b.q &&
         a.duration == b.duration && a.participation == b.participation;
}

struct TradeTape {
  std::vector<Trade> trades;
  std::vector<Metaorder> metaorders;  // index == id, sorted by start_time
  double horizon_time = 0.0;          // time of the last trade for simulated tapes
  ModelParams params;
  SignSequence sign_meta;             // amplitude/taper only; signs live on the metaorders

  std::int64_t size() const { return static_cast<std::int64_t>(trades.size()); }
  bool analysis_only() const { return metaorders.empty(); }
};

// Metaorders alive at t = 0 in the stationary state, sorted by start time.
// Signs are left at 0; simulate_tape attaches them.
inline std::vector<Metaorder> initialize_stationary_state(const ModelParams& p, RandomStream& rng) {
  validate(p);
  std::vector<Metaorder> out;
  if (p.nu == 0.0) return out;
  double sbar = mean_duration(p);
  if (!std::isfinite(sbar)) throw ConfigError("mu1: mean duration diverges");
  std::uint64_t count = rng.poisson(p.nu * sbar);
  out.reserve(count);
  // q is size-biased by sbar_q: accept-reject against an upper bound on sbar_q
  // (exact with mu_floor; otherwise the bound sits at the 1e-7 quantile of ln q)
  double smax = 0.0;
  bool biased = p.lambda != 0.0 && p.sigma_logq > 0.0;
  if (biased) {
    double zlo = p.m_logq + p.sigma_logq * (p.lambda > 0.0 ? -5.2 : 5.2);
    smax = mean_duration_q(p, std::exp(zlo));
    if (p.mu_floor > 1.0) smax = std::min(smax, p.mu_floor * p.s0 / (p.mu_floor - 1.0));
  }
  for (std::uint64_t i = 0; i < count; ++i) {
    double q = sample_child_volume(p, rng);
    while (biased && !(rng.uniform() * smax < mean_duration_q(p, q))) q = sample_child_volume(p, rng);
    Metaorder mo;
    mo.q = q;
    mo.duration = sample_size_biased_duration(p, q, rng);
    double age = rng.uniform() * mo.duration;
    mo.start_time = -age;
    mo.participation = p.phi_child;
    out.push_back(mo);
  }
  std::sort(out.begin(), out.end(), [](const Metaorder& a, const Metaorder& b) { return a.start_time < b.start_time; });
  for (std::size_t i = 0; i < out.size(); ++i) out[i].id = static_cast<std::int64_t>(i);
  return out;
}

// Event-driven tape: Poisson initiations, Poisson child executions per active
// metaorder, merged in time order (ties by metaorder id), stopped after N trades.
inline TradeTape simulate_tape(const ModelParams& p, std::int64_t n_trades, RandomStream& rng) {
  if (n_trades < 1) throw ConfigError("horizon_trades: must be >= 1");
  validate(p);
  if (!(p.nu > 0.0)) throw ConfigError("nu: expected trade rate nu*phi*sbar is zero");
  RandomStream flow = rng.split(1);
  RandomStream sign_rng = rng.split(2);

  TradeTape tape;
  tape.params = p;
  tape.metaorders = initialize_stationary_state(p, flow);
  tape.trades.reserve(static_cast<std::size_t>(n_trades));

  using Event = std::pair<double, std::int64_t>;  // (next child time, metaorder id)
  std::priority_queue<Event, std::vector<Event>, std::greater<>> heap;
  const double phi = p.phi_child;
  for (const auto& mo : tape.metaorders) {
    double t = flow.exponential(phi);
    if (t < mo.end_time()) heap.emplace(t, mo.id);
  }

  double next_init = flow.exponential(p.nu);
  std::int64_t k = 0;
  while (k < n_trades) {
    if (!heap.empty() && heap.top().first < next_init) {
      auto [t, id] = heap.top();
      heap.pop();
      const Metaorder& mo = tape.metaorders[static_cast<std::size_t>(id)];
      tape.trades.push_back(Trade{k++, t, id, 0, mo.q});
      double nt = t + flow.exponential(phi);
      if (nt < mo.end_time()) heap.emplace(nt, id);
    } else {
      Metaorder mo;
      mo.id = static_cast<std::int64_t>(tape.metaorders.size());
      mo.start_time = next_init;
      mo.q = sample_child_volume(p, flow);
      mo.duration = sample_duration(p, mo.q, flow);
      mo.participation = phi;
      double t = next_init + flow.exponential(phi);
      if (t < mo.end_time()) heap.emplace(t, mo.id);
      tape.metaorders.push_back(mo);
      next_init += flow.exponential(p.nu);
    }
  }
  tape.horizon_time = tape.trades.back().time;

  tape.sign_meta = generate_correlated_signs(static_cast<std::int64_t>(tape.metaorders.size()), p, sign_rng);
  for (std::size_t i = 0; i < tape.metaorders.size(); ++i) tape.metaorders[i].sign = tape.sign_meta.signs[i];
  tape.sign_meta.signs.clear();
  tape.sign_meta.signs.shrink_to_fit();
  for (auto& tr : tape.trades) tr.sign = tape.metaorders[static_cast<std::size_t>(tr.metaorder_id)].sign;
  return tape;
}

struct FlowStatistics {
  double elapsed_time = 0.0;
  std::int64_t n_trades = 0;
  double trade_rate = 0.0;           // N / T
  double trade_rate_stderr = 0.0;    // batch means over equal time blocks
  double nu = 0.0, nu_stderr = 0.0;  // initiations in (0, T] per unit time
  double phi = 0.0;                  // trades per unit active metaorder-time
  double mean_duration = 0.0, mean_duration_stderr = 0.0;
  double mean_children = 0.0, mean_children_stderr = 0.0;  // over metaorders fully inside [0, T]
  std::int64_t completed = 0;
  double q_mean = 0.0, q_logvar = 0.0;
  double volume_flow = 0.0;  // total volume / T
  double active_mean = 0.0, active_stderr = 0.0;
  double active_first_half = 0.0, active_first_half_stderr = 0.0;
  double active_second_half = 0.0, active_second_half_stderr = 0.0;
  std::vector<double> active_times, active_counts;
};

namespace detail {

// Mean and batch-means standard error of a serially correlated series.
inline std::pair<double, double> batch_means(const std::vector<double>& x, std::size_t n_batches = 20) {
  std::size_t n = x.size();
  if (n == 0) return {std::numeric_limits<double>::quiet_NaN(), std::numeric_limits<double>::quiet_NaN()};
  double mean = 0.0;
  for (double v : x) mean += v;
  mean /= static_cast<double>(n);
  std::size_t nb = std::min(n_batches, n);
  if (nb < 2) return {mean, std::numeric_limits<double>::quiet_NaN()};
  std::size_t len = n / nb;
  std::vector<double> bm(nb, 0.0);
  for (std::size_t b = 0; b < nb; ++b) {
    for (std::size_t i = b * len; i < (b + 1) * len; ++i) bm[b] += x[i];
    bm[b] /= static_cast<double>(len);
  }
  double bmean = 0.0;
  for (double v : bm) bmean += v;
  bmean /= static_cast<double>(nb);
  double var = 0.0;
  for (double v : bm) var += (v - bmean) * (v - bmean);
  var /= static_cast<double>(nb - 1);
  return {mean, std::sqrt(var / static_cast<double>(nb))};
}

inline std::pair<double, double> mean_and_stderr(const std::vector<double>& x) {
  std::size_t n = x.size();
  if (n == 0) return {std::numeric_limits<double>::quiet_NaN(), std::numeric_limits<double>::quiet_NaN()};
  double mean = 0.0;
  for (double v : x) mean += v;
  mean /= static_cast<double>(n);
  if (n < 2) return {mean, std::numeric_limits<double>::quiet_NaN()};
  double var = 0.0;
  for (double v : x) var += (v - mean) * (v - mean);
  var /= static_cast<double>(n - 1);
  return {mean, std::sqrt(var / static_cast<double>(n))};
}

}  // namespace detail

inline FlowStatistics flow_statistics(const TradeTape& tape, std::size_t n_samples = 2000) {
  if (tape.trades.empty()) throw EstimationError("flow_statistics: empty tape");
  FlowStatistics st;
  st.n_trades = tape.size();
  st.elapsed_time = tape.horizon_time;
  const double T = st.elapsed_time;
  st.trade_rate = T > 0.0 ? static_cast<double>(st.n_trades) / T : std::numeric_limits<double>::quiet_NaN();

  double vol = 0.0, lq = 0.0, lq2 = 0.0;
  for (const auto& tr : tape.trades) {
    vol += tr.volume;
    double l = std::log(tr.volume);
    lq += l;
    lq2 += l * l;
  }
  double n = static_cast<double>(st.n_trades);
  st.q_mean = vol / n;
  st.q_logvar = lq2 / n - (lq / n) * (lq / n);
  st.volume_flow = vol / T;
  {
    const std::size_t nb = 20;
    std::vector<double> per(nb, 0.0);
    for (const auto& tr : tape.trades)
      per[std::min(nb - 1, static_cast<std::size_t>(tr.time / T * static_cast<double>(nb)))] += 1.0;
    for (auto& v : per) v /= T / static_cast<double>(nb);
    st.trade_rate_stderr = detail::batch_means(per, nb).second;
  }

  if (tape.analysis_only()) return st;

  std::vector<std::int64_t> children(tape.metaorders.size(), 0);
  for (const auto& tr : tape.trades) ++children[static_cast<std::size_t>(tr.metaorder_id)];

  std::int64_t initiated = 0;
  std::vector<double> durations, counts;
  double active_time = 0.0;
  for (const auto& mo : tape.metaorders) {
    double lo = std::max(0.0, mo.start_time), hi = std::min(T, mo.end_time());
    if (hi > lo) active_time += hi - lo;
    if (mo.start_time >= 0.0) {
      ++initiated;
      durations.push_back(mo.duration);
      if (mo.end_time() <= T) counts.push_back(static_cast<double>(children[static_cast<std::size_t>(mo.id)]));
    }
  }
  st.nu = static_cast<double>(initiated) / T;
  st.nu_stderr = std::sqrt(static_cast<double>(initiated)) / T;
  st.phi = active_time > 0.0 ? n / active_time : 0.0;
  std::tie(st.mean_duration, st.mean_duration_stderr) = detail::mean_and_stderr(durations);
  std::tie(st.mean_children, st.mean_children_stderr) = detail::mean_and_stderr(counts);
  st.completed = static_cast<std::int64_t>(counts.size());

  // active count on an even time grid, by sweeping start/end events
  std::vector<double> starts, ends;
  starts.reserve(tape.metaorders.size());
  ends.reserve(tape.metaorders.size());
  for (const auto& mo : tape.metaorders) {
    starts.push_back(mo.start_time);
    ends.push_back(mo.end_time());
  }
  std::sort(starts.begin(), starts.end());
  std::sort(ends.begin(), ends.end());
  st.active_times.resize(n_samples);
  st.active_counts.resize(n_samples);
  std::size_t is = 0, ie = 0;
  for (std::size_t i = 0; i < n_samples; ++i) {
    double t = T * (static_cast<double>(i) + 0.5) / static_cast<double>(n_samples);
    while (is < starts.size() && starts[is] <= t) ++is;
    while (ie < ends.size() && ends[ie] <= t) ++ie;
    st.active_times[i] = t;
    st.active_counts[i] = static_cast<double>(is - ie);
  }
  std::tie(st.active_mean, st.active_stderr) = detail::batch_means(st.active_counts);
  std::size_t h = n_samples / 2;
  std::vector<double> first(st.active_counts.begin(), st.active_counts.begin() + static_cast<std::ptrdiff_t>(h));
  std::vector<double> second(st.active_counts.begin() + static_cast<std::ptrdiff_t>(h), st.active_counts.end());
  std::tie(st.active_first_half, st.active_first_half_stderr) = detail::batch_means(first, 10);
  std::tie(st.active_second_half, st.active_second_half_stderr) = detail::batch_means(second, 10);
  return st;
}

}  // namespace orderflow
