#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

#include "orderflow/error.hpp"
#include "orderflow/flow.hpp"
#include "orderflow/params.hpp"
#include "orderflow/random.hpp"

namespace orderflow {

// 2 Gamma(1/2 + beta) Gamma(1 - beta) / sqrt(pi)
inline double b_beta(double beta) {
  return 2.0 * std::tgamma(0.5 + beta) * std::tgamma(1.0 - beta) / std::sqrt(M_PI);
}

struct ImpactTrajectory {
  std::int64_t metaorder_id = 0;
  PropagatorMode mode = PropagatorMode::two_time;
  double I1 = 0.0;      // I0 in standard mode
  double beta_q = 0.0;  // 0 in permanent mode
};

inline double mode_beta(const Metaorder& mo, const ModelParams& p, PropagatorMode mode) {
  return mode == PropagatorMode::permanent ? 0.0 : beta_q(p, mo.q);
}

// Two-time peak scale I1(q, phi); also the scale of the random impact.
inline double two_time_scale(double q, double phi, double beta, const ModelParams& p) {
  return b_beta(beta) * std::sqrt(phi) * p.theta0 * std::sqrt(q) * std::pow(phi * effective_tau0(p), beta);
}

inline ImpactTrajectory impact_trajectory(const Metaorder& mo, const ModelParams& p, PropagatorMode mode) {
  ImpactTrajectory tr;
  tr.metaorder_id = mo.id;
  tr.mode = mode;
  tr.beta_q = mode_beta(mo, p, mode);
  if (mode == PropagatorMode::standard) {
    if (!(tr.beta_q < 1.0)) throw DomainError("standard propagator needs beta < 1");
    tr.I1 = mo.participation * p.theta0 * std::sqrt(mo.q) * std::pow(effective_tau0(p), tr.beta_q) / (1.0 - tr.beta_q);
  } else {
    tr.I1 = two_time_scale(mo.q, mo.participation, tr.beta_q, p);
  }
  return tr;
}

namespace detail {

// x^{1-b} - (x-1)^{1-b} for x >= 1, without cancellation at large x
inline double decay_shape(double x, double b) {
  return std::pow(x, 1.0 - b) * -std::expm1((1.0 - b) * std::log1p(-1.0 / x));
}

inline double trajectory_value(const ImpactTrajectory& tr, double s, double t) {
  if (t <= 0.0) return 0.0;
  switch (tr.mode) {
    case PropagatorMode::permanent:
      return tr.I1 * std::sqrt(std::min(t, s));
    case PropagatorMode::two_time:
      if (t <= s) return tr.I1 * std::sqrt(t);
      if (tr.beta_q == 0.0) return tr.I1 * std::sqrt(s);
      return tr.I1 * std::sqrt(s) * decay_shape(t / s, tr.beta_q);
    case PropagatorMode::standard:
      if (t <= s) return tr.I1 * std::pow(t, 1.0 - tr.beta_q);
      return tr.I1 * std::pow(s, 1.0 - tr.beta_q) * decay_shape(t / s, tr.beta_q);
  }
  return 0.0;
}

}  // namespace detail

// Unsigned impact of a buy metaorder, `elapsed` time units after its start.
inline double impact_trajectory_value(const Metaorder& mo, double elapsed, const ModelParams& p, PropagatorMode mode) {
  if (elapsed < 0.0) throw DomainError("impact_trajectory_value: elapsed must be >= 0");
  return detail::trajectory_value(impact_trajectory(mo, p, mode), mo.duration, elapsed);
}

inline double peak_impact(const Metaorder& mo, const ModelParams& p, PropagatorMode mode) {
  return impact_trajectory_value(mo, mo.duration, p, mode);
}

struct PricePath {
  std::vector<std::int64_t> grid;  // boundary g: before trade g (g = N: after the last trade)
  std::vector<double> total, deterministic, random_impact, fundamental;

  bool dense() const { return !grid.empty() && grid.front() == 0 && grid.back() == static_cast<std::int64_t>(grid.size()) - 1; }

  double at(std::int64_t g) const {
    if (dense()) {
      if (g < 0 || g >= static_cast<std::int64_t>(grid.size())) throw DomainError("price grid has no point " + std::to_string(g));
      return total[static_cast<std::size_t>(g)];
    }
    auto it = std::lower_bound(grid.begin(), grid.end(), g);
    if (it == grid.end() || *it != g) throw DomainError("price grid has no point " + std::to_string(g));
    return total[static_cast<std::size_t>(it - grid.begin())];
  }
};

inline std::vector<std::int64_t> full_grid(std::int64_t n_trades) {
  std::vector<std::int64_t> g(static_cast<std::size_t>(n_trades) + 1);
  for (std::size_t i = 0; i < g.size(); ++i) g[i] = static_cast<std::int64_t>(i);
  return g;
}

// Geometric grid of boundaries in [0, N], `per_decade` points per decade.
inline std::vector<std::int64_t> geometric_grid(std::int64_t n_trades, int per_decade) {
  std::vector<std::int64_t> g{0};
  for (int k = 0;; ++k) {
    auto v = static_cast<std::int64_t>(std::llround(std::pow(10.0, static_cast<double>(k) / per_decade)));
    if (v > n_trades) break;
    if (v > g.back()) g.push_back(v);
  }
  if (g.back() != n_trades) g.push_back(n_trades);
  return g;
}

namespace detail {

inline std::vector<double> grid_times(const TradeTape& tape, std::span<const std::int64_t> grid) {
  std::vector<double> t(grid.size());
  std::int64_t n = tape.size();
  for (std::size_t i = 0; i < grid.size(); ++i) {
    std::int64_t g = grid[i];
    if (g < 0 || g > n) throw DomainError("price grid point " + std::to_string(g) + " outside [0, N]");
    if (i > 0 && g < grid[i - 1]) throw DomainError("price grid must be non-decreasing");
    t[i] = g == 0 ? 0.0 : tape.trades[static_cast<std::size_t>(g - 1)].time;
  }
  return t;
}

// u^-beta = (1/Gamma(beta)) ∫ exp(beta y - e^y u) dy, trapezoid on a fixed y grid.
// Nodes below the grid are lumped into one rate-0 mode.
class DecayModes {
 public:
  DecayModes(double lag_min, double lag_max, double h = 0.7) : h_(h) {
    y_min_ = std::log(1e-5 / lag_max);
    double y_max = std::log(1e10 / lag_min);
    for (double y = y_min_; y <= y_max; y += h_) {
      y_.push_back(y);
      rate_.push_back(std::exp(y));
    }
    state_.assign(y_.size(), 0.0);
  }

  std::size_t size() const { return y_.size(); }

  // Adds c [k(tau) - k(tau - s)], k(u) = u^{1-beta}, seen from `lag` = t_now - end.
  void inject(double c, double beta, double s, double lag) {
    double gb = std::tgamma(beta);
    double scale = c * (1.0 - beta);
    // nodes below y_min summed as a geometric series (rates ~ 0 there), which
    // keeps the representation an exact infinite trapezoid sum
    permanent_ += scale * h_ * std::exp(beta * y_min_) / (std::expm1(beta * h_) * gb) * s;
    double wstep = std::exp(beta * h_);
    double w = h_ * std::exp(beta * y_min_) / gb;
    for (std::size_t j = 0; j < y_.size(); ++j, w *= wstep) {
      double rl = rate_[j] * lag;
      if (rl > 40.0) break;
      state_[j] += scale * w / rate_[j] * std::exp(-rl) * -std::expm1(-rate_[j] * s);
      live_ = std::max(live_, j + 1);
    }
  }

  void add_permanent(double v) { permanent_ += v; }

  void advance(double dt) {
    if (dt <= 0.0) return;
    // rates increase with j, so everything past the first dead mode is dead too
    for (std::size_t j = 0; j < live_; ++j) {
      double rd = rate_[j] * dt;
      if (rd > 40.0) {
        std::fill(state_.begin() + static_cast<std::ptrdiff_t>(j), state_.begin() + static_cast<std::ptrdiff_t>(live_), 0.0);
        live_ = j;
        break;
      }
      state_[j] *= std::exp(-rd);
    }
  }

  double value() const {
    double v = permanent_;
    for (std::size_t j = 0; j < live_; ++j) v += state_[j];
    return v;
  }

 private:
  double h_;
  double y_min_;
  std::vector<double> y_, rate_, state_;
  double permanent_ = 0.0;
  std::size_t live_ = 0;  // modes at and above live_ are exactly zero
};

}  // namespace detail

// Brownian part at rate sigma_F^2 (1 - rho^2) per unit time plus an informed
// step rho sigma_F / sqrt(nu) eps_i q_i^psi at every initiation after t = 0.
inline std::vector<double> fundamental_path(const TradeTape& tape, const ModelParams& p,
                                            std::span<const std::int64_t> grid, RandomStream& rng) {
  if (p.rho < 0.0 || !(p.rho < 1.0)) throw ConfigError("rho: must lie in [0, 1)");
  std::vector<double> out(grid.size(), 0.0);
  if (p.sigma_F == 0.0) return out;
  auto times = detail::grid_times(tape, grid);
  double diff = p.sigma_F * std::sqrt(1.0 - p.rho * p.rho);
  double c = p.rho > 0.0 ? p.rho * p.sigma_F / std::sqrt(p.nu) : 0.0;
  if (c > 0.0 && tape.analysis_only()) throw ConfigError("rho: informed steps need the metaorder registry");

  std::size_t next = 0;
  while (next < tape.metaorders.size() && tape.metaorders[next].start_time <= 0.0) ++next;
  double level = 0.0, t_prev = 0.0;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    double t = times[i];
    if (t > t_prev) level += diff * std::sqrt(t - t_prev) * rng.normal();
    t_prev = t;
    if (c > 0.0) {
      while (next < tape.metaorders.size() && tape.metaorders[next].start_time <= t) {
        const auto& mo = tape.metaorders[next++];
        level += c * mo.sign * (p.psi == 0.0 ? 1.0 : std::pow(mo.q, p.psi));
      }
    }
    out[i] = level;
  }
  return out;
}

// Deterministic + random impact + fundamental on the grid. Active metaorders are
// evaluated in closed form; finished ones are folded into a sum of exponentials
// so the cost is O(N_meta M + |grid| M) with M ~ 80 modes.
inline PricePath assemble_price_path(const TradeTape& tape, const ModelParams& params, PropagatorMode mode,
                                     std::span<const std::int64_t> grid, RandomStream& rng) {
  // tau0 = 1/trade_rate is a quadrature; resolve it once, not per metaorder
  ModelParams p = params;
  p.tau0 = effective_tau0(params);
  PricePath path;
  path.grid.assign(grid.begin(), grid.end());
  auto times = detail::grid_times(tape, grid);
  std::size_t G = grid.size();
  path.deterministic.assign(G, 0.0);
  path.random_impact.assign(G, 0.0);

  RandomStream fund_rng = rng.split(11);
  path.fundamental = fundamental_path(tape, p, grid, fund_rng);

  bool any_impact = (p.theta0 > 0.0 || p.z_inf > 0.0) && !tape.metaorders.empty() && G > 0;
  if (any_impact) {
    const std::uint64_t eta_key = rng.split(12).key();
    const auto& mos = tape.metaorders;
    std::vector<ImpactTrajectory> traj(mos.size());
    std::vector<double> zscale(mos.size(), 0.0);
    double first_start = 0.0, min_s = mos.front().duration;
    for (std::size_t i = 0; i < mos.size(); ++i) {
      traj[i] = impact_trajectory(mos[i], p, mode);
      if (p.z_inf > 0.0)
        zscale[i] = p.z_inf * two_time_scale(mos[i].q, mos[i].participation, beta_q(p, mos[i].q), p) *
                    keyed_normal(eta_key, static_cast<std::uint64_t>(mos[i].id));
      first_start = std::min(first_start, mos[i].start_time);
      min_s = std::min(min_s, mos[i].duration);
    }
    std::vector<std::size_t> by_end(mos.size());
    for (std::size_t i = 0; i < by_end.size(); ++i) by_end[i] = i;
    std::sort(by_end.begin(), by_end.end(), [&](std::size_t a, std::size_t b) {
      return mos[a].end_time() < mos[b].end_time() || (mos[a].end_time() == mos[b].end_time() && a < b);
    });

    double lag_max = std::max(times.back() - first_start, 1.0);
    detail::DecayModes modes(min_s, lag_max);
    double rand_frozen = 0.0;
    std::vector<std::size_t> active;
    std::vector<std::size_t> slot(mos.size(), 0);
    std::size_t ps = 0, pe = 0;
    double t_modes = times.front();

    for (std::size_t gi = 0; gi < G; ++gi) {
      double t = times[gi];
      modes.advance(t - t_modes);
      t_modes = t;
      while (ps < mos.size() && mos[ps].start_time < t) {
        slot[ps] = active.size();
        active.push_back(ps++);
      }
      while (pe < by_end.size() && mos[by_end[pe]].end_time() <= t) {
        std::size_t i = by_end[pe++];
        const auto& mo = mos[i];
        const auto& tr = traj[i];
        // swap-remove from the active list
        std::size_t k = slot[i];
        active[k] = active.back();
        slot[active[k]] = k;
        active.pop_back();

        double s = mo.duration;
        rand_frozen += zscale[i] * std::sqrt(s);
        if (p.theta0 == 0.0) continue;
        if (tr.mode == PropagatorMode::permanent || tr.beta_q == 0.0) {
          double peak = tr.mode == PropagatorMode::standard ? tr.I1 * s : tr.I1 * std::sqrt(s);
          modes.add_permanent(mo.sign * peak);
        } else {
          double c = tr.mode == PropagatorMode::two_time ? tr.I1 * std::pow(s, tr.beta_q - 0.5) : tr.I1;
          modes.inject(mo.sign * c, tr.beta_q, s, t - mo.end_time());
        }
      }
      double det = p.theta0 > 0.0 ? modes.value() : 0.0;
      double rnd = rand_frozen;
      for (std::size_t i : active) {
        double u = t - mos[i].start_time;
        if (p.theta0 > 0.0) det += mos[i].sign * detail::trajectory_value(traj[i], mos[i].duration, u);
        rnd += zscale[i] * std::sqrt(u);
      }
      path.deterministic[gi] = det;
      path.random_impact[gi] = rnd;
    }
  }

  path.total.resize(G);
  for (std::size_t i = 0; i < G; ++i) path.total[i] = path.deterministic[i] + path.random_impact[i] + path.fundamental[i];
  return path;
}

}  // namespace orderflow
