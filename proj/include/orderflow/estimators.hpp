#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "orderflow/error.hpp"
#include "orderflow/fit.hpp"
#include "orderflow/flow.hpp"
#include "orderflow/price.hpp"
#include "orderflow/random.hpp"

namespace orderflow {

// One tape and (optionally) the price observed on it. Estimators pool the
// windows of several realizations; windows never straddle two tapes.
struct Realization {
  const TradeTape* tape = nullptr;
  const PricePath* price = nullptr;
};

struct ImbalanceSeries {
  std::int64_t window_T = 0;
  double a = 0.0;
  std::vector<double> values;
};

enum class Statistic { moment_2n, covariance, correlation, slope };

inline std::string to_string(Statistic s) {
  switch (s) {
    case Statistic::moment_2n: return "moment_2n";
    case Statistic::covariance: return "covariance";
    case Statistic::correlation: return "correlation";
    case Statistic::slope: return "slope";
  }
  return "?";
}

struct ScalingSurface {
  Statistic statistic = Statistic::moment_2n;
  int order = 1;  // n for moment_2n
  std::vector<std::int64_t> T_grid;
  std::vector<double> a_grid;
  std::vector<std::vector<double>> value, stderr_;  // [iT][ia]
  std::vector<std::vector<bool>> defined;

  void resize() {
    value.assign(T_grid.size(), std::vector<double>(a_grid.size(), std::numeric_limits<double>::quiet_NaN()));
    stderr_ = value;
    defined.assign(T_grid.size(), std::vector<bool>(a_grid.size(), false));
  }
  // column for one a, as x/y arrays for fitting
  std::vector<double> column(std::size_t ia) const {
    std::vector<double> c(T_grid.size());
    for (std::size_t i = 0; i < T_grid.size(); ++i) c[i] = value[i][ia];
    return c;
  }
  std::vector<double> T_values() const { return {T_grid.begin(), T_grid.end()}; }
};

namespace detail {

inline double pairwise_sum(const double* x, std::size_t n) {
  if (n <= 16) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += x[i];
    return s;
  }
  std::size_t h = n / 2;
  return pairwise_sum(x, h) + pairwise_sum(x + h, n - h);
}

inline double mean_of(const std::vector<double>& x) {
  return x.empty() ? std::numeric_limits<double>::quiet_NaN() : pairwise_sum(x.data(), x.size()) / static_cast<double>(x.size());
}

// mean and batch-means standard error of f(w) over windows
template <class F>
std::pair<double, double> window_mean(std::size_t n, F&& f, std::size_t n_batches = 20) {
  std::vector<double> v(n);
  for (std::size_t i = 0; i < n; ++i) v[i] = f(i);
  return batch_means(v, n_batches);
}

inline double volume_power(double q, double lq, double a) {
  if (a == 0.0) return 1.0;
  if (a == 1.0) return q;
  if (a == 2.0) return q * q;
  return std::exp(a * lq);
}

inline void check_tape(const TradeTape& t) {
  if (t.trades.empty()) throw EstimationError("estimator: empty tape");
}

}  // namespace detail

inline ImbalanceSeries generalized_imbalance(const TradeTape& tape, std::int64_t T, double a) {
  detail::check_tape(tape);
  if (T < 1 || T > tape.size()) throw EstimationError("generalized_imbalance: need 1 <= T <= N");
  if (a < 0.0) throw EstimationError("generalized_imbalance: a must be >= 0");
  ImbalanceSeries s{T, a, {}};
  std::int64_t nw = tape.size() / T;
  s.values.assign(static_cast<std::size_t>(nw), 0.0);
  for (std::int64_t w = 0; w < nw; ++w) {
    double acc = 0.0;
    for (std::int64_t k = w * T; k < (w + 1) * T; ++k) {
      const auto& tr = tape.trades[static_cast<std::size_t>(k)];
      acc += tr.sign * detail::volume_power(tr.volume, std::log(tr.volume), a);
    }
    s.values[static_cast<std::size_t>(w)] = acc;
  }
  return s;
}

// Window sums of eps q^a for every (T, a), and price changes per T, pooled
// across realizations. Built from one prefix-sum pass per a.
struct WindowTable {
  std::vector<std::int64_t> T_grid;
  std::vector<double> a_grid;
  std::vector<std::vector<std::vector<double>>> imbalance;  // [iT][ia][w]
  std::vector<std::vector<double>> delta;                   // [iT][w], empty without price
  bool has_price = false;
};

inline WindowTable build_window_table(std::span<const Realization> reals, std::span<const std::int64_t> T_grid,
                                      std::span<const double> a_grid, bool need_price) {
  if (reals.empty()) throw EstimationError("estimator: no realizations");
  WindowTable tab;
  tab.T_grid.assign(T_grid.begin(), T_grid.end());
  tab.a_grid.assign(a_grid.begin(), a_grid.end());
  tab.has_price = need_price;
  for (std::size_t i = 0; i < T_grid.size(); ++i) {
    if (T_grid[i] < 1) throw EstimationError("estimator: T must be >= 1");
    if (i > 0 && T_grid[i] <= T_grid[i - 1]) throw EstimationError("estimator: T grid must be increasing");
  }
  for (double a : a_grid)
    if (a < 0.0) throw EstimationError("estimator: a must be >= 0");
  tab.imbalance.assign(T_grid.size(), std::vector<std::vector<double>>(a_grid.size()));
  tab.delta.assign(T_grid.size(), {});

  std::vector<long double> prefix;
  std::vector<double> lq;
  for (const auto& r : reals) {
    detail::check_tape(*r.tape);
    const auto& trades = r.tape->trades;
    std::size_t N = trades.size();
    if (need_price && !r.price) throw EstimationError("estimator: price path missing for a realization");
    lq.resize(N);
    for (std::size_t k = 0; k < N; ++k) lq[k] = std::log(trades[k].volume);
    prefix.resize(N + 1);
    for (std::size_t ia = 0; ia < a_grid.size(); ++ia) {
      double a = a_grid[ia];
      prefix[0] = 0.0L;
      for (std::size_t k = 0; k < N; ++k)
        prefix[k + 1] = prefix[k] + static_cast<long double>(trades[k].sign * detail::volume_power(trades[k].volume, lq[k], a));
      for (std::size_t iT = 0; iT < T_grid.size(); ++iT) {
        auto T = static_cast<std::size_t>(T_grid[iT]);
        auto& out = tab.imbalance[iT][ia];
        for (std::size_t w = 0; (w + 1) * T <= N; ++w) out.push_back(static_cast<double>(prefix[(w + 1) * T] - prefix[w * T]));
      }
    }
    if (need_price) {
      for (std::size_t iT = 0; iT < T_grid.size(); ++iT) {
        auto T = static_cast<std::size_t>(T_grid[iT]);
        for (std::size_t w = 0; (w + 1) * T <= N; ++w)
          tab.delta[iT].push_back(r.price->at(static_cast<std::int64_t>((w + 1) * T)) - r.price->at(static_cast<std::int64_t>(w * T)));
      }
    }
  }
  for (std::size_t iT = 0; iT < T_grid.size(); ++iT) {
    std::size_t nw = tab.imbalance[iT].empty() ? 0 : tab.imbalance[iT][0].size();
    if (nw < 10)
      throw EstimationError("estimator: insufficient windows at T = " + std::to_string(T_grid[iT]) + " (" +
                            std::to_string(nw) + " < 10)");
  }
  return tab;
}

struct MomentScaling {
  std::vector<ScalingSurface> surfaces;          // one per order n
  std::vector<std::vector<ExponentFit>> fits;    // [n index][ia]; NaN exponent when unfittable
  std::vector<int> orders;
};

inline ExponentFit try_fit(const std::vector<double>& x, const std::vector<double>& y, const FitOptions& opt) {
  try {
    return fit_power_law(x, y, opt);
  } catch (const NumericalError&) {
    return ExponentFit{};
  }
}

inline MomentScaling moment_scaling(const WindowTable& tab, std::span<const int> orders, const FitOptions& fit = {false, 100, 1000}) {
  MomentScaling out;
  out.orders.assign(orders.begin(), orders.end());
  for (int n : orders) {
    if (n < 1) throw EstimationError("moment_scaling: order must be >= 1");
    ScalingSurface s;
    s.statistic = Statistic::moment_2n;
    s.order = n;
    s.T_grid = tab.T_grid;
    s.a_grid = tab.a_grid;
    s.resize();
    for (std::size_t iT = 0; iT < tab.T_grid.size(); ++iT)
      for (std::size_t ia = 0; ia < tab.a_grid.size(); ++ia) {
        const auto& v = tab.imbalance[iT][ia];
        auto [m, se] = detail::window_mean(v.size(), [&](std::size_t w) { return std::pow(v[w], 2 * n); });
        s.value[iT][ia] = m;
        s.stderr_[iT][ia] = se;
        s.defined[iT][ia] = std::isfinite(m);
      }
    std::vector<ExponentFit> fits;
    for (std::size_t ia = 0; ia < tab.a_grid.size(); ++ia) fits.push_back(try_fit(s.T_values(), s.column(ia), fit));
    out.surfaces.push_back(std::move(s));
    out.fits.push_back(std::move(fits));
  }
  return out;
}

inline MomentScaling moment_scaling(std::span<const Realization> reals, std::span<const std::int64_t> T_grid,
                                    std::span<const double> a_grid, std::span<const int> orders,
                                    const FitOptions& fit = {false, 100, 1000}) {
  auto tab = build_window_table(reals, T_grid, a_grid, false);
  return moment_scaling(tab, orders, fit);
}

// E[Delta_T^{2n}] per T, stored as a single a = 0 column.
inline MomentScaling price_moment_scaling(const WindowTable& tab, std::span<const int> orders,
                                          const FitOptions& fit = {false, 100, 1000}) {
  if (!tab.has_price) throw EstimationError("price_moment_scaling: no price data");
  MomentScaling out;
  out.orders.assign(orders.begin(), orders.end());
  for (int n : orders) {
    if (n < 1) throw EstimationError("price_moment_scaling: order must be >= 1");
    ScalingSurface s;
    s.statistic = Statistic::moment_2n;
    s.order = n;
    s.T_grid = tab.T_grid;
    s.a_grid = {0.0};
    s.resize();
    for (std::size_t iT = 0; iT < tab.T_grid.size(); ++iT) {
      const auto& d = tab.delta[iT];
      auto [m, se] = detail::window_mean(d.size(), [&](std::size_t w) { return std::pow(d[w], 2 * n); });
      s.value[iT][0] = m;
      s.stderr_[iT][0] = se;
      s.defined[iT][0] = std::isfinite(m);
    }
    out.fits.push_back({try_fit(s.T_values(), s.column(0), fit)});
    out.surfaces.push_back(std::move(s));
  }
  return out;
}

// Kurtosis Sigma4 / Sigma2^2 per (T, a); stderr from a jackknife over batches.
inline ScalingSurface kurtosis_surface(const WindowTable& tab, std::size_t n_batches = 20) {
  ScalingSurface s;
  s.statistic = Statistic::moment_2n;
  s.order = 2;
  s.T_grid = tab.T_grid;
  s.a_grid = tab.a_grid;
  s.resize();
  for (std::size_t iT = 0; iT < tab.T_grid.size(); ++iT)
    for (std::size_t ia = 0; ia < tab.a_grid.size(); ++ia) {
      const auto& v = tab.imbalance[iT][ia];
      std::size_t nb = std::min(n_batches, v.size());
      std::size_t len = v.size() / nb;
      std::vector<double> m2(nb, 0.0), m4(nb, 0.0);
      for (std::size_t b = 0; b < nb; ++b)
        for (std::size_t w = b * len; w < (b + 1) * len; ++w) {
          double x2 = v[w] * v[w];
          m2[b] += x2;
          m4[b] += x2 * x2;
        }
      double t2 = 0.0, t4 = 0.0;
      for (std::size_t b = 0; b < nb; ++b) {
        t2 += m2[b];
        t4 += m4[b];
      }
      double cnt = static_cast<double>(nb * len);
      double k = (t4 / cnt) / ((t2 / cnt) * (t2 / cnt));
      std::vector<double> jk(nb);
      double jm = 0.0;
      for (std::size_t b = 0; b < nb; ++b) {
        double c = cnt - static_cast<double>(len);
        double a2 = (t2 - m2[b]) / c, a4 = (t4 - m4[b]) / c;
        jk[b] = a4 / (a2 * a2);
        jm += jk[b];
      }
      jm /= static_cast<double>(nb);
      double var = 0.0;
      for (double x : jk) var += (x - jm) * (x - jm);
      var *= static_cast<double>(nb - 1) / static_cast<double>(nb);
      s.value[iT][ia] = k;
      s.stderr_[iT][ia] = std::sqrt(var);
      s.defined[iT][ia] = std::isfinite(k);
    }
  return s;
}

struct SurfaceWithFits {
  ScalingSurface surface;
  std::vector<ExponentFit> fits;  // per a
};

inline SurfaceWithFits covariance_surface(const WindowTable& tab, const FitOptions& fit = {false, 100, 1000}) {
  if (!tab.has_price) throw EstimationError("covariance_surface: no price data");
  SurfaceWithFits out;
  auto& s = out.surface;
  s.statistic = Statistic::covariance;
  s.T_grid = tab.T_grid;
  s.a_grid = tab.a_grid;
  s.resize();
  for (std::size_t iT = 0; iT < tab.T_grid.size(); ++iT)
    for (std::size_t ia = 0; ia < tab.a_grid.size(); ++ia) {
      const auto& v = tab.imbalance[iT][ia];
      const auto& d = tab.delta[iT];
      auto [m, se] = detail::window_mean(v.size(), [&](std::size_t w) { return d[w] * v[w]; });
      s.value[iT][ia] = m;
      s.stderr_[iT][ia] = se;
      s.defined[iT][ia] = std::isfinite(m);
    }
  for (std::size_t ia = 0; ia < tab.a_grid.size(); ++ia) out.fits.push_back(try_fit(s.T_values(), s.column(ia), fit));
  return out;
}

inline SurfaceWithFits covariance_surface(std::span<const Realization> reals, std::span<const std::int64_t> T_grid,
                                          std::span<const double> a_grid, const FitOptions& fit = {false, 100, 1000}) {
  return covariance_surface(build_window_table(reals, T_grid, a_grid, true), fit);
}

namespace detail {

inline double sample_correlation(const std::vector<double>& x, const std::vector<double>& y, std::size_t lo, std::size_t hi) {
  double n = static_cast<double>(hi - lo);
  double mx = 0.0, my = 0.0;
  for (std::size_t i = lo; i < hi; ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = lo; i < hi; ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (!(sxx > 0.0) || !(syy > 0.0)) return std::numeric_limits<double>::quiet_NaN();
  return sxy / std::sqrt(sxx * syy);
}

}  // namespace detail

// Sample correlation of (Delta_w, I^a_w); stderr from batch correlations.
inline ScalingSurface correlation_surface(const WindowTable& tab, std::size_t n_batches = 20) {
  if (!tab.has_price) throw EstimationError("correlation_surface: no price data");
  ScalingSurface s;
  s.statistic = Statistic::correlation;
  s.T_grid = tab.T_grid;
  s.a_grid = tab.a_grid;
  s.resize();
  for (std::size_t iT = 0; iT < tab.T_grid.size(); ++iT)
    for (std::size_t ia = 0; ia < tab.a_grid.size(); ++ia) {
      const auto& v = tab.imbalance[iT][ia];
      const auto& d = tab.delta[iT];
      double r = detail::sample_correlation(d, v, 0, v.size());
      s.value[iT][ia] = r;
      s.defined[iT][ia] = std::isfinite(r);
      std::size_t nb = std::min(n_batches, v.size() / 2);
      std::size_t len = v.size() / nb;
      std::vector<double> rb;
      for (std::size_t b = 0; b < nb; ++b) {
        double x = detail::sample_correlation(d, v, b * len, (b + 1) * len);
        if (std::isfinite(x)) rb.push_back(x);
      }
      s.stderr_[iT][ia] = rb.size() > 1 ? detail::mean_and_stderr(rb).second : std::numeric_limits<double>::quiet_NaN();
    }
  return s;
}

inline ScalingSurface correlation_surface(std::span<const Realization> reals, std::span<const std::int64_t> T_grid,
                                          std::span<const double> a_grid) {
  return correlation_surface(build_window_table(reals, T_grid, a_grid, true));
}

struct CollapseResult {
  double max_ks = 0.0;
  std::vector<std::vector<double>> pairwise;  // KS between series i and j
};

struct CollapseOptions {
  // > 0: add uniform jitter of this width before rescaling (lattice-valued I0 has spacing 2)
  double lattice_spacing = 0.0;
  std::uint64_t jitter_key = 0x5eed;
};

namespace detail {

// Exact two-sample KS statistic on sorted samples.
inline double ks_sorted(const std::vector<double>& a, const std::vector<double>& b) {
  std::size_t i = 0, j = 0;
  double na = static_cast<double>(a.size()), nb = static_cast<double>(b.size()), d = 0.0;
  while (i < a.size() && j < b.size()) {
    double x = std::min(a[i], b[j]);
    while (i < a.size() && a[i] <= x) ++i;
    while (j < b.size() && b[j] <= x) ++j;
    d = std::max(d, std::abs(static_cast<double>(i) / na - static_cast<double>(j) / nb));
  }
  return d;
}

inline std::vector<std::vector<double>> jittered_sorted(std::span<const ImbalanceSeries> series, const CollapseOptions& opt) {
  std::vector<std::vector<double>> out(series.size());
  for (std::size_t s = 0; s < series.size(); ++s) {
    out[s] = series[s].values;
    if (opt.lattice_spacing > 0.0)
      for (std::size_t i = 0; i < out[s].size(); ++i)
        out[s][i] += opt.lattice_spacing * (keyed_uniform(mix_key(opt.jitter_key, s), i) - 0.5);
    std::sort(out[s].begin(), out[s].end());
  }
  return out;
}

inline CollapseResult collapse_sorted(const std::vector<std::vector<double>>& sorted, std::span<const ImbalanceSeries> series, double chi) {
  CollapseResult r;
  std::size_t k = sorted.size();
  r.pairwise.assign(k, std::vector<double>(k, 0.0));
  std::vector<std::vector<double>> scaled(k);
  for (std::size_t s = 0; s < k; ++s) {
    double f = std::pow(static_cast<double>(series[s].window_T), -chi);
    scaled[s] = sorted[s];
    for (auto& x : scaled[s]) x *= f;
  }
  for (std::size_t i = 0; i < k; ++i)
    for (std::size_t j = i + 1; j < k; ++j) {
      double d = ks_sorted(scaled[i], scaled[j]);
      r.pairwise[i][j] = r.pairwise[j][i] = d;
      r.max_ks = std::max(r.max_ks, d);
    }
  return r;
}

}  // namespace detail

// Max pairwise KS distance between the series rescaled by T^-chi.
inline CollapseResult distribution_collapse(std::span<const ImbalanceSeries> series, double chi, const CollapseOptions& opt = {}) {
  if (series.size() < 2) throw EstimationError("distribution_collapse: need >= 2 values of T");
  return detail::collapse_sorted(detail::jittered_sorted(series, opt), series, chi);
}

struct CollapseScan {
  double best_chi = std::numeric_limits<double>::quiet_NaN();
  double best_ks = std::numeric_limits<double>::infinity();
  std::vector<double> chi, ks;
};

inline CollapseScan scan_collapse(std::span<const ImbalanceSeries> series, double chi_lo, double chi_hi, double step,
                                  const CollapseOptions& opt = {}) {
  if (series.size() < 2) throw EstimationError("distribution_collapse: need >= 2 values of T");
  auto sorted = detail::jittered_sorted(series, opt);
  CollapseScan out;
  int n = static_cast<int>(std::floor((chi_hi - chi_lo) / step + 1e-9));
  for (int i = 0; i <= n; ++i) {
    double c = chi_lo + i * step;
    double ks = detail::collapse_sorted(sorted, series, c).max_ks;
    out.chi.push_back(c);
    out.ks.push_back(ks);
    if (ks < out.best_ks) {
      out.best_ks = ks;
      out.best_chi = c;
    }
  }
  return out;
}

struct ImpactCurve {
  std::int64_t T = 0;
  double a = 0.0;
  std::vector<double> bin_imbalance;  // mean I^a in bin
  std::vector<double> mean_delta, stderr_delta;
  std::vector<std::size_t> count;
};

struct AggregatedImpact {
  std::vector<ImpactCurve> curves;  // one per T
  double chi = std::numeric_limits<double>::quiet_NaN();
  double omega = std::numeric_limits<double>::quiet_NaN();        // chi - 1/2
  double omega_naive = std::numeric_limits<double>::quiet_NaN();  // from E[Delta I]/E[I^2] vs T
};

// Windows binned by quantiles of I^a; mean price change per bin. With >= 2 T
// values also the collapse exponent of I0 and the two omegas.
inline AggregatedImpact aggregated_impact_curve(const WindowTable& tab, std::size_t ia, std::size_t n_bins,
                                                const CollapseOptions& copt = {.lattice_spacing = 2.0}) {
  if (!tab.has_price) throw EstimationError("aggregated_impact_curve: no price data");
  if (n_bins < 1) throw EstimationError("aggregated_impact_curve: n_bins must be >= 1");
  AggregatedImpact out;
  for (std::size_t iT = 0; iT < tab.T_grid.size(); ++iT) {
    const auto& v = tab.imbalance[iT][ia];
    const auto& d = tab.delta[iT];
    std::vector<std::size_t> idx(v.size());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    std::stable_sort(idx.begin(), idx.end(), [&](std::size_t x, std::size_t y) { return v[x] < v[y]; });
    ImpactCurve c;
    c.T = tab.T_grid[iT];
    c.a = tab.a_grid[ia];
    for (std::size_t b = 0; b < n_bins; ++b) {
      std::size_t lo = b * idx.size() / n_bins, hi = (b + 1) * idx.size() / n_bins;
      if (hi <= lo) continue;
      std::vector<double> dd;
      double im = 0.0;
      for (std::size_t k = lo; k < hi; ++k) {
        dd.push_back(d[idx[k]]);
        im += v[idx[k]];
      }
      auto [m, se] = detail::mean_and_stderr(dd);
      c.bin_imbalance.push_back(im / static_cast<double>(hi - lo));
      c.mean_delta.push_back(m);
      c.stderr_delta.push_back(se);
      c.count.push_back(hi - lo);
    }
    out.curves.push_back(std::move(c));
  }
  if (tab.T_grid.size() >= 2) {
    std::size_t i0 = 0;
    while (i0 < tab.a_grid.size() && tab.a_grid[i0] != 0.0) ++i0;
    if (i0 < tab.a_grid.size()) {
      std::vector<ImbalanceSeries> ser;
      for (std::size_t iT = 0; iT < tab.T_grid.size(); ++iT) ser.push_back({tab.T_grid[iT], 0.0, tab.imbalance[iT][i0]});
      auto scan = scan_collapse(ser, 0.3, 1.0, 0.005, copt);
      out.chi = scan.best_chi;
      out.omega = out.chi - 0.5;
    }
    // naive slope E[Delta I]/E[I^2] ~ T^-omega_naive
    std::vector<double> lx, ly;
    for (std::size_t iT = 0; iT < tab.T_grid.size(); ++iT) {
      const auto& v = tab.imbalance[iT][ia];
      const auto& d = tab.delta[iT];
      double sdi = 0.0, sii = 0.0;
      for (std::size_t w = 0; w < v.size(); ++w) {
        sdi += d[w] * v[w];
        sii += v[w] * v[w];
      }
      if (sdi > 0.0 && sii > 0.0) {
        lx.push_back(std::log(static_cast<double>(tab.T_grid[iT])));
        ly.push_back(std::log(sdi / sii));
      }
    }
    if (lx.size() >= 2) {
      double mx = detail::mean_of(lx), my = detail::mean_of(ly), sxy = 0.0, sxx = 0.0;
      for (std::size_t i = 0; i < lx.size(); ++i) {
        sxy += (lx[i] - mx) * (ly[i] - my);
        sxx += (lx[i] - mx) * (lx[i] - mx);
      }
      if (sxx > 0.0) out.omega_naive = -sxy / sxx;
    }
  }
  return out;
}

inline AggregatedImpact aggregated_impact_curve(std::span<const Realization> reals, std::span<const std::int64_t> T_list,
                                                double a, std::size_t n_bins) {
  std::vector<double> as{a};
  if (a != 0.0) as.insert(as.begin(), 0.0);
  auto tab = build_window_table(reals, T_list, as, true);
  return aggregated_impact_curve(tab, a == 0.0 ? 0 : 1, n_bins);
}

// Copy of the tape with every volume capped at f times its day's total volume.
inline TradeTape clip_volumes(const TradeTape& tape, double fraction, std::int64_t day_block) {
  if (!(fraction > 0.0) || fraction > 1.0) throw ConfigError("clip_fraction: must lie in (0, 1]");
  if (day_block < 1) throw ConfigError("day_block: must be >= 1");
  TradeTape out = tape;
  auto N = static_cast<std::size_t>(tape.size());
  auto D = static_cast<std::size_t>(day_block);
  for (std::size_t lo = 0; lo < N; lo += D) {
    std::size_t hi = std::min(N, lo + D);
    double day = 0.0;
    for (std::size_t k = lo; k < hi; ++k) day += tape.trades[k].volume;
    double cap = fraction * day;
    for (std::size_t k = lo; k < hi; ++k) out.trades[k].volume = std::min(out.trades[k].volume, cap);
  }
  return out;
}

// Crossover of an exponent-vs-a curve: least squares of y = c + s min(a - b, 0),
// linear in (c, s) for fixed b, with b scanned between the grid points so that
// at least two points sit on the sloped side and min_plateau on the flat side.
struct HingeFit {
  double breakpoint = std::numeric_limits<double>::quiet_NaN();
  double plateau = std::numeric_limits<double>::quiet_NaN();
  double slope = std::numeric_limits<double>::quiet_NaN();
  double sse = std::numeric_limits<double>::infinity();
};

inline std::optional<HingeFit> hinge_fit(std::span<const double> a, std::span<const double> y, std::size_t min_plateau = 3,
                                         double step = 0.005) {
  std::vector<double> xs, ys;
  for (std::size_t i = 0; i < a.size() && i < y.size(); ++i)
    if (std::isfinite(y[i])) {
      xs.push_back(a[i]);
      ys.push_back(y[i]);
    }
  if (xs.size() < 2 + min_plateau) return std::nullopt;
  HingeFit best;
  double lo = xs[1], hi = xs[xs.size() - min_plateau];
  for (double b = lo; b <= hi + 1e-12; b += step) {
    // normal equations for y = c + s u, u = min(a - b, 0)
    double n = 0, su = 0, suu = 0, sy = 0, suy = 0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
      double u = std::min(xs[i] - b, 0.0);
      n += 1;
      su += u;
      suu += u * u;
      sy += ys[i];
      suy += u * ys[i];
    }
    double det = n * suu - su * su;
    if (!(det > 0.0)) continue;
    double sl = (n * suy - su * sy) / det;
    double c = (sy - sl * su) / n;
    double sse = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
      double r = ys[i] - c - sl * std::min(xs[i] - b, 0.0);
      sse += r * r;
    }
    if (sse < best.sse) best = {b, c, sl, sse};
  }
  if (!std::isfinite(best.breakpoint)) return std::nullopt;
  return best;
}

struct VolumeBinCorrelation {
  double log_lo = 0.0, log_hi = 0.0;  // bin edges in ln(q / phi_D)
  double center_q = 0.0;              // geometric mean of raw q in the bin
  std::size_t n_trades = 0;
  std::vector<std::int64_t> lags;
  std::vector<double> correlation;
  bool reliable = false;  // >= 1e4 trades
  bool largest = false;   // top bin, conventionally dropped
  ExponentFit fit;        // C(tau) ~ tau^-gamma; exponent reported as -gamma
  double gamma = std::numeric_limits<double>::quiet_NaN();
};

struct VolumeBinOptions {
  std::int64_t day_block = 10000;
  std::int64_t lag_lo = 10, lag_hi = 1000;  // fit range
  int lags_per_decade = 10;
  std::size_t min_trades = 10000;
  // the fit stops at the first lag whose correlation is below noise_floor / sqrt(n_trades)
  double noise_floor = 3.0;
  // bin edges span these quantiles of ln(q / phi_D); outer tails are dropped
  double quantile_lo = 0.01, quantile_hi = 0.99;
};

// Sign autocorrelation within logarithmic bins of q / phi_D; lags count trades
// of the bin-restricted subsequence.
inline std::vector<VolumeBinCorrelation> sign_autocorrelation_by_volume_bin(std::span<const Realization> reals, std::size_t n_bins,
                                                                            const VolumeBinOptions& opt = {}) {
  if (n_bins < 2) throw EstimationError("sign_autocorrelation_by_volume_bin: need >= 2 bins");
  if (reals.empty()) throw EstimationError("sign_autocorrelation_by_volume_bin: no tapes");
  // rescaled log volumes per realization
  std::vector<std::vector<double>> lx(reals.size());
  std::vector<double> all;
  for (std::size_t r = 0; r < reals.size(); ++r) {
    const auto& tape = *reals[r].tape;
    detail::check_tape(tape);
    auto N = static_cast<std::size_t>(tape.size());
    auto D = static_cast<std::size_t>(opt.day_block);
    lx[r].resize(N);
    for (std::size_t lo = 0; lo < N; lo += D) {
      std::size_t hi = std::min(N, lo + D);
      double day = 0.0;
      for (std::size_t k = lo; k < hi; ++k) day += tape.trades[k].volume;
      for (std::size_t k = lo; k < hi; ++k) lx[r][k] = std::log(tape.trades[k].volume / day);
    }
    all.insert(all.end(), lx[r].begin(), lx[r].end());
  }
  std::sort(all.begin(), all.end());
  auto quant = [&](double p) { return all[static_cast<std::size_t>(p * static_cast<double>(all.size() - 1))]; };
  double lo = quant(opt.quantile_lo), hi = quant(opt.quantile_hi);
  if (!(hi > lo)) throw EstimationError("sign_autocorrelation_by_volume_bin: volumes are degenerate");
  double width = (hi - lo) / static_cast<double>(n_bins);

  std::vector<std::int64_t> lags;
  for (int k = 0;; ++k) {
    auto l = static_cast<std::int64_t>(std::llround(std::pow(10.0, static_cast<double>(k) / opt.lags_per_decade)));
    if (l > opt.lag_hi) break;
    if (lags.empty() || l > lags.back()) lags.push_back(l);
  }

  std::vector<VolumeBinCorrelation> out(n_bins);
  for (std::size_t b = 0; b < n_bins; ++b) {
    auto& bin = out[b];
    bin.log_lo = lo + width * static_cast<double>(b);
    bin.log_hi = bin.log_lo + width;
    bin.largest = b + 1 == n_bins;
    bin.lags = lags;
    std::vector<double> num(lags.size(), 0.0), den(lags.size(), 0.0);
    double lq_sum = 0.0;
    for (std::size_t r = 0; r < reals.size(); ++r) {
      const auto& trades = reals[r].tape->trades;
      std::vector<std::int8_t> s;
      for (std::size_t k = 0; k < trades.size(); ++k) {
        double x = lx[r][k];
        bool in = x >= bin.log_lo && (b + 1 == n_bins ? x <= bin.log_hi : x < bin.log_hi);
        if (in) {
          s.push_back(static_cast<std::int8_t>(trades[k].sign));
          lq_sum += std::log(trades[k].volume);
        }
      }
      bin.n_trades += s.size();
      for (std::size_t li = 0; li < lags.size(); ++li) {
        auto L = static_cast<std::size_t>(lags[li]);
        if (s.size() <= L) continue;
        long long acc = 0;
        for (std::size_t i = 0; i + L < s.size(); ++i) acc += s[i] * s[i + L];
        num[li] += static_cast<double>(acc);
        den[li] += static_cast<double>(s.size() - L);
      }
    }
    bin.center_q = bin.n_trades ? std::exp(lq_sum / static_cast<double>(bin.n_trades)) : 0.0;
    bin.correlation.resize(lags.size());
    for (std::size_t li = 0; li < lags.size(); ++li)
      bin.correlation[li] = den[li] > 0.0 ? num[li] / den[li] : std::numeric_limits<double>::quiet_NaN();
    bin.reliable = bin.n_trades >= opt.min_trades;
    if (bin.reliable) {
      std::vector<double> x, y;
      double floor = opt.noise_floor / std::sqrt(static_cast<double>(bin.n_trades));
      for (std::size_t li = 0; li < lags.size(); ++li) {
        if (lags[li] < opt.lag_lo || lags[li] > opt.lag_hi) continue;
        if (!(bin.correlation[li] > floor)) break;
        x.push_back(static_cast<double>(lags[li]));
        y.push_back(bin.correlation[li]);
      }
      bin.fit = try_fit(x, y, {});
      bin.gamma = -bin.fit.exponent;
    }
  }
  return out;
}

}  // namespace orderflow
