#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <memory>
#include <vector>

#include <fftw3.h>

#include "orderflow/error.hpp"
#include "orderflow/params.hpp"
#include "orderflow/random.hpp"

namespace orderflow {

// Pareto duration with tail mu_q, by inverse CDF.
inline double sample_duration(const ModelParams& p, double q, RandomStream& rng) {
  if (!(q > 0.0)) throw DomainError("sample_duration: q must be > 0");
  double mu = mu_q(p, q);
  if (!(mu > 1.0)) throw ConfigError("mu1/lambda: mu_q = " + std::to_string(mu) + " <= 1 at q = " + std::to_string(q));
  return p.s0 * std::pow(rng.uniform_pos(), -1.0 / mu);
}

// Total duration of a metaorder alive at a random instant: density ∝ s Psi_q(s).
inline double sample_size_biased_duration(const ModelParams& p, double q, RandomStream& rng) {
  double mu = mu_q(p, q);
  if (!(mu > 1.0)) throw ConfigError("mu1/lambda: mean duration diverges at q = " + std::to_string(q));
  return p.s0 * std::pow(rng.uniform_pos(), -1.0 / (mu - 1.0));
}

inline double sample_child_volume(const ModelParams& p, RandomStream& rng) {
  if (p.sigma_logq == 0.0) return std::exp(p.m_logq);
  return std::exp(p.m_logq + p.sigma_logq * rng.normal());
}

struct SignSequence {
  std::vector<std::int8_t> signs;
  double realized_amplitude = 0.0;  // LS fit of C(k) = A k^-gamma over lags 1..16
  double taper_fraction = 0.0;      // clipped negative spectral mass / total
};

inline double sign_correlation_target(std::int64_t k, const ModelParams& p) {
  if (k < 1) throw DomainError("sign_correlation_target: lag must be >= 1");
  if (p.Gamma_amp == 0.0) return 0.0;
  double r = std::min(1.0, p.Gamma_amp * std::pow(static_cast<double>(k), -p.gamma_cross));
  return 2.0 / M_PI * std::asin(r);
}

namespace detail {

struct FftwFree {
  void operator()(void* ptr) const { fftw_free(ptr); }
};
using FftwBuffer = std::unique_ptr<fftw_complex[], FftwFree>;

inline FftwBuffer fftw_buffer(std::size_t n) {
  auto* raw = static_cast<fftw_complex*>(fftw_malloc(sizeof(fftw_complex) * n));
  if (!raw) throw NumericalError("fftw_malloc failed");
  return FftwBuffer(raw);
}

// In-place forward DFT. FFTW_ESTIMATE keeps plans (and results) reproducible.
inline void fft_inplace(fftw_complex* data, std::size_t n) {
  fftw_plan plan = fftw_plan_dft_1d(static_cast<int>(n), data, data, FFTW_FORWARD, FFTW_ESTIMATE);
  if (!plan) throw NumericalError("fftw plan creation failed for n = " + std::to_string(n));
  fftw_execute(plan);
  fftw_destroy_plan(plan);
}

inline std::size_t smooth_size_at_least(std::size_t n) {
  for (std::size_t m = std::max<std::size_t>(n, 1);; ++m) {
    std::size_t r = m;
    for (std::size_t f : {2, 3, 5, 7})
      while (r % f == 0) r /= f;
    if (r == 1) return m;
  }
}

inline double fit_amplitude(const std::vector<std::int8_t>& s, double gamma, std::size_t max_lag) {
  std::size_t n = s.size();
  double num = 0.0, den = 0.0;
  for (std::size_t k = 1; k <= max_lag && k < n; ++k) {
    long long acc = 0;
    for (std::size_t i = 0; i + k < n; ++i) acc += s[i] * s[i + k];
    double c = static_cast<double>(acc) / static_cast<double>(n - k);
    double basis = std::pow(static_cast<double>(k), -gamma);
    num += c * basis;
    den += basis * basis;
  }
  return den > 0.0 ? num / den : 0.0;
}

}  // namespace detail

// Signs of a stationary Gaussian sequence with covariance min(1, Gamma k^-gamma),
// synthesized exactly by circulant embedding.
inline SignSequence generate_correlated_signs(std::int64_t n, const ModelParams& p, RandomStream& rng) {
  if (n < 1) throw DomainError("generate_correlated_signs: n must be >= 1");
  SignSequence out;
  out.signs.resize(static_cast<std::size_t>(n));
  if (p.Gamma_amp == 0.0) {
    for (auto& s : out.signs) s = (rng.bits() >> 63) ? 1 : -1;
    return out;
  }
  if (!(p.gamma_cross > 0.0 && p.gamma_cross < 2.0))
    throw DomainError("generate_correlated_signs: gamma_cross must lie in (0, 2)");

  std::size_t half = detail::smooth_size_at_least(std::max<std::size_t>(static_cast<std::size_t>(n), 2));
  std::size_t M = 2 * half;
  auto cov = [&](std::size_t k) {
    if (k == 0) return 1.0;
    return std::min(1.0, p.Gamma_amp * std::pow(static_cast<double>(k), -p.gamma_cross));
  };

  auto buf = detail::fftw_buffer(M);
  for (std::size_t k = 0; k < M; ++k) {
    buf[k][0] = cov(k <= half ? k : M - k);
    buf[k][1] = 0.0;
  }
  detail::fft_inplace(buf.get(), M);

  std::vector<double> eig(M);
  double neg = 0.0, tot = 0.0;
  for (std::size_t j = 0; j < M; ++j) {
    double l = buf[j][0];
    tot += std::abs(l);
    if (l < 0.0) {
      neg += -l;
      l = 0.0;
    }
    eig[j] = l;
  }
  out.taper_fraction = tot > 0.0 ? neg / tot : 0.0;

  for (std::size_t j = 0; j < M; ++j) {
    double a = std::sqrt(eig[j] / static_cast<double>(M));
    buf[j][0] = a * rng.normal();
    buf[j][1] = a * rng.normal();
  }
  detail::fft_inplace(buf.get(), M);
  for (std::size_t i = 0; i < out.signs.size(); ++i) out.signs[i] = buf[i][0] >= 0.0 ? 1 : -1;

  out.realized_amplitude = detail::fit_amplitude(out.signs, p.gamma_cross, 16);
  return out;
}

}  // namespace orderflow
