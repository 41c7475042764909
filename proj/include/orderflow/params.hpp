#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <string>

#include <boost/math/distributions/normal.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "orderflow/error.hpp"

namespace orderflow {

enum class PropagatorMode { standard, two_time, permanent };

inline std::string to_string(PropagatorMode m) {
  switch (m) {
    case PropagatorMode::standard: return "standard";
    case PropagatorMode::two_time: return "two_time";
    case PropagatorMode::permanent: return "permanent";
  }
  return "?";
}

inline PropagatorMode propagator_mode_from_string(const std::string& s) {
  if (s == "standard") return PropagatorMode::standard;
  if (s == "two_time") return PropagatorMode::two_time;
  if (s == "permanent") return PropagatorMode::permanent;
  throw ConfigError("mode: expected standard, two_time or permanent, got '" + s + "'");
}

struct ModelParams {
  double nu = 0.05;          // metaorder initiations per unit time
  double phi_child = 1.0;    // child orders per unit time per active metaorder
  double tau0 = 0.0;         // <= 0: derived as 1/(nu*phi*sbar)
  double s0 = 0.3;           // minimum duration; small so windows of 1e2..1e3 trades are asymptotic
  double mu1 = 1.5;          // duration tail exponent at q = 1
  double lambda = 0.125;     // d mu_q / d ln q
  double mu_floor = 1.1;     // lower clamp on mu_q (0 = none); keeps sbar_q finite deep in the left tail of ln q
  double m_logq = 0.0;
  double sigma_logq = 1.0;
  double gamma_cross = 0.6;
  double Gamma_amp = 0.0;
  double beta1 = 0.275;
  double lambda_prime = 0.15;
  double n0 = 1.0;
  double theta0 = 1.0;
  double z_inf = 0.0;
  double sigma_F = 0.0;
  double rho = 0.0;
  double psi = 0.0;
  std::uint64_t seed = 1;
  PropagatorMode mode = PropagatorMode::two_time;
};

inline double mu_q(const ModelParams& p, double q) {
  double mu = p.mu1 + p.lambda * std::log(q);
  return p.mu_floor > 0.0 ? std::max(mu, p.mu_floor) : mu;
}

inline double beta_q(const ModelParams& p, double q) {
  return std::max(0.0, p.beta1 - p.lambda_prime * std::log(q));
}

// mu and beta at the median volume q = e^m.
inline double mu_m(const ModelParams& p) { return p.mu1 + p.lambda * p.m_logq; }
inline double beta_m(const ModelParams& p) { return p.beta1 - p.lambda_prime * p.m_logq; }

inline double mean_duration_q(const ModelParams& p, double q) {
  double mu = mu_q(p, q);
  if (!(mu > 1.0)) return std::numeric_limits<double>::infinity();
  return mu * p.s0 / (mu - 1.0);
}

// E[f(q)] under the log-normal volume law.
inline double lognormal_expectation(const ModelParams& p, const std::function<double(double)>& f) {
  if (p.sigma_logq == 0.0) return f(std::exp(p.m_logq));
  auto integrand = [&](double g) {
    return f(std::exp(p.m_logq + p.sigma_logq * g)) * std::exp(-0.5 * g * g);
  };
  // split at the mu_floor kink so the integrand is smooth on each piece
  double lo = -12.0, hi = 12.0;
  double cuts[3] = {lo, hi, hi};
  int ncut = 2;
  if (p.mu_floor > 0.0 && p.lambda != 0.0) {
    double gk = ((p.mu_floor - p.mu1) / p.lambda - p.m_logq) / p.sigma_logq;
    if (gk > lo && gk < hi) {
      cuts[1] = gk;
      cuts[2] = hi;
      ncut = 3;
    }
  }
  double total = 0.0;
  for (int i = 0; i + 1 < ncut; ++i) {
    total += boost::math::quadrature::gauss_kronrod<double, 61>::integrate(integrand, cuts[i], cuts[i + 1],
                                                                           15, 1e-13);
  }
  return total / std::sqrt(2.0 * M_PI);
}

inline double mean_duration(const ModelParams& p) {
  return lognormal_expectation(p, [&](double q) { return mean_duration_q(p, q); });
}

inline double mean_child_volume(const ModelParams& p) {
  return std::exp(p.m_logq + 0.5 * p.sigma_logq * p.sigma_logq);
}

inline double mean_children(const ModelParams& p) { return p.phi_child * mean_duration(p); }

// Exact volume per unit time: nu * phi * E[q sbar_q]; equals nu qbar phi sbar when lambda = 0.
inline double volume_flow(const ModelParams& p) {
  return p.nu * p.phi_child * lognormal_expectation(p, [&](double q) { return q * mean_duration_q(p, q); });
}

inline double trade_rate(const ModelParams& p) { return p.nu * p.phi_child * mean_duration(p); }

inline double effective_tau0(const ModelParams& p) {
  if (p.tau0 > 0.0) return p.tau0;
  return 1.0 / trade_rate(p);
}

// Throws ConfigError naming the offending key.
inline void validate(const ModelParams& p) {
  auto fail = [](const std::string& key, const std::string& what) {
    throw ConfigError(key + ": " + what);
  };
  auto finite = [](double x) { return std::isfinite(x); };
  if (!finite(p.mu1) || !(p.mu1 > 1.0)) fail("mu1", "must be > 1 (finite mean duration)");
  if (!finite(p.nu) || p.nu < 0.0) fail("nu", "must be >= 0");
  if (!finite(p.phi_child) || !(p.phi_child > 0.0)) fail("phi_child", "must be > 0");
  if (!finite(p.tau0)) fail("tau0", "must be finite");
  if (!finite(p.s0) || !(p.s0 > 0.0)) fail("s0", "must be > 0");
  if (!finite(p.lambda)) fail("lambda", "must be finite");
  if (!finite(p.mu_floor) || (p.mu_floor != 0.0 && !(p.mu_floor > 1.0)))
    fail("mu_floor", "must be 0 (disabled) or > 1");
  if (!finite(p.m_logq)) fail("m_logq", "must be finite");
  if (!finite(p.sigma_logq) || p.sigma_logq < 0.0) fail("sigma_logq", "must be >= 0");
  if (!finite(p.gamma_cross) || !(p.gamma_cross > 0.0) || p.gamma_cross > 2.0)
    fail("gamma_cross", "must lie in (0, 2]");
  if (!finite(p.Gamma_amp) || p.Gamma_amp < 0.0) fail("Gamma_amp", "must be >= 0");
  if (!finite(p.beta1) || p.beta1 < 0.0) fail("beta1", "must be >= 0");
  if (p.mode == PropagatorMode::two_time && !(p.beta1 < 0.5))
    fail("beta1", "must be < 1/2 in two_time mode");
  if (p.mode == PropagatorMode::standard && !(p.beta1 < 1.0)) fail("beta1", "must be < 1 in standard mode");
  if (!finite(p.lambda_prime)) fail("lambda_prime", "must be finite");
  if (!finite(p.n0) || p.n0 < 0.0) fail("n0", "must be >= 0");
  if (!finite(p.theta0) || p.theta0 < 0.0) fail("theta0", "must be >= 0");
  if (!finite(p.z_inf) || p.z_inf < 0.0) fail("z_inf", "must be >= 0");
  if (!finite(p.sigma_F) || p.sigma_F < 0.0) fail("sigma_F", "must be >= 0");
  if (!finite(p.rho) || p.rho < 0.0 || !(p.rho < 1.0)) fail("rho", "must lie in [0, 1)");
  if (!finite(p.psi)) fail("psi", "must be finite");

  if (p.sigma_logq > 0.0 && p.lambda != 0.0) {
    boost::math::normal_distribution<double> n01;
    double z = boost::math::quantile(n01, 1e-6);
    double q_lo = std::exp(p.m_logq + p.sigma_logq * z);
    double q_hi = std::exp(p.m_logq - p.sigma_logq * z);
    if (!(mu_q(p, q_lo) > 1.0) || !(mu_q(p, q_hi) > 1.0))
      fail("lambda", "mu_q <= 1 inside the 1e-6 quantile range of q (set mu_floor or shrink lambda*sigma_logq)");
  } else if (!(mu_q(p, std::exp(p.m_logq)) > 1.0)) {
    fail("mu1", "mu_q <= 1 at the median volume");
  }
}

}  // namespace orderflow
