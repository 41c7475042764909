#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include <boost/math/quadrature/tanh_sinh.hpp>
#include <boost/math/tools/roots.hpp>

#include "orderflow/error.hpp"
#include "orderflow/params.hpp"
#include "orderflow/price.hpp"

namespace orderflow {

namespace detail {
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
constexpr double kInf = std::numeric_limits<double>::infinity();

inline double lambda_sigma2(const ModelParams& p) { return p.lambda * p.sigma_logq * p.sigma_logq; }
inline double lambda_prime_sigma2(const ModelParams& p) { return p.lambda_prime * p.sigma_logq * p.sigma_logq; }

inline void require_mu_range(const ModelParams& p) {
  double m = mu_m(p);
  if (!(m > 1.0 && m < 2.0)) throw DomainError("oracle: mu_m = " + std::to_string(m) + " outside (1, 2)");
}
}  // namespace detail

// hat-mu(a) = mu_m + (a + 1/2) lambda sigma^2
inline double mu_hat(const ModelParams& p, double a) { return mu_m(p) + (a + 0.5) * detail::lambda_sigma2(p); }

// hat-beta(a) = max(0, beta_m - (a + 1/2) lambda' sigma^2)
inline double beta_hat(const ModelParams& p, double a) {
  return std::max(0.0, beta_m(p) - (a + 0.5) * detail::lambda_prime_sigma2(p));
}

// tilde-mu(a); with T > 0 the ln T correction is kept
inline double mu_tilde(const ModelParams& p, double a, double T = 0.0) {
  double ls = detail::lambda_sigma2(p);
  double corr = T > 0.0 ? p.lambda * std::log(T) / 2.0 : 0.0;
  return mu_m(p) + ls * (2.0 * a - corr);
}

inline double a_c(const ModelParams& p, int n) {
  double ls = detail::lambda_sigma2(p);
  if (!(ls > 0.0)) return detail::kInf;
  return (1.0 - mu_m(p) / (2.0 * n)) / ls;
}

inline double T_cross(const ModelParams& p, double a) {
  return std::exp(2.0 * p.sigma_logq * p.sigma_logq * a * a);
}

struct SigmaExponent {
  double diagonal = detail::kNaN;
  double off_diagonal = detail::kNaN;
  double a_c = detail::kNaN;
  double T_cross = detail::kNaN;  // only for a > a_c(1)
};

inline SigmaExponent predict_sigma_a_exponent(const ModelParams& p, double a, int n) {
  detail::require_mu_range(p);
  if (n < 1) throw DomainError("predict_sigma_a_exponent: n must be >= 1");
  SigmaExponent e;
  e.a_c = a_c(p, n);
  e.diagonal = a < e.a_c ? 2.0 * n + 1.0 - mu_m(p) - 2.0 * n * a * detail::lambda_sigma2(p) : 1.0;
  e.off_diagonal = 2.0 - p.gamma_cross;
  if (a > a_c(p, 1)) e.T_cross = T_cross(p, a);
  return e;
}

struct PriceVarianceExponent {
  double diagonal = detail::kNaN;
  double off_diagonal = detail::kNaN;
  double effective = detail::kNaN;  // the larger one when Gamma > 0
  double beta = detail::kNaN;       // beta (single size) or hat-beta(0)
  std::vector<double> zeta;         // zeta_n for n = 1..3
};

inline PriceVarianceExponent predict_price_variance_exponent(const ModelParams& p) {
  PriceVarianceExponent e;
  if (p.sigma_logq == 0.0 || (p.lambda_prime == 0.0 && p.lambda == 0.0)) {
    double b = p.mode == PropagatorMode::permanent ? 0.0 : std::max(0.0, beta_m(p));
    double gamma = mu_m(p) - 1.0;
    e.beta = b;
    if (p.mode == PropagatorMode::standard)
      e.diagonal = 3.0 - 2.0 * b - mu_m(p);
    else
      e.diagonal = gamma < 2.0 * b ? 1.0 - gamma : 1.0 - 2.0 * b;
    e.off_diagonal = 2.0 - p.gamma_cross - 2.0 * b;
  } else {
    double lps = detail::lambda_prime_sigma2(p);
    e.beta = beta_hat(p, 0.0);
    e.diagonal = 1.0 - 2.0 * beta_m(p) + 2.0 * lps;
    e.off_diagonal = 2.0 - p.gamma_cross - 2.0 * beta_m(p) + lps;
  }
  e.effective = p.Gamma_amp > 0.0 ? std::max(e.diagonal, e.off_diagonal) : e.diagonal;
  for (int n = 1; n <= 3; ++n) e.zeta.push_back(n * (2.0 * (1.0 - e.beta) - p.gamma_cross));
  return e;
}

// a where 5/2 - hat-mu(a) = 1 - hat-beta(a); +inf if the first branch always wins.
inline double a_c_prime(const ModelParams& p) {
  auto f = [&](double a) { return 2.5 - mu_hat(p, a) - (1.0 - beta_hat(p, a)); };
  if (f(-0.5) <= 0.0) return -0.5;
  double hi = 1.0;
  while (f(hi) > 0.0) {
    hi *= 2.0;
    if (hi > 1e6) return detail::kInf;
  }
  boost::uintmax_t iters = 200;
  auto r = boost::math::tools::toms748_solve(f, -0.5, hi, boost::math::tools::eps_tolerance<double>(50), iters);
  return 0.5 * (r.first + r.second);
}

struct CovarianceExponent {
  double diagonal = detail::kNaN;
  double off_diagonal = detail::kNaN;
  double informed = detail::kNaN;
  double a_c_prime = detail::kNaN;
};

inline CovarianceExponent predict_covariance_exponent(const ModelParams& p, double a) {
  detail::require_mu_range(p);
  CovarianceExponent e;
  double b = p.mode == PropagatorMode::standard ? std::max(0.0, beta_m(p)) : beta_hat(p, a);
  if (p.mode == PropagatorMode::standard && p.sigma_logq == 0.0) {
    e.diagonal = 3.0 - b - mu_m(p);
  } else {
    e.diagonal = std::max(2.5 - mu_hat(p, a), 1.0 - beta_hat(p, a));
  }
  e.off_diagonal = 2.0 - p.gamma_cross - beta_hat(p, 0.0);
  double mu = mu_m(p);
  e.informed = mu > 1.0 ? 1.0 : 2.0 - mu;
  e.a_c_prime = a_c_prime(p);
  return e;
}

struct CorrelationShape {
  double exponent_diagonal = detail::kNaN;
  double exponent_off_diagonal = detail::kNaN;
  double exponent_informed = detail::kNaN;
  double prefactor_diagonal = detail::kNaN;      // e^{sigma^2 a (1 - a) / 2}
  double prefactor_off_diagonal = detail::kNaN;  // e^{-sigma^2 a^2 / 2}
  double prefactor_informed = detail::kNaN;      // e^{sigma^2 a (2 psi - a) / 2}
  double ratio_half_over_zero = detail::kNaN;    // R_{1/2} / R_0, diagonal
  double ratio_one_over_zero = detail::kNaN;     // R_1 / R_0 at T, off-diagonal
  double omega_d = detail::kNaN;
  double omega_od = detail::kNaN;
};

// Two-term template R_a = e^{-s2 a^2/2} (A e^{s2 a/2} + B e^{lambda s2 a ln T}).
inline double correlation_template(const ModelParams& p, double a, double T, double A, double B) {
  double s2 = p.sigma_logq * p.sigma_logq;
  return std::exp(-s2 * a * a / 2.0) * (A * std::exp(s2 * a / 2.0) + B * std::exp(p.lambda * s2 * a * std::log(T)));
}

inline CorrelationShape predict_correlation_shape(const ModelParams& p, double a, double T) {
  detail::require_mu_range(p);
  CorrelationShape c;
  double s2 = p.sigma_logq * p.sigma_logq;
  double ls = detail::lambda_sigma2(p);
  double ac = a_c_prime(p);
  c.exponent_diagonal = a < ac ? (1.0 - mu_m(p) - ls) / 2.0 : -beta_hat(p, a);
  c.exponent_off_diagonal = mu_m(p) / 2.0 + a * ls - p.gamma_cross - beta_hat(p, 0.0);
  c.exponent_informed = a < ac ? mu_m(p) / 2.0 + a * ls - 1.0 : 0.0;
  c.prefactor_diagonal = std::exp(s2 * a * (1.0 - a) / 2.0);
  c.prefactor_off_diagonal = std::exp(-s2 * a * a / 2.0);
  c.prefactor_informed = std::exp(s2 * a * (2.0 * p.psi - a) / 2.0);
  c.ratio_half_over_zero = std::exp(s2 / 8.0);
  c.ratio_one_over_zero = std::exp(s2 * (p.lambda * std::log(T) - 0.5));
  c.omega_d = 0.5 * (1.0 + ls);
  c.omega_od = 1.0 - mu_tilde(p, 0.0) + p.gamma_cross + beta_hat(p, 0.0);
  return c;
}

// Off-diagonal variance coefficient: ∫∫_[0,1]^2 |u - v|^-gamma u^-beta v^-beta du dv,
// by nested tanh-sinh quadrature.
inline double off_diagonal_constant(double beta, double gamma, double tol = 1e-4) {
  if (!(beta >= 0.0 && beta < 1.0 && gamma > 0.0 && gamma < 1.0 && gamma + 2.0 * beta < 2.0))
    throw DomainError("off_diagonal_constant: integral diverges for these exponents");
  boost::math::quadrature::tanh_sinh<double> ts;
  double worst = 0.0;
  auto outer = [&](double u) {
    if (u <= 0.0 || u >= 1.0) return 0.0;
    // v = u w on [0, u], so the error estimate stays relative for tiny u
    auto below = [&](double w, double wc) {
      double x = wc < 0.0 ? -wc : w;
      double d = wc > 0.0 ? wc : 1.0 - w;
      if (x <= 0.0 || d <= 0.0) return 0.0;
      return std::pow(u, 1.0 - gamma - beta) * std::pow(d, -gamma) * std::pow(x, -beta);
    };
    // v = u + (1 - u) w on [u, 1]
    double L = 1.0 - u;
    auto above = [&](double w, double wc) {
      double x = wc < 0.0 ? -wc : w;
      if (x <= 0.0) return 0.0;
      return std::pow(L, 1.0 - gamma) * std::pow(x, -gamma) * std::pow(u + L * w, -beta);
    };
    double e1 = 0.0, e2 = 0.0;
    double i1 = ts.integrate(below, 0.0, 1.0, tol * 1e-2, &e1);
    double i2 = ts.integrate(above, 0.0, 1.0, tol * 1e-2, &e2);
    worst = std::max(worst, (e1 + e2) / (i1 + i2));
    return std::pow(u, -beta) * (i1 + i2);
  };
  double err = 0.0;
  double val = ts.integrate(outer, 0.0, 1.0, tol * 1e-1, &err);
  if (!std::isfinite(val) || err > tol * std::abs(val) || worst > tol)
    throw NumericalError("off_diagonal_constant: quadrature did not reach relative tolerance");
  return val;
}

struct ImpactConstants {
  double B_beta = detail::kNaN;  // at beta used for the off-diagonal term
  double B_beta1 = detail::kNaN;
  double I1_median = detail::kNaN;  // I1(e^m, phi)
  double C = detail::kNaN;
  double beta_od = detail::kNaN;
  std::vector<double> a_c;  // n = 1, 2, 3
  double a_c_prime = detail::kNaN;
  double q0 = detail::kNaN, q2 = detail::kNaN, qc_prime = detail::kNaN;
  double mean_duration = detail::kNaN, mean_children = detail::kNaN, volume_flow = detail::kNaN, tau0 = detail::kNaN;
  double Y_core = detail::kNaN;  // nbar^{1/2 - beta} / sqrt(C Gamma), up to the sqrt(1 - sigma_F^2/sigma^2) factor
};

inline ImpactConstants impact_constants(const ModelParams& p) {
  validate(p);
  ImpactConstants c;
  c.beta_od = p.sigma_logq > 0.0 ? beta_hat(p, 0.0) : std::max(0.0, beta_m(p));
  c.B_beta = b_beta(c.beta_od);
  c.B_beta1 = b_beta(p.beta1);
  double qm = std::exp(p.m_logq);
  c.I1_median = two_time_scale(qm, p.phi_child, beta_q(p, qm), p);
  if (p.gamma_cross < 1.0) c.C = off_diagonal_constant(c.beta_od, p.gamma_cross);
  for (int n = 1; n <= 3; ++n) c.a_c.push_back(a_c(p, n));
  c.a_c_prime = a_c_prime(p);
  if (p.lambda_prime != 0.0) c.q0 = std::exp(p.beta1 / p.lambda_prime);
  if (p.lambda != 0.0) c.q2 = std::exp((2.0 - p.mu1) / p.lambda);
  {
    // 5/2 - mu_q = 1 - beta_q, with beta_q clipped at 0
    auto f = [&](double l) { return 1.5 - (p.mu1 + p.lambda * l) + std::max(0.0, p.beta1 - p.lambda_prime * l); };
    double lo = -50.0, hi = 50.0;
    if (f(lo) * f(hi) < 0.0) {
      boost::uintmax_t iters = 200;
      auto r = boost::math::tools::toms748_solve(f, lo, hi, boost::math::tools::eps_tolerance<double>(50), iters);
      c.qc_prime = std::exp(0.5 * (r.first + r.second));
    }
  }
  c.mean_duration = mean_duration(p);
  c.mean_children = p.phi_child * c.mean_duration;
  c.volume_flow = volume_flow(p);
  c.tau0 = effective_tau0(p);
  if (p.Gamma_amp > 0.0 && std::isfinite(c.C))
    c.Y_core = std::pow(c.mean_children, 0.5 - c.beta_od) / std::sqrt(c.C * p.Gamma_amp);
  return c;
}

}  // namespace orderflow
