#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <span>
#include <sstream>
#include <vector>

#include <Eigen/Dense>

#include "orderflow/error.hpp"

namespace orderflow {

struct ExponentFit {
  double exponent = std::numeric_limits<double>::quiet_NaN();
  double prefactor = std::numeric_limits<double>::quiet_NaN();
  std::optional<double> offset;  // a0 in y = a0 + a1 x^zeta
  double exponent_stderr = std::numeric_limits<double>::quiet_NaN();
  double r_squared = std::numeric_limits<double>::quiet_NaN();
  double fit_lo = 0.0, fit_hi = 0.0;  // x range actually used
  int n_points = 0;
};

struct FitOptions {
  bool with_offset = false;
  double range_lo = 0.0;  // inclusive x range; 0/inf = everything
  double range_hi = std::numeric_limits<double>::infinity();
  int max_iterations = 200;
};

namespace detail {

inline ExponentFit loglog_fit(const std::vector<double>& x, const std::vector<double>& y) {
  std::size_t n = x.size();
  double mx = 0.0, my = 0.0;
  std::vector<double> lx(n), ly(n);
  for (std::size_t i = 0; i < n; ++i) {
    lx[i] = std::log(x[i]);
    ly[i] = std::log(y[i]);
    mx += lx[i];
    my += ly[i];
  }
  mx /= static_cast<double>(n);
  my /= static_cast<double>(n);
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    sxx += (lx[i] - mx) * (lx[i] - mx);
    sxy += (lx[i] - mx) * (ly[i] - my);
    syy += (ly[i] - my) * (ly[i] - my);
  }
  if (!(sxx > 0.0)) throw EstimationError("fit_power_law: x values are all equal");
  ExponentFit f;
  f.exponent = sxy / sxx;
  double icpt = my - f.exponent * mx;
  f.prefactor = std::exp(icpt);
  double ssr = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    double r = ly[i] - icpt - f.exponent * lx[i];
    ssr += r * r;
  }
  f.r_squared = syy > 0.0 ? std::clamp(1.0 - ssr / syy, 0.0, 1.0) : 1.0;
  f.exponent_stderr = n > 2 ? std::sqrt(ssr / static_cast<double>(n - 2) / sxx) : std::numeric_limits<double>::quiet_NaN();
  return f;
}

}  // namespace detail

// Pure mode: least squares in log-log. Offset mode: y = a0 + a1 x^zeta by
// Levenberg-Marquardt on relative residuals, started from the pure fit.
inline ExponentFit fit_power_law(std::span<const double> x, std::span<const double> y, const FitOptions& opt = {}) {
  if (x.size() != y.size()) throw EstimationError("fit_power_law: x and y differ in length");
  std::vector<double> xs, ys;
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (x[i] < opt.range_lo || x[i] > opt.range_hi) continue;
    if (!std::isfinite(x[i]) || !std::isfinite(y[i])) continue;
    if (!(x[i] > 0.0) || !(y[i] > 0.0)) throw EstimationError("fit_power_law: x and y must be > 0");
    xs.push_back(x[i]);
    ys.push_back(y[i]);
  }
  if (xs.size() < 4) throw EstimationError("fit_power_law: need >= 4 points in range, got " + std::to_string(xs.size()));

  ExponentFit f = detail::loglog_fit(xs, ys);
  f.n_points = static_cast<int>(xs.size());
  f.fit_lo = *std::min_element(xs.begin(), xs.end());
  f.fit_hi = *std::max_element(xs.begin(), xs.end());
  if (!opt.with_offset) return f;

  const std::size_t n = xs.size();
  Eigen::Vector3d th(*std::min_element(ys.begin(), ys.end()) / 2.0, f.prefactor, f.exponent);
  {  // refit a1 for the initial a0 so the start is consistent
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      double b = std::pow(xs[i], th[2]) / ys[i];
      num += b * (1.0 - th[0] / ys[i]);
      den += b * b;
    }
    if (den > 0.0) th[1] = num / den;
  }
  auto residuals = [&](const Eigen::Vector3d& t, Eigen::VectorXd& r, Eigen::MatrixXd* J) {
    r.resize(static_cast<Eigen::Index>(n));
    if (J) J->resize(static_cast<Eigen::Index>(n), 3);
    for (std::size_t i = 0; i < n; ++i) {
      auto k = static_cast<Eigen::Index>(i);
      double xp = std::pow(xs[i], t[2]);
      r[k] = (t[0] + t[1] * xp - ys[i]) / ys[i];
      if (J) {
        (*J)(k, 0) = 1.0 / ys[i];
        (*J)(k, 1) = xp / ys[i];
        (*J)(k, 2) = t[1] * xp * std::log(xs[i]) / ys[i];
      }
    }
    return r.squaredNorm();
  };

  Eigen::VectorXd r;
  Eigen::MatrixXd J;
  double cost = residuals(th, r, &J);
  double damp = 1e-3;
  bool converged = false;
  int it = 0;
  for (; it < opt.max_iterations; ++it) {
    Eigen::Matrix3d A = J.transpose() * J;
    Eigen::Vector3d g = J.transpose() * r;
    if (g.lpNorm<Eigen::Infinity>() < 1e-15) {
      converged = true;
      break;
    }
    Eigen::Matrix3d Ad = A;
    for (int d = 0; d < 3; ++d) Ad(d, d) += damp * std::max(A(d, d), 1e-300);
    Eigen::Vector3d step = Ad.ldlt().solve(-g);
    Eigen::Vector3d trial = th + step;
    Eigen::VectorXd rt;
    double ct = residuals(trial, rt, nullptr);
    if (std::isfinite(ct) && ct <= cost) {
      bool small = step.cwiseAbs().maxCoeff() <= 1e-12 * (1.0 + th.cwiseAbs().maxCoeff());
      th = trial;
      double prev = cost;
      cost = residuals(th, r, &J);
      damp = std::max(damp / 10.0, 1e-15);
      if (small || prev - cost <= 1e-16 * prev) {
        converged = true;
        break;
      }
    } else {
      damp *= 10.0;
      if (damp > 1e16) {
        converged = true;  // no descent direction left: at a minimum to working precision
        break;
      }
    }
  }
  if (!converged) {
    std::ostringstream os;
    os << "fit_power_law: offset fit did not converge after " << it << " iterations (a0=" << th[0]
       << ", a1=" << th[1] << ", zeta=" << th[2] << ", cost=" << cost << ")";
    throw NumericalError(os.str());
  }

  f.offset = th[0];
  f.prefactor = th[1];
  f.exponent = th[2];
  Eigen::Matrix3d A = J.transpose() * J;
  double dof = static_cast<double>(n) - 3.0;
  double s2 = dof > 0.0 ? cost / dof : std::numeric_limits<double>::quiet_NaN();
  Eigen::Matrix3d cov = A.inverse() * s2;
  f.exponent_stderr = std::sqrt(std::max(cov(2, 2), 0.0));
  double my = 0.0;
  for (double v : ys) my += v;
  my /= static_cast<double>(n);
  double ssr = 0.0, sst = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    double fit = th[0] + th[1] * std::pow(xs[i], th[2]);
    ssr += (ys[i] - fit) * (ys[i] - fit);
    sst += (ys[i] - my) * (ys[i] - my);
  }
  f.r_squared = sst > 0.0 ? std::clamp(1.0 - ssr / sst, 0.0, 1.0) : 1.0;
  return f;
}

}  // namespace orderflow
