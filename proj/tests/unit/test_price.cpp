#include <cmath>
#include <vector>

#include <gtest/gtest.h>

#include "orderflow/price.hpp"

using namespace orderflow;

namespace {

ImpactTrajectory unit_two_time(double beta) {
  ImpactTrajectory tr;
  tr.mode = PropagatorMode::two_time;
  tr.I1 = 1.0;
  tr.beta_q = beta;
  return tr;
}

Metaorder make_metaorder(std::int64_t id, double start, double s, int sign, double q = 1.0, double phi = 1.0) {
  Metaorder mo;
  mo.id = id;
  mo.start_time = start;
  mo.duration = s;
  mo.sign = sign;
  mo.q = q;
  mo.participation = phi;
  return mo;
}

// One trade per unit time; trade k sits at time k + 1 so grid point g observes time g.
TradeTape clock_tape(std::vector<Metaorder> mos, int n) {
  TradeTape t;
  t.metaorders = std::move(mos);
  for (int k = 0; k < n; ++k) t.trades.push_back({k, 1.0 + k, 0, 1, 1.0});
  t.horizon_time = n;
  return t;
}

ModelParams impact_only() {
  ModelParams p;
  p.tau0 = 1.0;
  return p;
}

}  // namespace

TEST(Trajectory, ZeroAtStart) {
  ModelParams p = impact_only();
  auto mo = make_metaorder(0, 0.0, 50.0, 1, 2.0);
  for (auto mode : {PropagatorMode::two_time, PropagatorMode::standard, PropagatorMode::permanent})
    EXPECT_EQ(impact_trajectory_value(mo, 0.0, p, mode), 0.0);
}

TEST(Trajectory, PeakAtEnd) {
  auto tr = unit_two_time(0.2);
  EXPECT_DOUBLE_EQ(detail::trajectory_value(tr, 100.0, 100.0), 10.0);
}

TEST(Trajectory, DecayAgainstDirectEvaluation) {
  auto tr = unit_two_time(0.2);
  double peak = detail::trajectory_value(tr, 100.0, 100.0);
  // 100^0.8 - 99^0.8, evaluated independently at high precision
  EXPECT_NEAR(detail::trajectory_value(tr, 100.0, 1e4) / peak, 0.3188055031740316, 1e-13);
  // asymptote (1 - beta)(s/t)^beta
  EXPECT_NEAR(detail::trajectory_value(tr, 100.0, 1e4) / peak, 0.8 * std::pow(0.01, 0.2), 2e-3);
}

TEST(Trajectory, ContinuousAtEnd) {
  ModelParams p = impact_only();
  auto mo = make_metaorder(0, 0.0, 37.0, 1, 3.0);
  for (auto mode : {PropagatorMode::two_time, PropagatorMode::standard, PropagatorMode::permanent}) {
    double at = impact_trajectory_value(mo, 37.0, p, mode);
    double after = impact_trajectory_value(mo, 37.0 * (1.0 + 1e-12), p, mode);
    EXPECT_NEAR(after / at, 1.0, 1e-10) << to_string(mode);
  }
}

TEST(Trajectory, PermanentStaysAtPeak) {
  ModelParams p = impact_only();
  auto mo = make_metaorder(0, 0.0, 20.0, 1, 2.0);
  double peak = peak_impact(mo, p, PropagatorMode::permanent);
  for (double t : {20.0, 21.0, 1e3, 1e7}) EXPECT_EQ(impact_trajectory_value(mo, t, p, PropagatorMode::permanent), peak);
}

TEST(Trajectory, NonNegativeForBuys) {
  ModelParams p = impact_only();
  auto mo = make_metaorder(0, 0.0, 10.0, 1, 0.5);
  for (double t = 0.0; t < 1e6; t = t * 1.7 + 0.3) EXPECT_GE(impact_trajectory_value(mo, t, p, PropagatorMode::two_time), 0.0);
}

TEST(Trajectory, StandardModeRejectsBetaOne) {
  ModelParams p = impact_only();
  p.beta1 = 1.0;
  p.lambda_prime = 0.0;
  auto mo = make_metaorder(0, 0.0, 10.0, 1);
  EXPECT_THROW(impact_trajectory_value(mo, 5.0, p, PropagatorMode::standard), DomainError);
}

TEST(BBeta, Values) {
  EXPECT_NEAR(b_beta(0.0), 2.0, 1e-14);
  // 2 Gamma(0.7) Gamma(0.8) / sqrt(pi), evaluated independently
  EXPECT_NEAR(b_beta(0.2), 1.7052456260633314, 1e-12);
}

TEST(PeakImpact, SquareRootInSize) {
  ModelParams p = impact_only();
  auto a = make_metaorder(0, 0.0, 40.0, 1, 2.0), b = make_metaorder(1, 0.0, 80.0, 1, 2.0);
  EXPECT_NEAR(peak_impact(b, p, PropagatorMode::two_time) / peak_impact(a, p, PropagatorMode::two_time), std::sqrt(2.0), 1e-12);
}

TEST(PeakImpact, NoParticipationDependenceAtBetaZero) {
  ModelParams p = impact_only();
  p.beta1 = 0.0;
  p.lambda_prime = 0.0;
  const double Q = 100.0, q = 2.0;
  auto slow = make_metaorder(0, 0.0, Q / (q * 0.5), 1, q, 0.5);
  auto fast = make_metaorder(1, 0.0, Q / (q * 4.0), 1, q, 4.0);
  EXPECT_NEAR(peak_impact(slow, p, PropagatorMode::two_time), peak_impact(fast, p, PropagatorMode::two_time), 1e-12);
}

TEST(PeakImpact, StandardModeSquareRootParticipation) {
  ModelParams p = impact_only();
  p.mode = PropagatorMode::standard;
  p.beta1 = 0.5;
  p.lambda_prime = 0.0;
  const double Q = 100.0, q = 1.0;
  auto slow = make_metaorder(0, 0.0, Q / (q * 0.5), 1, q, 0.5);
  auto fast = make_metaorder(1, 0.0, Q / (q * 2.0), 1, q, 2.0);
  EXPECT_NEAR(peak_impact(fast, p, PropagatorMode::standard) / peak_impact(slow, p, PropagatorMode::standard), 2.0, 1e-12);
}

TEST(PricePath, FlatWithoutSources) {
  ModelParams p;
  p.theta0 = 0.0;
  RandomStream rng(1);
  auto t = clock_tape({make_metaorder(0, 0.5, 30.0, 1)}, 100);
  auto path = assemble_price_path(t, p, p.mode, full_grid(100), rng);
  for (double v : path.total) EXPECT_EQ(v, 0.0);
}

TEST(PricePath, SingleMetaorderMatchesTrajectory) {
  ModelParams p = impact_only();
  auto mo = make_metaorder(0, 0.5, 100.0, 1, 2.0);
  const int N = 100000;
  auto t = clock_tape({mo}, N);
  RandomStream rng(1);
  auto grid = full_grid(N);
  auto path = assemble_price_path(t, p, PropagatorMode::two_time, grid, rng);
  for (std::size_t i = 0; i < grid.size(); ++i) {
    double time = static_cast<double>(grid[i]);
    double exact = time > mo.start_time ? impact_trajectory_value(mo, time - mo.start_time, p, PropagatorMode::two_time) : 0.0;
    ASSERT_EQ(path.total[i], path.deterministic[i] + path.random_impact[i] + path.fundamental[i]);
    // closed form while active; after the end the decay comes from the exponential-sum bank
    if (time <= mo.end_time())
      ASSERT_NEAR(path.total[i], exact, 1e-12 * std::max(1.0, exact)) << time;
    else
      ASSERT_NEAR(path.total[i] / exact, 1.0, 1e-6) << time;
  }
}

class PathAlgebra : public ::testing::Test {
 protected:
  void SetUp() override {
    p_ = impact_only();
    RandomStream rng(17);
    for (int i = 0; i < 60; ++i) {
      double start = 2000.0 * rng.uniform() - 200.0;
      mos_.push_back(make_metaorder(0, start, 1.0 + 300.0 * rng.uniform(), rng.uniform() < 0.5 ? 1 : -1, std::exp(rng.normal())));
    }
    std::sort(mos_.begin(), mos_.end(), [](const Metaorder& a, const Metaorder& b) { return a.start_time < b.start_time; });
    for (std::size_t i = 0; i < mos_.size(); ++i) mos_[i].id = static_cast<std::int64_t>(i);
  }
  std::vector<double> deterministic(std::vector<Metaorder> mos) {
    for (std::size_t i = 0; i < mos.size(); ++i) mos[i].id = static_cast<std::int64_t>(i);
    auto t = clock_tape(std::move(mos), N);
    RandomStream rng(3);
    return assemble_price_path(t, p_, PropagatorMode::two_time, full_grid(N), rng).deterministic;
  }
  static constexpr int N = 3000;
  ModelParams p_;
  std::vector<Metaorder> mos_;
};

TEST_F(PathAlgebra, SignAntisymmetry) {
  auto flipped = mos_;
  for (auto& m : flipped) m.sign = -m.sign;
  auto a = deterministic(mos_), b = deterministic(flipped);
  for (std::size_t i = 0; i < a.size(); ++i) ASSERT_EQ(a[i], -b[i]);
}

TEST_F(PathAlgebra, Linearity) {
  std::vector<Metaorder> even, odd;
  for (std::size_t i = 0; i < mos_.size(); ++i) (i % 2 ? odd : even).push_back(mos_[i]);
  auto all = deterministic(mos_), a = deterministic(even), b = deterministic(odd);
  // each set sizes its own decay-mode bank, so agreement is to the bank's 1e-6 accuracy
  for (std::size_t i = 0; i < all.size(); ++i)
    ASSERT_NEAR(all[i], a[i] + b[i], 1e-6 * (1.0 + std::abs(a[i]) + std::abs(b[i])));
}

TEST(Fundamental, ZeroWithoutVolatility) {
  ModelParams p;
  auto t = clock_tape({make_metaorder(0, 0.5, 3.0, 1)}, 50);
  RandomStream rng(1);
  for (double v : fundamental_path(t, p, full_grid(50), rng)) EXPECT_EQ(v, 0.0);
}

TEST(Fundamental, BrownianVariance) {
  ModelParams p;
  p.sigma_F = 0.7;
  const int N = 400000, T = 100;
  auto t = clock_tape({make_metaorder(0, 0.5, 3.0, 1)}, N);
  RandomStream rng(2);
  auto f = fundamental_path(t, p, full_grid(N), rng);
  double s2 = 0.0;
  int n = 0;
  for (int g = 0; g + T <= N; g += T, ++n) s2 += (f[g + T] - f[g]) * (f[g + T] - f[g]);
  s2 /= n;
  double expect = p.sigma_F * p.sigma_F * T;
  EXPECT_NEAR(s2, expect, 4.0 * expect * std::sqrt(2.0 / n));
}

// With uncorrelated signs each metaorder started inside a window moves F by
// c eps_i, c = rho sigma_F / sqrt(nu); the rest of F is independent of eps_i.
TEST(Fundamental, InformedCoupling) {
  ModelParams p;
  p.sigma_F = 1.0;
  p.rho = 0.3;
  p.nu = 0.5;
  RandomStream rng(4);
  std::vector<Metaorder> mos;
  double t0 = 0.0;
  while (true) {
    t0 += rng.exponential(p.nu);
    if (t0 >= 200000.0) break;
    mos.push_back(make_metaorder(static_cast<std::int64_t>(mos.size()), t0, 1.0, rng.uniform() < 0.5 ? 1 : -1));
  }
  const int N = 200000, T = 50;
  auto tape = clock_tape(mos, N);
  auto f = fundamental_path(tape, p, full_grid(N), rng);
  std::vector<double> x;
  std::size_t m = 0;
  for (int g = 0; g + T <= N; g += T) {
    double dF = f[g + T] - f[g];
    for (; m < mos.size() && mos[m].start_time <= g; ++m) {}
    for (std::size_t j = m; j < mos.size() && mos[j].start_time <= g + T; ++j) x.push_back(mos[j].sign * dF / (p.sigma_F * std::sqrt(T)));
  }
  double mean = 0.0, var = 0.0;
  for (double v : x) mean += v;
  mean /= static_cast<double>(x.size());
  for (double v : x) var += (v - mean) * (v - mean);
  var /= static_cast<double>(x.size() - 1);
  // several metaorders share a window; they are independent given Gamma = 0
  double se = std::sqrt(var / static_cast<double>(x.size()));
  EXPECT_NEAR(mean, p.rho / std::sqrt(p.nu * T), 3.0 * se);
}

TEST(Fundamental, RejectsRhoOne) {
  ModelParams p;
  p.sigma_F = 1.0;
  p.rho = 1.0;
  auto t = clock_tape({make_metaorder(0, 0.5, 3.0, 1)}, 10);
  RandomStream rng(1);
  EXPECT_THROW(fundamental_path(t, p, full_grid(10), rng), ConfigError);
}
