#include "stochcoll/heatbath.hpp"
#include "stochcoll/stats.hpp"

#include <gtest/gtest.h>

#include <cmath>

namespace sc = stochcoll;
using sc::Vec3;

TEST(SampleTau, GammaTwoMoments) {
  auto rng = sc::Philox4x32::stream(11, 0, sc::lane::gamma_tau);
  const double tau_bar = 2.5;
  std::vector<double> t(200000);
  for (auto& x : t) {
    x = sc::sample_tau(tau_bar, rng);
    ASSERT_GT(x, 0.0);
  }
  const auto m = sc::iid_mean_se(t);
  EXPECT_NEAR(m.mean, tau_bar, 4.0 * m.se);
  double var = 0.0;
  for (double x : t) var += (x - m.mean) * (x - m.mean);
  var /= static_cast<double>(t.size() - 1);
  EXPECT_NEAR(var, tau_bar * tau_bar / 2.0, 0.03 * tau_bar * tau_bar / 2.0);
  // Gamma(2) CDF with scale tau_bar / 2.
  const double theta = tau_bar / 2.0;
  const double d = sc::ks_statistic(t, [&](double x) { return 1.0 - std::exp(-x / theta) * (1.0 + x / theta); });
  EXPECT_LT(d, sc::ks_critical_value(t.size(), 0.001));
  EXPECT_THROW(sc::sample_tau(0.0, rng), sc::InvalidArgument);
  EXPECT_THROW(sc::sample_tau(INFINITY, rng), sc::InvalidArgument);
}

TEST(BathVelocity, FixedSpeedAndMaxwellian) {
  sc::BathConfig c;
  c.bath_speed = 2.0;
  c.bath_mean = Vec3(0.1, 0.0, 0.0);
  auto rng = sc::Philox4x32::stream(12, 0, sc::lane::test_events);
  for (int i = 0; i < 100; ++i) ASSERT_NEAR((sc::sample_bath_velocity(c, rng) - c.bath_mean).norm(), 2.0, 1e-14);
  c.bath_kind = sc::BathKind::maxwellian;
  c.bath_mean = Vec3::Zero();
  double s = 0.0;
  const int n = 50000;
  for (int i = 0; i < n; ++i) s += sc::sample_bath_velocity(c, rng).squaredNorm();
  EXPECT_NEAR(s / n, 4.0, 0.05);
}

TEST(BathVelocity, CorrelatedDotProductIsExact) {
  sc::BathConfig c;
  c.bath_speed = 1.5;
  c.target_correlation = 0.3;
  auto rng = sc::Philox4x32::stream(13, 0, sc::lane::test_events);
  const Vec3 v(0.2, -0.4, 0.1);
  for (int i = 0; i < 100; ++i) {
    const Vec3 w = sc::sample_correlated_bath(v, c, rng);
    ASSERT_NEAR(w.norm(), 1.5, 1e-14);
    ASSERT_NEAR(v.dot(w), 0.3 * 1.5 * v.norm(), 1e-14);
  }
  EXPECT_THROW(sc::sample_correlated_bath(Vec3::Zero(), c, rng), sc::InvalidArgument);
  c.target_correlation = 0.0;
  EXPECT_NO_THROW(sc::sample_correlated_bath(Vec3::Zero(), c, rng));
}

TEST(BathConfig, Validation) {
  sc::BathConfig c;
  c.bath_speed = -1.0;
  EXPECT_THROW(c.validate(), sc::InvalidArgument);
  c = sc::BathConfig{};
  c.target_correlation = 1.5;
  EXPECT_THROW(c.validate(), sc::InvalidArgument);
  c = sc::BathConfig{};
  c.tau_bar = 0.0;
  EXPECT_THROW(c.validate(), sc::InvalidArgument);
  c = sc::BathConfig{};
  c.target_correlation = 0.2;
  c.n_collisions = 10;
  EXPECT_THROW(sc::run_bath(c), sc::InvalidArgument);
  c.initial_velocity = Vec3(0.1, 0, 0);
  EXPECT_NO_THROW(sc::run_bath(c));
}

TEST(RunBath, EquipartitionPaperMode) {
  sc::BathConfig c;
  c.masses = sc::MassPair<double>::from_ratio(0.01);
  c.mode = sc::AxisMode::paper;
  c.n_collisions = 200000;
  c.seed = 14;
  const auto s = sc::run_bath(c);
  EXPECT_EQ(s.n, 200000u);
  EXPECT_NEAR(s.energy_ratio, 1.0, std::max(0.05, 4.0 * s.energy_ratio_se));
  EXPECT_LT(s.max_invariant_violation, 1e-12);
  EXPECT_NEAR(s.mean_tau, 1.0, 0.02);
  EXPECT_TRUE(s.trajectory.empty());
}

TEST(RunBath, EquipartitionPhysicalModeAndTrajectory) {
  sc::BathConfig c;
  c.masses = sc::MassPair<double>::from_ratio(0.05);
  c.n_collisions = 100000;
  c.record_every = 10000;
  c.seed = 15;
  const auto s = sc::run_bath(c);
  EXPECT_NEAR(s.energy_ratio, 1.0, std::max(0.05, 4.0 * s.energy_ratio_se));
  ASSERT_EQ(s.trajectory.size(), 10u);
  EXPECT_EQ(s.trajectory.back().collision, 100000u);
  EXPECT_NEAR(s.trajectory.back().running_energy_ratio, s.energy_ratio, 1e-12);
  EXPECT_NEAR(s.mean_projector.trace(), 1.0, 1e-9);
}

TEST(RunBath, SameSeedSameResult) {
  sc::BathConfig c;
  c.n_collisions = 5000;
  c.seed = 16;
  const auto a = sc::run_bath(c);
  const auto b = sc::run_bath(c);
  EXPECT_EQ(a.final_v, b.final_v);
  EXPECT_EQ(a.mean_v2, b.mean_v2);
  c.seed = 17;
  EXPECT_NE(sc::run_bath(c).final_v, a.final_v);
}

TEST(RunReplicas, ThreadCountInvariant) {
  sc::BathConfig c;
  c.masses = sc::MassPair<double>::from_ratio(0.01);
  c.n_collisions = 20;
  c.replicas = 5000;
  c.initial_velocity = Vec3(0.05, -0.02, 0.0);
  c.bath_mean = Vec3(0.3, -0.2, 0.1);
  c.seed = 18;
  c.threads = 1;
  const auto a = sc::run_replicas(c);
  c.threads = 3;
  const auto b = sc::run_replicas(c);
  EXPECT_EQ(a.mean_final_v, b.mean_final_v);
  EXPECT_EQ(a.mean_speed2_by_step, b.mean_speed2_by_step);
  ASSERT_EQ(a.mean_speed2_by_step.size(), 21u);
  EXPECT_NEAR(a.mean_speed2_by_step.front(), c.initial_velocity.squaredNorm(), 1e-15);
}

TEST(RunReplicas, DriftTowardsBathMean) {
  sc::BathConfig c;
  c.masses = sc::MassPair<double>::from_ratio(0.01);
  c.mode = sc::AxisMode::paper;
  c.n_collisions = 1;
  c.replicas = 20000;
  c.initial_velocity = Vec3(0.05, -0.02, 0.0);
  c.bath_mean = Vec3(0.3, -0.2, 0.1);
  c.seed = 19;
  const auto r = sc::run_replicas(c);
  const double k = c.masses.main_coupling();
  const Vec3 expected = c.initial_velocity + k * (c.bath_mean - c.initial_velocity);
  for (int i = 0; i < 3; ++i) EXPECT_NEAR(r.mean_final_v[i], expected[i], 4.0 * r.se_final_v[i] + 1e-15);
}

TEST(Correlation, RootMatchesBalanceFormulaInPaperMode) {
  sc::BathConfig c;
  c.masses = sc::MassPair<double>::from_ratio(1e-4);
  c.mode = sc::AxisMode::paper;
  c.seed = 20;
  const auto rows = sc::correlation_for_constant_speed(c, {0.0, 0.25, 0.5}, 200);
  ASSERT_EQ(rows.size(), 3u);
  EXPECT_TRUE(rows[0].converged);
  EXPECT_EQ(rows[0].target_rho, 0.0);
  for (std::size_t i = 1; i < 3; ++i) {
    EXPECT_TRUE(rows[i].converged);
    EXPECT_NEAR(rows[i].target_rho, rows[i].exact_rho, 1e-9);
    EXPECT_NEAR(rows[i].measured_rho, rows[i].target_rho, 1e-9);
    EXPECT_NEAR(rows[i].target_rho, rows[i].speed_ratio, 1e-3);
  }
  EXPECT_THROW(sc::correlation_for_constant_speed(c, {1.0}, 200), sc::InvalidArgument);
}

TEST(Correlation, SignMismatchIsReported) {
  // Below the threshold speed no correlation in [0, 1] balances the energy.
  sc::BathConfig c;
  c.masses = sc::MassPair<double>::from_ratio(1.0);
  c.mode = sc::AxisMode::paper;
  const auto rows = sc::correlation_for_constant_speed(c, {0.1}, 50);
  EXPECT_FALSE(rows[0].converged);
  EXPECT_TRUE(std::isnan(rows[0].target_rho));
}
