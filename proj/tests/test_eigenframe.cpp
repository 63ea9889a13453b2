#include "stochcoll/eigenframe.hpp"
#include "stochcoll/heatbath.hpp"

#include <gtest/gtest.h>

namespace sc = stochcoll;
using sc::Vec3;

namespace {

sc::CollisionEvent<double> random_event(std::uint64_t i) {
  auto rng = sc::Philox4x32::stream(91, i, sc::lane::test_events);
  const double gamma2 = std::pow(10.0, -4.0 * sc::uniform_open01(rng));
  Vec3 v1, w1;
  for (int k = 0; k < 3; ++k) v1[k] = -10.0 + 20.0 * sc::uniform_open01(rng);
  for (int k = 0; k < 3; ++k) w1[k] = -10.0 + 20.0 * sc::uniform_open01(rng);
  return sc::collide(v1, w1, sc::Projector<double>(sc::sample_phi(rng)), sc::MassPair<double>::from_ratio(gamma2));
}

}  // namespace

TEST(EigenFrame, HeadOnExample) {
  const auto e = sc::collide(Vec3(1, 0, 0), Vec3(-1, 0, 0), sc::Projector<double>(Vec3::UnitX()), sc::MassPair<double>(4.0, 1.0));
  const auto f = sc::decompose(e);
  EXPECT_NEAR(f.a[0], 0.6, 1e-15);
  EXPECT_NEAR(f.g[0], -1.6, 1e-15);
  EXPECT_NEAR(f.g_perp[0], -1.6, 1e-15);
  const auto t = sc::minkowski_frame_terms(e);
  EXPECT_NEAR(t.pre, 2.4, 1e-14);
  EXPECT_NEAR(t.post, 2.4, 1e-14);
}

TEST(EigenFrame, ReconstructRoundTrip) {
  for (std::uint64_t i = 0; i < 1000; ++i) {
    const auto e = random_event(i);
    const auto f = sc::decompose(e);
    const auto r = sc::reconstruct(f, e.masses.gamma2());
    ASSERT_LE((r[0] - e.v1).norm(), 1e-12 * 20);
    ASSERT_LE((r[1] - e.w1).norm(), 1e-12 * 20);
    ASSERT_LE((r[2] - e.v2).norm(), 1e-12 * 20);
    ASSERT_LE((r[3] - e.w2).norm(), 1e-12 * 20);
  }
}

TEST(EigenFrame, PropertyIdentities) {
  for (std::uint64_t i = 0; i < 2000; ++i) {
    const auto e = random_event(i);
    const auto f = sc::decompose(e);
    const double gamma = e.masses.gamma();
    const double g2 = e.masses.gamma2();
    ASSERT_NEAR(f.g.norm(), f.g_perp.norm(), 1e-12 * 20);
    ASSERT_LE((f.g_perp - f.g - e.Phi / gamma).norm(), 1e-12 * (f.g.norm() + e.Phi.norm() / gamma));
    ASSERT_NEAR(sc::minkowski_frame_residual(e), 0.0, 1e-12 * 300);
    const auto t = sc::minkowski_frame_terms(e);
    ASSERT_NEAR(t.analytic_factor, t.residual(), 1e-10);
    // Exact per-event identity in this orientation.
    const double lhs = (e.w2.squaredNorm() - e.v2.squaredNorm()) - (e.w1.squaredNorm() - e.v1.squaredNorm());
    ASSERT_NEAR(lhs, -2.0 * (1.0 + g2) * f.a.dot(f.g + f.g_perp), 1e-10 * 300);
    ASSERT_NEAR(g2 * f.a.dot(f.g + f.g_perp), (e.v2.squaredNorm() - e.v1.squaredNorm()) / 2.0, 1e-10 * 300);
  }
}

TEST(MinkowskiReport, IdentityGapIsRounding) {
  sc::BathConfig c;
  c.masses = sc::MassPair<double>::from_ratio(0.01);
  c.target_correlation = 0.4;
  c.seed = 5;
  const auto events = sc::generate_events(c, sc::EventSource::correlated, 20000);
  const auto r = sc::minkowski_statistical_residual(events);
  EXPECT_NEAR(r.identity_gap, 0.0, 1e-12);
  EXPECT_NEAR(r.app_f_flux, -r.flux, 0.0);
  EXPECT_NEAR(r.delta_E, r.delta_E_direct, 1e-12);
  EXPECT_GT(std::abs(r.statistical_residual), 5.0 * r.statistical_se);
}

TEST(MinkowskiReport, IndependentEquipartitionSourceHasZeroMean) {
  sc::BathConfig c;
  c.masses = sc::MassPair<double>::from_ratio(0.01);
  c.seed = 6;
  const auto events = sc::generate_events(c, sc::EventSource::independent, 50000);
  const auto r = sc::minkowski_statistical_residual(events);
  EXPECT_LE(std::abs(r.statistical_residual), 3.0 * r.statistical_se);
}

TEST(MinkowskiReport, OffEquipartitionSourceIsBiased) {
  sc::BathConfig c;
  c.masses = sc::MassPair<double>::from_ratio(0.01);
  c.seed = 7;
  const auto events = sc::generate_events(c, sc::EventSource::independent, 50000, 1.0);
  const auto r = sc::minkowski_statistical_residual(events);
  EXPECT_GT(std::abs(r.statistical_residual), 5.0 * r.statistical_se);
}

TEST(MinkowskiReport, Errors) {
  std::vector<sc::CollisionEvent<double>> one{sc::collide_identity_axis(Vec3(1, 0, 0), Vec3(0, 0, 0), sc::MassPair<double>(1, 1))};
  EXPECT_THROW(sc::minkowski_statistical_residual(one), sc::InvalidArgument);
  one.push_back(sc::collide_identity_axis(Vec3(1, 0, 0), Vec3(0, 0, 0), sc::MassPair<double>(1, 2)));
  EXPECT_THROW(sc::minkowski_statistical_residual(one), sc::InvalidArgument);
}

TEST(Relativity, SixTenthsOfLight) {
  EXPECT_NEAR(sc::time_dilation_ratio(Vec3(0, 0, 0), Vec3(0.6, 0, 0), 1.0), 1.25, 1e-15);
  EXPECT_NEAR(sc::relativistic_mass_ratio(Vec3(0, 0.6, 0), 1.0), 1.25, 1e-15);
  EXPECT_NEAR(sc::time_dilation_ratio(Vec3(0.6, 0, 0), Vec3(0.6, 0, 0), 1.0), 1.0, 0.0);
  EXPECT_DOUBLE_EQ(sc::relativistic_mass_ratio(Vec3(0, 0, 0), 3.0), 1.0);
}

TEST(Relativity, Errors) {
  EXPECT_THROW(sc::time_dilation_ratio(Vec3(0, 0, 0), Vec3(1, 0, 0), 1.0), sc::DomainError);
  EXPECT_THROW(sc::relativistic_mass_ratio(Vec3(2, 0, 0), 1.0), sc::DomainError);
  EXPECT_THROW(sc::relativistic_mass_ratio(Vec3(0, 0, 0), 0.0), sc::InvalidArgument);
  EXPECT_THROW(sc::time_dilation_ratio(Vec3(0, 0, 0), Vec3(0, 0, 0), -1.0), sc::InvalidArgument);
}
