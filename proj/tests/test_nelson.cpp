#include "stochcoll/nelson.hpp"
#include "stochcoll/stats.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <memory>

namespace sc = stochcoll;
using sc::Vec3;

namespace {

std::shared_ptr<const sc::WaveModel> harmonic(int d) { return std::make_shared<sc::HarmonicGroundState>(d, 1.0, 1.0, 1.0); }

double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

sc::DiffusionConfig base(std::shared_ptr<const sc::WaveModel> w, std::uint64_t n, double t1, double dt) {
  sc::DiffusionConfig c;
  c.wave = std::move(w);
  c.potential = c.wave->matching_potential();
  c.n_particles = n;
  c.t1 = t1;
  c.dt = dt;
  c.seed = 99;
  return c;
}

}  // namespace

TEST(Drifts, HarmonicAndPlaneWave) {
  const sc::HarmonicGroundState h(1, 1.0, 1.0, 1.0);
  const auto d = sc::drifts(h, Vec3(0.7, 0, 0), 0.0);
  EXPECT_NEAR(d.b_plus[0], -0.7, 1e-15);
  EXPECT_NEAR(d.b_minus[0], 0.7, 1e-15);
  const sc::PlaneWave p(2, 1.0, 0.5, Vec3(0.3, -0.1, 0), Vec3::Zero(), 1.0);
  const auto q = sc::drifts(p, Vec3(0.5, 0.5, 0), 0.0);
  EXPECT_EQ(q.b_plus, Vec3(0.3, -0.1, 0));
  EXPECT_EQ(q.b_minus, Vec3(0.3, -0.1, 0));
}

TEST(Step, ZeroNoiseIsDeterministic) {
  const sc::PlaneWave p(1, 1.0, 0.0, Vec3(0.25, 0, 0), Vec3::Zero(), 1.0);
  auto rng = sc::Philox4x32::stream(1, 0, sc::lane::nelson_step);
  EXPECT_NEAR(sc::step(Vec3(0.5, 0, 0), 0.0, 0.1, p, sc::Direction::forward, rng)[0], 0.525, 1e-15);
  EXPECT_NEAR(sc::step(Vec3(0.5, 0, 0), 0.0, 0.1, p, sc::Direction::backward, rng)[0], 0.475, 1e-15);
  // Wrapping across the periodic boundary.
  EXPECT_NEAR(sc::step(Vec3(0.99, 0, 0), 0.0, 0.1, p, sc::Direction::forward, rng)[0], 0.015, 1e-14);
  EXPECT_NEAR(sc::wrap_periodic(p, Vec3(-0.25, 0, 0))[0], 0.75, 1e-15);
}

TEST(Step, SeedReproducesAndInactiveAxesStayZero) {
  const sc::HarmonicGroundState h(2, 1.0, 1.0, 1.0);
  auto a = sc::Philox4x32::stream(2, 5, sc::lane::nelson_step);
  auto b = sc::Philox4x32::stream(2, 5, sc::lane::nelson_step);
  const Vec3 x(0.1, -0.2, 0);
  const Vec3 ya = sc::step(x, 0.0, 0.01, h, sc::Direction::forward, a);
  EXPECT_EQ(ya, sc::step(x, 0.0, 0.01, h, sc::Direction::forward, b));
  EXPECT_EQ(ya[2], 0.0);
  EXPECT_NE(ya[0], x[0]);
}

TEST(Step, SingleFrozenParticleFollowsTheCharacteristic) {
  auto w = std::make_shared<sc::PlaneWave>(1, 1.0, 0.0, Vec3(0.3, 0, 0), Vec3::Zero(), 10.0);
  auto c = base(w, 1, 2.0, 0.01);
  const auto snaps = sc::evolve_ensemble(c);
  ASSERT_EQ(snaps.size(), 2u);
  const double x0 = snaps.front().positions[0][0];
  EXPECT_NEAR(snaps.back().positions[0][0], std::fmod(x0 + 0.6, 10.0), 1e-12);
}

TEST(DiffusionConfig, Validation) {
  auto c = base(harmonic(1), 100, 1.0, 0.01);
  EXPECT_NO_THROW(c.validate());
  EXPECT_EQ(c.n_steps(), 100u);
  c.dt = 0.0;
  EXPECT_ANY_THROW(c.validate());
  c = base(harmonic(1), 0, 1.0, 0.01);
  EXPECT_ANY_THROW(c.validate());
  c = base(harmonic(1), 10, 1.0, 0.01);
  c.wave = nullptr;
  EXPECT_ANY_THROW(c.validate());
}

TEST(SampleInitial, OneDimensionalKs) {
  const auto w = harmonic(1);
  const auto x = sc::sample_initial(*w, 0.0, 20000, 3);
  std::vector<double> v;
  for (const auto& p : x) v.push_back(p[0]);
  const double s = w->spread(0.0)[0];
  EXPECT_LT(sc::ks_statistic(v, [&](double z) { return normal_cdf(z / s); }), sc::ks_critical_value(v.size(), 0.001));
}

TEST(SampleInitial, ThreeDimensionalMarginalsKs) {
  const auto w = harmonic(3);
  const auto x = sc::sample_initial(*w, 0.0, 20000, 4, 2);
  const double s = w->spread(0.0)[0];
  for (int k = 0; k < 3; ++k) {
    std::vector<double> v;
    for (const auto& p : x) v.push_back(p[k]);
    EXPECT_LT(sc::ks_statistic(v, [&](double z) { return normal_cdf(z / s); }), sc::ks_critical_value(v.size(), 0.001)) << k;
  }
}

TEST(SampleInitial, ThreadCountDoesNotChangeDraws) {
  const auto w = harmonic(2);
  EXPECT_EQ(sc::sample_initial(*w, 0.0, 9000, 5, 1), sc::sample_initial(*w, 0.0, 9000, 5, 3));
}

TEST(SampleInitial, PlaneWaveIsUniformOnTheBox) {
  const sc::PlaneWave p(1, 1.0, 1.0, Vec3(1, 0, 0), Vec3(2, 0, 0), 3.0);
  const auto x = sc::sample_initial(p, 0.0, 10000, 6);
  std::vector<double> v;
  for (const auto& q : x) v.push_back(q[0]);
  EXPECT_LT(sc::ks_statistic(v, [](double z) { return (z - 2.0) / 3.0; }), sc::ks_critical_value(v.size(), 0.001));
}

TEST(DensityTable, InverseOfCdf) {
  const sc::FreeGaussianPacket w(1.0, 1.0, 0.5, 0.2, 0.8);
  const sc::DensityTable table(w, 1.0);
  const double c = w.center(1.0)[0], s = w.spread(1.0)[0];
  for (double u : {0.01, 0.3, 0.5, 0.9}) {
    const double x = table.inverse(u);
    EXPECT_NEAR(table.cdf(x), u, 1e-9);
    EXPECT_NEAR(normal_cdf((x - c) / s), u, 1e-6);
  }
}

TEST(Ensemble, PacketCenterAndSpreadTrackTheModel) {
  auto w = std::make_shared<sc::FreeGaussianPacket>(1.0, 1.0, 0.5, 0.2, 0.8);
  auto c = base(w, 40000, 1.0, 0.01);
  c.snapshot_every = 50;
  const auto snaps = sc::evolve_ensemble(c);
  ASSERT_EQ(snaps.size(), 3u);
  for (const auto& s : snaps) {
    EXPECT_NEAR(s.histogram_mass(), 1.0, 1e-12);
    std::vector<double> x;
    for (const auto& p : s.positions) x.push_back(p[0]);
    const auto m = sc::iid_mean_se(x);
    EXPECT_NEAR(m.mean, w->center(s.time)[0], 4.0 * m.se) << s.time;
    double var = 0.0;
    for (double v : x) var += (v - m.mean) * (v - m.mean);
    var /= static_cast<double>(x.size() - 1);
    const double expect = std::pow(w->spread(s.time)[0], 2);
    EXPECT_NEAR(var, expect, 0.03 * expect) << s.time;
  }
}

TEST(Ensemble, ThreadCountDoesNotChangeResults) {
  auto c = base(harmonic(2), 9000, 0.2, 0.01);
  c.threads = 1;
  const auto a = sc::evolve_ensemble(c);
  c.threads = 3;
  const auto b = sc::evolve_ensemble(c);
  ASSERT_EQ(a.size(), b.size());
  EXPECT_EQ(a.back().positions, b.back().positions);
  EXPECT_EQ(a.back().axes[0].window_difference_sum, b.back().axes[0].window_difference_sum);
}

TEST(Osmotic, ForwardHarmonicResidualIsSmall) {
  auto c = base(harmonic(1), 100000, 0.5, 0.002);
  c.snapshot_every = 50;
  const auto r = sc::osmotic_residual(sc::evolve_ensemble(c), *c.wave);
  EXPECT_GT(r.bins_used, 10u);
  EXPECT_LT(r.norm, 0.05);
}

TEST(Osmotic, BackwardRunMirrors) {
  auto c = base(harmonic(1), 100000, 0.5, 0.002);
  c.direction = sc::Direction::backward;
  c.snapshot_every = 50;
  const auto snaps = sc::evolve_ensemble(c);
  EXPECT_EQ(snaps.front().direction, sc::Direction::backward);
  EXPECT_LT(snaps.back().time, snaps.front().time);
  const auto r = sc::osmotic_residual(snaps, *c.wave);
  EXPECT_LT(r.norm, 0.05);
}

TEST(Osmotic, PlaneWaveHasNoOsmoticDrift) {
  auto w = std::make_shared<sc::PlaneWave>(1, 1.0, 0.2, Vec3(0.5, 0, 0), Vec3::Zero(), 1.0);
  auto c = base(w, 100000, 0.2, 0.001);
  c.snapshot_every = 50;
  const auto r = sc::osmotic_residual(sc::evolve_ensemble(c), *w);
  EXPECT_LT(r.norm, 0.1);
}

TEST(Osmotic, ResidualShrinksWithTheStep) {
  // A wrong drift convention would leave an O(1) residual for every dt.
  auto c = base(harmonic(1), 60000, 0.4, 0.02);
  c.snapshot_every = 10;
  const double coarse = sc::osmotic_residual(sc::evolve_ensemble(c), *c.wave).norm;
  c.dt = 0.005;
  c.snapshot_every = 40;
  const double fine = sc::osmotic_residual(sc::evolve_ensemble(c), *c.wave).norm;
  EXPECT_LT(fine, coarse);
  EXPECT_LT(fine, 0.06);
}

TEST(Continuity, StationaryHarmonic) {
  auto c = base(harmonic(1), 100000, 0.3, 0.005);
  c.snapshot_every = 20;
  const auto r = sc::continuity_residual(sc::evolve_ensemble(c), *c.wave);
  EXPECT_GT(r.bins_used, 0u);
  EXPECT_LT(r.norm, 0.1);
}

TEST(Continuity, MovingPacket) {
  auto w = std::make_shared<sc::FreeGaussianPacket>(1.0, 1.0, 0.5, 0.0, 1.0);
  auto c = base(w, 200000, 0.6, 0.005);
  c.snapshot_every = 20;
  const auto r = sc::continuity_residual(sc::evolve_ensemble(c), *w);
  EXPECT_GT(r.bins_used, 0u);
  EXPECT_LT(r.norm, 0.1);
}

TEST(Continuity, AnalyticControl) {
  EXPECT_LT(sc::continuity_residual_analytic(sc::FreeGaussianPacket(1.0, 1.0, 0.5, 0.0, 1.0), 0.7), 1e-6);
  EXPECT_LT(sc::continuity_residual_analytic(sc::HarmonicGroundState(2, 1.0, 1.0, 1.0), 0.0), 1e-6);
}

TEST(Energy, MonteCarloMatchesQuadrature) {
  auto w = std::make_shared<sc::FreeGaussianPacket>(1.0, 1.0, 0.5, 0.2, 0.8);
  auto c = base(w, 40000, 1.0, 0.01);
  c.snapshot_every = 50;
  const auto points = sc::energy_mc(sc::evolve_ensemble(c), *w, c.potential, c.tau_bar);
  ASSERT_EQ(points.size(), 3u);
  for (const auto& p : points) EXPECT_NEAR(p.mean, w->energy(), 4.0 * p.se) << p.time;
}

TEST(Energy, ParticleEnergiesIncludeThePotential) {
  const sc::HarmonicGroundState h(1, 1.0, 1.0, 1.0);
  sc::EnsembleSnapshot s;
  s.positions = {Vec3(1.0, 0, 0)};
  const auto e = sc::particle_energies(s, h, h.matching_potential());
  ASSERT_EQ(e.size(), 1u);
  EXPECT_NEAR(e[0], 0.5 * 1.0 + 0.5, 1e-15);
}

TEST(TwoParticle, TotalEnergyIsConserved) {
  auto m = base(harmonic(1), 20000, 0.5, 0.01);
  m.tau_bar = 2.0;
  m.snapshot_every = 25;
  auto i = m;
  i.wave = std::make_shared<sc::FreeGaussianPacket>(0.5, 1.0, 0.7, 0.0, 0.4);
  i.potential = sc::zero_potential();
  i.seed = 100;
  const auto r = sc::two_particle_energy(m, i);
  ASSERT_EQ(r.rows.size(), 3u);
  EXPECT_LT(r.max_deviation_se, 4.0);
  EXPECT_NEAR(r.reference_total, r.main_reference + r.incident_reference, 1e-12);
  EXPECT_LT(std::abs(r.cross_correlation), 4.0 * r.cross_correlation_se);
  EXPECT_FALSE(r.incident_frozen);
}

TEST(TwoParticle, SameSeedIsRejected) {
  auto m = base(harmonic(1), 100, 0.1, 0.01);
  EXPECT_ANY_THROW(sc::two_particle_energy(m, m));
}
