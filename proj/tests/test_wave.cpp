#include "stochcoll/nelson.hpp"
#include "stochcoll/wave.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <memory>
#include <numbers>

namespace sc = stochcoll;
using sc::Vec3;

namespace {

struct Case {
  std::shared_ptr<const sc::WaveModel> wave;
  std::vector<Vec3> points;
  std::vector<double> times;
};

std::vector<Case> catalog() {
  std::vector<Case> cases;
  cases.push_back({std::make_shared<sc::HarmonicGroundState>(1, 1.0, 1.0, 1.0), {Vec3(0.3, 0, 0), Vec3(-1.2, 0, 0)}, {0.0, 0.7}});
  cases.push_back({std::make_shared<sc::HarmonicGroundState>(3, 2.0, 0.5, 1.5),
                   {Vec3(0.3, -0.2, 0.4), Vec3(-0.5, 0.1, 0.2)}, {0.0, 1.3}});
  cases.push_back({std::make_shared<sc::FreeGaussianPacket>(1.0, 1.0, 0.5, 0.2, 0.8),
                   {Vec3(0.1, 0, 0), Vec3(1.0, 0, 0), Vec3(-0.4, 0, 0)}, {0.0, 0.4, 1.5}});
  cases.push_back({std::make_shared<sc::FreeGaussianPacket>(2.0, 0.3, 1.2, -1.0, -0.5), {Vec3(-0.7, 0, 0)}, {0.2, 2.0}});
  cases.push_back({std::make_shared<sc::PlaneWave>(2, 1.0, 0.5, Vec3(0.4, -0.3, 0), Vec3(-1, -1, 0), 2.0),
                   {Vec3(0.2, 0.5, 0)}, {0.0, 1.0}});
  return cases;
}

Vec3 unit(int k) { return Vec3::Unit(k); }

}  // namespace

TEST(WaveModels, AnalyticDerivativesMatchFiniteDifferences) {
  const double h = 1e-4;
  for (const auto& c : catalog()) {
    const auto& w = *c.wave;
    for (double t : c.times) {
      for (const Vec3& x : c.points) {
        Vec3 gr = Vec3::Zero(), gs = Vec3::Zero();
        double lr = 0.0, ls = 0.0;
        for (int k = 0; k < w.dimension(); ++k) {
          const Vec3 e = h * unit(k);
          gr[k] = (w.R(x + e, t) - w.R(x - e, t)) / (2 * h);
          gs[k] = (w.S(x + e, t) - w.S(x - e, t)) / (2 * h);
          lr += (w.R(x + e, t) - 2 * w.R(x, t) + w.R(x - e, t)) / (h * h);
          ls += (w.S(x + e, t) - 2 * w.S(x, t) + w.S(x - e, t)) / (h * h);
        }
        EXPECT_LE((gr - w.grad_R(x, t)).norm(), 1e-7) << w.name();
        EXPECT_LE((gs - w.grad_S(x, t)).norm(), 1e-7) << w.name();
        EXPECT_NEAR(lr, w.lap_R(x, t), 1e-5) << w.name();
        EXPECT_NEAR(ls, w.lap_S(x, t), 1e-5) << w.name();
        EXPECT_NEAR((w.R(x, t + h) - w.R(x, t - h)) / (2 * h), w.dR_dt(x, t), 1e-7) << w.name();
        EXPECT_NEAR((w.S(x, t + h) - w.S(x, t - h)) / (2 * h), w.dS_dt(x, t), 1e-7) << w.name();
      }
    }
  }
}

TEST(WaveModels, PsiAgreesWithRAndS) {
  for (const auto& c : catalog()) {
    const auto& w = *c.wave;
    for (double t : c.times) {
      for (const Vec3& x : c.points) {
        const auto p = w.psi(x, t);
        EXPECT_NEAR(std::norm(p), w.density(x, t), 1e-12 * std::max(1.0, w.density(x, t))) << w.name();
        EXPECT_NEAR(std::log(std::norm(p)), w.log_density(x, t), 1e-10) << w.name();
        // grad psi = psi (grad R + i grad S) / sigma^2
        const sc::Vec3c expected = p / w.sigma2() * (w.grad_R(x, t).cast<std::complex<double>>() +
                                                      std::complex<double>(0, 1) * w.grad_S(x, t).cast<std::complex<double>>());
        EXPECT_LE((w.grad_psi(x, t) - expected).norm(), 1e-10 * std::max(1.0, expected.norm())) << w.name();
        const double h = 1e-5;
        for (int k = 0; k < w.dimension(); ++k) {
          const auto fd = (w.psi(x + h * unit(k), t) - w.psi(x - h * unit(k), t)) / (2 * h);
          EXPECT_LE(std::abs(fd - w.grad_psi(x, t)[k]), 1e-6 * std::max(1.0, std::abs(fd))) << w.name();
        }
      }
    }
  }
}

TEST(WaveModels, DensityIsNormalized) {
  for (const auto& c : catalog()) {
    for (double t : c.times) {
      const auto q = sc::energy_quadrature(*c.wave, c.wave->matching_potential(), INFINITY, t);
      EXPECT_NEAR(q.mass, 1.0, 1e-8) << c.wave->name();
    }
  }
}

TEST(WaveModels, MadelungResidualVanishesUnderMatchingPotential) {
  for (const auto& c : catalog()) {
    const auto v = c.wave->matching_potential();
    for (double t : c.times) {
      for (const Vec3& x : c.points) EXPECT_NEAR(sc::madelung_residual(*c.wave, v, x, t), 0.0, 1e-12) << c.wave->name();
    }
  }
}

TEST(WaveModels, MadelungResidualSeesMissingPotential) {
  const sc::HarmonicGroundState w(1, 1.0, 1.0, 2.0);
  const Vec3 x(0.7, 0, 0);
  EXPECT_NEAR(std::abs(sc::madelung_residual(w, sc::zero_potential(), x, 0.0)), 0.5 * 4.0 * 0.49, 1e-12);
}

TEST(Harmonic, ClosedForms) {
  const sc::HarmonicGroundState w(1, 1.0, 1.0, 1.0);
  EXPECT_DOUBLE_EQ(w.energy(), 0.5);
  EXPECT_NEAR(w.density(Vec3::Zero(), 0.0), 1.0 / std::sqrt(std::numbers::pi), 1e-15);
  EXPECT_NEAR(w.spread(0.0)[0], std::sqrt(0.5), 1e-15);
  EXPECT_EQ(w.spread(0.0)[1], 0.0);
  EXPECT_EQ(w.center(3.0), Vec3::Zero());
  const auto v = w.matching_potential();
  EXPECT_NEAR(v(Vec3(2.0, 0, 0), 0.0), 2.0, 1e-15);
  const auto q = sc::energy_quadrature(w, v, INFINITY);
  EXPECT_NEAR(q.rs_form, 0.5, 1e-9);
  EXPECT_NEAR(q.psi_form, 0.5, 1e-9);
}

TEST(FreePacket, MomentsAndEnergy) {
  const sc::FreeGaussianPacket w(1.0, 1.0, 0.5, 0.2, 0.8);
  EXPECT_NEAR(w.center(1.5)[0], 0.2 + 0.8 * 1.5, 1e-15);
  // s(t)^2 = s0^2 + (eta t / 2 M s0)^2
  EXPECT_NEAR(w.spread(1.5)[0], std::sqrt(0.25 + std::pow(1.5 / (2 * 0.5), 2)), 1e-14);
  EXPECT_NEAR(w.energy(), 0.32 + 0.5, 1e-15);
  for (double t : {0.0, 1.0, 3.0}) {
    const auto q = sc::energy_quadrature(w, sc::zero_potential(), INFINITY, t);
    EXPECT_NEAR(q.rs_form, w.energy(), 1e-8);
    EXPECT_NEAR(q.psi_form, w.energy(), 1e-8);
  }
}

TEST(PlaneWave, EnergyAndOffset) {
  const sc::PlaneWave w(3, 2.0, 0.5, Vec3(0.3, 0.4, 0.0), Vec3::Zero(), 1.0);
  const auto q = sc::energy_quadrature(w, sc::zero_potential(), 3.0);
  EXPECT_NEAR(q.offset, 0.5, 1e-15);
  EXPECT_NEAR(q.rs_form, 0.25 + 0.5, 1e-12);
  EXPECT_NEAR(q.psi_form, 0.25 + 0.5, 1e-12);
  EXPECT_NEAR(w.spread(0)[2], 1.0 / std::sqrt(12.0), 1e-15);
  EXPECT_NEAR(w.center(0)[0], 0.5, 1e-15);
}

TEST(PlaneWave, FrozenEnsembleHasNoPsi) {
  const sc::PlaneWave w(1, 1.0, 0.0, Vec3(1, 0, 0), Vec3::Zero(), 1.0);
  EXPECT_EQ(w.sigma2(), 0.0);
  EXPECT_THROW(w.psi(Vec3(0.5, 0, 0), 0.0), std::exception);
  const auto q = sc::energy_quadrature(w, sc::zero_potential(), INFINITY);
  EXPECT_NEAR(q.rs_form, 0.5, 1e-15);
  EXPECT_TRUE(std::isnan(q.psi_form));
}

TEST(WaveModels, ConstructorValidation) {
  EXPECT_ANY_THROW(sc::HarmonicGroundState(4, 1.0, 1.0, 1.0));
  EXPECT_ANY_THROW(sc::HarmonicGroundState(1, 0.0, 1.0, 1.0));
  EXPECT_ANY_THROW(sc::HarmonicGroundState(1, 1.0, 0.0, 1.0));
  EXPECT_ANY_THROW(sc::HarmonicGroundState(1, 1.0, 1.0, -1.0));
  EXPECT_ANY_THROW(sc::FreeGaussianPacket(1.0, 1.0, 0.0, 0.0, 0.0));
  EXPECT_ANY_THROW(sc::PlaneWave(1, 1.0, -1.0, Vec3::Zero(), Vec3::Zero(), 1.0));
  EXPECT_ANY_THROW(sc::PlaneWave(1, 1.0, 1.0, Vec3::Zero(), Vec3::Zero(), 0.0));
}

TEST(WaveModels, DomainChecks) {
  const sc::HarmonicGroundState h(2, 1.0, 1.0, 1.0);
  EXPECT_NO_THROW(h.check_domain(Vec3(1, 2, 0)));
  EXPECT_THROW(h.check_domain(Vec3(1, 2, 3)), sc::DomainError);
  EXPECT_THROW(h.check_domain(Vec3(NAN, 0, 0)), sc::DomainError);
  const sc::PlaneWave p(1, 1.0, 1.0, Vec3(1, 0, 0), Vec3(-1, 0, 0), 2.0);
  EXPECT_NO_THROW(p.check_domain(Vec3(0.9, 0, 0)));
  EXPECT_THROW(p.check_domain(Vec3(1.5, 0, 0)), sc::DomainError);
  EXPECT_FALSE(h.periodic_box().has_value());
  ASSERT_TRUE(p.periodic_box().has_value());
  EXPECT_EQ(p.periodic_box()->hi[0], 1.0);
}

TEST(Quadrature, CoverageErrorThrows) {
  const sc::HarmonicGroundState w(1, 1.0, 1.0, 1.0);
  sc::QuadratureGrid g;
  g.lo = Vec3(-1, 0, 0);
  g.hi = Vec3(1, 0, 0);
  g.points = 200;
  EXPECT_THROW(sc::energy_quadrature(w, w.matching_potential(), INFINITY, 0.0, g), sc::DomainError);
}

TEST(Quadrature, CollisionOffset) {
  EXPECT_EQ(sc::collision_time_offset(1.0, INFINITY), 0.0);
  EXPECT_DOUBLE_EQ(sc::collision_time_offset(0.5, 2.0), 0.75);
  const sc::HarmonicGroundState w(1, 1.0, 1.0, 1.0);
  const auto q = sc::energy_quadrature(w, w.matching_potential(), 2.0);
  EXPECT_NEAR(q.rs_form, 0.5 + 1.5, 1e-9);
  EXPECT_DOUBLE_EQ(q.offset, 1.5);
}
