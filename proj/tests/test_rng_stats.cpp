#include "stochcoll/heatbath.hpp"
#include "stochcoll/rng.hpp"
#include "stochcoll/stats.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <set>

namespace sc = stochcoll;

TEST(Philox, KnownAnswerZero) {
  const auto out = sc::Philox4x32::block({0, 0, 0, 0}, {0, 0});
  EXPECT_EQ(out, (sc::Philox4x32::Counter{0x6627e8d5u, 0xe169c58du, 0xbc57ac4cu, 0x9b00dbd8u}));
}

TEST(Philox, KnownAnswerAllOnes) {
  const auto out = sc::Philox4x32::block({0xffffffffu, 0xffffffffu, 0xffffffffu, 0xffffffffu}, {0xffffffffu, 0xffffffffu});
  EXPECT_EQ(out, (sc::Philox4x32::Counter{0x408f276du, 0x41c83b0eu, 0xa20bc7c6u, 0x6d5451fdu}));
}

TEST(Philox, KnownAnswerPiDigits) {
  const auto out = sc::Philox4x32::block({0x243f6a88u, 0x85a308d3u, 0x13198a2eu, 0x03707344u}, {0xa4093822u, 0x299f31d0u});
  EXPECT_EQ(out, (sc::Philox4x32::Counter{0xd16cfe09u, 0x94fdccebu, 0x5001e420u, 0x24126ea1u}));
}

TEST(Philox, StreamsAreReproducibleAndDistinct) {
  auto a = sc::Philox4x32::stream(42, 7, sc::lane::nelson_step);
  auto b = sc::Philox4x32::stream(42, 7, sc::lane::nelson_step);
  for (int i = 0; i < 100; ++i) ASSERT_EQ(a(), b());
  std::set<std::uint32_t> firsts;
  for (std::uint64_t idx = 0; idx < 4; ++idx) {
    for (std::uint32_t ln = 1; ln <= 8; ++ln) firsts.insert(sc::Philox4x32::stream(42, idx, ln)());
  }
  firsts.insert(sc::Philox4x32::stream(43, 0, 1)());
  EXPECT_EQ(firsts.size(), 33u);
}

TEST(Philox, FirstBlockOffsetsTheCounter) {
  auto a = sc::Philox4x32::stream(1, 2, 3, 0);
  for (int i = 0; i < 8; ++i) a();
  auto b = sc::Philox4x32::stream(1, 2, 3, 2);
  EXPECT_EQ(a(), b());
}

TEST(Uniform, OpenIntervalAndKs) {
  auto rng = sc::Philox4x32::stream(3, 0, sc::lane::test_events);
  std::vector<double> u(20000);
  for (auto& x : u) {
    x = sc::uniform_open01(rng);
    ASSERT_GT(x, 0.0);
    ASSERT_LT(x, 1.0);
  }
  const double d = sc::ks_statistic(u, [](double x) { return x; });
  EXPECT_LT(d, sc::ks_critical_value(u.size(), 0.001));
}

TEST(Normal, KsAgainstStandardNormal) {
  auto rng = sc::Philox4x32::stream(4, 0, sc::lane::test_events);
  std::vector<double> z;
  for (int i = 0; i < 10000; ++i) {
    const auto p = sc::standard_normal_pair(rng);
    z.push_back(p[0]);
    z.push_back(p[1]);
  }
  const double d = sc::ks_statistic(z, [](double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); });
  EXPECT_LT(d, sc::ks_critical_value(z.size(), 0.001));
}

TEST(SamplePhi, UnitLengthAndIsotropic) {
  auto rng = sc::Philox4x32::stream(5, 0, sc::lane::test_events);
  const sc::Mat3 p = sc::projector_mean_estimate(60000, rng);
  EXPECT_LE((p - sc::Mat3::Identity() / 3.0).cwiseAbs().maxCoeff(), 0.01);
  EXPECT_NEAR(p.trace(), 1.0, 1e-12);
  // Each axis component is uniform on [-1, 1].
  std::vector<double> zc;
  for (int i = 0; i < 20000; ++i) zc.push_back(sc::sample_phi(rng)[2]);
  EXPECT_LT(sc::ks_statistic(zc, [](double x) { return (x + 1.0) / 2.0; }), sc::ks_critical_value(zc.size(), 0.001));
}

TEST(Stats, MeanSeAndPearson) {
  const std::vector<double> x{1, 2, 3, 4};
  const auto m = sc::iid_mean_se(x);
  EXPECT_DOUBLE_EQ(m.mean, 2.5);
  EXPECT_NEAR(m.se, std::sqrt(5.0 / 3.0 / 4.0), 1e-15);
  const std::vector<double> y{2, 4, 6, 8}, z{8, 6, 4, 2};
  EXPECT_NEAR(sc::pearson(x, y), 1.0, 1e-15);
  EXPECT_NEAR(sc::pearson(x, z), -1.0, 1e-15);
  EXPECT_NEAR(sc::covariance(x, y), 10.0 / 3.0, 1e-15);
  EXPECT_EQ(sc::pearson(x, std::vector<double>{1, 1, 1, 1}), 0.0);
  EXPECT_THROW(sc::mean(std::vector<double>{}), sc::InvalidArgument);
  EXPECT_THROW(sc::covariance(x, std::vector<double>{1, 2}), sc::InvalidArgument);
}

TEST(Stats, BatchSeMatchesIidForIndependentData) {
  auto rng = sc::Philox4x32::stream(6, 0, sc::lane::test_events);
  std::vector<double> x(64000);
  for (auto& v : x) v = sc::uniform_open01(rng);
  const auto a = sc::iid_mean_se(x);
  const auto b = sc::batch_mean_se(x, 16);
  EXPECT_EQ(a.mean, b.mean);
  EXPECT_NEAR(b.se / a.se, 1.0, 0.5);
  // Few samples fall back to the iid estimate.
  const std::vector<double> small{1, 2, 3};
  EXPECT_EQ(sc::batch_mean_se(small, 16).se, sc::iid_mean_se(small).se);
}

TEST(Stats, BatchSeSeesCorrelation) {
  // AR(1) with coefficient 0.9 inflates the variance of the mean by about 19.
  auto rng = sc::Philox4x32::stream(7, 0, sc::lane::test_events);
  std::vector<double> x(160000);
  double s = 0.0;
  for (auto& v : x) {
    s = 0.9 * s + sc::standard_normal_pair(rng)[0];
    v = s;
  }
  const double ratio = sc::batch_mean_se(x, 16).se / sc::iid_mean_se(x).se;
  EXPECT_GT(ratio, 2.5);
  EXPECT_LT(ratio, 6.5);
}

TEST(Stats, KsCriticalValues) {
  EXPECT_NEAR(sc::ks_critical_value(100, 0.05), 0.13581, 1e-12);
  EXPECT_NEAR(sc::ks_critical_value(10000, 0.01), 0.016276, 1e-12);
  EXPECT_THROW(sc::ks_critical_value(10, 0.2), sc::InvalidArgument);
  const std::vector<double> one{0.25};
  EXPECT_DOUBLE_EQ(sc::ks_statistic(one, [](double x) { return x; }), 0.75);
}
