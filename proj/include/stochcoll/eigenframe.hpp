#pragma once

// Eigenvector form of a collision.
//
// (a, a) and (-gamma^2 g, g) are the +1 / -1 eigenvectors of the collision
// matrix, so every collision reads
//   v1 = a - gamma^2 g,   w1 = a + g,
//   v2 = a + gamma^2 g_perp,   w2 = a - g_perp,
// with a the mass-weighted mean velocity and |g| = |g_perp|.

#include "stochcoll/collision.hpp"
#include "stochcoll/stats.hpp"

#include <array>
#include <span>
#include <vector>

namespace stochcoll {

template <typename Scalar>
struct EigenFrame {
  Vec3T<Scalar> a;
  Vec3T<Scalar> g;
  Vec3T<Scalar> g_perp;
};

template <typename Scalar>
EigenFrame<Scalar> decompose(const CollisionEvent<Scalar>& e) {
  const Scalar g2 = e.masses.gamma2();
  const Scalar denom = Scalar(1) + g2;
  // (M v + m w)/(M + m) == (v + gamma^2 w)/(1 + gamma^2)
  return EigenFrame<Scalar>{(e.v1 + g2 * e.w1) / denom, (e.w1 - e.v1) / denom, (e.v2 - e.w2) / denom};
}

/// Rebuilds (v1, w1, v2, w2) from a frame.
template <typename Scalar>
std::array<Vec3T<Scalar>, 4> reconstruct(const EigenFrame<Scalar>& f, Scalar gamma2) {
  return {f.a - gamma2 * f.g, f.a + f.g, f.a + gamma2 * f.g_perp, f.a - f.g_perp};
}

template <typename Scalar>
struct FrameTerms {
  Scalar post = 0;  // |w2 - a|^2 - |v2 - a|^2
  Scalar pre = 0;   // |w1 - a|^2 - |v1 - a|^2
  Scalar residual() const { return post - pre; }
  // (1 - gamma^4)(|g_perp|^2 - |g|^2), the same residual through the frame.
  Scalar analytic_factor = 0;
};

template <typename Scalar>
FrameTerms<Scalar> minkowski_frame_terms(const CollisionEvent<Scalar>& e) {
  const EigenFrame<Scalar> f = decompose(e);
  const Scalar g2 = e.masses.gamma2();
  FrameTerms<Scalar> t;
  t.post = (e.w2 - f.a).squaredNorm() - (e.v2 - f.a).squaredNorm();
  t.pre = (e.w1 - f.a).squaredNorm() - (e.v1 - f.a).squaredNorm();
  t.analytic_factor = (Scalar(1) - g2 * g2) * (f.g_perp.squaredNorm() - f.g.squaredNorm());
  return t;
}

template <typename Scalar>
Scalar minkowski_frame_residual(const CollisionEvent<Scalar>& e) {
  return minkowski_frame_terms(e).residual();
}

/// Sample-level form of the frame identity with `a` removed.
///
/// Per event, (|w2|^2 - |v2|^2) - (|w1|^2 - |v1|^2) = -2(1+gamma^2) a^T(g + g_perp)
/// in the orientation used by `decompose`. `app_f_flux` is the same mean in the
/// opposite orientation (g = (v1-w1)/(1+gamma^2), g_perp = (w2-v2)/(1+gamma^2)),
/// where the identity reads residual = +2(1+gamma^2) app_f_flux.
struct MinkowskiReport {
  std::size_t n = 0;
  double gamma2 = 0.0;
  double frame_residual = 0.0;  // max |frame residual| / scale over the sample
  double statistical_residual = 0.0;
  double statistical_se = 0.0;
  double flux = 0.0;  // E[a^T(g + g_perp)]
  double flux_se = 0.0;
  double app_f_flux = 0.0;
  double correlation_rho = 0.0;  // E[a^T(g+g_perp)] / sqrt(E|a|^2 E|g+g_perp|^2)
  double delta_E = 0.0;          // gamma^2 E[a^T(g+g_perp)]
  double delta_E_direct = 0.0;   // E[(|v2|^2 - |v1|^2)/2]
  // statistical_residual - 2(1+gamma^2) app_f_flux; zero up to rounding.
  double identity_gap = 0.0;
};

MinkowskiReport minkowski_statistical_residual(std::span<const CollisionEvent<double>> events, int batches = 16);

/// tau2 / tau1 = sqrt(1 - |v1|^2/c^2) / sqrt(1 - |v2|^2/c^2).
template <typename Scalar>
Scalar time_dilation_ratio(const Vec3T<Scalar>& v1, const Vec3T<Scalar>& v2, Scalar c) {
  if (!(c > Scalar(0))) throw InvalidArgument("time_dilation_ratio: c must be positive");
  const Scalar b1 = v1.squaredNorm() / (c * c);
  const Scalar b2 = v2.squaredNorm() / (c * c);
  if (!(b1 < Scalar(1)) || !(b2 < Scalar(1))) throw DomainError("time_dilation_ratio: speed must be below c");
  return std::sqrt(Scalar(1) - b1) / std::sqrt(Scalar(1) - b2);
}

/// M2 / M1 = 1 / sqrt(1 - |v2|^2/c^2).
template <typename Scalar>
Scalar relativistic_mass_ratio(const Vec3T<Scalar>& v2, Scalar c) {
  if (!(c > Scalar(0))) throw InvalidArgument("relativistic_mass_ratio: c must be positive");
  const Scalar b2 = v2.squaredNorm() / (c * c);
  if (!(b2 < Scalar(1))) throw DomainError("relativistic_mass_ratio: speed must be below c");
  return Scalar(1) / std::sqrt(Scalar(1) - b2);
}

}  // namespace stochcoll
