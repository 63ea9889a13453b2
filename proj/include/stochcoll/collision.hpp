#pragma once

// Elastic two-particle collision operator.
//
// A main particle (mass M, velocity v) and an incident particle (mass m,
// velocity w) exchange momentum only along the unit collision axis phi.
// With gamma^2 = m/M, sin(theta) = 2 gamma/(1+gamma^2) and
// cos(theta) = (1-gamma^2)/(1+gamma^2), the axial components obey the 2x2
// collision matrix and the orthogonal components pass through unchanged.

#include "stochcoll/common.hpp"

#include <cmath>
#include <string>
#include <utility>

namespace stochcoll {

template <typename Scalar>
class MassPair {
 public:
  MassPair(Scalar main_mass, Scalar incident_mass) : main_(main_mass), incident_(incident_mass) {
    using std::isfinite;
    if (!isfinite(main_) || !isfinite(incident_) || !(main_ > Scalar(0)) || !(incident_ > Scalar(0))) {
      throw InvalidArgument("MassPair: masses must be finite and positive");
    }
    gamma2_ = incident_ / main_;
    gamma_ = std::sqrt(gamma2_);
  }

  /// Unit main mass with incident mass gamma2.
  static MassPair from_ratio(Scalar gamma2) { return MassPair(Scalar(1), gamma2); }

  Scalar main_mass() const { return main_; }
  Scalar incident_mass() const { return incident_; }
  Scalar gamma2() const { return gamma2_; }
  Scalar gamma() const { return gamma_; }
  Scalar sin_theta() const { return Scalar(2) * gamma_ / (Scalar(1) + gamma2_); }
  Scalar cos_theta() const { return (Scalar(1) - gamma2_) / (Scalar(1) + gamma2_); }

  /// gamma * sin(theta) = 2 gamma^2 / (1 + gamma^2): fraction of the axial
  /// relative velocity transferred to the main particle.
  Scalar main_coupling() const { return Scalar(2) * gamma2_ / (Scalar(1) + gamma2_); }

  /// sin(theta) / gamma = 2 / (1 + gamma^2), finite as gamma -> 0.
  Scalar incident_coupling() const { return Scalar(2) / (Scalar(1) + gamma2_); }

 private:
  Scalar main_;
  Scalar incident_;
  Scalar gamma2_{};
  Scalar gamma_{};
};

/// Rank-1 orthogonal projection onto a unit collision axis.
template <typename Scalar>
class Projector {
 public:
  explicit Projector(const Vec3T<Scalar>& axis) : axis_(axis) {
    if (!axis.allFinite()) throw InvalidArgument("Projector: axis has non-finite components");
    const Scalar norm = axis.norm();
    if (std::abs(norm - Scalar(1)) > Scalar(kAxisRenormalizeTolerance)) {
      throw InvalidArgument("Projector: axis is not unit length (|phi| = " + std::to_string(double(norm)) + ")");
    }
    axis_ /= norm;
  }

  const Vec3T<Scalar>& axis() const { return axis_; }
  Mat3T<Scalar> matrix() const { return axis_ * axis_.transpose(); }
  Vec3T<Scalar> apply(const Vec3T<Scalar>& x) const { return axis_ * axis_.dot(x); }
  Vec3T<Scalar> apply_complement(const Vec3T<Scalar>& x) const { return x - apply(x); }

 private:
  Vec3T<Scalar> axis_;
};

template <typename Scalar>
struct CollisionEvent {
  MassPair<Scalar> masses;
  // Zero when the collision used the identity in place of P(phi).
  Vec3T<Scalar> phi;
  Vec3T<Scalar> v1, w1, v2, w2;
  // Off-axis correction sin(theta) (I - P)(v1 - w1).
  Vec3T<Scalar> Phi;
  // Max deviation between the block-projection and update forms.
  Scalar form_gap{};
};

template <typename Scalar>
struct EnergyLedger {
  Scalar sym_main{};
  Scalar osm_main{};
  Scalar sym_inc{};
  Scalar osm_inc{};
  Scalar gamma2{};

  Scalar main_terms() const { return sym_main + osm_main; }
  Scalar incident_terms() const { return gamma2 * (sym_inc + osm_inc); }
  /// Equals 2H/M = |v1|^2 + gamma^2 |w1|^2 for every elastic collision.
  Scalar total() const { return main_terms() + incident_terms(); }
};

enum class Side { pre, post };

template <typename Scalar>
Mat2T<Scalar> collision_matrix(const MassPair<Scalar>& masses) {
  const Scalar c = masses.cos_theta();
  Mat2T<Scalar> gamma_theta;
  gamma_theta << c, masses.main_coupling(), masses.incident_coupling(), -c;
  return gamma_theta;
}

/// One-dimensional exchange (u2, s2) = Gamma_theta (u1, s1).
template <typename Scalar>
std::pair<Scalar, Scalar> collide_1d(Scalar u1, Scalar s1, const MassPair<Scalar>& masses) {
  using std::isfinite;
  if (!isfinite(u1) || !isfinite(s1)) throw InvalidArgument("collide_1d: non-finite velocity");
  const Eigen::Matrix<Scalar, 2, 1> out = collision_matrix(masses) * Eigen::Matrix<Scalar, 2, 1>(u1, s1);
  return {out(0), out(1)};
}

/// Applies Gamma_theta blockwise to a stacked pair (x, y) of 3-vectors.
template <typename Scalar>
std::pair<Vec3T<Scalar>, Vec3T<Scalar>> apply_collision_matrix(const MassPair<Scalar>& masses,
                                                                const Vec3T<Scalar>& x,
                                                                const Vec3T<Scalar>& y) {
  const Scalar c = masses.cos_theta();
  return {c * x + masses.main_coupling() * y, masses.incident_coupling() * x - c * y};
}

template <typename Scalar>
Vec3T<Scalar> correction_term(const Vec3T<Scalar>& v1, const Vec3T<Scalar>& w1, const Projector<Scalar>& phi,
                              const MassPair<Scalar>& masses) {
  return masses.sin_theta() * phi.apply_complement(v1 - w1);
}

/// Block-projection form: (I - gs P, gs P; s/g P, I - s/g P)(v1, w1).
template <typename Scalar>
std::pair<Vec3T<Scalar>, Vec3T<Scalar>> collide_block_form(const Vec3T<Scalar>& v1, const Vec3T<Scalar>& w1,
                                                            const Projector<Scalar>& phi,
                                                            const MassPair<Scalar>& masses) {
  const Mat3T<Scalar> P = phi.matrix();
  const Mat3T<Scalar> I = Mat3T<Scalar>::Identity();
  const Scalar km = masses.main_coupling();
  const Scalar ki = masses.incident_coupling();
  return {(I - km * P) * v1 + km * P * w1, ki * P * v1 + (I - ki * P) * w1};
}

/// Update form: v2 = v1 + gs P(w1 - v1), w2 = w1 - (s/g) P(w1 - v1).
template <typename Scalar>
std::pair<Vec3T<Scalar>, Vec3T<Scalar>> collide_update_form(const Vec3T<Scalar>& v1, const Vec3T<Scalar>& w1,
                                                             const Projector<Scalar>& phi,
                                                             const MassPair<Scalar>& masses) {
  const Vec3T<Scalar> axial = phi.apply(w1 - v1);
  return {v1 + masses.main_coupling() * axial, w1 - masses.incident_coupling() * axial};
}

/// Rotation form: Gamma_theta (v1, w1) + (gamma Phi, -Phi/gamma).
template <typename Scalar>
std::pair<Vec3T<Scalar>, Vec3T<Scalar>> collide_rotation_form(const Vec3T<Scalar>& v1, const Vec3T<Scalar>& w1,
                                                               const Projector<Scalar>& phi,
                                                               const MassPair<Scalar>& masses) {
  auto [v2, w2] = apply_collision_matrix(masses, v1, w1);
  // gamma * Phi and Phi / gamma written through the couplings so gamma -> 0 stays finite.
  const Vec3T<Scalar> axis_perp = phi.apply_complement(v1 - w1);
  v2 += masses.main_coupling() * axis_perp;
  w2 -= masses.incident_coupling() * axis_perp;
  return {v2, w2};
}

template <typename Scalar>
CollisionEvent<Scalar> collide(const Vec3T<Scalar>& v1, const Vec3T<Scalar>& w1, const Projector<Scalar>& phi,
                               const MassPair<Scalar>& masses) {
  if (!v1.allFinite() || !w1.allFinite()) throw InvalidArgument("collide: non-finite velocity");
  auto [v2, w2] = collide_block_form(v1, w1, phi, masses);
  const auto [v2u, w2u] = collide_update_form(v1, w1, phi, masses);
  const Scalar gap = std::max((v2 - v2u).cwiseAbs().maxCoeff(), (w2 - w2u).cwiseAbs().maxCoeff());
  return CollisionEvent<Scalar>{masses, phi.axis(), v1, w1, v2, w2, correction_term(v1, w1, phi, masses), gap};
}

/// Collision with P(phi) replaced by the identity: Gamma_theta acts on the full
/// vectors and the correction term vanishes.
template <typename Scalar>
CollisionEvent<Scalar> collide_identity_axis(const Vec3T<Scalar>& v1, const Vec3T<Scalar>& w1,
                                             const MassPair<Scalar>& masses) {
  if (!v1.allFinite() || !w1.allFinite()) throw InvalidArgument("collide: non-finite velocity");
  const Vec3T<Scalar> rel = w1 - v1;
  return CollisionEvent<Scalar>{masses,
                                Vec3T<Scalar>::Zero(),
                                v1,
                                w1,
                                v1 + masses.main_coupling() * rel,
                                w1 - masses.incident_coupling() * rel,
                                Vec3T<Scalar>::Zero(),
                                Scalar(0)};
}

template <typename Scalar>
EnergyLedger<Scalar> nelson_energy_ledger(const CollisionEvent<Scalar>& e) {
  return EnergyLedger<Scalar>{((e.v2 + e.v1) / Scalar(2)).squaredNorm(), ((e.v2 - e.v1) / Scalar(2)).squaredNorm(),
                              ((e.w2 + e.w1) / Scalar(2)).squaredNorm(), ((e.w2 - e.w1) / Scalar(2)).squaredNorm(),
                              e.masses.gamma2()};
}

/// 2H/M evaluated directly on one side of the collision.
template <typename Scalar>
Scalar scaled_hamiltonian(Side side, const CollisionEvent<Scalar>& e) {
  const auto& v = side == Side::pre ? e.v1 : e.v2;
  const auto& w = side == Side::pre ? e.w1 : e.w2;
  return v.squaredNorm() + e.masses.gamma2() * w.squaredNorm();
}

template <typename Scalar>
Vec3T<Scalar> total_momentum(Side side, const CollisionEvent<Scalar>& e) {
  const auto& v = side == Side::pre ? e.v1 : e.v2;
  const auto& w = side == Side::pre ? e.w1 : e.w2;
  return e.masses.main_mass() * v + e.masses.incident_mass() * w;
}

template <typename Scalar>
Scalar total_energy(Side side, const CollisionEvent<Scalar>& e) {
  const auto& v = side == Side::pre ? e.v1 : e.v2;
  const auto& w = side == Side::pre ? e.w1 : e.w2;
  return (e.masses.main_mass() * v.squaredNorm() + e.masses.incident_mass() * w.squaredNorm()) / Scalar(2);
}

}  // namespace stochcoll
