#pragma once

// Closed-form wave densities psi = exp[(R + iS)/sigma^2] with sigma^2 = eta/M.
//
// Each catalog model supplies R, S and their derivatives, and separately the
// complex psi and grad psi. The two descriptions are written independently so
// they can check each other.

#include "stochcoll/common.hpp"

#include <complex>
#include <functional>
#include <memory>
#include <optional>
#include <string>

namespace stochcoll {

using Vec3c = Eigen::Vector3cd;

struct Box {
  Vec3 lo = Vec3::Zero();
  Vec3 hi = Vec3::Zero();
};

class Potential {
 public:
  using Fn = std::function<double(const Vec3&, double)>;

  Potential(std::string name, Fn fn) : name_(std::move(name)), fn_(std::move(fn)) {}

  double operator()(const Vec3& x, double t) const { return fn_(x, t); }
  const std::string& name() const { return name_; }

 private:
  std::string name_;
  Fn fn_;
};

Potential zero_potential();
/// V(x) = M omega^2 |x|^2 / 2.
Potential harmonic_potential(double mass, double omega);

class WaveModel {
 public:
  WaveModel(int dimension, double mass, double eta);
  virtual ~WaveModel() = default;

  int dimension() const { return dimension_; }
  double mass() const { return mass_; }
  double eta() const { return eta_; }
  double sigma2() const { return eta_ / mass_; }

  virtual std::string name() const = 0;

  virtual double R(const Vec3& x, double t) const = 0;
  virtual double S(const Vec3& x, double t) const = 0;
  virtual Vec3 grad_R(const Vec3& x, double t) const = 0;
  virtual Vec3 grad_S(const Vec3& x, double t) const = 0;
  virtual double lap_R(const Vec3& x, double t) const = 0;
  virtual double lap_S(const Vec3& x, double t) const = 0;
  virtual double dR_dt(const Vec3& x, double t) const = 0;
  virtual double dS_dt(const Vec3& x, double t) const = 0;

  /// log rho = 2R / sigma^2.
  virtual double log_density(const Vec3& x, double t) const { return 2.0 * R(x, t) / sigma2(); }
  double density(const Vec3& x, double t) const { return std::exp(log_density(x, t)); }

  virtual std::complex<double> psi(const Vec3& x, double t) const = 0;
  virtual Vec3c grad_psi(const Vec3& x, double t) const = 0;

  /// Per-axis mean and standard deviation of rho; zero on inactive axes.
  virtual Vec3 center(double t) const = 0;
  virtual Vec3 spread(double t) const = 0;

  /// Periodic domain, if the model lives on a box.
  const std::optional<Box>& periodic_box() const { return box_; }

  /// Potential under which this model solves the Schroedinger equation.
  virtual Potential matching_potential() const = 0;

  /// Throws DomainError unless x is finite, zero on inactive axes and inside
  /// the periodic box when there is one.
  void check_domain(const Vec3& x) const;

 protected:
  void require_positive_eta() const;
  void set_periodic_box(const Box& box) { box_ = box; }

 private:
  int dimension_;
  double mass_;
  double eta_;
  std::optional<Box> box_;
};

/// Stationary harmonic-oscillator ground state in 1, 2 or 3 dimensions.
class HarmonicGroundState final : public WaveModel {
 public:
  HarmonicGroundState(int dimension, double mass, double eta, double omega);

  std::string name() const override { return "harmonic"; }
  double omega() const { return omega_; }
  double energy() const { return 0.5 * dimension() * eta() * omega_; }

  double R(const Vec3& x, double t) const override;
  double S(const Vec3& x, double t) const override;
  Vec3 grad_R(const Vec3& x, double t) const override;
  Vec3 grad_S(const Vec3& x, double t) const override;
  double lap_R(const Vec3& x, double t) const override;
  double lap_S(const Vec3& x, double t) const override;
  double dR_dt(const Vec3& x, double t) const override;
  double dS_dt(const Vec3& x, double t) const override;
  std::complex<double> psi(const Vec3& x, double t) const override;
  Vec3c grad_psi(const Vec3& x, double t) const override;
  Vec3 center(double t) const override;
  Vec3 spread(double t) const override;
  Potential matching_potential() const override;

 private:
  double omega_;
  double log_norm_;  // log of (M omega / (pi eta))^(d/2)
};

/// Free one-dimensional Gaussian packet with initial width s0 (standard
/// deviation of rho at t = 0), initial center x0 and group velocity u.
class FreeGaussianPacket final : public WaveModel {
 public:
  FreeGaussianPacket(double mass, double eta, double width, double x0, double velocity);

  std::string name() const override { return "free_packet"; }
  double energy() const;

  double R(const Vec3& x, double t) const override;
  double S(const Vec3& x, double t) const override;
  Vec3 grad_R(const Vec3& x, double t) const override;
  Vec3 grad_S(const Vec3& x, double t) const override;
  double lap_R(const Vec3& x, double t) const override;
  double lap_S(const Vec3& x, double t) const override;
  double dR_dt(const Vec3& x, double t) const override;
  double dS_dt(const Vec3& x, double t) const override;
  std::complex<double> psi(const Vec3& x, double t) const override;
  Vec3c grad_psi(const Vec3& x, double t) const override;
  Vec3 center(double t) const override;
  Vec3 spread(double t) const override;
  Potential matching_potential() const override;

 private:
  double abs_a2(double t) const { return s0_ * s0_ * s0_ * s0_ + diff_ * diff_ * t * t; }

  double s0_;
  double x0_;
  double u_;
  double diff_;  // sigma^2 / 2
  double k_;     // u / sigma^2
};

/// Plane wave with constant drift u on a periodic box of side L. eta may be
/// zero, which freezes the ensemble.
class PlaneWave final : public WaveModel {
 public:
  PlaneWave(int dimension, double mass, double eta, const Vec3& velocity, const Vec3& origin, double length);

  std::string name() const override { return "plane_wave"; }

  double R(const Vec3& x, double t) const override;
  double S(const Vec3& x, double t) const override;
  Vec3 grad_R(const Vec3& x, double t) const override;
  Vec3 grad_S(const Vec3& x, double t) const override;
  double lap_R(const Vec3& x, double t) const override;
  double lap_S(const Vec3& x, double t) const override;
  double dR_dt(const Vec3& x, double t) const override;
  double dS_dt(const Vec3& x, double t) const override;
  double log_density(const Vec3& x, double t) const override;
  std::complex<double> psi(const Vec3& x, double t) const override;
  Vec3c grad_psi(const Vec3& x, double t) const override;
  Vec3 center(double t) const override;
  Vec3 spread(double t) const override;
  Potential matching_potential() const override;

 private:
  Vec3 u_;
  Vec3 origin_;
  double length_;
};

}  // namespace stochcoll
