#include "stochcoll/wave.hpp"

#include <numbers>

namespace stochcoll {

namespace {

constexpr double kPi = std::numbers::pi;

void require(bool ok, const char* what) {
  if (!ok) throw InvalidArgument(what);
}

}  // namespace

Potential zero_potential() {
  return Potential("zero", [](const Vec3&, double) { return 0.0; });
}

Potential harmonic_potential(double mass, double omega) {
  require(mass > 0.0 && std::isfinite(mass), "harmonic potential: mass must be positive");
  require(omega > 0.0 && std::isfinite(omega), "harmonic potential: omega must be positive");
  return Potential("harmonic", [mass, omega](const Vec3& x, double) { return 0.5 * mass * omega * omega * x.squaredNorm(); });
}

WaveModel::WaveModel(int dimension, double mass, double eta) : dimension_(dimension), mass_(mass), eta_(eta) {
  require(dimension >= 1 && dimension <= 3, "wave model: dimension must be 1, 2 or 3");
  require(mass > 0.0 && std::isfinite(mass), "wave model: mass must be positive");
  require(eta >= 0.0 && std::isfinite(eta), "wave model: eta must be non-negative");
}

void WaveModel::require_positive_eta() const {
  require(eta_ > 0.0, "wave model: eta must be positive");
}

void WaveModel::check_domain(const Vec3& x) const {
  if (!x.allFinite()) throw DomainError("wave model: non-finite position");
  for (int k = dimension_; k < 3; ++k) {
    if (x[k] != 0.0) throw DomainError("wave model: position has a component on an inactive axis");
  }
  if (const auto& box = periodic_box()) {
    for (int k = 0; k < dimension_; ++k) {
      if (x[k] < box->lo[k] || x[k] > box->hi[k]) throw DomainError("wave model: position outside the periodic box");
    }
  }
}

// Harmonic ground state.

HarmonicGroundState::HarmonicGroundState(int dimension, double mass, double eta, double omega)
    : WaveModel(dimension, mass, eta), omega_(omega) {
  require_positive_eta();
  require(omega > 0.0 && std::isfinite(omega), "harmonic ground state: omega must be positive");
  log_norm_ = 0.5 * dimension * std::log(mass * omega / (kPi * eta));
}

double HarmonicGroundState::R(const Vec3& x, double) const {
  return 0.5 * sigma2() * log_norm_ - 0.5 * omega_ * x.squaredNorm();
}

double HarmonicGroundState::S(const Vec3&, double t) const { return -energy() * t / mass(); }

Vec3 HarmonicGroundState::grad_R(const Vec3& x, double) const { return -omega_ * x; }

Vec3 HarmonicGroundState::grad_S(const Vec3&, double) const { return Vec3::Zero(); }

double HarmonicGroundState::lap_R(const Vec3&, double) const { return -omega_ * dimension(); }

double HarmonicGroundState::lap_S(const Vec3&, double) const { return 0.0; }

double HarmonicGroundState::dR_dt(const Vec3&, double) const { return 0.0; }

double HarmonicGroundState::dS_dt(const Vec3&, double) const { return -energy() / mass(); }

std::complex<double> HarmonicGroundState::psi(const Vec3& x, double t) const {
  const double amplitude = std::exp(0.5 * log_norm_ - 0.5 * mass() * omega_ * x.squaredNorm() / eta());
  return std::polar(amplitude, -energy() * t / eta());
}

Vec3c HarmonicGroundState::grad_psi(const Vec3& x, double t) const {
  return psi(x, t) * (-mass() * omega_ / eta() * x).cast<std::complex<double>>();
}

Vec3 HarmonicGroundState::center(double) const { return Vec3::Zero(); }

Vec3 HarmonicGroundState::spread(double) const {
  Vec3 s = Vec3::Zero();
  s.head(dimension()).setConstant(std::sqrt(eta() / (2.0 * mass() * omega_)));
  return s;
}

Potential HarmonicGroundState::matching_potential() const { return harmonic_potential(mass(), omega_); }

// Free Gaussian packet. With D = sigma^2/2, A = s0^2 + iDt, xi = x - x0 - ut
// and k = u/sigma^2:
//   psi = (2 pi s0^2)^(-1/4) s0/sqrt(A) exp(-xi^2/(4A)) exp(i(kx - D k^2 t)).

FreeGaussianPacket::FreeGaussianPacket(double mass, double eta, double width, double x0, double velocity)
    : WaveModel(1, mass, eta), s0_(width), x0_(x0), u_(velocity) {
  require_positive_eta();
  require(width > 0.0 && std::isfinite(width), "free packet: width must be positive");
  require(std::isfinite(x0) && std::isfinite(velocity), "free packet: center and velocity must be finite");
  diff_ = 0.5 * sigma2();
  k_ = u_ / sigma2();
}

double FreeGaussianPacket::energy() const {
  return 0.5 * mass() * u_ * u_ + eta() * eta() / (8.0 * mass() * s0_ * s0_);
}

double FreeGaussianPacket::R(const Vec3& x, double t) const {
  const double xi = x[0] - x0_ - u_ * t;
  const double a2 = abs_a2(t);
  return sigma2() * (-0.25 * std::log(2.0 * kPi * s0_ * s0_) + std::log(s0_) - 0.25 * std::log(a2) -
                     xi * xi * s0_ * s0_ / (4.0 * a2));
}

double FreeGaussianPacket::S(const Vec3& x, double t) const {
  const double xi = x[0] - x0_ - u_ * t;
  const double a2 = abs_a2(t);
  return sigma2() *
         (-0.5 * std::atan2(diff_ * t, s0_ * s0_) + xi * xi * diff_ * t / (4.0 * a2) + k_ * x[0] - diff_ * k_ * k_ * t);
}

Vec3 FreeGaussianPacket::grad_R(const Vec3& x, double t) const {
  const double xi = x[0] - x0_ - u_ * t;
  return {-sigma2() * s0_ * s0_ * xi / (2.0 * abs_a2(t)), 0.0, 0.0};
}

Vec3 FreeGaussianPacket::grad_S(const Vec3& x, double t) const {
  const double xi = x[0] - x0_ - u_ * t;
  return {u_ + sigma2() * xi * diff_ * t / (2.0 * abs_a2(t)), 0.0, 0.0};
}

double FreeGaussianPacket::lap_R(const Vec3&, double t) const { return -sigma2() * s0_ * s0_ / (2.0 * abs_a2(t)); }

double FreeGaussianPacket::lap_S(const Vec3&, double t) const { return sigma2() * diff_ * t / (2.0 * abs_a2(t)); }

double FreeGaussianPacket::dR_dt(const Vec3& x, double t) const {
  const double xi = x[0] - x0_ - u_ * t;
  const double a2 = abs_a2(t);
  const double d2 = diff_ * diff_;
  return sigma2() * (-d2 * t / (2.0 * a2) + s0_ * s0_ * u_ * xi / (2.0 * a2) + s0_ * s0_ * xi * xi * d2 * t / (2.0 * a2 * a2));
}

double FreeGaussianPacket::dS_dt(const Vec3& x, double t) const {
  const double xi = x[0] - x0_ - u_ * t;
  const double a2 = abs_a2(t);
  const double d = diff_;
  return sigma2() * (-0.5 * d * s0_ * s0_ / a2 + (xi * xi * d - 2.0 * u_ * xi * d * t) / (4.0 * a2) -
                     xi * xi * d * d * d * t * t / (2.0 * a2 * a2) - d * k_ * k_);
}

std::complex<double> FreeGaussianPacket::psi(const Vec3& x, double t) const {
  using namespace std::complex_literals;
  const std::complex<double> a(s0_ * s0_, diff_ * t);
  const double xi = x[0] - x0_ - u_ * t;
  return std::pow(2.0 * kPi * s0_ * s0_, -0.25) * s0_ / std::sqrt(a) *
         std::exp(-xi * xi / (4.0 * a) + 1i * (k_ * x[0] - diff_ * k_ * k_ * t));
}

Vec3c FreeGaussianPacket::grad_psi(const Vec3& x, double t) const {
  using namespace std::complex_literals;
  const std::complex<double> a(s0_ * s0_, diff_ * t);
  const double xi = x[0] - x0_ - u_ * t;
  Vec3c g = Vec3c::Zero();
  g[0] = psi(x, t) * (-xi / (2.0 * a) + 1i * k_);
  return g;
}

Vec3 FreeGaussianPacket::center(double t) const { return {x0_ + u_ * t, 0.0, 0.0}; }

Vec3 FreeGaussianPacket::spread(double t) const {
  return {std::sqrt(s0_ * s0_ + diff_ * diff_ * t * t / (s0_ * s0_)), 0.0, 0.0};
}

Potential FreeGaussianPacket::matching_potential() const { return zero_potential(); }

// Plane wave on a periodic box.

PlaneWave::PlaneWave(int dimension, double mass, double eta, const Vec3& velocity, const Vec3& origin, double length)
    : WaveModel(dimension, mass, eta), u_(Vec3::Zero()), origin_(Vec3::Zero()), length_(length) {
  require(length > 0.0 && std::isfinite(length), "plane wave: box length must be positive");
  require(velocity.allFinite() && origin.allFinite(), "plane wave: velocity and origin must be finite");
  u_.head(dimension) = velocity.head(dimension);
  origin_.head(dimension) = origin.head(dimension);
  Box box;
  box.lo.head(dimension) = origin_.head(dimension);
  box.hi.head(dimension) = origin_.head(dimension).array() + length_;
  set_periodic_box(box);
}

double PlaneWave::log_density(const Vec3&, double) const { return -dimension() * std::log(length_); }

double PlaneWave::R(const Vec3& x, double t) const { return 0.5 * sigma2() * log_density(x, t); }

double PlaneWave::S(const Vec3& x, double t) const { return u_.dot(x) - 0.5 * u_.squaredNorm() * t; }

Vec3 PlaneWave::grad_R(const Vec3&, double) const { return Vec3::Zero(); }

Vec3 PlaneWave::grad_S(const Vec3&, double) const { return u_; }

double PlaneWave::lap_R(const Vec3&, double) const { return 0.0; }

double PlaneWave::lap_S(const Vec3&, double) const { return 0.0; }

double PlaneWave::dR_dt(const Vec3&, double) const { return 0.0; }

double PlaneWave::dS_dt(const Vec3&, double) const { return -0.5 * u_.squaredNorm(); }

std::complex<double> PlaneWave::psi(const Vec3& x, double t) const {
  require_positive_eta();
  const double amplitude = std::pow(length_, -0.5 * dimension());
  return std::polar(amplitude, mass() / eta() * (u_.dot(x) - 0.5 * u_.squaredNorm() * t));
}

Vec3c PlaneWave::grad_psi(const Vec3& x, double t) const {
  using namespace std::complex_literals;
  return psi(x, t) * (1i * (mass() / eta())) * u_.cast<std::complex<double>>();
}

Vec3 PlaneWave::center(double) const {
  Vec3 c = Vec3::Zero();
  c.head(dimension()) = origin_.head(dimension()).array() + 0.5 * length_;
  return c;
}

Vec3 PlaneWave::spread(double) const {
  Vec3 s = Vec3::Zero();
  s.head(dimension()).setConstant(length_ / std::sqrt(12.0));
  return s;
}

Potential PlaneWave::matching_potential() const { return zero_potential(); }

}  // namespace stochcoll
