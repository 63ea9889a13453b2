#pragma once

// Monte Carlo heat bath: one main particle repeatedly struck by incident
// particles drawn from a bath with E|w|^2 = c_w^2.

#include "stochcoll/collision.hpp"
#include "stochcoll/eigenframe.hpp"
#include "stochcoll/rng.hpp"

#include <cstdint>
#include <optional>
#include <vector>

namespace stochcoll {

enum class BathKind { isotropic_fixed_speed, maxwellian };

/// `paper` replaces P(phi) by the identity in every collision; `physical`
/// draws phi uniformly on the sphere.
enum class AxisMode { physical, paper };

struct BathConfig {
  MassPair<double> masses{1.0, 0.01};
  double bath_speed = 1.0;  // c_w
  BathKind bath_kind = BathKind::isotropic_fixed_speed;
  AxisMode mode = AxisMode::physical;
  std::optional<double> target_correlation;
  std::uint64_t n_collisions = 1;
  std::uint64_t seed = 0;
  double tau_bar = 1.0;
  Vec3 initial_velocity = Vec3::Zero();
  Vec3 bath_mean = Vec3::Zero();
  double burn_in_fraction = 0.1;
  std::uint64_t replicas = 1;
  std::uint64_t record_every = 0;  // 0 disables the trajectory dump
  unsigned threads = 0;

  void validate() const;
};

struct TrajectoryRow {
  std::uint64_t collision = 0;  // collisions completed
  double time = 0.0;
  Vec3 v = Vec3::Zero();
  double speed2 = 0.0;
  double running_energy_ratio = 0.0;  // over stationary collisions so far, NaN before burn-in ends
};

struct StatSummary {
  std::uint64_t seed = 0;
  std::uint64_t n = 0;             // collisions performed
  std::uint64_t n_stationary = 0;  // collisions after burn-in
  Vec3 mean_v = Vec3::Zero();
  double mean_v2 = 0.0;
  double mean_v2_se = 0.0;
  Vec3 mean_w = Vec3::Zero();
  double mean_w2 = 0.0;
  double mean_vw = 0.0;  // E[v1^T w1]
  double mean_vw_se = 0.0;
  double rho = 0.0;
  double rho_se = 0.0;
  double energy_ratio = 0.0;  // M E|v|^2 / (m E|w|^2)
  double energy_ratio_se = 0.0;
  // Drift record over all collisions.
  Vec3 mean_delta_v = Vec3::Zero();
  Vec3 mean_relative = Vec3::Zero();  // E[w1 - v1]
  Mat3 mean_projector = Mat3::Zero();
  double mean_tau = 0.0;
  double mean_inv_tau = 0.0;
  double elapsed_time = 0.0;
  Vec3 final_v = Vec3::Zero();
  std::uint64_t events_checked = 0;
  double max_invariant_violation = 0.0;
  std::vector<TrajectoryRow> trajectory;
};

/// Ensemble of independent chains started from the same velocity.
struct ReplicaSummary {
  std::uint64_t replicas = 0;
  std::uint64_t n_collisions = 0;
  Vec3 mean_final_v = Vec3::Zero();
  Vec3 se_final_v = Vec3::Zero();
  Vec3 mean_first_w = Vec3::Zero();
  Vec3 se_first_w = Vec3::Zero();
  Mat3 mean_first_projector = Mat3::Zero();
  // First-collision drift residual against the exact law:
  // Delta v - gamma sin(theta) P (w1 - v1) averaged over replicas, with P the
  // identity in paper mode and the replica-mean projector in physical mode.
  Vec3 drift_residual = Vec3::Zero();
  Vec3 drift_residual_se = Vec3::Zero();
  std::vector<double> mean_speed2_by_step;  // E|v_k|^2 for k = 0..n
};

Vec3 sample_phi(Philox4x32& rng);
double sample_tau(double tau_bar, Philox4x32& rng);
Vec3 sample_bath_velocity(const BathConfig& config, Philox4x32& rng);
Vec3 sample_correlated_bath(const Vec3& v, const BathConfig& config, Philox4x32& rng);

/// Applies one collision under the configured axis mode.
CollisionEvent<double> bath_collision(const Vec3& v1, const Vec3& w1, const BathConfig& config, Philox4x32& rng);

/// Stream for collision `index` of replica `replica`.
Philox4x32 collision_stream(std::uint64_t seed, std::uint64_t replica, std::uint64_t index);

StatSummary run_bath(const BathConfig& config);
ReplicaSummary run_replicas(const BathConfig& config);

struct CorrelationRow {
  double speed_ratio = 0.0;     // |v| / c_w
  double target_rho = 0.0;      // root-found bath correlation
  double measured_rho = 0.0;    // E[v^T w] / sqrt(E|v|^2 E|w|^2) at the root
  double predicted_rho = 0.0;   // |v| / c_w
  double exact_rho = 0.0;       // pre-asymptotic energy-balance formula
  double energy_change = 0.0;   // E|v2|^2 - E|v1|^2 at the root
  bool converged = false;
};

/// For each speed, bisects the bath correlation that keeps E|v2|^2 = |v|^2
/// for a main particle held at constant speed.
std::vector<CorrelationRow> correlation_for_constant_speed(const BathConfig& config, const std::vector<double>& speed_ratios,
                                                           std::uint64_t samples_per_evaluation,
                                                           int bisection_iterations = 40);

Mat3 projector_mean_estimate(std::uint64_t n, Philox4x32& rng);

enum class EventSource { independent, correlated };

/// Collision sample for the statistical Minkowski identity. v1 is an isotropic
/// Maxwellian with E|v1|^2 = main_rms^2 (default gamma^2 c_w^2, the bath
/// equipartition point); w1 is independent of v1 or correlated through
/// `config.target_correlation`.
std::vector<CollisionEvent<double>> generate_events(const BathConfig& config, EventSource source, std::uint64_t n,
                                                    std::optional<double> main_rms = std::nullopt);

}  // namespace stochcoll
