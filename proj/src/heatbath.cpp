#include "stochcoll/heatbath.hpp"

#include "stochcoll/parallel.hpp"
#include "stochcoll/stats.hpp"

#include <cmath>
#include <limits>
#include <random>
#include <string>

namespace stochcoll {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
constexpr std::uint64_t kReplicaChunk = 1024;

Vec3 normal_vec3(Philox4x32& rng) {
  const auto a = standard_normal_pair(rng);
  const auto b = standard_normal_pair(rng);
  return {a[0], a[1], b[0]};
}

double conservation_violation(const CollisionEvent<double>& e) {
  const Vec3 p1 = total_momentum(Side::pre, e);
  const Vec3 p2 = total_momentum(Side::post, e);
  const double pscale = std::max({1.0, e.masses.main_mass() * e.v1.norm(), e.masses.incident_mass() * e.w1.norm()});
  const double e1 = total_energy(Side::pre, e);
  const double e2 = total_energy(Side::post, e);
  return std::max((p2 - p1).cwiseAbs().maxCoeff() / pscale, std::abs(e2 - e1) / std::max(1.0, e1));
}

}  // namespace

namespace {

void require_chain_start(const BathConfig& c) {
  if (c.target_correlation && *c.target_correlation != 0.0 && c.initial_velocity.norm() == 0.0) {
    throw InvalidArgument("BathConfig: a correlated bath needs a nonzero initial_velocity");
  }
}

}  // namespace

void BathConfig::validate() const {
  std::string errors;
  if (!(bath_speed > 0.0) || !std::isfinite(bath_speed)) errors += "bath_speed must be positive; ";
  if (target_correlation && !(std::abs(*target_correlation) <= 1.0)) errors += "target_correlation must lie in [-1, 1]; ";
  if (!(tau_bar > 0.0) || !std::isfinite(tau_bar)) errors += "tau_bar must be positive; ";
  if (!(burn_in_fraction >= 0.0 && burn_in_fraction < 1.0)) errors += "burn_in_fraction must lie in [0, 1); ";
  if (replicas < 1) errors += "replicas must be >= 1; ";
  if (!initial_velocity.allFinite() || !bath_mean.allFinite()) errors += "velocities must be finite; ";
  if (!errors.empty()) throw InvalidArgument("BathConfig: " + errors);
}

Vec3 sample_phi(Philox4x32& rng) {
  for (;;) {
    const Vec3 n = normal_vec3(rng);
    const double norm = n.norm();
    if (norm > 1e-12) return n / norm;
  }
}

double sample_tau(double tau_bar, Philox4x32& rng) {
  if (!(tau_bar > 0.0) || !std::isfinite(tau_bar)) throw InvalidArgument("sample_tau: tau_bar must be positive");
  std::gamma_distribution<double> gamma(2.0, tau_bar / 2.0);
  return gamma(rng);
}

Vec3 sample_bath_velocity(const BathConfig& config, Philox4x32& rng) {
  switch (config.bath_kind) {
    case BathKind::isotropic_fixed_speed:
      return config.bath_mean + config.bath_speed * sample_phi(rng);
    case BathKind::maxwellian:
      return config.bath_mean + (config.bath_speed / std::sqrt(3.0)) * normal_vec3(rng);
  }
  return config.bath_mean;
}

Vec3 sample_correlated_bath(const Vec3& v, const BathConfig& config, Philox4x32& rng) {
  if (!config.target_correlation) throw InvalidArgument("sample_correlated_bath: target_correlation is not set");
  const double target = *config.target_correlation;
  if (!(std::abs(target) <= 1.0)) throw InvalidArgument("sample_correlated_bath: |target_correlation| > 1");
  if (target == 0.0) return sample_bath_velocity(config, rng);
  const double speed = v.norm();
  if (speed == 0.0) throw InvalidArgument("sample_correlated_bath: |v| = 0 with a nonzero target correlation");
  const Vec3 along = v / speed;
  Vec3 across;
  for (;;) {
    const Vec3 u = sample_phi(rng);
    across = u - u.dot(along) * along;
    const double n = across.norm();
    if (n > 1e-8) {
      across /= n;
      break;
    }
  }
  const double c = config.bath_speed;
  return target * c * along + std::sqrt(std::max(0.0, 1.0 - target * target)) * c * across;
}

CollisionEvent<double> bath_collision(const Vec3& v1, const Vec3& w1, const BathConfig& config, Philox4x32& rng) {
  if (config.mode == AxisMode::paper) return collide_identity_axis(v1, w1, config.masses);
  return collide(v1, w1, Projector<double>(sample_phi(rng)), config.masses);
}

Philox4x32 collision_stream(std::uint64_t seed, std::uint64_t replica, std::uint64_t index) {
  if (replica >= (1ull << 24)) throw InvalidArgument("collision_stream: replica index too large");
  return Philox4x32::stream(seed, index, lane::bath_collision | static_cast<std::uint32_t>(replica << 8));
}

StatSummary run_bath(const BathConfig& config) {
  config.validate();
  require_chain_start(config);
  StatSummary s;
  s.seed = config.seed;
  s.n = config.n_collisions;
  const auto burn_in = static_cast<std::uint64_t>(std::floor(config.burn_in_fraction * static_cast<double>(config.n_collisions)));
  const double mass_ratio = config.masses.main_mass() / config.masses.incident_mass();

  std::vector<double> v2_series, vw_series;
  v2_series.reserve(config.n_collisions - std::min(burn_in, config.n_collisions));
  vw_series.reserve(v2_series.capacity());
  Vec3 sum_v = Vec3::Zero(), sum_w = Vec3::Zero();
  double sum_v2 = 0.0, sum_w2 = 0.0;
  Vec3 sum_dv = Vec3::Zero(), sum_rel = Vec3::Zero();
  Mat3 sum_p = Mat3::Zero();
  double sum_tau = 0.0, sum_inv_tau = 0.0;

  Vec3 v = config.initial_velocity;
  double time = 0.0;
  for (std::uint64_t k = 0; k < config.n_collisions; ++k) {
    Philox4x32 rng = collision_stream(config.seed, 0, k);
    const Vec3 w = config.target_correlation ? sample_correlated_bath(v, config, rng) : sample_bath_velocity(config, rng);
    const auto e = bath_collision(v, w, config, rng);
    const double tau = sample_tau(config.tau_bar, rng);
    time += tau;
    sum_tau += tau;
    sum_inv_tau += 1.0 / tau;

    if (k % 100 == 0) {
      ++s.events_checked;
      s.max_invariant_violation = std::max(s.max_invariant_violation, conservation_violation(e));
    }
    sum_dv += e.v2 - e.v1;
    sum_rel += e.w1 - e.v1;
    sum_p += config.mode == AxisMode::paper ? Mat3::Identity() : Mat3(e.phi * e.phi.transpose());
    if (k >= burn_in) {
      sum_v += e.v1;
      sum_w += e.w1;
      sum_v2 += e.v1.squaredNorm();
      sum_w2 += e.w1.squaredNorm();
      v2_series.push_back(e.v1.squaredNorm());
      vw_series.push_back(e.v1.dot(e.w1));
    }
    v = e.v2;
    if (config.record_every > 0 && (k + 1) % config.record_every == 0) {
      const double ns = static_cast<double>(v2_series.size());
      const double running = ns > 0 ? mass_ratio * (sum_v2 / ns) / (sum_w2 / ns) : kNaN;
      s.trajectory.push_back({k + 1, time, v, v.squaredNorm(), running});
    }
  }
  s.final_v = v;
  s.elapsed_time = time;
  s.n_stationary = v2_series.size();
  if (config.n_collisions > 0) {
    const double n = static_cast<double>(config.n_collisions);
    s.mean_delta_v = sum_dv / n;
    s.mean_relative = sum_rel / n;
    s.mean_projector = sum_p / n;
    s.mean_tau = sum_tau / n;
    s.mean_inv_tau = sum_inv_tau / n;
  } else {
    s.mean_tau = s.mean_inv_tau = kNaN;
  }
  if (s.n_stationary == 0) {
    s.mean_v = config.initial_velocity;
    s.mean_v2 = config.initial_velocity.squaredNorm();
    s.mean_v2_se = 0.0;
    s.mean_w = Vec3::Constant(kNaN);
    s.mean_w2 = s.mean_vw = s.mean_vw_se = s.rho = s.rho_se = kNaN;
    s.energy_ratio = s.energy_ratio_se = kNaN;
    return s;
  }
  const double ns = static_cast<double>(s.n_stationary);
  s.mean_v = sum_v / ns;
  s.mean_w = sum_w / ns;
  const MeanSe v2 = batch_mean_se(v2_series);
  const MeanSe vw = batch_mean_se(vw_series);
  s.mean_v2 = v2.mean;
  s.mean_v2_se = v2.se;
  s.mean_w2 = sum_w2 / ns;
  s.mean_vw = vw.mean;
  s.mean_vw_se = vw.se;
  const double norm = std::sqrt(s.mean_v2 * s.mean_w2);
  s.rho = norm > 0.0 ? s.mean_vw / norm : 0.0;
  s.rho_se = norm > 0.0 ? s.mean_vw_se / norm : 0.0;
  s.energy_ratio = mass_ratio * s.mean_v2 / s.mean_w2;
  s.energy_ratio_se = mass_ratio * s.mean_v2_se / s.mean_w2;
  return s;
}

ReplicaSummary run_replicas(const BathConfig& config) {
  config.validate();
  require_chain_start(config);
  const std::uint64_t R = config.replicas;
  const std::uint64_t n_chunks = (R + kReplicaChunk - 1) / kReplicaChunk;
  const std::uint64_t steps = config.n_collisions;

  struct Partial {
    Vec3 sum_v = Vec3::Zero(), sum_v_sq = Vec3::Zero();
    Vec3 sum_w = Vec3::Zero(), sum_w_sq = Vec3::Zero();
    Mat3 sum_p = Mat3::Zero();
    std::vector<double> speed2;
  };
  std::vector<Partial> partials(n_chunks);
  // First-collision records, needed for the drift residual once the mean projector is known.
  std::vector<Vec3> first_dv(R, Vec3::Zero()), first_rel(R, Vec3::Zero());

  for_each_chunk(n_chunks, config.threads, [&](std::size_t c) {
    Partial& p = partials[c];
    p.speed2.assign(steps + 1, 0.0);
    const std::uint64_t lo = c * kReplicaChunk;
    const std::uint64_t hi = std::min(R, lo + kReplicaChunk);
    for (std::uint64_t r = lo; r < hi; ++r) {
      Vec3 v = config.initial_velocity;
      p.speed2[0] += v.squaredNorm();
      for (std::uint64_t k = 0; k < steps; ++k) {
        Philox4x32 rng = collision_stream(config.seed, r, k);
        const Vec3 w = config.target_correlation ? sample_correlated_bath(v, config, rng)
                                                 : sample_bath_velocity(config, rng);
        const auto e = bath_collision(v, w, config, rng);
        if (k == 0) {
          p.sum_w += w;
          p.sum_w_sq += w.cwiseAbs2();
          p.sum_p += config.mode == AxisMode::paper ? Mat3::Identity() : Mat3(e.phi * e.phi.transpose());
          first_dv[r] = e.v2 - e.v1;
          first_rel[r] = e.w1 - e.v1;
        }
        v = e.v2;
        p.speed2[k + 1] += v.squaredNorm();
      }
      p.sum_v += v;
      p.sum_v_sq += v.cwiseAbs2();
    }
  });

  ReplicaSummary out;
  out.replicas = R;
  out.n_collisions = steps;
  out.mean_speed2_by_step.assign(steps + 1, 0.0);
  Vec3 sv = Vec3::Zero(), svq = Vec3::Zero(), sw = Vec3::Zero(), swq = Vec3::Zero();
  Mat3 sp = Mat3::Zero();
  for (const auto& p : partials) {
    sv += p.sum_v;
    svq += p.sum_v_sq;
    sw += p.sum_w;
    swq += p.sum_w_sq;
    sp += p.sum_p;
    for (std::uint64_t k = 0; k <= steps; ++k) out.mean_speed2_by_step[k] += p.speed2[k];
  }
  const double n = static_cast<double>(R);
  for (double& x : out.mean_speed2_by_step) x /= n;
  auto se_of = [n](const Vec3& sum, const Vec3& sum_sq) {
    const Vec3 m = sum / n;
    if (n < 2) return Vec3(Vec3::Constant(std::numeric_limits<double>::infinity()));
    return Vec3(((sum_sq / n - m.cwiseAbs2()) * (n / (n - 1.0)) / n).cwiseMax(0.0).cwiseSqrt());
  };
  out.mean_final_v = sv / n;
  out.se_final_v = se_of(sv, svq);
  if (steps > 0) {
    out.mean_first_w = sw / n;
    out.se_first_w = se_of(sw, swq);
    out.mean_first_projector = sp / n;
    const double k = config.masses.main_coupling();
    Vec3 sr = Vec3::Zero(), srq = Vec3::Zero();
    for (std::uint64_t r = 0; r < R; ++r) {
      const Vec3 d = first_dv[r] - k * out.mean_first_projector * first_rel[r];
      sr += d;
      srq += d.cwiseAbs2();
    }
    out.drift_residual = sr / n;
    out.drift_residual_se = se_of(sr, srq);
  }
  return out;
}

std::vector<CorrelationRow> correlation_for_constant_speed(const BathConfig& config, const std::vector<double>& speed_ratios,
                                                           std::uint64_t samples_per_evaluation,
                                                           int bisection_iterations) {
  config.validate();
  if (samples_per_evaluation < 2) throw InvalidArgument("correlation_for_constant_speed: need at least two samples");
  const double c = config.bath_speed;
  const double k = config.masses.main_coupling();
  std::vector<CorrelationRow> rows;
  for (double ratio : speed_ratios) {
    if (!(ratio >= 0.0 && ratio < 1.0)) throw InvalidArgument("correlation_for_constant_speed: speed ratio must lie in [0, 1)");
    CorrelationRow row;
    row.speed_ratio = ratio;
    row.predicted_rho = ratio;
    if (ratio == 0.0) {
      // No preferred direction at rest; the balance is the equipartition state.
      row.converged = true;
      rows.push_back(row);
      continue;
    }
    const Vec3 v1(ratio * c, 0.0, 0.0);
    const double v2norm = v1.squaredNorm();
    row.exact_rho = ((2.0 - k) * v2norm - k * c * c) / (2.0 * (1.0 - k)) / (ratio * c * c);

    struct Moments {
      double energy_change = 0.0, vw = 0.0, w2 = 0.0;
    };
    auto evaluate = [&](double target) {
      BathConfig local = config;
      local.target_correlation = target;
      Moments m;
      for (std::uint64_t i = 0; i < samples_per_evaluation; ++i) {
        // Common random numbers: sample i reuses its stream for every target.
        Philox4x32 rng = Philox4x32::stream(config.seed, i, lane::correlation_sweep);
        const Vec3 w = sample_correlated_bath(v1, local, rng);
        const auto e = bath_collision(v1, w, local, rng);
        m.energy_change += e.v2.squaredNorm() - v2norm;
        m.vw += v1.dot(w);
        m.w2 += w.squaredNorm();
      }
      const double n = static_cast<double>(samples_per_evaluation);
      m.energy_change /= n;
      m.vw /= n;
      m.w2 /= n;
      return m;
    };

    double lo = 0.0, hi = 1.0;
    Moments flo = evaluate(lo);
    const Moments fhi = evaluate(hi);
    if ((flo.energy_change > 0.0) == (fhi.energy_change > 0.0)) {
      row.target_rho = std::numeric_limits<double>::quiet_NaN();
      row.measured_rho = std::numeric_limits<double>::quiet_NaN();
      row.energy_change = flo.energy_change;
      row.converged = false;
      rows.push_back(row);
      continue;
    }
    for (int it = 0; it < bisection_iterations; ++it) {
      const double mid = 0.5 * (lo + hi);
      const Moments fm = evaluate(mid);
      if ((fm.energy_change > 0.0) == (flo.energy_change > 0.0)) {
        lo = mid;
        flo = fm;
      } else {
        hi = mid;
      }
    }
    row.target_rho = 0.5 * (lo + hi);
    const Moments at = evaluate(row.target_rho);
    row.energy_change = at.energy_change;
    row.measured_rho = at.vw / std::sqrt(v2norm * at.w2);
    row.converged = true;
    rows.push_back(row);
  }
  return rows;
}

Mat3 projector_mean_estimate(std::uint64_t n, Philox4x32& rng) {
  if (n < 1) throw InvalidArgument("projector_mean_estimate: n must be >= 1");
  Mat3 sum = Mat3::Zero();
  for (std::uint64_t i = 0; i < n; ++i) {
    const Vec3 phi = sample_phi(rng);
    sum += phi * phi.transpose();
  }
  return sum / static_cast<double>(n);
}

std::vector<CollisionEvent<double>> generate_events(const BathConfig& config, EventSource source, std::uint64_t n,
                                                    std::optional<double> main_rms) {
  config.validate();
  if (source == EventSource::correlated && !config.target_correlation) {
    throw InvalidArgument("generate_events: correlated source needs target_correlation");
  }
  const double c2 = config.bath_speed * config.bath_speed;
  const double rms = main_rms.value_or(std::sqrt(config.masses.gamma2() * c2));
  std::vector<CollisionEvent<double>> events;
  events.reserve(n);
  for (std::uint64_t i = 0; i < n; ++i) {
    Philox4x32 rng = Philox4x32::stream(config.seed, i, lane::minkowski_events);
    const auto a = standard_normal_pair(rng);
    const auto b = standard_normal_pair(rng);
    const Vec3 v1 = (rms / std::sqrt(3.0)) * Vec3(a[0], a[1], b[0]);
    Vec3 w1;
    if (source == EventSource::independent) {
      w1 = sample_bath_velocity(config, rng);
    } else {
      w1 = v1.norm() > 0.0 ? sample_correlated_bath(v1, config, rng) : sample_bath_velocity(config, rng);
    }
    events.push_back(bath_collision(v1, w1, config, rng));
  }
  return events;
}

}  // namespace stochcoll
