#include "stochcoll/acceptance.hpp"

#include "stochcoll/collision.hpp"
#include "stochcoll/eigenframe.hpp"
#include "stochcoll/heatbath.hpp"
#include "stochcoll/nelson.hpp"
#include "stochcoll/parallel.hpp"
#include "stochcoll/stats.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <memory>

namespace stochcoll {

namespace {

constexpr std::uint64_t kCollisionEvents = 10000;

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t salt) { return seed ^ (salt * 0x9E3779B97F4A7C15ull); }

class Checks {
 public:
  explicit Checks(CriterionResult& r) : r_(r) {}

  void in_range(const std::string& name, double value, double lo, double hi) {
    r_.checks.push_back({r_.id, name, value, lo, hi, value >= lo && value <= hi});
  }
  void at_most(const std::string& name, double value, double hi) { in_range(name, value, -std::numeric_limits<double>::infinity(), hi); }

 private:
  CriterionResult& r_;
};

double uniform(Philox4x32& rng, double lo, double hi) { return lo + (hi - lo) * uniform_open01(rng); }

struct RandomCollision {
  CollisionEvent<double> event;
  Projector<double> axis;
};

/// Random masses with gamma^2 log-uniform on [1e-4, 1], random axis, velocities in [-10, 10]^3.
std::vector<RandomCollision> random_collisions(std::uint64_t seed, std::uint64_t n) {
  std::vector<RandomCollision> out;
  out.reserve(n);
  for (std::uint64_t i = 0; i < n; ++i) {
    auto rng = Philox4x32::stream(seed, i, lane::test_events);
    const double gamma2 = std::pow(10.0, -4.0 * uniform_open01(rng));
    const double main = std::exp(uniform(rng, std::log(0.1), std::log(10.0)));
    const MassPair<double> masses(main, gamma2 * main);
    Vec3 v1, w1;
    for (int k = 0; k < 3; ++k) v1[k] = uniform(rng, -10.0, 10.0);
    for (int k = 0; k < 3; ++k) w1[k] = uniform(rng, -10.0, 10.0);
    const Projector<double> axis(sample_phi(rng));
    out.push_back({collide(v1, w1, axis, masses), axis});
  }
  return out;
}

double rel(double err, double scale) { return std::abs(err) / std::max(scale, std::numeric_limits<double>::min()); }

void criterion_conservation(CriterionResult& r, const AcceptanceOptions& o) {
  Checks c(r);
  const auto events = random_collisions(derive_seed(o.seed, 1), kCollisionEvents);
  double mom = 0.0, energy = 0.0, forms = 0.0;
  for (const auto& [e, axis] : events) {
    const double pscale = e.masses.main_mass() * e.v1.norm() + e.masses.incident_mass() * e.w1.norm();
    mom = std::max(mom, rel((total_momentum(Side::post, e) - total_momentum(Side::pre, e)).norm(), pscale));
    energy = std::max(energy, rel(total_energy(Side::post, e) - total_energy(Side::pre, e), total_energy(Side::pre, e)));
    const double vscale = std::max(e.v1.norm(), e.w1.norm());
    const auto [vb, wb] = collide_block_form(e.v1, e.w1, axis, e.masses);
    const auto [vu, wu] = collide_update_form(e.v1, e.w1, axis, e.masses);
    const auto [vr, wr] = collide_rotation_form(e.v1, e.w1, axis, e.masses);
    forms = std::max({forms, rel((vb - vu).norm(), vscale), rel((wb - wu).norm(), vscale), rel((vb - vr).norm(), vscale),
                      rel((wb - wr).norm(), vscale)});
  }
  c.at_most("momentum_relative_error", mom, 1e-12);
  c.at_most("energy_relative_error", energy, 1e-12);
  c.at_most("collision_forms_gap", forms, 1e-12);
}

void criterion_ledger(CriterionResult& r, const AcceptanceOptions& o) {
  Checks c(r);
  const auto events = random_collisions(derive_seed(o.seed, 1), kCollisionEvents);
  double worst = 0.0;
  for (const auto& item : events) {
    const auto& e = item.event;
    const double h = e.v1.squaredNorm() + e.masses.gamma2() * e.w1.squaredNorm();
    worst = std::max(worst, rel(nelson_energy_ledger(e).total() - h, h));
  }
  c.at_most("ledger_total_relative_error", worst, 1e-12);
  const auto e = collide(Vec3(1.0, 0.0, 0.0), Vec3(-1.0, 0.0, 0.0), Projector<double>(Vec3::UnitX()), MassPair<double>(4.0, 1.0));
  const auto ledger = nelson_energy_ledger(e);
  c.in_range("head_on_ledger_total", ledger.total(), 1.25 - 4e-16, 1.25 + 4e-16);
  c.in_range("head_on_v2", e.v2[0], 0.2 - 1e-15, 0.2 + 1e-15);
  c.in_range("head_on_w2", e.w2[0], 2.2 - 1e-15, 2.2 + 1e-15);
}

void criterion_eigenframe(CriterionResult& r, const AcceptanceOptions& o) {
  Checks c(r);
  const auto events = random_collisions(derive_seed(o.seed, 1), kCollisionEvents);
  double orth = 0.0, norms = 0.0, shift = 0.0, eig_plus = 0.0, eig_minus = 0.0, frame = 0.0;
  for (const auto& item : events) {
    const auto& e = item.event;
    const double g2 = e.masses.gamma2();
    const double gamma = e.masses.gamma();
    const double vscale = std::max(e.v1.norm(), e.w1.norm());
    const Vec3 dv = e.v2 - e.v1;
    orth = std::max(orth, rel(e.Phi.dot(dv), std::max(vscale * vscale, e.Phi.norm() * dv.norm())));
    const auto f = decompose(e);
    norms = std::max(norms, rel(f.g.norm() - f.g_perp.norm(), vscale));
    shift = std::max(shift, rel((f.g_perp - f.g - e.Phi / gamma).norm(), f.g.norm() + e.Phi.norm() / gamma));
    const auto [pa, pb] = apply_collision_matrix(e.masses, f.a, f.a);
    eig_plus = std::max(eig_plus, rel(std::max((pa - f.a).norm(), (pb - f.a).norm()), f.a.norm()));
    const Vec3 x = -g2 * f.g;
    const auto [ma, mb] = apply_collision_matrix(e.masses, x, f.g);
    eig_minus = std::max(eig_minus, rel(std::max((ma + x).norm(), (mb + f.g).norm()), f.g.norm()));
    frame = std::max(frame, rel(minkowski_frame_residual(e), vscale * vscale));
  }
  c.at_most("phi_orthogonal_to_dv", orth, 1e-12);
  c.at_most("g_norm_equals_g_perp_norm", norms, 1e-12);
  c.at_most("g_perp_equals_g_plus_phi_over_gamma", shift, 1e-12);
  c.at_most("eigenvector_plus_one", eig_plus, 1e-12);
  c.at_most("eigenvector_minus_one", eig_minus, 1e-12);
  c.at_most("frame_residual", frame, 1e-12);
}

void criterion_minkowski(CriterionResult& r, const AcceptanceOptions& o) {
  Checks c(r);
  BathConfig config;
  config.masses = MassPair<double>::from_ratio(0.01);
  config.bath_speed = 1.0;
  config.seed = derive_seed(o.seed, 4);
  const auto independent = generate_events(config, EventSource::independent, 100000);
  const auto ri = minkowski_statistical_residual(independent);
  c.at_most("independent_residual_in_se", std::abs(ri.statistical_residual) / ri.statistical_se, 3.0);
  config.target_correlation = 0.5;
  const auto correlated = generate_events(config, EventSource::correlated, 100000);
  const auto rc = minkowski_statistical_residual(correlated);
  c.at_most("correlated_identity_gap_in_se", std::abs(rc.identity_gap) / rc.statistical_se, 3.0);
  c.at_most("correlated_frame_residual", rc.frame_residual, 1e-12);
}

void criterion_heatbath(CriterionResult& r, const AcceptanceOptions& o) {
  Checks c(r);
  BathConfig config;
  config.masses = MassPair<double>::from_ratio(0.01);
  config.bath_speed = 1.0;
  config.mode = AxisMode::paper;
  config.n_collisions = 100000;
  config.seed = derive_seed(o.seed, 5);
  config.threads = o.threads;
  const auto s = run_bath(config);
  c.in_range("stationary_energy_ratio", s.energy_ratio, 0.95, 1.05);

  BathConfig drift = config;
  drift.n_collisions = 1;
  drift.replicas = 100000;
  drift.initial_velocity = Vec3(0.05, -0.02, 0.0);
  drift.bath_mean = Vec3(0.3, -0.2, 0.1);
  const auto rep = run_replicas(drift);
  const double k = drift.masses.main_coupling();
  const Vec3 predicted = k * (drift.bath_mean - drift.initial_velocity);
  const Vec3 measured = rep.mean_final_v - drift.initial_velocity;
  const char* axis[] = {"x", "y", "z"};
  for (int a = 0; a < 3; ++a) {
    c.at_most(std::string("drift_") + axis[a] + "_in_se", std::abs(measured[a] - predicted[a]) / rep.se_final_v[a], 3.0);
  }
}

void criterion_correlation(CriterionResult& r, const AcceptanceOptions& o) {
  Checks c(r);
  BathConfig config;
  config.masses = MassPair<double>::from_ratio(1e-4);
  config.bath_speed = 1.0;
  config.mode = AxisMode::paper;
  config.seed = derive_seed(o.seed, 6);
  const std::vector<double> ratios{0.25, 0.5, 0.75, 0.9};
  const auto rows = correlation_for_constant_speed(config, ratios, 2000);
  for (const auto& row : rows) {
    char name[64];
    std::snprintf(name, sizeof name, "root_rho_at_speed_%.2f", row.speed_ratio);
    c.in_range(name, row.converged ? row.target_rho : std::numeric_limits<double>::quiet_NaN(), row.speed_ratio - 0.02,
               row.speed_ratio + 0.02);
  }
}

void criterion_gamma(CriterionResult& r, const AcceptanceOptions& o) {
  Checks c(r);
  const double tau_bar = 2.5;
  const std::uint64_t n = 1000000;
  std::vector<double> tau(n), inv(n);
  const auto seed = derive_seed(o.seed, 7);
  for (std::uint64_t i = 0; i < n; ++i) {
    auto rng = Philox4x32::stream(seed, i, lane::gamma_tau);
    tau[i] = sample_tau(tau_bar, rng);
    inv[i] = 1.0 / tau[i];
  }
  const auto mt = iid_mean_se(tau);
  const auto mi = iid_mean_se(inv);
  c.at_most("mean_tau_in_se", std::abs(mt.mean - tau_bar) / mt.se, 3.0);
  c.at_most("mean_inverse_tau_in_se", std::abs(mi.mean - 2.0 / tau_bar) / mi.se, 3.0);
}

double normal_cdf(double x, double sd) { return 0.5 * std::erfc(-x / (sd * std::sqrt(2.0))); }

void criterion_nelson(CriterionResult& r, const AcceptanceOptions& o) {
  Checks c(r);
  auto wave = std::make_shared<HarmonicGroundState>(1, 1.0, 1.0, 1.0);
  DiffusionConfig config;
  config.wave = wave;
  config.potential = wave->matching_potential();
  config.n_particles = 100000;
  config.t0 = 0.0;
  config.t1 = 5.0;
  config.dt = 1e-3;
  config.snapshot_every = 500;
  config.seed = derive_seed(o.seed, 8);
  config.threads = o.threads;
  const auto snaps = evolve_ensemble(config);

  std::vector<double> final_x;
  final_x.reserve(snaps.back().positions.size());
  for (const auto& x : snaps.back().positions) final_x.push_back(x[0]);
  const double sd = std::sqrt(0.5);
  const double ks = ks_statistic(final_x, [sd](double x) { return normal_cdf(x, sd); });
  c.at_most("ks_statistic_final", ks, ks_critical_value(final_x.size(), 0.01));
  const auto var = iid_mean_se([&] {
    std::vector<double> sq;
    for (double x : final_x) sq.push_back(x * x);
    return sq;
  }());
  c.in_range("final_variance_relative", var.mean / 0.5, 0.97, 1.03);

  double madelung = 0.0;
  const auto potential = wave->matching_potential();
  for (double t : {0.0, 2.5, 5.0}) {
    for (int i = 0; i <= 1000; ++i) {
      const Vec3 x(-6.0 * sd + 12.0 * sd * i / 1000.0, 0.0, 0.0);
      madelung = std::max(madelung, std::abs(madelung_residual(*wave, potential, x, t)));
    }
  }
  c.at_most("madelung_residual_max", madelung, 1e-8);

  const auto energy = energy_mc(snaps, *wave, potential, config.tau_bar);
  double worst = 0.0;
  for (const auto& e : energy) worst = std::max(worst, std::abs(e.mean - 0.5) / e.se);
  c.at_most("energy_max_deviation_in_se", worst, 3.0);
  const auto osmotic = osmotic_residual(snaps, *wave);
  c.at_most("osmotic_residual_scaled", osmotic.norm, 0.05);
}

void criterion_energy_forms(CriterionResult& r, const AcceptanceOptions&) {
  Checks c(r);
  struct Case {
    std::string name;
    std::shared_ptr<const WaveModel> wave;
    double tau_bar;
    double t;
  };
  const double inf = std::numeric_limits<double>::infinity();
  const std::vector<Case> cases{
      {"harmonic_1d", std::make_shared<HarmonicGroundState>(1, 1.0, 1.0, 1.0), inf, 0.0},
      {"harmonic_2d", std::make_shared<HarmonicGroundState>(2, 2.0, 0.5, 1.5), 3.0, 0.7},
      {"harmonic_3d", std::make_shared<HarmonicGroundState>(3, 0.25, 1.0, 2.0), 2.0, 1.0},
      {"free_packet_t0", std::make_shared<FreeGaussianPacket>(1.0, 1.0, 0.8, -1.0, 0.7), inf, 0.0},
      {"free_packet_t2", std::make_shared<FreeGaussianPacket>(1.0, 1.0, 0.8, -1.0, 0.7), 5.0, 2.0},
      {"plane_wave_1d", std::make_shared<PlaneWave>(1, 1.0, 1.0, Vec3(0.6, 0, 0), Vec3::Zero(), 2.0), 4.0, 0.3},
      {"plane_wave_3d", std::make_shared<PlaneWave>(3, 2.0, 0.5, Vec3(0.3, -0.4, 0.2), Vec3(-1, -1, -1), 2.0), inf, 1.0},
  };
  for (const auto& k : cases) {
    const auto q = energy_quadrature(*k.wave, k.wave->matching_potential(), k.tau_bar, k.t);
    c.at_most(k.name + "_form_gap", std::abs(q.rs_form - q.psi_form) / std::max(1.0, std::abs(q.rs_form)), 1e-8);
  }
  const auto ground = energy_quadrature(*cases.front().wave, cases.front().wave->matching_potential(), inf, 0.0);
  c.in_range("harmonic_1d_energy", ground.rs_form, 0.5 - 1e-8, 0.5 + 1e-8);
}

void criterion_two_particle(CriterionResult& r, const AcceptanceOptions& o) {
  Checks c(r);
  auto make = [&](std::shared_ptr<const WaveModel> wave, std::uint64_t seed, std::uint64_t n) {
    DiffusionConfig d;
    d.wave = wave;
    d.potential = wave->matching_potential();
    d.n_particles = n;
    d.t0 = 0.0;
    d.t1 = 2.0;
    d.dt = 1e-3;
    d.snapshot_every = 500;
    d.tau_bar = 2.0;
    d.seed = seed;
    d.threads = o.threads;
    return d;
  };
  const auto main = make(std::make_shared<HarmonicGroundState>(1, 1.0, 1.0, 1.0), derive_seed(o.seed, 10), 100000);
  const auto incident = make(std::make_shared<HarmonicGroundState>(1, 0.25, 1.0, 2.0), derive_seed(o.seed, 110), 100000);
  const auto rep = two_particle_energy(main, incident);
  c.in_range("reference_total", rep.reference_total, 0.5 + 1.0 + 1.5 + 1.5 - 1e-8, 0.5 + 1.0 + 1.5 + 1.5 + 1e-8);
  c.at_most("total_max_deviation_in_se", rep.max_deviation_se, 3.0);
  c.at_most("total_drift_in_se", rep.drift_se, 3.0);
  c.at_most("cross_correlation_in_se", std::abs(rep.cross_correlation) / rep.cross_correlation_se, 3.0);

  // Frozen incident particle: no diffusion, no drift.
  auto frozen_main = make(std::make_shared<HarmonicGroundState>(1, 1.0, 1.0, 1.0), derive_seed(o.seed, 210), 10000);
  auto frozen = make(std::make_shared<PlaneWave>(1, 0.25, 0.0, Vec3::Zero(), Vec3::Zero(), 1.0), derive_seed(o.seed, 310), 10000);
  const auto rf = two_particle_energy(frozen_main, frozen);
  double gap = 0.0;
  const auto em = energy_mc(rf.main_snapshots, *frozen_main.wave, frozen_main.potential, frozen_main.tau_bar);
  for (std::size_t s = 0; s < rf.rows.size(); ++s) gap = std::max(gap, std::abs(rf.rows[s].total - em[s].mean));
  c.at_most("frozen_incident_total_minus_main", gap, 1e-12);
}

void criterion_relativity(CriterionResult& r, const AcceptanceOptions&) {
  Checks c(r);
  const Vec3 rest = Vec3::Zero();
  const Vec3 moving(0.6, 0.0, 0.0);
  c.in_range("time_dilation_ratio", time_dilation_ratio(rest, moving, 1.0), 1.25 - 1e-15, 1.25 + 1e-15);
  c.in_range("relativistic_mass_ratio", relativistic_mass_ratio(moving, 1.0), 1.25 - 1e-15, 1.25 + 1e-15);
  const double light = 299792458.0;
  c.in_range("time_dilation_ratio_si", time_dilation_ratio(rest, Vec3(0.6 * light, 0.0, 0.0), light), 1.25 - 1e-15,
             1.25 + 1e-15);
}

struct Criterion {
  int id;
  const char* title;
  double time_limit;
  std::function<void(CriterionResult&, const AcceptanceOptions&)> body;
};

const std::vector<Criterion>& criteria() {
  static const std::vector<Criterion> list{
      {1, "conservation suite", 1.0, criterion_conservation},
      {2, "energy ledger identity", 0.0, criterion_ledger},
      {3, "correction term and eigenframe identities", 0.0, criterion_eigenframe},
      {4, "statistical Minkowski decomposition", 10.0, criterion_minkowski},
      {5, "heat-bath equilibration and drift", 30.0, criterion_heatbath},
      {6, "speed-correlation law", 60.0, criterion_correlation},
      {7, "gamma collision-time model", 5.0, criterion_gamma},
      {8, "Nelson stationarity and Schroedinger residual", 120.0, criterion_nelson},
      {9, "energy functional dual forms", 0.0, criterion_energy_forms},
      {10, "two-particle additivity", 120.0, criterion_two_particle},
      {11, "relativity evaluators", 0.0, criterion_relativity},
  };
  return list;
}

bool selected(const AcceptanceOptions& o, int id) {
  return o.only.empty() || std::find(o.only.begin(), o.only.end(), id) != o.only.end();
}

std::vector<CriterionResult> run_list(const AcceptanceOptions& o) {
  std::vector<CriterionResult> out;
  for (const auto& k : criteria()) {
    if (!selected(o, k.id)) continue;
    CriterionResult r;
    r.id = k.id;
    r.title = k.title;
    r.time_limit = k.time_limit;
    const auto start = std::chrono::steady_clock::now();
    try {
      k.body(r, o);
    } catch (const std::exception& e) {
      r.error = e.what();
    }
    r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    out.push_back(std::move(r));
  }
  return out;
}

}  // namespace

bool CriterionResult::checks_passed() const {
  if (!error.empty() || checks.empty()) return false;
  return std::all_of(checks.begin(), checks.end(), [](const CheckResult& c) { return c.passed; });
}

std::vector<CriterionResult> run_acceptance(const AcceptanceOptions& options) {
  auto results = run_list(options);
  if (!options.determinism_check || !selected(options, 12)) return results;

  CriterionResult r;
  r.id = 12;
  r.title = "determinism across runs and thread counts";
  const auto start = std::chrono::steady_clock::now();
  try {
    AcceptanceOptions again = options;
    again.threads = resolve_threads(options.threads) == 1 ? 2 : 1;
    const auto first = to_csv(acceptance_table(results));
    const auto second = to_csv(acceptance_table(run_list(again)));
    std::size_t differing = first.size() > second.size() ? first.size() - second.size() : second.size() - first.size();
    for (std::size_t i = 0; i < std::min(first.size(), second.size()); ++i) differing += first[i] != second[i];
    r.checks.push_back({12, "differing_bytes_other_thread_count", static_cast<double>(differing), 0.0, 0.0, differing == 0});
  } catch (const std::exception& e) {
    r.error = e.what();
  }
  r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  results.push_back(std::move(r));
  return results;
}

Table acceptance_table(const std::vector<CriterionResult>& results) {
  Table t;
  t.columns = {"criterion", "check", "value", "lo", "hi", "passed"};
  for (const auto& r : results) {
    if (!r.error.empty()) {
      const double nan = std::numeric_limits<double>::quiet_NaN();
      t.add({static_cast<std::int64_t>(r.id), std::string("error: ") + r.error, nan, nan, nan, std::int64_t{0}});
    }
    for (const auto& c : r.checks) {
      t.add({static_cast<std::int64_t>(c.criterion), c.check, c.value, c.lo, c.hi, static_cast<std::int64_t>(c.passed)});
    }
  }
  return t;
}

std::string summary_line(const CriterionResult& r) {
  const bool pass = r.checks_passed() && r.within_time();
  char head[160];
  std::snprintf(head, sizeof head, "criterion %2d %s  %-46s %7.2f s", r.id, pass ? "PASS" : "FAIL", r.title.c_str(), r.seconds);
  std::string line = head;
  if (r.time_limit > 0.0) {
    char limit[48];
    std::snprintf(limit, sizeof limit, " (limit %.0f s)", r.time_limit);
    line += limit;
  }
  if (!r.error.empty()) line += "  error: " + r.error;
  for (const auto& c : r.checks) {
    if (!c.passed) {
      line += "  [" + c.check + " = " + format_real(c.value) + " outside [" + format_real(c.lo) + ", " + format_real(c.hi) + "]]";
    }
  }
  if (!r.within_time()) line += "  [over time limit]";
  return line;
}

}  // namespace stochcoll
