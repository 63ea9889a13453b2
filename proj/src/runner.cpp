#include "stochcoll/runner.hpp"

#include "stochcoll/acceptance.hpp"
#include "stochcoll/eigenframe.hpp"
#include "stochcoll/heatbath.hpp"
#include "stochcoll/nelson.hpp"
#include "stochcoll/stats.hpp"

#include <json.hpp>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>

namespace stochcoll {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::int64_t as_int(std::uint64_t x) { return static_cast<std::int64_t>(x); }

void push_vec(std::vector<std::string>& columns, const std::string& name) {
  for (const char* axis : {"_x", "_y", "_z"}) columns.push_back(name + axis);
}

void push_vec(std::vector<Cell>& row, const Vec3& v) {
  for (int k = 0; k < 3; ++k) row.emplace_back(v[k]);
}

std::string fixed(double x, int digits = 6) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*g", digits, x);
  return buf;
}

RunOutput run_collide(const RunConfig& config, const CollideParams& p) {
  RunOutput out;
  auto& cols = out.main.columns;
  cols = {"mass_main", "mass_incident", "gamma2"};
  for (const char* name : {"phi", "v1", "w1", "v2", "w2", "Phi"}) push_vec(cols, name);
  for (const char* name : {"sym_main", "osm_main", "sym_inc", "osm_inc", "ledger_total"}) cols.push_back(name);
  for (const char* name : {"a", "g", "g_perp"}) push_vec(cols, name);
  for (const char* name : {"frame_residual", "momentum_gap", "energy_gap", "form_gap"}) cols.push_back(name);
  (void)config;
  for (const auto& in : p.events) {
    const MassPair<double> masses(in.mass_main, in.mass_incident);
    const auto e = p.mode == AxisMode::paper ? collide_identity_axis(in.v1, in.w1, masses)
                                              : collide(in.v1, in.w1, Projector<double>(in.phi), masses);
    const auto ledger = nelson_energy_ledger(e);
    const auto frame = decompose(e);
    std::vector<Cell> row{masses.main_mass(), masses.incident_mass(), masses.gamma2()};
    for (const Vec3* v : {&e.phi, &e.v1, &e.w1, &e.v2, &e.w2, &e.Phi}) push_vec(row, *v);
    for (double x : {ledger.sym_main, ledger.osm_main, ledger.sym_inc, ledger.osm_inc, ledger.total()}) row.emplace_back(x);
    for (const Vec3* v : {&frame.a, &frame.g, &frame.g_perp}) push_vec(row, *v);
    row.emplace_back(minkowski_frame_residual(e));
    row.emplace_back((total_momentum(Side::post, e) - total_momentum(Side::pre, e)).cwiseAbs().maxCoeff());
    row.emplace_back(total_energy(Side::post, e) - total_energy(Side::pre, e));
    row.emplace_back(e.form_gap);
    out.main.add(std::move(row));
  }
  out.console.push_back("collide: " + std::to_string(p.events.size()) + " event(s)");
  return out;
}

RunOutput run_bath_experiment(const RunConfig& config, BathParams p) {
  RunOutput out;
  p.config.seed = config.seed;
  p.config.threads = config.threads;
  if (p.experiment == BathExperiment::equilibrate) {
    const auto s = run_bath(p.config);
    auto& cols = out.main.columns;
    cols = {"seed", "n_collisions", "n_stationary", "gamma2", "bath_speed", "mean_v2", "mean_v2_se", "mean_w2",
            "mean_vw", "mean_vw_se", "rho", "rho_se", "energy_ratio", "energy_ratio_se", "mean_tau", "mean_inv_tau"};
    push_vec(cols, "mean_delta_v");
    push_vec(cols, "mean_relative");
    push_vec(cols, "final_v");
    cols.push_back("elapsed_time");
    cols.push_back("max_invariant_violation");
    std::vector<Cell> row{as_int(s.seed), as_int(s.n), as_int(s.n_stationary), p.config.masses.gamma2(),
                          p.config.bath_speed, s.mean_v2, s.mean_v2_se, s.mean_w2, s.mean_vw, s.mean_vw_se, s.rho,
                          s.rho_se, s.energy_ratio, s.energy_ratio_se, s.mean_tau, s.mean_inv_tau};
    push_vec(row, s.mean_delta_v);
    push_vec(row, s.mean_relative);
    push_vec(row, s.final_v);
    row.emplace_back(s.elapsed_time);
    row.emplace_back(s.max_invariant_violation);
    out.main.add(std::move(row));
    if (p.config.record_every > 0) {
      Table traj;
      traj.columns = {"collision", "time", "v_x", "v_y", "v_z", "speed2", "running_energy_ratio"};
      for (const auto& t : s.trajectory) {
        traj.add({as_int(t.collision), t.time, t.v[0], t.v[1], t.v[2], t.speed2, t.running_energy_ratio});
      }
      out.extras.emplace_back("trajectory", std::move(traj));
    }
    out.console.push_back("bath: energy ratio " + fixed(s.energy_ratio) + " +- " + fixed(s.energy_ratio_se, 2) +
                          " over " + std::to_string(s.n_stationary) + " stationary collisions");
    return out;
  }
  if (p.experiment == BathExperiment::replicas) {
    const auto s = run_replicas(p.config);
    auto& cols = out.main.columns;
    cols = {"replicas", "n_collisions", "main_coupling"};
    for (const char* name : {"mean_final_v", "se_final_v", "mean_first_w", "se_first_w", "drift_residual", "drift_residual_se"}) {
      push_vec(cols, name);
    }
    std::vector<Cell> row{as_int(s.replicas), as_int(s.n_collisions), p.config.masses.main_coupling()};
    for (const Vec3* v : {&s.mean_final_v, &s.se_final_v, &s.mean_first_w, &s.se_first_w, &s.drift_residual, &s.drift_residual_se}) {
      push_vec(row, *v);
    }
    out.main.add(std::move(row));
    Table series;
    series.columns = {"step", "mean_speed2"};
    for (std::size_t k = 0; k < s.mean_speed2_by_step.size(); ++k) series.add({as_int(k), s.mean_speed2_by_step[k]});
    out.extras.emplace_back("series", std::move(series));
    out.console.push_back("bath: " + std::to_string(s.replicas) + " replicas of " + std::to_string(s.n_collisions) +
                          " collision(s)");
    return out;
  }
  const auto rows = correlation_for_constant_speed(p.config, p.speed_ratios, p.samples_per_evaluation, p.iterations);
  out.main.columns = {"speed_ratio", "target_rho", "measured_rho", "predicted_rho", "exact_rho", "energy_change", "converged"};
  for (const auto& r : rows) {
    out.main.add({r.speed_ratio, r.target_rho, r.measured_rho, r.predicted_rho, r.exact_rho, r.energy_change,
                  static_cast<std::int64_t>(r.converged)});
  }
  out.console.push_back("bath: correlation sweep over " + std::to_string(rows.size()) + " speed(s)");
  return out;
}

RunOutput run_minkowski(const RunConfig& config, MinkowskiParams p) {
  RunOutput out;
  p.config.seed = config.seed;
  const auto events = generate_events(p.config, p.source, p.n_events);
  const auto r = minkowski_statistical_residual(events, p.batches);
  out.main.columns = {"n", "gamma2", "source", "frame_residual", "statistical_residual", "statistical_se", "flux",
                      "flux_se", "app_f_flux", "correlation_rho", "delta_E", "delta_E_direct", "identity_gap"};
  out.main.add({as_int(r.n), r.gamma2, std::string(p.source == EventSource::independent ? "independent" : "correlated"),
                r.frame_residual, r.statistical_residual, r.statistical_se, r.flux, r.flux_se, r.app_f_flux,
                r.correlation_rho, r.delta_E, r.delta_E_direct, r.identity_gap});
  out.console.push_back("minkowski: residual " + fixed(r.statistical_residual) + " +- " + fixed(r.statistical_se, 2));
  return out;
}

double max_madelung(const DiffusionConfig& c, double t) {
  const WaveModel& w = *c.wave;
  const Vec3 center = w.center(t);
  const Vec3 spread = w.spread(t);
  const auto box = w.periodic_box();
  double worst = 0.0;
  for (int a = 0; a < w.dimension(); ++a) {
    for (int i = 0; i <= 200; ++i) {
      Vec3 x = center;
      const double f = i / 200.0;
      x[a] = box ? box->lo[a] + f * (box->hi[a] - box->lo[a]) : center[a] + (2.0 * f - 1.0) * 6.0 * spread[a];
      worst = std::max(worst, std::abs(madelung_residual(w, c.potential, x, t)));
    }
  }
  return worst;
}

RunOutput run_nelson(const RunConfig& config, const NelsonParams& p) {
  RunOutput out;
  const DiffusionConfig main = make_diffusion(p, p.main, config.seed, config.threads);
  std::optional<DiffusionConfig> incident;
  if (p.incident) incident = make_diffusion(p, *p.incident, config.seed ^ 0x9E3779B97F4A7C15ull, config.threads);

  std::vector<EnsembleSnapshot> snaps;
  std::optional<TwoParticleReport> pair;
  if (incident) {
    pair = two_particle_energy(main, *incident);
    snaps = pair->main_snapshots;
  } else {
    snaps = evolve_ensemble(main);
  }
  const WaveModel& wave = *main.wave;
  const auto energy = energy_mc(snaps, wave, main.potential, main.tau_bar);

  out.main.columns = {"time", "step", "energy_mc", "energy_se", "main_reference", "mean_x", "variance_x",
                      "histogram_mass", "incident_energy", "incident_se", "total", "total_se", "total_reference"};
  for (std::size_t s = 0; s < snaps.size(); ++s) {
    std::vector<double> x0;
    x0.reserve(snaps[s].positions.size());
    for (const auto& x : snaps[s].positions) x0.push_back(x[0]);
    const double m = mean(x0);
    const double var = x0.size() >= 2 ? covariance(x0, x0) : kNaN;
    const double reference = energy_quadrature(wave, main.potential, main.tau_bar, snaps[s].time).rs_form;
    std::vector<Cell> row{snaps[s].time, as_int(snaps[s].step), energy[s].mean, energy[s].se, reference, m, var,
                          snaps[s].histogram_mass()};
    if (pair) {
      const auto& r = pair->rows[s];
      for (double v : {r.incident_energy, r.incident_se, r.total, r.total_se, r.reference}) row.emplace_back(v);
    } else {
      for (int k = 0; k < 5; ++k) row.emplace_back(kNaN);
    }
    out.main.add(std::move(row));
  }

  Table hist;
  hist.columns = {"time", "axis", "x", "density", "count", "grad_s_mean"};
  for (const auto& s : snaps) {
    for (std::size_t a = 0; a < s.axes.size(); ++a) {
      const auto& ax = s.axes[a];
      for (int j = 0; j < ax.grid.bins; ++j) {
        const auto ju = static_cast<std::size_t>(j);
        const double count = ax.count[ju];
        hist.add({s.time, as_int(a), ax.grid.center(j), count / (static_cast<double>(s.n_particles) * ax.grid.width()),
                  count, count > 0.0 ? ax.grad_s_sum[ju] / count : kNaN});
      }
    }
  }
  out.extras.emplace_back("histogram", std::move(hist));

  Table summary;
  summary.columns = {"name", "value"};
  auto put = [&](const std::string& name, double v) { summary.add({name, v}); };
  double ks = kNaN;
  if (wave.dimension() == 1 && !snaps.back().positions.empty()) {
    const DensityTable table(wave, snaps.back().time);
    std::vector<double> xs;
    for (const auto& x : snaps.back().positions) xs.push_back(x[0]);
    ks = ks_statistic(xs, [&](double x) { return table.cdf(x); });
  }
  put("ks_statistic", ks);
  put("ks_critical_1pct", ks_critical_value(snaps.front().n_particles, 0.01));
  const EstimatorOptions est{p.coarsen, p.min_count};
  ResidualReport osm;
  if (snaps.size() >= 2) osm = osmotic_residual(snaps, wave, est);
  else osm.norm = kNaN;
  put("osmotic_residual", osm.norm);
  put("osmotic_bins_used", static_cast<double>(osm.bins_used));
  put("osmotic_bins_excluded", static_cast<double>(osm.bins_excluded));
  ResidualReport cont;
  if (snaps.size() >= 3) cont = continuity_residual(snaps, wave, est);
  else cont.norm = kNaN;
  put("continuity_residual", cont.norm);
  put("continuity_bins_used", static_cast<double>(cont.bins_used));
  put("continuity_analytic_residual", continuity_residual_analytic(wave, snaps.front().time));
  double madelung = 0.0;
  for (const auto& s : snaps) madelung = std::max(madelung, max_madelung(main, s.time));
  put("madelung_max", madelung);
  const auto q = energy_quadrature(wave, main.potential, main.tau_bar, main.t0);
  put("quadrature_rs", q.rs_form);
  put("quadrature_psi", q.psi_form);
  put("quadrature_mass", q.mass);
  put("cross_correlation", pair ? pair->cross_correlation : kNaN);
  put("cross_correlation_se", pair ? pair->cross_correlation_se : kNaN);
  put("total_max_deviation_se", pair ? pair->max_deviation_se : kNaN);
  out.extras.emplace_back("summary", std::move(summary));

  for (const auto& w : osm.warnings) out.console.push_back("nelson: osmotic: " + w);
  for (const auto& w : cont.warnings) out.console.push_back("nelson: continuity: " + w);
  out.console.push_back("nelson: " + std::to_string(snaps.size()) + " snapshot(s), energy " + fixed(energy.back().mean) +
                        " +- " + fixed(energy.back().se, 2) + ", quadrature " + fixed(q.rs_form));
  return out;
}

RunOutput run_selftest(const RunConfig& config, const SelftestParams& p) {
  RunOutput out;
  AcceptanceOptions options;
  options.seed = config.seed;
  options.threads = config.threads;
  options.determinism_check = p.determinism_check;
  options.only = p.criteria;
  const auto results = run_acceptance(options);
  out.main = acceptance_table(results);
  for (const auto& r : results) {
    out.console.push_back(summary_line(r));
    out.success = out.success && r.checks_passed();
  }
  return out;
}

}  // namespace

RunOutput execute(const RunConfig& config) {
  return std::visit(
      [&](const auto& p) -> RunOutput {
        using T = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<T, CollideParams>) return run_collide(config, p);
        else if constexpr (std::is_same_v<T, BathParams>) return run_bath_experiment(config, p);
        else if constexpr (std::is_same_v<T, NelsonParams>) return run_nelson(config, p);
        else if constexpr (std::is_same_v<T, MinkowskiParams>) return run_minkowski(config, p);
        else return run_selftest(config, p);
      },
      config.params);
}

std::string companion_path(const std::string& output, const std::string& tag) {
  const std::filesystem::path path(output);
  std::filesystem::path result = path;
  result.replace_filename(path.stem().string() + "." + tag + path.extension().string());
  return result.string();
}

int run(const RunConfig& config, std::ostream& out, std::ostream& log) {
  const auto start = std::chrono::steady_clock::now();
  const RunOutput result = execute(config);
  const Metadata meta = run_metadata(config);
  if (config.output_path.empty()) {
    out << render(result.main, config.format, meta);
  } else {
    emit(result.main, config.format, config.output_path, meta);
    for (const auto& [tag, table] : result.extras) emit(table, config.format, companion_path(config.output_path, tag), meta);
  }
  if (!config.quiet) {
    for (const auto& line : result.console) log << line << "\n";
    if (config.output_path.empty() && !result.extras.empty()) log << "note: extra tables need --output\n";
    const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    log << to_string(config.subcommand) << ": done in " << fixed(seconds, 3) << " s\n";
  }
  return result.success ? 0 : 1;
}

std::string error_object(const std::exception& e) {
  nlohmann::ordered_json doc;
  std::string type = "runtime_error";
  nlohmann::ordered_json details = nlohmann::ordered_json::array();
  if (const auto* c = dynamic_cast<const ConfigError*>(&e)) {
    type = "config_error";
    for (const auto& v : c->violations()) details.push_back(v);
  } else if (dynamic_cast<const IoError*>(&e)) {
    type = "io_error";
  } else if (dynamic_cast<const InvalidArgument*>(&e)) {
    type = "invalid_argument";
  } else if (dynamic_cast<const DomainError*>(&e)) {
    type = "domain_error";
  } else if (dynamic_cast<const SamplingError*>(&e)) {
    type = "sampling_error";
  }
  doc["error"]["type"] = type;
  doc["error"]["message"] = e.what();
  if (!details.empty()) doc["error"]["violations"] = details;
  return doc.dump();
}

}  // namespace stochcoll
