#include "stochcoll/nelson.hpp"

#include "stochcoll/parallel.hpp"
#include "stochcoll/stats.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

namespace stochcoll {

namespace {

std::string format_count(double x) {
  std::ostringstream ss;
  ss << x;
  return ss.str();
}

}  // namespace

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
constexpr std::size_t kParticleChunk = 4096;
constexpr int kSamplerRetries = 100;

std::size_t chunk_count(std::uint64_t n) { return static_cast<std::size_t>((n + kParticleChunk - 1) / kParticleChunk); }

std::pair<std::uint64_t, std::uint64_t> chunk_range(std::size_t c, std::uint64_t n) {
  const std::uint64_t begin = c * kParticleChunk;
  return {begin, std::min<std::uint64_t>(n, begin + kParticleChunk)};
}

Vec3 normal_vector(int dimension, Philox4x32& rng) {
  Vec3 z = Vec3::Zero();
  if (dimension == 1) {
    z[0] = std::sqrt(-2.0 * std::log(uniform_open01(rng))) * std::cos(2.0 * std::numbers::pi * uniform_open01(rng));
    return z;
  }
  const auto a = standard_normal_pair(rng);
  z[0] = a[0];
  z[1] = a[1];
  if (dimension == 3) z[2] = standard_normal_pair(rng)[0];
  return z;
}

/// Integrator drift: b+ forward, b- backward.
Vec3 integrator_drift(const WaveModel& wave, const Vec3& x, double t, Direction direction) {
  const Drifts b = drifts(wave, x, t);
  return direction == Direction::forward ? b.b_plus : b.b_minus;
}

std::vector<Grid1> histogram_grids(const DiffusionConfig& config) {
  const WaveModel& wave = *config.wave;
  std::vector<Grid1> grids(static_cast<std::size_t>(wave.dimension()));
  const auto& box = wave.periodic_box();
  for (int k = 0; k < wave.dimension(); ++k) {
    Grid1& g = grids[static_cast<std::size_t>(k)];
    g.bins = config.bins;
    if (box) {
      g.lo = box->lo[k];
      g.hi = box->hi[k];
      continue;
    }
    // Center and spread are linear and convex in t for the catalog, so the
    // endpoint extents cover the whole run.
    g.lo = std::numeric_limits<double>::infinity();
    g.hi = -g.lo;
    for (double t : {config.t0, config.t1}) {
      g.lo = std::min(g.lo, wave.center(t)[k] - config.grid_extent * wave.spread(t)[k]);
      g.hi = std::max(g.hi, wave.center(t)[k] + config.grid_extent * wave.spread(t)[k]);
    }
  }
  return grids;
}

AxisHistogram empty_histogram(const Grid1& grid) {
  AxisHistogram h;
  h.grid = grid;
  const auto n = static_cast<std::size_t>(grid.bins);
  h.count.assign(n, 0.0);
  h.grad_s_sum.assign(n, 0.0);
  h.window_count.assign(n, 0.0);
  h.window_difference_sum.assign(n, 0.0);
  h.window_drift_sum.assign(n, 0.0);
  return h;
}

void add_into(std::vector<double>& into, const std::vector<double>& from) {
  for (std::size_t j = 0; j < into.size(); ++j) into[j] += from[j];
}

std::vector<double> coarsened(const std::vector<double>& fine, int factor) {
  std::vector<double> out(fine.size() / static_cast<std::size_t>(factor), 0.0);
  for (std::size_t j = 0; j < out.size() * static_cast<std::size_t>(factor); ++j) out[j / static_cast<std::size_t>(factor)] += fine[j];
  return out;
}

/// Neighbor bin, wrapping on periodic axes; -1 past an open edge.
int neighbor(int j, int offset, int bins, bool periodic) {
  const int k = j + offset;
  if (k >= 0 && k < bins) return k;
  if (!periodic) return -1;
  return (k + bins) % bins;
}

void check_estimator_options(const EstimatorOptions& options, const std::vector<EnsembleSnapshot>& snapshots) {
  if (options.coarsen < 1) throw InvalidArgument("estimator: coarsen must be >= 1");
  for (const auto& s : snapshots) {
    for (const auto& a : s.axes) {
      if (a.grid.bins % options.coarsen != 0) throw InvalidArgument("estimator: bins must be a multiple of coarsen");
    }
  }
}

}  // namespace

Drifts drifts(const WaveModel& wave, const Vec3& x, double t) {
  wave.check_domain(x);
  const Vec3 gs = wave.grad_S(x, t);
  const Vec3 gr = wave.grad_R(x, t);
  return {gs + gr, gs - gr};
}

Vec3 wrap_periodic(const WaveModel& wave, const Vec3& x) {
  const auto& box = wave.periodic_box();
  if (!box) return x;
  Vec3 y = x;
  for (int k = 0; k < wave.dimension(); ++k) {
    const double length = box->hi[k] - box->lo[k];
    y[k] = x[k] - length * std::floor((x[k] - box->lo[k]) / length);
    if (y[k] >= box->hi[k]) y[k] = box->lo[k];
  }
  return y;
}

Vec3 step(const Vec3& x, double t, double dt, const WaveModel& wave, Direction direction, Philox4x32& rng) {
  if (!(dt > 0.0)) throw InvalidArgument("step: dt must be positive");
  const double sign = direction == Direction::forward ? 1.0 : -1.0;
  const Vec3 b = integrator_drift(wave, x, t, direction);
  const Vec3 z = normal_vector(wave.dimension(), rng);
  return wrap_periodic(wave, x + sign * b * dt + std::sqrt(wave.sigma2() * dt) * z);
}

int Grid1::index(double x) const {
  if (!(x >= lo && x < hi)) return -1;
  const int j = static_cast<int>((x - lo) / width());
  return std::min(j, bins - 1);
}

std::vector<double> AxisHistogram::probability() const {
  double total = 0.0;
  for (double c : count) total += c;
  std::vector<double> p(count.size(), 0.0);
  if (total > 0.0) {
    for (std::size_t j = 0; j < p.size(); ++j) p[j] = count[j] / total;
  }
  return p;
}

double EnsembleSnapshot::histogram_mass() const {
  if (axes.empty()) return 0.0;
  double mass = 0.0;
  for (double p : axes.front().probability()) mass += p;
  return mass;
}

void DiffusionConfig::validate() const {
  std::string errors;
  if (!wave) errors += "wave is required; ";
  if (n_particles < 1) errors += "n_particles must be >= 1; ";
  if (!(dt > 0.0) || !std::isfinite(dt)) errors += "dt must be positive; ";
  if (!std::isfinite(t0) || !std::isfinite(t1) || t1 < t0) errors += "need finite t0 <= t1; ";
  if (!(tau_bar > 0.0)) errors += "tau_bar must be positive; ";
  if (bins < 1) errors += "bins must be >= 1; ";
  if (!(grid_extent > 0.0)) errors += "grid_extent must be positive; ";
  if (errors.empty()) {
    const double steps = (t1 - t0) / dt;
    if (std::abs(steps - std::round(steps)) > 1e-9 * std::max(1.0, steps)) errors += "t1 - t0 must be a multiple of dt; ";
    if (steps >= 1e9) errors += "too many steps; ";
  }
  if (!errors.empty()) throw InvalidArgument("DiffusionConfig: " + errors);
}

std::uint64_t DiffusionConfig::n_steps() const { return static_cast<std::uint64_t>(std::llround((t1 - t0) / dt)); }

DensityTable::DensityTable(const WaveModel& wave, double t, int nodes) {
  if (wave.dimension() != 1) throw InvalidArgument("DensityTable: one-dimensional models only");
  if (nodes < 3) throw InvalidArgument("DensityTable: need at least 3 nodes");
  double lo = 0.0;
  double hi = 0.0;
  if (const auto box = wave.periodic_box()) {
    lo = box->lo[0];
    hi = box->hi[0];
  } else {
    lo = wave.center(t)[0] - 10.0 * wave.spread(t)[0];
    hi = wave.center(t)[0] + 10.0 * wave.spread(t)[0];
  }
  const auto n = static_cast<std::size_t>(nodes);
  x_.resize(n);
  c_.resize(n);
  const double h = (hi - lo) / static_cast<double>(n - 1);
  double previous = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    x_[i] = i + 1 == n ? hi : lo + static_cast<double>(i) * h;
    const double rho = wave.density(Vec3(x_[i], 0.0, 0.0), t);
    c_[i] = i == 0 ? 0.0 : c_[i - 1] + 0.5 * h * (previous + rho);
    previous = rho;
  }
  const double total = c_.back();
  if (!(total > 0.0) || !std::isfinite(total)) throw SamplingError("DensityTable: density does not integrate");
  for (double& c : c_) c /= total;
}

double DensityTable::cdf(double x) const {
  if (x <= x_.front()) return 0.0;
  if (x >= x_.back()) return 1.0;
  const auto it = std::upper_bound(x_.begin(), x_.end(), x);
  const auto i = static_cast<std::size_t>(it - x_.begin());
  const double f = (x - x_[i - 1]) / (x_[i] - x_[i - 1]);
  return c_[i - 1] + f * (c_[i] - c_[i - 1]);
}

double DensityTable::inverse(double u) const {
  if (u <= 0.0) return x_.front();
  if (u >= 1.0) return x_.back();
  const auto it = std::upper_bound(c_.begin(), c_.end(), u);
  const auto i = static_cast<std::size_t>(it - c_.begin());
  const double dc = c_[i] - c_[i - 1];
  const double f = dc > 0.0 ? (u - c_[i - 1]) / dc : 0.5;
  return x_[i - 1] + f * (x_[i] - x_[i - 1]);
}

std::vector<Vec3> sample_initial(const WaveModel& wave, double t, std::uint64_t n, std::uint64_t seed, unsigned threads) {
  std::vector<Vec3> x(n, Vec3::Zero());
  const int d = wave.dimension();
  if (d == 1) {
    const DensityTable table(wave, t);
    for_each_chunk(chunk_count(n), threads, [&](std::size_t c) {
      const auto [begin, end] = chunk_range(c, n);
      for (std::uint64_t i = begin; i < end; ++i) {
        auto rng = Philox4x32::stream(seed, i, lane::nelson_initial);
        x[i][0] = table.inverse(uniform_open01(rng));
      }
    });
    return x;
  }

  const auto& box = wave.periodic_box();
  const Vec3 c = box ? Vec3(0.5 * (box->lo + box->hi)) : wave.center(t);
  const Vec3 sd = 1.25 * wave.spread(t);
  const double rho_peak = wave.density(c, t);
  auto envelope = [&](const Vec3& y) {
    if (box) return rho_peak;
    double q = 0.0;
    for (int k = 0; k < d; ++k) q += (y[k] - c[k]) * (y[k] - c[k]) / (sd[k] * sd[k]);
    return rho_peak * std::exp(-0.5 * q);
  };
  for_each_chunk(chunk_count(n), threads, [&](std::size_t chunk) {
    const auto [begin, end] = chunk_range(chunk, n);
    for (std::uint64_t i = begin; i < end; ++i) {
      auto rng = Philox4x32::stream(seed, i, lane::nelson_initial);
      bool accepted = false;
      for (int attempt = 0; attempt < kSamplerRetries && !accepted; ++attempt) {
        Vec3 y = Vec3::Zero();
        if (box) {
          for (int k = 0; k < d; ++k) y[k] = box->lo[k] + (box->hi[k] - box->lo[k]) * uniform_open01(rng);
        } else {
          const Vec3 z = normal_vector(d, rng);
          for (int k = 0; k < d; ++k) y[k] = c[k] + sd[k] * z[k];
        }
        const double ratio = wave.density(y, t) / envelope(y);
        if (ratio > 1.0 + 1e-9) throw SamplingError("sample_initial: rejection envelope below the density");
        if (uniform_open01(rng) < ratio) {
          x[i] = y;
          accepted = true;
        }
      }
      if (!accepted) {
        throw SamplingError("sample_initial: particle " + std::to_string(i) + " rejected " +
                            std::to_string(kSamplerRetries) + " times");
      }
    }
  });
  return x;
}

std::vector<EnsembleSnapshot> evolve_ensemble(const DiffusionConfig& config) {
  config.validate();
  const WaveModel& wave = *config.wave;
  const int d = wave.dimension();
  const std::uint64_t n = config.n_particles;
  const std::uint64_t n_steps = config.n_steps();
  const bool forward = config.direction == Direction::forward;
  const double sign = forward ? 1.0 : -1.0;
  const double t_start = forward ? config.t0 : config.t1;
  const double t_end = forward ? config.t1 : config.t0;
  const double dt = config.dt;
  const double noise = std::sqrt(wave.sigma2() * dt);
  auto time_at = [&](std::uint64_t k) { return k == n_steps ? t_end : t_start + sign * static_cast<double>(k) * dt; };

  const std::vector<Grid1> grids = histogram_grids(config);
  std::vector<Vec3> x = sample_initial(wave, t_start, n, config.seed, config.threads);
  std::vector<Vec3> b(n);
  const std::size_t n_chunks = chunk_count(n);
  for_each_chunk(n_chunks, config.threads, [&](std::size_t c) {
    const auto [begin, end] = chunk_range(c, n);
    for (std::uint64_t i = begin; i < end; ++i) b[i] = integrator_drift(wave, x[i], t_start, config.direction);
  });

  std::vector<std::uint64_t> marks{0};
  if (config.snapshot_every > 0) {
    for (std::uint64_t k = config.snapshot_every; k < n_steps; k += config.snapshot_every) marks.push_back(k);
  }
  if (n_steps > 0) marks.push_back(n_steps);

  auto blank = [&] {
    std::vector<AxisHistogram> axes;
    for (const auto& g : grids) axes.push_back(empty_histogram(g));
    return axes;
  };

  // Fills the snapshot-time fields of `snap` from the current positions.
  auto assemble = [&](EnsembleSnapshot& snap) {
    const double t = snap.time;
    std::vector<std::vector<AxisHistogram>> partial(n_chunks);
    std::vector<double> speed2(n_chunks, 0.0);
    for_each_chunk(n_chunks, config.threads, [&](std::size_t c) {
      partial[c] = blank();
      const auto [begin, end] = chunk_range(c, n);
      for (std::uint64_t i = begin; i < end; ++i) {
        const Vec3 gs = wave.grad_S(x[i], t);
        const Vec3 gr = wave.grad_R(x[i], t);
        speed2[c] += gs.squaredNorm() + gr.squaredNorm();
        for (int k = 0; k < d; ++k) {
          auto& h = partial[c][static_cast<std::size_t>(k)];
          const int j = h.grid.index(x[i][k]);
          if (j < 0) {
            h.outside += 1.0;
            continue;
          }
          h.count[static_cast<std::size_t>(j)] += 1.0;
          h.grad_s_sum[static_cast<std::size_t>(j)] += gs[k];
        }
      }
    });
    double total_speed2 = 0.0;
    for (std::size_t c = 0; c < n_chunks; ++c) {
      total_speed2 += speed2[c];
      for (int k = 0; k < d; ++k) {
        auto& into = snap.axes[static_cast<std::size_t>(k)];
        const auto& from = partial[c][static_cast<std::size_t>(k)];
        add_into(into.count, from.count);
        add_into(into.grad_s_sum, from.grad_s_sum);
        into.outside += from.outside;
      }
    }
    snap.mean_speed2 = total_speed2 / static_cast<double>(n);
    if (config.keep_positions) snap.positions = x;
  };

  std::vector<EnsembleSnapshot> snapshots;
  EnsembleSnapshot first;
  first.time = t_start;
  first.n_particles = n;
  first.direction = config.direction;
  first.axes = blank();
  assemble(first);
  snapshots.push_back(std::move(first));

  for (std::size_t m = 1; m < marks.size(); ++m) {
    const std::uint64_t k_begin = marks[m - 1];
    const std::uint64_t k_end = marks[m];
    std::vector<std::vector<AxisHistogram>> window(n_chunks);
    for_each_chunk(n_chunks, config.threads, [&](std::size_t c) {
      window[c] = blank();
      auto& acc = window[c];
      const auto [begin, end] = chunk_range(c, n);
      for (std::uint64_t i = begin; i < end; ++i) {
        Vec3 xi = x[i];
        Vec3 bi = b[i];
        for (std::uint64_t k = k_begin + 1; k <= k_end; ++k) {
          auto rng = Philox4x32::stream(config.seed, i, lane::nelson_step, static_cast<std::uint32_t>(2 * k));
          const Vec3 dx = sign * bi * dt + noise * normal_vector(d, rng);
          xi = wrap_periodic(wave, xi + dx);
          bi = integrator_drift(wave, xi, time_at(k), config.direction);
          for (int a = 0; a < d; ++a) {
            auto& h = acc[static_cast<std::size_t>(a)];
            const int j = h.grid.index(xi[a]);
            if (j < 0) continue;
            const auto ju = static_cast<std::size_t>(j);
            h.window_count[ju] += 1.0;
            h.window_difference_sum[ju] += dx[a] / (sign * dt);
            h.window_drift_sum[ju] += bi[a];
          }
        }
        x[i] = xi;
        b[i] = bi;
      }
    });

    EnsembleSnapshot snap;
    snap.time = time_at(k_end);
    snap.step = k_end;
    snap.n_particles = n;
    snap.window_steps = k_end - k_begin;
    snap.direction = config.direction;
    snap.axes = blank();
    for (std::size_t c = 0; c < n_chunks; ++c) {
      for (int a = 0; a < d; ++a) {
        auto& into = snap.axes[static_cast<std::size_t>(a)];
        const auto& from = window[c][static_cast<std::size_t>(a)];
        add_into(into.window_count, from.window_count);
        add_into(into.window_difference_sum, from.window_difference_sum);
        add_into(into.window_drift_sum, from.window_drift_sum);
      }
    }
    assemble(snap);
    snapshots.push_back(std::move(snap));
  }
  return snapshots;
}

std::vector<double> particle_energies(const EnsembleSnapshot& snapshot, const WaveModel& wave, const Potential& potential) {
  if (snapshot.positions.empty()) throw InvalidArgument("particle_energies: snapshot has no positions");
  std::vector<double> e(snapshot.positions.size());
  const double t = snapshot.time;
  for (std::size_t i = 0; i < e.size(); ++i) {
    const Vec3& x = snapshot.positions[i];
    e[i] = 0.5 * wave.mass() * (wave.grad_S(x, t).squaredNorm() + wave.grad_R(x, t).squaredNorm()) + potential(x, t);
  }
  return e;
}

double collision_time_offset(double eta, double tau_bar) {
  if (!(tau_bar > 0.0)) throw InvalidArgument("collision_time_offset: tau_bar must be positive");
  return std::isinf(tau_bar) ? 0.0 : 3.0 * eta / tau_bar;
}

std::vector<EnergyPoint> energy_mc(const std::vector<EnsembleSnapshot>& snapshots, const WaveModel& wave,
                                   const Potential& potential, double tau_bar) {
  const double offset = collision_time_offset(wave.eta(), tau_bar);
  std::vector<EnergyPoint> out;
  out.reserve(snapshots.size());
  for (const auto& s : snapshots) {
    const auto e = particle_energies(s, wave, potential);
    const MeanSe m = iid_mean_se(e);
    out.push_back({s.time, m.mean + offset, m.se});
  }
  return out;
}

double madelung_residual(const WaveModel& wave, const Potential& potential, const Vec3& x, double t) {
  wave.check_domain(x);
  return wave.dS_dt(x, t) - 0.5 * wave.grad_R(x, t).squaredNorm() + 0.5 * wave.grad_S(x, t).squaredNorm() -
         0.5 * wave.eta() / wave.mass() * wave.lap_R(x, t) + potential(x, t) / wave.mass();
}

QuadratureGrid default_quadrature_grid(const WaveModel& wave, double t) {
  QuadratureGrid grid;
  const int d = wave.dimension();
  if (const auto box = wave.periodic_box()) {
    grid.lo = box->lo;
    grid.hi = box->hi;
    grid.points = 16;
    return grid;
  }
  grid.lo.head(d) = wave.center(t).head(d) - 10.0 * wave.spread(t).head(d);
  grid.hi.head(d) = wave.center(t).head(d) + 10.0 * wave.spread(t).head(d);
  grid.points = d == 1 ? 2000 : d == 2 ? 400 : 100;
  return grid;
}

EnergyQuadrature energy_quadrature(const WaveModel& wave, const Potential& potential, double tau_bar, double t,
                                   const QuadratureGrid& grid) {
  const int d = wave.dimension();
  if (grid.points < 1) throw InvalidArgument("energy_quadrature: grid needs points");
  Vec3 h = Vec3::Zero();
  double volume = 1.0;
  for (int k = 0; k < d; ++k) {
    if (!(grid.hi[k] > grid.lo[k])) throw InvalidArgument("energy_quadrature: empty grid extent");
    h[k] = (grid.hi[k] - grid.lo[k]) / grid.points;
    volume *= h[k];
  }
  const bool psi_defined = wave.eta() > 0.0;
  const double kinetic_psi = psi_defined ? wave.eta() * wave.eta() / (2.0 * wave.mass()) : 0.0;

  std::uint64_t total = 1;
  for (int k = 0; k < d; ++k) total *= static_cast<std::uint64_t>(grid.points);
  double mass = 0.0;
  double rs = 0.0;
  double ps = 0.0;
  for (std::uint64_t idx = 0; idx < total; ++idx) {
    Vec3 x = Vec3::Zero();
    std::uint64_t rest = idx;
    for (int k = 0; k < d; ++k) {
      const auto ik = rest % static_cast<std::uint64_t>(grid.points);
      rest /= static_cast<std::uint64_t>(grid.points);
      x[k] = grid.lo[k] + (static_cast<double>(ik) + 0.5) * h[k];
    }
    const double rho = wave.density(x, t);
    const double v = potential(x, t);
    mass += rho;
    rs += 0.5 * wave.mass() * rho * (wave.grad_S(x, t).squaredNorm() + wave.grad_R(x, t).squaredNorm()) + rho * v;
    if (psi_defined) {
      ps += kinetic_psi * wave.grad_psi(x, t).squaredNorm() + std::norm(wave.psi(x, t)) * v;
    }
  }
  EnergyQuadrature q;
  q.mass = mass * volume;
  if (std::abs(1.0 - q.mass) > 1e-8) {
    std::ostringstream msg;
    msg.precision(3);
    msg << "energy_quadrature: grid holds mass " << q.mass << ", deficit " << 1.0 - q.mass << " exceeds 1e-8";
    throw DomainError(msg.str());
  }
  q.offset = collision_time_offset(wave.eta(), tau_bar);
  q.rs_form = rs * volume + q.offset;
  q.psi_form = psi_defined ? ps * volume + q.offset : kNaN;
  return q;
}

EnergyQuadrature energy_quadrature(const WaveModel& wave, const Potential& potential, double tau_bar, double t) {
  return energy_quadrature(wave, potential, tau_bar, t, default_quadrature_grid(wave, t));
}

ResidualReport osmotic_residual(const std::vector<EnsembleSnapshot>& snapshots, const WaveModel& wave,
                                const EstimatorOptions& options) {
  if (snapshots.size() < 2) throw InvalidArgument("osmotic_residual: need at least 2 snapshots");
  check_estimator_options(options, snapshots);
  const int d = wave.dimension();
  const bool periodic = wave.periodic_box().has_value();
  const double s2 = wave.sigma2();
  const int coarse_bins = snapshots.front().axes.front().grid.bins / options.coarsen;

  // Count-weighted sums per (axis, coarse bin) across windows.
  const auto cells = static_cast<std::size_t>(d * coarse_bins);
  std::vector<double> w(cells, 0.0), rw(cells, 0.0), ew(cells, 0.0), pw(cells, 0.0), bw(cells, 0.0);
  ResidualReport report;
  for (const auto& s : snapshots) {
    if (s.window_steps == 0) continue;
    const double sign = s.direction == Direction::forward ? 1.0 : -1.0;
    for (int a = 0; a < d; ++a) {
      const auto& ax = s.axes[static_cast<std::size_t>(a)];
      const auto count = coarsened(ax.window_count, options.coarsen);
      const auto diff = coarsened(ax.window_difference_sum, options.coarsen);
      const auto drift = coarsened(ax.window_drift_sum, options.coarsen);
      const double h = ax.grid.width() * options.coarsen;
      for (int j = 0; j < coarse_bins; ++j) {
        const auto ju = static_cast<std::size_t>(j);
        if (count[ju] == 0.0) continue;
        const int jm = neighbor(j, -1, coarse_bins, periodic);
        const int jp = neighbor(j, 1, coarse_bins, periodic);
        const double occupancy = count[ju] / static_cast<double>(s.window_steps);
        if (occupancy < options.min_count || jm < 0 || jp < 0 || count[static_cast<std::size_t>(jm)] == 0.0 ||
            count[static_cast<std::size_t>(jp)] == 0.0) {
          ++report.bins_excluded;
          continue;
        }
        const double grad_log =
            (std::log(count[static_cast<std::size_t>(jp)]) - std::log(count[static_cast<std::size_t>(jm)])) / (2.0 * h);
        const double empirical = diff[ju] / count[ju];
        const double mean_drift = drift[ju] / count[ju];
        // Forward runs measure b- and predict it from b+; backward runs the reverse.
        const double predicted = mean_drift - sign * s2 * grad_log;
        const auto cell = static_cast<std::size_t>(a * coarse_bins + j);
        w[cell] += count[ju];
        rw[cell] += count[ju] * (empirical - predicted);
        ew[cell] += count[ju] * empirical;
        pw[cell] += count[ju] * predicted;
        bw[cell] += count[ju] * mean_drift;
        ++report.bins_used;
      }
    }
  }
  if (report.bins_excluded > 0) {
    report.warnings.push_back(std::to_string(report.bins_excluded) + " bin(s) below occupancy " +
                              format_count(options.min_count) + " excluded");
  }
  double total_w = 0.0;
  double sum_r2 = 0.0;
  double max_b = 0.0;
  for (int a = 0; a < d; ++a) {
    const double h = snapshots.front().axes[static_cast<std::size_t>(a)].grid.width() * options.coarsen;
    const double lo = snapshots.front().axes[static_cast<std::size_t>(a)].grid.lo;
    for (int j = 0; j < coarse_bins; ++j) {
      const auto cell = static_cast<std::size_t>(a * coarse_bins + j);
      if (w[cell] == 0.0) continue;
      const double r = rw[cell] / w[cell];
      total_w += w[cell];
      sum_r2 += w[cell] * r * r;
      max_b = std::max(max_b, std::abs(bw[cell] / w[cell]));
      report.bins.push_back({a, lo + (j + 0.5) * h, w[cell], r, ew[cell] / w[cell], pw[cell] / w[cell]});
    }
  }
  if (total_w == 0.0) {
    report.norm = kNaN;
    report.warnings.push_back("no bin met the occupancy threshold");
    return report;
  }
  report.scale = max_b;
  if (max_b == 0.0) {
    report.scale = 1.0;
    report.warnings.push_back("drift vanishes on every bin; residual left unscaled");
  }
  report.norm = std::sqrt(sum_r2 / total_w) / report.scale;
  return report;
}

ResidualReport continuity_residual(const std::vector<EnsembleSnapshot>& snapshots, const WaveModel& wave,
                                   const EstimatorOptions& options) {
  if (snapshots.size() < 3) throw InvalidArgument("continuity_residual: need at least 3 snapshots");
  check_estimator_options(options, snapshots);
  const int d = wave.dimension();
  const bool periodic = wave.periodic_box().has_value();
  const int coarse_bins = snapshots.front().axes.front().grid.bins / options.coarsen;

  ResidualReport report;
  double total_w = 0.0;
  double sum_r2 = 0.0;
  double scale_sum = 0.0;
  int scale_count = 0;
  for (std::size_t s = 1; s + 1 < snapshots.size(); ++s) {
    const auto& prev = snapshots[s - 1];
    const auto& here = snapshots[s];
    const auto& next = snapshots[s + 1];
    const double n = static_cast<double>(here.n_particles);
    const double dt = next.time - prev.time;
    for (int a = 0; a < d; ++a) {
      const auto au = static_cast<std::size_t>(a);
      const double h = here.axes[au].grid.width() * options.coarsen;
      const auto c_prev = coarsened(prev.axes[au].count, options.coarsen);
      const auto c_here = coarsened(here.axes[au].count, options.coarsen);
      const auto c_next = coarsened(next.axes[au].count, options.coarsen);
      const auto g_here = coarsened(here.axes[au].grad_s_sum, options.coarsen);
      std::vector<double> flux(c_here.size(), 0.0);
      double rho_max = 0.0;
      for (std::size_t j = 0; j < c_here.size(); ++j) {
        // rho_hat * mean(dS/dx) over the bin.
        flux[j] = g_here[j] / (n * h);
        rho_max = std::max(rho_max, c_here[j] / (n * h));
      }
      double scale = rho_max * std::sqrt(here.mean_speed2) / wave.spread(here.time)[a];
      if (!(scale > 0.0)) {
        scale = 1.0;
        report.warnings.push_back("degenerate continuity scale; residual left unscaled");
      }
      scale_sum += scale;
      ++scale_count;
      for (int j = 0; j < coarse_bins; ++j) {
        const auto ju = static_cast<std::size_t>(j);
        if (c_here[ju] == 0.0) continue;
        const int jm = neighbor(j, -1, coarse_bins, periodic);
        const int jp = neighbor(j, 1, coarse_bins, periodic);
        if (c_here[ju] < options.min_count || jm < 0 || jp < 0) {
          ++report.bins_excluded;
          continue;
        }
        const double lhs = (c_next[ju] - c_prev[ju]) / (n * h) / dt;
        const double rhs = -(flux[static_cast<std::size_t>(jp)] - flux[static_cast<std::size_t>(jm)]) / (2.0 * h);
        const double r = (lhs - rhs) / scale;
        const double weight = c_here[ju] / n;
        total_w += weight;
        sum_r2 += weight * r * r;
        ++report.bins_used;
        report.bins.push_back({a, here.axes[au].grid.lo + (j + 0.5) * h, weight, r, lhs, rhs});
      }
    }
  }
  if (report.bins_excluded > 0) {
    report.warnings.push_back(std::to_string(report.bins_excluded) + " bin(s) below occupancy " +
                              format_count(options.min_count) + " excluded");
  }
  report.scale = scale_count > 0 ? scale_sum / scale_count : 0.0;
  if (total_w == 0.0) {
    report.norm = kNaN;
    report.warnings.push_back("no bin met the occupancy threshold");
    return report;
  }
  report.norm = std::sqrt(sum_r2 / total_w);
  return report;
}

double continuity_residual_analytic(const WaveModel& wave, double t, int points_per_axis, double relative_step) {
  if (points_per_axis < 1) throw InvalidArgument("continuity_residual_analytic: need points");
  const int d = wave.dimension();
  const Vec3 c = wave.center(t);
  const Vec3 s = wave.spread(t);
  const double s_mean = s.head(d).mean();
  const double hx = relative_step * s_mean;
  // Time step from the speed at which the density moves.
  double v_ref = std::sqrt(wave.sigma2()) / s_mean + wave.grad_S(c, t).norm();
  if (!(v_ref > 0.0)) v_ref = 1.0;
  const double ht = relative_step * s_mean / v_ref;
  auto d4 = [](double fm2, double fm1, double fp1, double fp2, double h) {
    return (-fp2 + 8.0 * fp1 - 8.0 * fm1 + fm2) / (12.0 * h);
  };
  auto flux = [&](const Vec3& x, int k) { return wave.density(x, t) * wave.grad_S(x, t)[k]; };

  std::uint64_t total = 1;
  for (int k = 0; k < d; ++k) total *= static_cast<std::uint64_t>(points_per_axis);
  double wsum = 0.0;
  double r2 = 0.0;
  double v2 = 0.0;
  double rho_max = 0.0;
  std::vector<double> residual(total), weight(total);
  for (std::uint64_t idx = 0; idx < total; ++idx) {
    Vec3 x = c;
    std::uint64_t rest = idx;
    for (int k = 0; k < d; ++k) {
      const auto ik = static_cast<double>(rest % static_cast<std::uint64_t>(points_per_axis));
      rest /= static_cast<std::uint64_t>(points_per_axis);
      const double f = points_per_axis == 1 ? 0.0 : ik / (points_per_axis - 1) * 2.0 - 1.0;
      x[k] = c[k] + 4.0 * s[k] * f;
    }
    const double lhs = d4(wave.density(x, t - 2 * ht), wave.density(x, t - ht), wave.density(x, t + ht),
                          wave.density(x, t + 2 * ht), ht);
    double div = 0.0;
    for (int k = 0; k < d; ++k) {
      Vec3 e = Vec3::Zero();
      e[k] = hx;
      div += d4(flux(x - 2 * e, k), flux(x - e, k), flux(x + e, k), flux(x + 2 * e, k), hx);
    }
    const double rho = wave.density(x, t);
    residual[idx] = lhs + div;
    weight[idx] = rho;
    wsum += rho;
    v2 += rho * (wave.grad_S(x, t).squaredNorm() + wave.grad_R(x, t).squaredNorm());
    rho_max = std::max(rho_max, rho);
  }
  const double v_rms = std::sqrt(v2 / wsum);
  const double scale = rho_max * v_rms / s_mean;
  for (std::uint64_t i = 0; i < total; ++i) r2 += weight[i] * residual[i] * residual[i];
  return std::sqrt(r2 / wsum) / (scale > 0.0 ? scale : 1.0);
}

TwoParticleReport two_particle_energy(const DiffusionConfig& main, const DiffusionConfig& incident) {
  main.validate();
  incident.validate();
  if (main.seed == incident.seed) throw InvalidArgument("two_particle_energy: the two ensembles need different seeds");
  if (main.t0 != incident.t0 || main.t1 != incident.t1 || main.dt != incident.dt ||
      main.snapshot_every != incident.snapshot_every || main.direction != incident.direction) {
    throw InvalidArgument("two_particle_energy: ensembles must share the time grid");
  }
  if (!main.keep_positions || !incident.keep_positions) throw InvalidArgument("two_particle_energy: positions must be kept");

  TwoParticleReport report;
  report.main_snapshots = evolve_ensemble(main);
  report.incident_snapshots = evolve_ensemble(incident);
  report.incident_frozen = incident.wave->eta() == 0.0;
  const auto em = energy_mc(report.main_snapshots, *main.wave, main.potential, main.tau_bar);
  const auto ei = energy_mc(report.incident_snapshots, *incident.wave, incident.potential, incident.tau_bar);
  report.main_reference = energy_quadrature(*main.wave, main.potential, main.tau_bar, main.t0).rs_form;
  report.incident_reference = energy_quadrature(*incident.wave, incident.potential, incident.tau_bar, incident.t0).rs_form;
  report.reference_total = report.main_reference + report.incident_reference;

  for (std::size_t s = 0; s < em.size(); ++s) {
    TwoParticleRow row;
    row.time = em[s].time;
    row.main_energy = em[s].mean;
    row.main_se = em[s].se;
    row.incident_energy = ei[s].mean;
    row.incident_se = ei[s].se;
    row.total = em[s].mean + ei[s].mean;
    // A frozen ensemble has zero spread; report its SE as zero.
    const double si = std::isfinite(ei[s].se) ? ei[s].se : 0.0;
    row.total_se = std::hypot(em[s].se, si);
    row.reference = report.reference_total;
    const double dev = std::abs(row.total - row.reference);
    report.max_deviation_se = std::max(report.max_deviation_se, row.total_se > 0.0 ? dev / row.total_se : (dev > 0.0 ? std::numeric_limits<double>::infinity() : 0.0));
    report.rows.push_back(row);
  }
  if (report.rows.size() >= 2) {
    const auto& a = report.rows.front();
    const auto& z = report.rows.back();
    const double se = std::hypot(a.total_se, z.total_se);
    report.drift_se = se > 0.0 ? std::abs(z.total - a.total) / se : 0.0;
  }

  const auto pm = particle_energies(report.main_snapshots.back(), *main.wave, main.potential);
  const auto pi = particle_energies(report.incident_snapshots.back(), *incident.wave, incident.potential);
  const std::size_t n = std::min(pm.size(), pi.size());
  if (n >= 2) {
    const std::span<const double> a(pm.data(), n);
    const std::span<const double> b(pi.data(), n);
    if (covariance(a, a) > 0.0 && covariance(b, b) > 0.0) {
      report.cross_correlation = pearson(a, b);
      report.cross_correlation_se = 1.0 / std::sqrt(static_cast<double>(n));
    }
  }
  return report;
}

}  // namespace stochcoll
