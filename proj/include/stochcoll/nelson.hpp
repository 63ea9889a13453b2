#pragma once

// Nelson diffusion driven by a catalog wave density: drift evaluation,
// Euler-Maruyama ensembles and the estimators that check them.

#include "stochcoll/rng.hpp"
#include "stochcoll/wave.hpp"

#include <cstdint>
#include <limits>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

namespace stochcoll {

enum class Direction { forward, backward };

class SamplingError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Drifts {
  Vec3 b_plus = Vec3::Zero();
  Vec3 b_minus = Vec3::Zero();
};

/// b+ = grad S + grad R, b- = grad S - grad R.
Drifts drifts(const WaveModel& wave, const Vec3& x, double t);

/// Maps x back into the periodic box; identity for models without one.
Vec3 wrap_periodic(const WaveModel& wave, const Vec3& x);

/// One Euler-Maruyama step from time t. Forward: x + b+ dt + sigma sqrt(dt) z.
/// Backward (towards t - dt): x - b- dt + sigma sqrt(dt) z.
Vec3 step(const Vec3& x, double t, double dt, const WaveModel& wave, Direction direction, Philox4x32& rng);

/// Uniform grid on one axis.
struct Grid1 {
  double lo = 0.0;
  double hi = 1.0;
  int bins = 1;

  double width() const { return (hi - lo) / bins; }
  /// Bin of x, or -1 outside [lo, hi).
  int index(double x) const;
  double center(int j) const { return lo + (j + 0.5) * width(); }
};

/// Marginal statistics on one axis.
struct AxisHistogram {
  Grid1 grid;
  std::vector<double> count;       // particles per bin at the snapshot
  std::vector<double> grad_s_sum;  // sum of dS/dx_k over those particles
  double outside = 0.0;            // particles off the grid

  // Accumulated over every step since the previous snapshot, binned by the
  // position after the step.
  std::vector<double> window_count;
  std::vector<double> window_difference_sum;  // (x_n - x_{n-1}) / (t_n - t_{n-1})
  std::vector<double> window_drift_sum;       // integrator drift at x_n

  /// count / (particles on the grid).
  std::vector<double> probability() const;
};

struct EnsembleSnapshot {
  double time = 0.0;
  std::uint64_t step = 0;
  std::uint64_t n_particles = 0;
  std::uint64_t window_steps = 0;
  Direction direction = Direction::forward;
  std::vector<Vec3> positions;  // empty unless kept
  std::vector<AxisHistogram> axes;
  double mean_speed2 = 0.0;  // E[|grad S|^2 + |grad R|^2]

  double histogram_mass() const;
};

struct DiffusionConfig {
  std::shared_ptr<const WaveModel> wave;
  Potential potential = zero_potential();
  std::uint64_t n_particles = 1000;
  double t0 = 0.0;
  double t1 = 1.0;
  double dt = 1e-3;
  std::uint64_t seed = 0;
  double tau_bar = std::numeric_limits<double>::infinity();
  Direction direction = Direction::forward;
  std::uint64_t snapshot_every = 0;  // steps between snapshots, 0 = endpoints only
  int bins = 200;
  double grid_extent = 6.0;  // half-width of the histogram grid in spreads
  bool keep_positions = true;
  unsigned threads = 0;

  void validate() const;
  std::uint64_t n_steps() const;
};

/// Tabulated CDF of a one-dimensional model's density at time t.
class DensityTable {
 public:
  DensityTable(const WaveModel& wave, double t, int nodes = 20001);

  double cdf(double x) const;
  double inverse(double u) const;
  double lo() const { return x_.front(); }
  double hi() const { return x_.back(); }

 private:
  std::vector<double> x_;
  std::vector<double> c_;
};

/// Draws n positions from rho(., t): inverse CDF in 1D, rejection with a
/// Gaussian envelope (uniform on periodic boxes) in 2D and 3D.
std::vector<Vec3> sample_initial(const WaveModel& wave, double t, std::uint64_t n, std::uint64_t seed, unsigned threads = 0);

/// Snapshots at the first and last step and every `snapshot_every` steps, in
/// the order they are reached.
std::vector<EnsembleSnapshot> evolve_ensemble(const DiffusionConfig& config);

/// Per-particle (M/2)(|grad S|^2 + |grad R|^2) + V.
std::vector<double> particle_energies(const EnsembleSnapshot& snapshot, const WaveModel& wave, const Potential& potential);

struct EnergyPoint {
  double time = 0.0;
  double mean = 0.0;
  double se = 0.0;
};

/// 3 eta / tau_bar, zero for an infinite tau_bar.
double collision_time_offset(double eta, double tau_bar);

std::vector<EnergyPoint> energy_mc(const std::vector<EnsembleSnapshot>& snapshots, const WaveModel& wave,
                                   const Potential& potential, double tau_bar);

double madelung_residual(const WaveModel& wave, const Potential& potential, const Vec3& x, double t);

/// Midpoint grid over the active axes.
struct QuadratureGrid {
  Vec3 lo = Vec3::Zero();
  Vec3 hi = Vec3::Zero();
  int points = 0;  // per active axis
};

/// Box, or center +- 10 spreads, at a resolution suited to the dimension.
QuadratureGrid default_quadrature_grid(const WaveModel& wave, double t);

struct EnergyQuadrature {
  double rs_form = 0.0;   // (M/2) int rho (|grad S|^2 + |grad R|^2) + int rho V + offset
  double psi_form = 0.0;  // (eta^2/2M) int |grad psi|^2 + int |psi|^2 V + offset; NaN when eta = 0
  double mass = 0.0;      // int rho
  double offset = 0.0;
};

/// Throws DomainError when the grid misses more than 1e-8 of the mass.
EnergyQuadrature energy_quadrature(const WaveModel& wave, const Potential& potential, double tau_bar, double t,
                                   const QuadratureGrid& grid);
EnergyQuadrature energy_quadrature(const WaveModel& wave, const Potential& potential, double tau_bar, double t = 0.0);

struct ResidualBin {
  int axis = 0;
  double x = 0.0;
  double weight = 0.0;
  double residual = 0.0;
  double empirical = 0.0;
  double predicted = 0.0;
};

struct ResidualReport {
  double norm = 0.0;  // weighted L2 residual in scaled units
  double scale = 0.0;
  std::uint64_t bins_used = 0;
  std::uint64_t bins_excluded = 0;
  std::vector<std::string> warnings;
  std::vector<ResidualBin> bins;
};

struct EstimatorOptions {
  int coarsen = 5;
  double min_count = 50.0;
};

/// Empirical backward drift from path differences against b+ - sigma^2 grad log rho_hat
/// (forward runs; the mirror statement for backward runs). Normalized by
/// max |b| over the evaluated bins.
ResidualReport osmotic_residual(const std::vector<EnsembleSnapshot>& snapshots, const WaveModel& wave,
                                const EstimatorOptions& options = {});

/// Centered difference of rho_hat in time against -div(rho_hat grad S) on the
/// marginal grids, normalized by max rho_hat * v_rms / spread.
ResidualReport continuity_residual(const std::vector<EnsembleSnapshot>& snapshots, const WaveModel& wave,
                                   const EstimatorOptions& options = {});

/// Same comparison on the analytic density with fourth-order differences.
double continuity_residual_analytic(const WaveModel& wave, double t, int points_per_axis = 41, double relative_step = 1e-3);

struct TwoParticleRow {
  double time = 0.0;
  double main_energy = 0.0;
  double main_se = 0.0;
  double incident_energy = 0.0;
  double incident_se = 0.0;
  double total = 0.0;
  double total_se = 0.0;
  double reference = 0.0;
};

struct TwoParticleReport {
  std::vector<TwoParticleRow> rows;
  double main_reference = 0.0;      // quadrature, with the main offset
  double incident_reference = 0.0;  // quadrature, with the incident offset
  double reference_total = 0.0;
  double max_deviation_se = 0.0;  // max |total - reference| / total_se
  double drift_se = 0.0;          // |last total - first total| / combined SE
  double cross_correlation = 0.0;
  double cross_correlation_se = 0.0;
  bool incident_frozen = false;
  std::vector<EnsembleSnapshot> main_snapshots;
  std::vector<EnsembleSnapshot> incident_snapshots;
};

/// Runs two independent ensembles on the same time grid. The configs must
/// have different seeds.
TwoParticleReport two_particle_energy(const DiffusionConfig& main, const DiffusionConfig& incident);

}  // namespace stochcoll
