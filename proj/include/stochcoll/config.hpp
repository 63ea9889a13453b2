#pragma once

// JSON run configuration with strict validation.

#include "stochcoll/heatbath.hpp"
#include "stochcoll/nelson.hpp"

#include <cstdint>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace stochcoll {

inline constexpr std::uint64_t kDefaultSeed = 20240917;

enum class Subcommand { collide, bath, nelson, minkowski, selftest };
enum class OutputFormat { csv, json };

std::string to_string(Subcommand s);
std::optional<Subcommand> parse_subcommand(std::string_view s);

/// Lists every problem found in a configuration.
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(std::vector<std::string> violations);
  const std::vector<std::string>& violations() const { return violations_; }

 private:
  std::vector<std::string> violations_;
};

struct CollideInput {
  double mass_main = 0.0;
  double mass_incident = 0.0;
  Vec3 phi = Vec3::UnitX();
  Vec3 v1 = Vec3::Zero();
  Vec3 w1 = Vec3::Zero();
};

struct CollideParams {
  AxisMode mode = AxisMode::physical;
  std::vector<CollideInput> events;
};

enum class BathExperiment { equilibrate, replicas, correlation };

struct BathParams {
  BathConfig config;
  BathExperiment experiment = BathExperiment::equilibrate;
  std::vector<double> speed_ratios;
  std::uint64_t samples_per_evaluation = 0;
  int iterations = 40;
};

struct ModelSpec {
  std::string type;  // harmonic | free_packet | plane_wave
  int dimension = 1;
  double mass = 0.0;
  double eta = 0.0;
  double omega = 0.0;
  double width = 0.0;
  double x0 = 0.0;
  Vec3 velocity = Vec3::Zero();
  Vec3 origin = Vec3::Zero();
  double length = 0.0;
};

struct PotentialSpec {
  std::string type = "matching";  // matching | zero | harmonic
  double omega = 0.0;
};

struct ParticleSpec {
  ModelSpec model;
  PotentialSpec potential;
  double tau_bar = 0.0;
};

struct NelsonParams {
  ParticleSpec main;
  std::optional<ParticleSpec> incident;
  std::uint64_t n_particles = 0;
  double t0 = 0.0;
  double t1 = 0.0;
  double dt = 0.0;
  Direction direction = Direction::forward;
  std::uint64_t snapshot_every = 0;
  int bins = 200;
  double grid_extent = 6.0;
  int coarsen = 5;
  double min_count = 50.0;
};

struct MinkowskiParams {
  BathConfig config;
  EventSource source = EventSource::independent;
  std::uint64_t n_events = 0;
  int batches = 16;
};

struct SelftestParams {
  bool determinism_check = true;
  std::vector<int> criteria;  // empty = all
};

using SubcommandParams = std::variant<CollideParams, BathParams, NelsonParams, MinkowskiParams, SelftestParams>;

struct RunConfig {
  Subcommand subcommand = Subcommand::selftest;
  std::optional<std::string> input_path;
  std::string output_path;
  OutputFormat format = OutputFormat::csv;
  std::uint64_t seed = kDefaultSeed;
  unsigned threads = 0;
  bool quiet = false;
  SubcommandParams params = SelftestParams{};
  std::uint64_t config_hash = 0;
};

/// FNV-1a, 64 bit.
std::uint64_t fnv1a64(std::string_view bytes);

/// Parses a JSON document. The subcommand comes from the "subcommand" key or
/// from the single parameter block present.
RunConfig parse_config(std::string_view text);
/// As above with the subcommand fixed by the caller.
RunConfig parse_config(std::string_view text, Subcommand subcommand);

/// Configuration for a subcommand that needs no parameters (selftest only).
RunConfig default_config(Subcommand subcommand);

std::shared_ptr<const WaveModel> make_wave(const ModelSpec& spec);
Potential make_potential(const PotentialSpec& spec, const WaveModel& wave);
DiffusionConfig make_diffusion(const NelsonParams& params, const ParticleSpec& particle, std::uint64_t seed,
                               unsigned threads);

}  // namespace stochcoll
