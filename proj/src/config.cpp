#include "stochcoll/config.hpp"

#include <json.hpp>

#include <cmath>
#include <limits>
#include <set>
#include <sstream>

namespace stochcoll {

namespace {

using json = nlohmann::json;

constexpr double kInf = std::numeric_limits<double>::infinity();

enum class Bound { any, positive, nonnegative, fraction, correlation };

std::string describe(const json& value) { return value.dump(); }

/// Reads keys of one JSON object and records every problem it meets.
class Reader {
 public:
  Reader(const json& node, std::string path, std::vector<std::string>& errors)
      : node_(node), path_(std::move(path)), errors_(errors) {
    if (!node_.is_object()) fail("", "must be an object");
  }

  ~Reader() {
    if (!node_.is_object()) return;
    for (const auto& item : node_.items()) {
      if (!seen_.count(item.key())) fail(item.key(), "unknown key");
    }
  }

  Reader(const Reader&) = delete;
  Reader& operator=(const Reader&) = delete;

  bool has(const std::string& key) const { return node_.is_object() && node_.contains(key); }

  const json* get(const std::string& key, bool required) {
    seen_.insert(key);
    if (!node_.is_object()) return nullptr;
    const auto it = node_.find(key);
    if (it == node_.end()) {
      if (required) fail(key, "is required");
      return nullptr;
    }
    return &*it;
  }

  std::optional<double> real(const std::string& key, bool required, Bound bound = Bound::any) {
    const json* v = get(key, required);
    if (!v) return std::nullopt;
    if (!v->is_number()) {
      fail(key, "must be a number (got " + describe(*v) + ")");
      return std::nullopt;
    }
    const double x = v->get<double>();
    if (!check(key, x, bound)) return std::nullopt;
    return x;
  }

  /// Positive number or the string "inf".
  std::optional<double> time_scale(const std::string& key, bool required) {
    const json* v = get(key, required);
    if (!v) return std::nullopt;
    if (v->is_string() && v->get<std::string>() == "inf") return kInf;
    if (!v->is_number()) {
      fail(key, "must be a positive number or \"inf\" (got " + describe(*v) + ")");
      return std::nullopt;
    }
    const double x = v->get<double>();
    if (!check(key, x, Bound::positive)) return std::nullopt;
    return x;
  }

  std::optional<std::uint64_t> count(const std::string& key, bool required, std::uint64_t min = 0) {
    const json* v = get(key, required);
    if (!v) return std::nullopt;
    if (!v->is_number_unsigned() && !(v->is_number_integer() && v->get<std::int64_t>() >= 0)) {
      fail(key, "must be a non-negative integer (got " + describe(*v) + ")");
      return std::nullopt;
    }
    const auto x = v->get<std::uint64_t>();
    if (x < min) {
      fail(key, "must be >= " + std::to_string(min) + " (got " + std::to_string(x) + ")");
      return std::nullopt;
    }
    return x;
  }

  std::optional<std::string> word(const std::string& key, bool required, std::initializer_list<const char*> allowed) {
    const json* v = get(key, required);
    if (!v) return std::nullopt;
    std::string options;
    for (const char* a : allowed) options += std::string(options.empty() ? "" : "|") + a;
    if (v->is_string()) {
      const auto s = v->get<std::string>();
      for (const char* a : allowed) {
        if (s == a) return s;
      }
    }
    fail(key, "must be one of " + options + " (got " + describe(*v) + ")");
    return std::nullopt;
  }

  std::optional<bool> flag(const std::string& key, bool required) {
    const json* v = get(key, required);
    if (!v) return std::nullopt;
    if (!v->is_boolean()) {
      fail(key, "must be true or false");
      return std::nullopt;
    }
    return v->get<bool>();
  }

  std::optional<Vec3> vec(const std::string& key, bool required) {
    const json* v = get(key, required);
    if (!v) return std::nullopt;
    if (!v->is_array() || v->empty() || v->size() > 3) {
      fail(key, "must be an array of 1 to 3 numbers");
      return std::nullopt;
    }
    Vec3 out = Vec3::Zero();
    for (std::size_t i = 0; i < v->size(); ++i) {
      if (!(*v)[i].is_number() || !std::isfinite((*v)[i].get<double>())) {
        fail(key, "must contain finite numbers");
        return std::nullopt;
      }
      out[static_cast<Eigen::Index>(i)] = (*v)[i].get<double>();
    }
    return out;
  }

  std::optional<std::vector<double>> reals(const std::string& key, bool required) {
    const json* v = get(key, required);
    if (!v) return std::nullopt;
    if (!v->is_array()) {
      fail(key, "must be an array of numbers");
      return std::nullopt;
    }
    std::vector<double> out;
    for (const auto& x : *v) {
      if (!x.is_number() || !std::isfinite(x.get<double>())) {
        fail(key, "must contain finite numbers");
        return std::nullopt;
      }
      out.push_back(x.get<double>());
    }
    return out;
  }

  void fail(const std::string& key, const std::string& message) {
    std::string where = path_;
    if (!key.empty()) where += (where.empty() ? "" : ".") + key;
    errors_.push_back((where.empty() ? "config" : where) + ": " + message);
  }

  const std::string& path() const { return path_; }
  std::vector<std::string>& errors() { return errors_; }

 private:
  bool check(const std::string& key, double x, Bound bound) {
    std::string problem;
    if (!std::isfinite(x)) problem = "must be finite";
    else if (bound == Bound::positive && !(x > 0.0)) problem = "must be positive";
    else if (bound == Bound::nonnegative && !(x >= 0.0)) problem = "must be non-negative";
    else if (bound == Bound::fraction && !(x >= 0.0 && x < 1.0)) problem = "must lie in [0, 1)";
    else if (bound == Bound::correlation && !(x >= -1.0 && x <= 1.0)) problem = "must lie in [-1, 1]";
    if (problem.empty()) return true;
    std::ostringstream got;
    got.precision(17);
    got << x;
    fail(key, problem + " (got " + got.str() + ")");
    return false;
  }

  const json& node_;
  std::string path_;
  std::vector<std::string>& errors_;
  std::set<std::string> seen_;
};

std::string child(const Reader& r, const std::string& key) { return r.path().empty() ? key : r.path() + "." + key; }

/// Main mass plus exactly one of mass_incident or gamma2.
std::optional<MassPair<double>> read_masses(Reader& r) {
  const auto main = r.real("mass_main", true, Bound::positive);
  const bool has_incident = r.has("mass_incident");
  const bool has_ratio = r.has("gamma2");
  const auto incident = r.real("mass_incident", false, Bound::positive);
  const auto ratio = r.real("gamma2", false, Bound::positive);
  if (has_incident == has_ratio) {
    r.fail("", "give exactly one of mass_incident or gamma2");
    return std::nullopt;
  }
  if (!main || !(incident || ratio)) return std::nullopt;
  return MassPair<double>(*main, incident ? *incident : *ratio * *main);
}

AxisMode read_mode(Reader& r) {
  const auto mode = r.word("mode", false, {"paper", "physical"});
  return mode && *mode == "paper" ? AxisMode::paper : AxisMode::physical;
}

CollideParams read_collide(const json& node, std::vector<std::string>& errors) {
  CollideParams p;
  Reader r(node, "collide", errors);
  p.mode = read_mode(r);
  const json* events = r.get("events", true);
  if (!events) return p;
  if (!events->is_array()) {
    r.fail("events", "must be an array");
    return p;
  }
  for (std::size_t i = 0; i < events->size(); ++i) {
    Reader e((*events)[i], "collide.events[" + std::to_string(i) + "]", errors);
    CollideInput in;
    if (const auto m = read_masses(e)) {
      in.mass_main = m->main_mass();
      in.mass_incident = m->incident_mass();
    }
    if (const auto phi = e.vec("phi", p.mode == AxisMode::physical)) {
      if (std::abs(phi->norm() - 1.0) > kAxisRenormalizeTolerance) e.fail("phi", "must be a unit vector");
      in.phi = *phi;
    }
    if (const auto v = e.vec("v1", true)) in.v1 = *v;
    if (const auto w = e.vec("w1", true)) in.w1 = *w;
    p.events.push_back(in);
  }
  return p;
}

void read_bath_common(Reader& r, BathConfig& c) {
  if (const auto m = read_masses(r)) c.masses = *m;
  if (const auto v = r.real("bath_speed", true, Bound::positive)) c.bath_speed = *v;
  if (const auto t = r.time_scale("tau_bar", true)) {
    if (std::isinf(*t)) r.fail("tau_bar", "must be finite for collision sampling");
    else c.tau_bar = *t;
  }
  if (const auto kind = r.word("bath_kind", false, {"fixed_speed", "maxwellian"})) {
    c.bath_kind = *kind == "maxwellian" ? BathKind::maxwellian : BathKind::isotropic_fixed_speed;
  }
  c.mode = read_mode(r);
  if (const auto rho = r.real("target_correlation", false, Bound::correlation)) c.target_correlation = *rho;
  if (const auto v = r.vec("bath_mean", false)) c.bath_mean = *v;
}

BathParams read_bath(const json& node, std::vector<std::string>& errors) {
  BathParams p;
  Reader r(node, "bath", errors);
  if (const auto e = r.word("experiment", false, {"equilibrate", "replicas", "correlation"})) {
    p.experiment = *e == "replicas" ? BathExperiment::replicas
                   : *e == "correlation" ? BathExperiment::correlation
                                         : BathExperiment::equilibrate;
  }
  read_bath_common(r, p.config);
  const bool sweep = p.experiment == BathExperiment::correlation;
  if (const auto n = r.count("n_collisions", !sweep, 1)) p.config.n_collisions = *n;
  if (const auto v = r.vec("initial_velocity", false)) p.config.initial_velocity = *v;
  if (const auto f = r.real("burn_in_fraction", false, Bound::fraction)) p.config.burn_in_fraction = *f;
  if (const auto n = r.count("replicas", p.experiment == BathExperiment::replicas, 1)) p.config.replicas = *n;
  if (const auto n = r.count("record_every", false)) p.config.record_every = *n;
  if (const auto s = r.reals("speed_ratios", sweep)) {
    for (double x : *s) {
      if (!(x >= 0.0)) r.fail("speed_ratios", "must be non-negative");
    }
    p.speed_ratios = *s;
  }
  if (const auto n = r.count("samples_per_evaluation", sweep, 2)) p.samples_per_evaluation = *n;
  if (const auto n = r.count("iterations", false, 1)) p.iterations = static_cast<int>(std::min<std::uint64_t>(*n, 200));
  if (p.config.target_correlation && *p.config.target_correlation != 0.0 && p.config.initial_velocity.norm() == 0.0 &&
      !sweep) {
    r.fail("target_correlation", "a correlated bath needs a nonzero initial_velocity");
  }
  return p;
}

MinkowskiParams read_minkowski(const json& node, std::vector<std::string>& errors) {
  MinkowskiParams p;
  Reader r(node, "minkowski", errors);
  read_bath_common(r, p.config);
  if (const auto s = r.word("source", true, {"independent", "correlated"})) {
    p.source = *s == "correlated" ? EventSource::correlated : EventSource::independent;
  }
  if (const auto n = r.count("n_events", true, 2)) p.n_events = *n;
  if (const auto b = r.count("batches", false, 2)) p.batches = static_cast<int>(std::min<std::uint64_t>(*b, 1024));
  if (p.source == EventSource::correlated && !p.config.target_correlation) {
    r.fail("target_correlation", "is required for a correlated source");
  }
  return p;
}

ModelSpec read_model(const json& node, const std::string& path, std::vector<std::string>& errors) {
  ModelSpec m;
  Reader r(node, path, errors);
  const auto type = r.word("type", true, {"harmonic", "free_packet", "plane_wave"});
  if (!type) return m;
  m.type = *type;
  const bool plane = m.type == "plane_wave";
  if (const auto mass = r.real("mass", true, Bound::positive)) m.mass = *mass;
  if (const auto eta = r.real("eta", true, plane ? Bound::nonnegative : Bound::positive)) m.eta = *eta;
  if (m.type == "free_packet") {
    if (const auto w = r.real("width", true, Bound::positive)) m.width = *w;
    if (const auto x = r.real("x0", false)) m.x0 = *x;
    if (const auto u = r.real("velocity", false)) m.velocity = Vec3(*u, 0.0, 0.0);
    return m;
  }
  if (const auto d = r.count("dimension", true, 1)) {
    if (*d > 3) r.fail("dimension", "must be 1, 2 or 3");
    m.dimension = static_cast<int>(std::min<std::uint64_t>(*d, 3));
  }
  if (m.type == "harmonic") {
    if (const auto w = r.real("omega", true, Bound::positive)) m.omega = *w;
  } else {
    if (const auto u = r.vec("velocity", true)) m.velocity = *u;
    if (const auto o = r.vec("origin", false)) m.origin = *o;
    if (const auto l = r.real("length", true, Bound::positive)) m.length = *l;
  }
  return m;
}

PotentialSpec read_potential(const json* node, const std::string& path, std::vector<std::string>& errors) {
  PotentialSpec p;
  if (!node) return p;
  if (node->is_string()) {
    const auto s = node->get<std::string>();
    if (s == "matching" || s == "zero") {
      p.type = s;
    } else {
      errors.push_back(path + ": must be \"matching\", \"zero\" or a harmonic object (got " + describe(*node) + ")");
    }
    return p;
  }
  Reader r(*node, path, errors);
  if (const auto t = r.word("type", true, {"harmonic"})) p.type = *t;
  if (const auto w = r.real("omega", true, Bound::positive)) p.omega = *w;
  return p;
}

ParticleSpec read_particle(Reader& r, std::vector<std::string>& errors) {
  ParticleSpec p;
  if (const json* m = r.get("model", true)) p.model = read_model(*m, child(r, "model"), errors);
  p.potential = read_potential(r.get("potential", false), child(r, "potential"), errors);
  if (const auto t = r.time_scale("tau_bar", true)) p.tau_bar = *t;
  return p;
}

NelsonParams read_nelson(const json& node, std::vector<std::string>& errors) {
  NelsonParams p;
  Reader r(node, "nelson", errors);
  p.main = read_particle(r, errors);
  if (const json* inc = r.get("incident", false)) {
    Reader ri(*inc, "nelson.incident", errors);
    p.incident = read_particle(ri, errors);
  }
  if (const auto n = r.count("n_particles", true, 1)) p.n_particles = *n;
  if (const auto t = r.real("t0", false)) p.t0 = *t;
  if (const auto t = r.real("t1", true)) p.t1 = *t;
  if (const auto dt = r.real("dt", true, Bound::positive)) p.dt = *dt;
  if (p.t1 < p.t0) r.fail("t1", "must be >= t0");
  if (const auto d = r.word("direction", false, {"forward", "backward"})) {
    p.direction = *d == "backward" ? Direction::backward : Direction::forward;
  }
  if (const auto n = r.count("snapshot_every", false)) p.snapshot_every = *n;
  if (const auto n = r.count("bins", false, 1)) p.bins = static_cast<int>(std::min<std::uint64_t>(*n, 100000));
  if (const auto e = r.real("grid_extent", false, Bound::positive)) p.grid_extent = *e;
  if (const auto n = r.count("coarsen", false, 1)) p.coarsen = static_cast<int>(std::min<std::uint64_t>(*n, 100000));
  if (const auto c = r.real("min_count", false, Bound::nonnegative)) p.min_count = *c;
  if (p.bins % p.coarsen != 0) r.fail("coarsen", "must divide bins");
  return p;
}

SelftestParams read_selftest(const json& node, std::vector<std::string>& errors) {
  SelftestParams p;
  Reader r(node, "selftest", errors);
  if (const auto f = r.flag("determinism_check", false)) p.determinism_check = *f;
  if (const auto list = r.reals("criteria", false)) {
    for (double x : *list) {
      if (x != std::floor(x) || x < 1 || x > 12) r.fail("criteria", "entries must be integers in 1..12");
      else p.criteria.push_back(static_cast<int>(x));
    }
  }
  return p;
}

std::string position_of(std::string_view text, std::size_t byte) {
  std::size_t line = 1;
  std::size_t column = 1;
  for (std::size_t i = 0; i < byte && i < text.size(); ++i) {
    if (text[i] == '\n') {
      ++line;
      column = 1;
    } else {
      ++column;
    }
  }
  return "line " + std::to_string(line) + ", column " + std::to_string(column);
}

RunConfig parse_impl(std::string_view text, std::optional<Subcommand> forced) {
  json doc;
  try {
    doc = json::parse(text.begin(), text.end());
  } catch (const json::parse_error& e) {
    const std::size_t byte = e.byte > 0 ? e.byte - 1 : 0;
    throw ConfigError({"syntax error at " + position_of(text, byte) + ": " + e.what()});
  }
  std::vector<std::string> errors;
  RunConfig config;
  config.config_hash = fnv1a64(text);
  {
    Reader top(doc, "", errors);
    std::optional<Subcommand> named;
    if (const auto s = top.word("subcommand", false, {"collide", "bath", "nelson", "minkowski", "selftest"})) {
      named = parse_subcommand(*s);
    }
    if (const auto seed = top.count("seed", false)) config.seed = *seed;
    if (const auto f = top.word("format", false, {"csv", "json"})) {
      config.format = *f == "json" ? OutputFormat::json : OutputFormat::csv;
    }
    if (const auto t = top.count("threads", false)) config.threads = static_cast<unsigned>(std::min<std::uint64_t>(*t, 1024));

    std::vector<Subcommand> blocks;
    for (Subcommand s : {Subcommand::collide, Subcommand::bath, Subcommand::nelson, Subcommand::minkowski, Subcommand::selftest}) {
      if (top.has(to_string(s))) blocks.push_back(s);
    }
    std::optional<Subcommand> chosen = forced ? forced : named;
    if (forced && named && *forced != *named) {
      top.fail("subcommand", "names " + to_string(*named) + " but the run is " + to_string(*forced));
    }
    if (!chosen) {
      if (blocks.size() == 1) chosen = blocks.front();
      else top.fail("", "cannot tell the subcommand: give \"subcommand\" or exactly one parameter block");
    }
    for (Subcommand s : blocks) {
      if (chosen && s != *chosen) top.fail(to_string(s), "block does not apply to subcommand " + to_string(*chosen));
    }
    if (chosen) {
      config.subcommand = *chosen;
      const std::string key = to_string(*chosen);
      const json* block = top.get(key, *chosen != Subcommand::selftest);
      static const json empty = json::object();
      const json& node = block ? *block : empty;
      switch (*chosen) {
        case Subcommand::collide: config.params = read_collide(node, errors); break;
        case Subcommand::bath: config.params = read_bath(node, errors); break;
        case Subcommand::nelson: config.params = read_nelson(node, errors); break;
        case Subcommand::minkowski: config.params = read_minkowski(node, errors); break;
        case Subcommand::selftest: config.params = read_selftest(node, errors); break;
      }
    }
    for (Subcommand s : blocks) top.get(to_string(s), false);
  }
  if (!errors.empty()) throw ConfigError(std::move(errors));
  return config;
}

std::string join(const std::vector<std::string>& lines) {
  std::string out = "invalid configuration";
  for (const auto& l : lines) out += "\n  " + l;
  return out;
}

}  // namespace

std::string to_string(Subcommand s) {
  switch (s) {
    case Subcommand::collide: return "collide";
    case Subcommand::bath: return "bath";
    case Subcommand::nelson: return "nelson";
    case Subcommand::minkowski: return "minkowski";
    case Subcommand::selftest: return "selftest";
  }
  return "unknown";
}

std::optional<Subcommand> parse_subcommand(std::string_view s) {
  for (Subcommand c : {Subcommand::collide, Subcommand::bath, Subcommand::nelson, Subcommand::minkowski, Subcommand::selftest}) {
    if (s == to_string(c)) return c;
  }
  return std::nullopt;
}

ConfigError::ConfigError(std::vector<std::string> violations)
    : std::runtime_error(join(violations)), violations_(std::move(violations)) {}

std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

RunConfig parse_config(std::string_view text) { return parse_impl(text, std::nullopt); }

RunConfig parse_config(std::string_view text, Subcommand subcommand) { return parse_impl(text, subcommand); }

RunConfig default_config(Subcommand subcommand) {
  if (subcommand != Subcommand::selftest) {
    throw ConfigError({to_string(subcommand) + ": a configuration file is required"});
  }
  RunConfig config;
  config.subcommand = subcommand;
  config.params = SelftestParams{};
  config.config_hash = fnv1a64("");
  return config;
}

std::shared_ptr<const WaveModel> make_wave(const ModelSpec& spec) {
  if (spec.type == "harmonic") return std::make_shared<HarmonicGroundState>(spec.dimension, spec.mass, spec.eta, spec.omega);
  if (spec.type == "free_packet") {
    return std::make_shared<FreeGaussianPacket>(spec.mass, spec.eta, spec.width, spec.x0, spec.velocity[0]);
  }
  if (spec.type == "plane_wave") {
    return std::make_shared<PlaneWave>(spec.dimension, spec.mass, spec.eta, spec.velocity, spec.origin, spec.length);
  }
  throw InvalidArgument("make_wave: unknown model type '" + spec.type + "'");
}

Potential make_potential(const PotentialSpec& spec, const WaveModel& wave) {
  if (spec.type == "matching") return wave.matching_potential();
  if (spec.type == "zero") return zero_potential();
  if (spec.type == "harmonic") return harmonic_potential(wave.mass(), spec.omega);
  throw InvalidArgument("make_potential: unknown potential type '" + spec.type + "'");
}

DiffusionConfig make_diffusion(const NelsonParams& params, const ParticleSpec& particle, std::uint64_t seed,
                               unsigned threads) {
  DiffusionConfig c;
  c.wave = make_wave(particle.model);
  c.potential = make_potential(particle.potential, *c.wave);
  c.n_particles = params.n_particles;
  c.t0 = params.t0;
  c.t1 = params.t1;
  c.dt = params.dt;
  c.seed = seed;
  c.tau_bar = particle.tau_bar;
  c.direction = params.direction;
  c.snapshot_every = params.snapshot_every;
  c.bins = params.bins;
  c.grid_extent = params.grid_extent;
  c.threads = threads;
  return c;
}

}  // namespace stochcoll
