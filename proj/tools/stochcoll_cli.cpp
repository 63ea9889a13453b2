// stochcoll: command-line runner for the collision, heat-bath and Nelson
// experiments.

#include "stochcoll/config.hpp"
#include "stochcoll/emit.hpp"
#include "stochcoll/runner.hpp"

#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <sstream>

namespace {

struct Flags {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string output;
  std::optional<std::string> format;
  std::optional<std::string> mode;
  std::optional<unsigned> threads;
  bool quiet = false;
};

void add_flags(CLI::App& cmd, Flags& f, bool with_mode) {
  cmd.add_option("--config", f.config, "JSON configuration file");
  cmd.add_option("--seed", f.seed, "64-bit seed (overrides the config)");
  cmd.add_option("--output", f.output, "output file (stdout when omitted)");
  cmd.add_option("--format", f.format, "csv or json")->check(CLI::IsMember({"csv", "json"}));
  if (with_mode) cmd.add_option("--mode", f.mode, "paper or physical")->check(CLI::IsMember({"paper", "physical"}));
  cmd.add_option("--threads", f.threads, "worker threads, 0 = hardware");
  cmd.add_flag("--quiet", f.quiet, "no console summary");
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw stochcoll::IoError("cannot read '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void apply_mode(stochcoll::RunConfig& config, const std::string& mode) {
  const auto m = mode == "paper" ? stochcoll::AxisMode::paper : stochcoll::AxisMode::physical;
  if (auto* p = std::get_if<stochcoll::CollideParams>(&config.params)) p->mode = m;
  if (auto* p = std::get_if<stochcoll::BathParams>(&config.params)) p->config.mode = m;
  if (auto* p = std::get_if<stochcoll::MinkowskiParams>(&config.params)) p->config.mode = m;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Stochastic collision and Nelson diffusion experiments"};
  app.require_subcommand(1);
  Flags flags;
  struct Entry {
    stochcoll::Subcommand id;
    const char* help;
    bool mode;
  };
  const Entry entries[] = {
      {stochcoll::Subcommand::collide, "apply single collisions listed in the config", true},
      {stochcoll::Subcommand::bath, "heat-bath Monte Carlo", true},
      {stochcoll::Subcommand::nelson, "Nelson diffusion ensemble", false},
      {stochcoll::Subcommand::minkowski, "statistical Minkowski residual", true},
      {stochcoll::Subcommand::selftest, "run the acceptance suite", false},
  };
  for (const auto& e : entries) add_flags(*app.add_subcommand(stochcoll::to_string(e.id), e.help), flags, e.mode);
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    // Help and version requests exit 0; usage errors share the config error status.
    return app.exit(e) == 0 ? 0 : 2;
  }

  try {
    const auto name = app.get_subcommands().front()->get_name();
    const auto sub = *stochcoll::parse_subcommand(name);
    stochcoll::RunConfig config =
        flags.config.empty() ? stochcoll::default_config(sub) : stochcoll::parse_config(read_file(flags.config), sub);
    if (!flags.config.empty()) config.input_path = flags.config;
    if (flags.seed) config.seed = *flags.seed;
    if (flags.format) config.format = *flags.format == "json" ? stochcoll::OutputFormat::json : stochcoll::OutputFormat::csv;
    if (flags.threads) config.threads = *flags.threads;
    if (flags.mode) apply_mode(config, *flags.mode);
    config.output_path = flags.output;
    config.quiet = flags.quiet;
    return stochcoll::run(config, std::cout, std::cerr);
  } catch (const stochcoll::ConfigError& e) {
    std::cerr << stochcoll::error_object(e) << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << stochcoll::error_object(e) << "\n";
    return 1;
  }
}
