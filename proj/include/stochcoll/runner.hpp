#pragma once

#include "stochcoll/config.hpp"
#include "stochcoll/emit.hpp"

#include <exception>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

namespace stochcoll {

struct RunOutput {
  Table main;
  std::vector<std::pair<std::string, Table>> extras;  // (file tag, table)
  std::vector<std::string> console;                   // may carry timing, never written to files
  bool success = true;
};

/// Executes the subcommand and returns its tables.
RunOutput execute(const RunConfig& config);

/// "out.csv" with tag "histogram" -> "out.histogram.csv".
std::string companion_path(const std::string& output, const std::string& tag);

/// Executes, writes the main table to config.output_path (stdout when empty)
/// and every extra table next to it. Returns the process exit status.
int run(const RunConfig& config, std::ostream& out, std::ostream& log);

/// Machine-readable error object for a failed run.
std::string error_object(const std::exception& e);

}  // namespace stochcoll
