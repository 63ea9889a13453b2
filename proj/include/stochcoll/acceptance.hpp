#pragma once

// End-to-end acceptance suite. Each criterion is a list of numeric checks
// value in [lo, hi].

#include "stochcoll/emit.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace stochcoll {

struct CheckResult {
  int criterion = 0;
  std::string check;
  double value = 0.0;
  double lo = 0.0;
  double hi = 0.0;
  bool passed = false;
};

struct CriterionResult {
  int id = 0;
  std::string title;
  std::vector<CheckResult> checks;
  double seconds = 0.0;     // wall clock, never written to output files
  double time_limit = 0.0;  // seconds, 0 = none
  std::string error;        // set when the criterion threw

  bool checks_passed() const;
  bool within_time() const { return time_limit <= 0.0 || seconds <= time_limit; }
};

struct AcceptanceOptions {
  std::uint64_t seed = kDefaultSeed;
  unsigned threads = 0;
  bool determinism_check = true;
  std::vector<int> only;  // criteria to run, empty = all
};

std::vector<CriterionResult> run_acceptance(const AcceptanceOptions& options);

/// Rows: criterion, check, value, lo, hi, passed.
Table acceptance_table(const std::vector<CriterionResult>& results);

/// One console line per criterion.
std::string summary_line(const CriterionResult& result);

}  // namespace stochcoll
