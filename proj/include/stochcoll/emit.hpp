#pragma once

// Tabular output: CSV with 17 significant digits, or JSON.

#include "stochcoll/config.hpp"

#include <cstdint>
#include <stdexcept>
#include <string>
#include <utility>
#include <variant>
#include <vector>

namespace stochcoll {

inline constexpr const char* kToolName = "stochcoll";
inline constexpr const char* kToolVersion = "1.0.0";

using Cell = std::variant<double, std::int64_t, std::string>;

struct Table {
  std::vector<std::string> columns;
  std::vector<std::vector<Cell>> rows;

  void add(std::vector<Cell> row);
};

/// Ordered key/value pairs written ahead of the rows.
using Metadata = std::vector<std::pair<std::string, std::string>>;

Metadata run_metadata(const RunConfig& config);

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Finite doubles as %.17g; non-finite as nan, inf or -inf.
std::string format_real(double x);

std::string to_csv(const Table& table, const Metadata& metadata = {});
std::string to_json(const Table& table, const Metadata& metadata = {});
std::string render(const Table& table, OutputFormat format, const Metadata& metadata = {});

/// Writes the rendered table; IoError names the path on failure.
void emit(const Table& table, OutputFormat format, const std::string& path, const Metadata& metadata = {});

/// Reads CSV produced by to_csv. Numeric-looking cells become doubles.
Table parse_csv(const std::string& text);
/// Reads JSON produced by to_json.
Table parse_json(const std::string& text);

}  // namespace stochcoll
