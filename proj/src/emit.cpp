#include "stochcoll/emit.hpp"

#include <json.hpp>

#include <cerrno>
#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <sstream>

namespace stochcoll {

namespace {

using ordered_json = nlohmann::ordered_json;

std::string hex64(std::uint64_t x) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016" PRIx64, x);
  return buf;
}

std::string csv_cell(const Cell& c) {
  if (const auto* d = std::get_if<double>(&c)) return format_real(*d);
  if (const auto* i = std::get_if<std::int64_t>(&c)) return std::to_string(*i);
  const auto& s = std::get<std::string>(c);
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string quoted = "\"";
  for (char ch : s) {
    if (ch == '"') quoted += '"';
    quoted += ch;
  }
  return quoted + "\"";
}

ordered_json json_cell(const Cell& c) {
  if (const auto* d = std::get_if<double>(&c)) {
    if (std::isfinite(*d)) return *d;
    return format_real(*d);
  }
  if (const auto* i = std::get_if<std::int64_t>(&c)) return *i;
  return std::get<std::string>(c);
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char ch = line[i];
    if (quoted) {
      if (ch == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        cur += '"';
        ++i;
      } else if (ch == '"') {
        quoted = false;
      } else {
        cur += ch;
      }
    } else if (ch == '"') {
      quoted = true;
    } else if (ch == ',') {
      out.push_back(cur);
      cur.clear();
    } else {
      cur += ch;
    }
  }
  out.push_back(cur);
  return out;
}

Cell parse_cell(const std::string& s) {
  if (s == "nan") return std::numeric_limits<double>::quiet_NaN();
  if (s == "inf") return std::numeric_limits<double>::infinity();
  if (s == "-inf") return -std::numeric_limits<double>::infinity();
  if (s.empty()) return s;
  char* end = nullptr;
  const bool integral = s.find_first_of(".eE") == std::string::npos;
  if (integral) {
    errno = 0;
    const long long v = std::strtoll(s.c_str(), &end, 10);
    if (*end == '\0' && errno == 0) return static_cast<std::int64_t>(v);
  }
  const double d = std::strtod(s.c_str(), &end);
  if (*end == '\0') return d;
  return s;
}

}  // namespace

void Table::add(std::vector<Cell> row) {
  if (row.size() != columns.size()) {
    throw InvalidArgument("Table::add: row has " + std::to_string(row.size()) + " cells, expected " +
                          std::to_string(columns.size()));
  }
  rows.push_back(std::move(row));
}

Metadata run_metadata(const RunConfig& config) {
  return {{"tool", kToolName},
          {"version", kToolVersion},
          {"subcommand", to_string(config.subcommand)},
          {"seed", std::to_string(config.seed)},
          {"config_hash", hex64(config.config_hash)}};
}

std::string format_real(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

std::string to_csv(const Table& table, const Metadata& metadata) {
  std::string out;
  if (!metadata.empty()) {
    out += "#";
    for (const auto& [k, v] : metadata) out += " " + k + "=" + v;
    out += "\n";
  }
  for (std::size_t i = 0; i < table.columns.size(); ++i) out += (i ? "," : "") + table.columns[i];
  out += "\n";
  for (const auto& row : table.rows) {
    for (std::size_t i = 0; i < row.size(); ++i) out += (i ? "," : "") + csv_cell(row[i]);
    out += "\n";
  }
  return out;
}

std::string to_json(const Table& table, const Metadata& metadata) {
  ordered_json doc;
  ordered_json meta = ordered_json::object();
  for (const auto& [k, v] : metadata) meta[k] = v;
  doc["metadata"] = meta;
  doc["columns"] = table.columns;
  ordered_json rows = ordered_json::array();
  for (const auto& row : table.rows) {
    ordered_json obj = ordered_json::object();
    for (std::size_t i = 0; i < row.size(); ++i) obj[table.columns[i]] = json_cell(row[i]);
    rows.push_back(std::move(obj));
  }
  doc["rows"] = std::move(rows);
  return doc.dump(2) + "\n";
}

std::string render(const Table& table, OutputFormat format, const Metadata& metadata) {
  return format == OutputFormat::json ? to_json(table, metadata) : to_csv(table, metadata);
}

void emit(const Table& table, OutputFormat format, const std::string& path, const Metadata& metadata) {
  const std::string text = render(table, format, metadata);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path + "' for writing: " + std::strerror(errno));
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  out.close();
  if (!out) throw IoError("failed writing '" + path + "'");
}

Table parse_csv(const std::string& text) {
  Table t;
  std::istringstream in(text);
  std::string line;
  bool header = true;
  while (std::getline(in, line)) {
    if (!line.empty() && line.front() == '#') continue;
    if (header) {
      if (!line.empty()) t.columns = split_csv_line(line);
      header = false;
      continue;
    }
    if (line.empty()) continue;
    std::vector<Cell> row;
    for (const auto& s : split_csv_line(line)) row.push_back(parse_cell(s));
    t.add(std::move(row));
  }
  return t;
}

Table parse_json(const std::string& text) {
  const auto doc = ordered_json::parse(text);
  Table t;
  t.columns = doc.at("columns").get<std::vector<std::string>>();
  for (const auto& obj : doc.at("rows")) {
    std::vector<Cell> row;
    for (const auto& c : t.columns) {
      const auto& v = obj.at(c);
      if (v.is_number_integer()) row.emplace_back(v.get<std::int64_t>());
      else if (v.is_number()) row.emplace_back(v.get<double>());
      else row.push_back(parse_cell(v.get<std::string>()));
    }
    t.add(std::move(row));
  }
  return t;
}

}  // namespace stochcoll
