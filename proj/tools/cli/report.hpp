#pragma once

#include <string>
#include <vector>

#include "cli/json_io.hpp"

namespace transfer::cli {

inline constexpr const char* kVersion = "0.1.0";

enum class Format { Json, Csv };
Format parse_format(const std::string& s);

// Coarse tag for a library method string: exact-lp, min-plus, closed-form,
// grid, ascent, iteration or sampled.
std::string method_tag(const std::string& detail);

// A numeric claim with its tolerance and method tag.
json claim(double value, double tol, const std::string& method);

std::string sha256_hex(const std::string& data);

struct Report {
  std::string verb;
  json inputs = json::object();
  std::string status = "ok";  // ok, not_converged, failed
  json values = json::object();
  json witnesses = json::object();
  json provenance = json::object();
  std::vector<std::string> warnings;
  // Optional CSV table (header + rows) for --format csv.
  std::vector<std::string> csv_header;
  std::vector<std::vector<json>> csv_rows;

  json to_json() const;
};

// Pretty JSON with a trailing newline; byte-stable for equal reports.
std::string render_json(const json& report);
// The report's own table if it has one, else one row per claim in values.
std::string render_csv(const Report& r);

// Structural check of an emitted report; throws SchemaError with a path.
void validate_report(const json& r);

}  // namespace transfer::cli
