#include "cli/report.hpp"

#include <iomanip>
#include <set>
#include <sstream>

#include <openssl/evp.h>

namespace transfer::cli {
namespace {

const std::set<std::string>& tags() {
  static const std::set<std::string> t{"exact-lp", "min-plus", "closed-form", "grid", "ascent", "iteration", "sampled"};
  return t;
}

void check_claim(const json& c, const std::string& path) {
  if (!c.is_object()) throw SchemaError(path, "expected a claim object");
  for (const char* k : {"value", "tol", "method"})
    if (!c.contains(k)) throw SchemaError(path + "." + k, "missing field");
  read_number(c["value"], path + ".value");
  read_number(c["tol"], path + ".tol");
  if (!c["method"].is_string() || !tags().count(c["method"].get<std::string>()))
    throw SchemaError(path + ".method", "unknown method tag");
}

// Values are claims, or objects / arrays of claims, or plain flags and labels.
void check_values(const json& v, const std::string& path) {
  if (v.is_object() && v.contains("method")) return check_claim(v, path);
  if (v.is_object()) {
    for (auto it = v.begin(); it != v.end(); ++it) check_values(it.value(), path + "." + it.key());
    return;
  }
  if (v.is_array()) {
    for (std::size_t i = 0; i < v.size(); ++i) check_values(v[i], path + "[" + std::to_string(i) + "]");
    return;
  }
  if (v.is_number()) throw SchemaError(path, "bare number without tolerance and method");
}

std::string csv_cell(const json& j) {
  if (j.is_string()) return j.get<std::string>();
  if (j.is_null()) return "";
  return j.dump();
}

void flatten_claims(const json& v, const std::string& key, std::ostringstream& out) {
  if (v.is_object() && v.contains("method")) {
    out << key << ',' << csv_cell(v["value"]) << ',' << csv_cell(v["tol"]) << ',' << csv_cell(v["method"]) << '\n';
    return;
  }
  if (v.is_object())
    for (auto it = v.begin(); it != v.end(); ++it) flatten_claims(it.value(), key.empty() ? it.key() : key + "." + it.key(), out);
  else if (v.is_array())
    for (std::size_t i = 0; i < v.size(); ++i) flatten_claims(v[i], key + "[" + std::to_string(i) + "]", out);
}

}  // namespace

Format parse_format(const std::string& s) {
  if (s == "json") return Format::Json;
  if (s == "csv") return Format::Csv;
  throw InputError("unknown format '" + s + "' (json or csv)");
}

std::string method_tag(const std::string& d) {
  if (d == "exact-lp" || d == "pushforward") return "exact-lp";
  if (d == "min-plus" || d == "minplus-period" || d == "karp+increments" || d == "karp") return "min-plus";
  if (d == "closed-form") return "closed-form";
  if (d.rfind("grid", 0) == 0 || d == "descent") return "grid";
  if (d == "increments" || d == "iteration" || d == "two-stage") return "iteration";
  if (d == "seeded-potentials") return "sampled";
  return "ascent";  // simplex-min, cutting-plane, sinkhorn, ascent, ellipsoid
}

json claim(double value, double tol, const std::string& method) {
  return {{"value", num(value)}, {"tol", num(tol)}, {"method", method_tag(method)}};
}

std::string sha256_hex(const std::string& data) {
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_Digest(data.data(), data.size(), md, &len, EVP_sha256(), nullptr);
  std::ostringstream out;
  for (unsigned int i = 0; i < len; ++i) out << std::hex << std::setw(2) << std::setfill('0') << int(md[i]);
  return out.str();
}

json Report::to_json() const {
  json j;
  j["verb"] = verb;
  j["version"] = kVersion;
  j["inputs_digest"] = sha256_hex(inputs.dump());
  j["status"] = status;
  j["values"] = values;
  j["witnesses"] = witnesses;
  j["provenance"] = provenance;
  j["warnings"] = warnings;
  return j;
}

std::string render_json(const json& report) { return report.dump(2) + "\n"; }

std::string render_csv(const Report& r) {
  std::ostringstream out;
  if (!r.csv_header.empty()) {
    for (std::size_t i = 0; i < r.csv_header.size(); ++i) out << (i ? "," : "") << r.csv_header[i];
    out << '\n';
    for (const auto& row : r.csv_rows) {
      for (std::size_t i = 0; i < row.size(); ++i) out << (i ? "," : "") << csv_cell(row[i]);
      out << '\n';
    }
    return out.str();
  }
  out << "key,value,tol,method\n";
  flatten_claims(r.values, "", out);
  return out.str();
}

void validate_report(const json& r) {
  if (!r.is_object()) throw SchemaError("$", "expected an object");
  for (const char* k : {"verb", "version", "inputs_digest", "status", "values", "witnesses", "provenance", "warnings"})
    if (!r.contains(k)) throw SchemaError(std::string("$.") + k, "missing field");
  if (!r["verb"].is_string()) throw SchemaError("$.verb", "expected a string");
  const json& d = r["inputs_digest"];
  if (!d.is_string() || d.get<std::string>().size() != 64) throw SchemaError("$.inputs_digest", "expected SHA-256 hex");
  const std::string status = r["status"].is_string() ? r["status"].get<std::string>() : "";
  if (status != "ok" && status != "not_converged" && status != "failed")
    throw SchemaError("$.status", "expected ok, not_converged or failed");
  if (!r["values"].is_object()) throw SchemaError("$.values", "expected an object");
  check_values(r["values"], "$.values");
  if (!r["witnesses"].is_object()) throw SchemaError("$.witnesses", "expected an object");
  if (!r["provenance"].is_object()) throw SchemaError("$.provenance", "expected an object");
  if (!r["warnings"].is_array()) throw SchemaError("$.warnings", "expected an array");
}

}  // namespace transfer::cli
