#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "transfer/catalog.hpp"
#include "transfer/errors.hpp"
#include "transfer/entropic.hpp"
#include "transfer/inequality.hpp"

namespace transfer::cli {

using json = nlohmann::json;

// Schema violation at a JSON path such as $.mu.weights[2].
class SchemaError : public InputError {
 public:
  SchemaError(const std::string& path, const std::string& what)
      : InputError(path + ": " + what), path_(path) {}
  const std::string& path() const { return path_; }

 private:
  std::string path_;
};

// Non-finite numbers travel as the strings "inf" and "-inf"; cost entries
// at or above the forbidden sentinel are written as "inf".
json num(double x);
double read_number(const json& j, const std::string& path);
json vec_json(const Vec& v);
json mat_json(const Mat& m);
Vec read_vec(const json& j, const std::string& path);
Mat read_mat(const json& j, const std::string& path);

json load_file(const std::string& file);

json space_json(const Space& s);
json measure_json(const ProbMeasure& m);
json potential_json(const Potential& p);
json cost_json(const CostMatrix& c);

Space read_space(const json& j, const std::string& path);
// {"space": ..., "weights": [...]} or {"factors": [measure, measure]}.
ProbMeasure read_measure(const json& j, const std::string& path);
Potential read_potential(const json& j, const std::string& path);
// {"source": space, "target": space (defaults to source), "entries": [[...]]}
CostMatrix read_cost(const json& j, const std::string& path);
ScalarFn read_scalar(const json& j, const std::string& path);
GeneratorModel read_generator(const json& j, const std::string& path);

// {"kind": "mk" | "kr" | "tv" | "trivial" | "pushforward" | "brenier" |
//  "martingale" | "marton" | "barycentric" | "schrodinger", ...}
TransferHandle read_transfer(const json& j, const std::string& path);
// A list of transfer descriptors.
std::vector<TransferHandle> read_chain(const json& j, const std::string& path);
// {"kind": "log" | "donsker_varadhan", ...} for entropic transfers.
EntropicHandle read_entropic(const json& j, const std::string& path);
// {"kind": "generalized", "alpha": scalar, "space": ...} or
// {"kind": "power", "alpha": scalar, "transfer": ..., "grid": {...}}.
ConvexTransferHandle read_convex(const json& j, const std::string& path);

InequalitySpec read_inequality(const json& j, const std::string& path);

std::vector<std::string> known_transfer_kinds();

}  // namespace transfer::cli
