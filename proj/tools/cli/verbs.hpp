#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "cli/report.hpp"

namespace transfer::cli {

struct RunConfig {
  std::uint64_t seed = 0;
  std::optional<double> tol;  // --tol, else TRANSFER_TOL, else the solver default
  Format format = Format::Json;
};

// Tolerance resolution: explicit flag, then the TRANSFER_TOL environment
// variable, then the built-in default.
double resolve_tol(const RunConfig& cfg, double builtin);

const std::vector<std::string>& verbs();

// `inputs` holds the loaded descriptors keyed by role: transfer, mu, nu,
// chain, spec, entropy, generator, level. Throws InputError (exit 2) and
// ConvergenceError (exit 3); a report with status not_converged also maps
// to exit 3.
Report run(const std::string& verb, const json& inputs, const RunConfig& cfg);

int exit_code(const Report& r);

}  // namespace transfer::cli
