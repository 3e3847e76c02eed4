#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "cli/report.hpp"

namespace transfer::cli {

enum class Level { Fast, Full };
Level parse_level(const std::string& s);

// Outcome of one invariant battery. `worst` is the largest observed error
// against `bound`; the first failing instance is kept as a counterexample.
struct Criterion {
  int id = 0;
  std::string key;
  std::string title;
  bool pass = true;
  std::size_t instances = 0;
  double worst = 0.0;
  double bound = 0.0;
  std::string method;
  json counterexample;
  std::vector<std::string> notes;

  void record(double err, const json& where);
  void fail(const json& where);
};

using Battery = Criterion (*)(Level level, std::uint64_t seed);

struct BatteryEntry {
  int id;
  Battery run;
  double time_limit;  // seconds, 0 when the criterion sets none
};

// The ten property batteries, numbered as the acceptance criteria.
const std::vector<BatteryEntry>& batteries();

// Runs every battery and assembles a report (no timings, so equal seeds
// give byte-identical output).
Report verify_suite(Level level, std::uint64_t seed);

}  // namespace transfer::cli
