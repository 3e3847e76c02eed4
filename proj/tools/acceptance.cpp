// Acceptance run: one PASS/FAIL line per criterion.
#include <chrono>
#include <cstdio>
#include <string>

#include "cli/battery.hpp"

using namespace transfer;
using namespace transfer::cli;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

void line(bool pass, int id, const std::string& title, const std::string& detail) {
  std::printf("%s %2d  %s  (%s)\n", pass ? "PASS" : "FAIL", id, title.c_str(), detail.c_str());
  std::fflush(stdout);
}

}  // namespace

int main(int argc, char** argv) {
  const std::uint64_t seed = argc > 1 ? std::stoull(argv[1]) : 0;
  int failures = 0;
  for (const BatteryEntry& e : batteries()) {
    const auto t0 = Clock::now();
    Criterion c;
    std::string error;
    try {
      c = e.run(Level::Full, seed);
    } catch (const std::exception& ex) {
      c.id = e.id;
      c.pass = false;
      error = ex.what();
    }
    const double secs = seconds_since(t0);
    const bool in_time = e.time_limit <= 0.0 || secs <= e.time_limit;
    char buf[256];
    std::snprintf(buf, sizeof buf, "instances=%zu worst=%.3g bound=%.3g time=%.2fs%s", c.instances, c.worst, c.bound,
                  secs, e.time_limit > 0.0 ? (" limit=" + std::to_string(int(e.time_limit)) + "s").c_str() : "");
    std::string detail = buf;
    if (!error.empty()) detail += " exception: " + error;
    if (!c.pass && !c.counterexample.is_null()) detail += " counterexample: " + c.counterexample.dump();
    if (!in_time) detail += " over time limit";
    const bool pass = c.pass && in_time;
    failures += !pass;
    line(pass, e.id, c.title.empty() ? "battery " + std::to_string(e.id) : c.title, detail);
  }

  // 11. Determinism: two fast suites with the same seed, byte for byte.
  const auto t1 = Clock::now();
  const std::string first = render_json(verify_suite(Level::Fast, seed).to_json());
  const double s1 = seconds_since(t1);
  const auto t2 = Clock::now();
  const std::string second = render_json(verify_suite(Level::Fast, seed).to_json());
  const double s2 = seconds_since(t2);
  const bool same = first == second;
  const bool fast_ok = first.find("\"status\": \"ok\"") != std::string::npos;
  char buf[200];
  std::snprintf(buf, sizeof buf, "bytes=%zu identical=%s suite_status=%s times=%.2fs,%.2fs limit=60s", first.size(),
                same ? "yes" : "no", fast_ok ? "ok" : "failed", s1, s2);
  const bool pass11 = same && s1 <= 60.0 && s2 <= 60.0;
  failures += !pass11;
  line(pass11, 11, "verify_suite --level fast is deterministic", buf);
  return failures == 0 ? 0 : 1;
}
