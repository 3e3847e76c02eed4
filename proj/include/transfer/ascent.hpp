#pragma once

#include <cstdint>
#include <functional>
#include <string>

#include "transfer/measure.hpp"

namespace transfer {

enum class StepRule { Fixed, Diminishing };
enum class AscentMethod { Ellipsoid, Supergradient };

struct AscentConfig {
  int max_iters = 20000;
  double tol = 1e-9;
  StepRule step_rule = StepRule::Diminishing;
  std::uint64_t seed = 0;
  AscentMethod method = AscentMethod::Ellipsoid;
  double step = 0.1;       // base step for the supergradient method
  double radius = 20.0;    // initial search radius over potentials
  double ceiling = 1e12;   // values above this are reported as unbounded
  int restarts = 0;        // extra randomized starts
};

void validate(const AscentConfig& cfg);

// Value and a supergradient of a concave function at a point.
struct Probe {
  double value;
  Vec grad;
};
using ConcaveOracle = std::function<Probe(const Vec&)>;

struct AscentResult {
  Vec point;
  double value = 0.0;
  double upper_bound = 0.0;  // certified when the method provides one
  bool converged = false;
  bool unbounded = false;
  int iterations = 0;
  std::string warning;
  double gap() const { return upper_bound - value; }
};

// Maximizes a concave function over the probability simplex in R^n.
AscentResult maximize_concave_over_simplex(std::size_t n, const ConcaveOracle& f, const AscentConfig& cfg,
                                           const Vec* start = nullptr);

// Maximizes a concave function over R^n. With translation_invariant set the
// function is assumed invariant under adding constants and the search fixes
// the first coordinate; the result is then shifted so its first entry is 0.
AscentResult maximize_concave_over_potentials(std::size_t n, const ConcaveOracle& f, const AscentConfig& cfg,
                                              bool translation_invariant = true, const Vec* start = nullptr);

// Golden-section search for the maximum of a unimodal function on [a, b].
// Returns the argmax; the caller evaluates endpoints separately if needed.
double golden_section_max(const std::function<double(double)>& f, double a, double b, double tol = 1e-12,
                          int max_iters = 400);

Vec project_to_simplex(const Vec& y);

}  // namespace transfer
