#pragma once

#include <optional>
#include <string>
#include <vector>

#include "transfer/measure.hpp"

namespace transfer {

struct LPSolution {
  bool feasible = false;
  double value = 0.0;
  std::optional<Coupling> coupling;
  // Dual convention: psi(y) - phi(x) <= c(x,y), value = <psi,nu> - <phi,mu>.
  std::optional<Potential> phi, psi;
  std::size_t pivots = 0;
};

// Exact transport LP. Finite costs go through a transportation simplex with
// Bland's rule; costs with forbidden cells go through the dense simplex over
// the allowed cells. phi is shifted to vanish at the first support point of mu.
LPSolution solve_transport_lp(const CostMatrix& c, const ProbMeasure& mu, const ProbMeasure& nu);

struct StationaryResult {
  bool feasible = false;
  double value = 0.0;
  Mat plan;        // pi(x,y) with equal row and column sums, total mass 1
  Vec marginal;    // common marginal of plan
};

// min <c,pi> over pi >= 0 with total mass 1 and equal marginals.
StationaryResult solve_stationary_lp(const CostMatrix& c);

struct CycleResult {
  double mean = 0.0;
  std::vector<std::string> cycle;
  std::vector<std::size_t> nodes;
};

// Karp's algorithm on the digraph of finite entries of a square cost.
// The reported cycle is simple and rotated to start at its lowest index.
CycleResult min_mean_cycle(const CostMatrix& c);

// (a (x) b)(x,z) = min_y a(x,y) + b(y,z); forbidden entries absorb.
Mat minplus_product(const Mat& a, const Mat& b);
Mat minplus_identity(std::size_t n);
CostMatrix minplus_power(const CostMatrix& c, unsigned n);
CostMatrix minplus_compose(const CostMatrix& a, const CostMatrix& b);

struct EnvelopeKnot {
  double t, v;
  std::size_t source;  // index of the input point this knot came from
};

// Upper concave hull of a finite point cloud in the plane.
class EnvelopeResult {
 public:
  explicit EnvelopeResult(std::vector<EnvelopeKnot> knots) : knots_(std::move(knots)) {}
  const std::vector<EnvelopeKnot>& knots() const { return knots_; }
  // -inf outside [t_min, t_max].
  double operator()(double t) const;
  // Writes value = (1-w) v[i] + w v[j] for the hull segment containing t.
  // Returns false outside the range.
  bool locate(double t, std::size_t& i, std::size_t& j, double& w) const;

 private:
  std::vector<EnvelopeKnot> knots_;
};

EnvelopeResult concave_envelope_1d(const std::vector<double>& t, const std::vector<double>& v);

}  // namespace transfer
