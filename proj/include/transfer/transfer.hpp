#pragma once

#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "transfer/ascent.hpp"
#include "transfer/measure.hpp"

namespace transfer {

inline constexpr double kInfinity = std::numeric_limits<double>::infinity();

enum class Direction { Backward, Forward, Both };
const char* to_string(Direction d);

// Image of an operator together with a subgradient of each output entry with
// respect to the input potential (row i of `kernel`). For Kantorovich
// operators of Dirac-domained transfers the rows are probability vectors.
struct KantorovichImage {
  Potential values;
  Mat kernel;
};
using Operator = std::function<KantorovichImage(const Potential&)>;

struct Evaluation {
  double value = kInfinity;
  std::optional<Vec> d_mu, d_nu;  // subgradients in each argument
  std::string method;             // exact-lp, min-plus, grid, ascent, closed-form, sinkhorn
  double tol = 0.0;
  bool converged = true;
  std::string note;
};

struct TransferHandle {
  std::string name;
  Direction direction = Direction::Backward;
  Space source, target;
  std::function<Evaluation(const ProbMeasure&, const ProbMeasure&)> evaluate;
  Operator kop_backward;  // C(target) -> C(source)
  Operator kop_forward;   // C(source) -> C(target)
  bool dirac_domain = true;
  bool finite = true;             // finite on every pair of measures
  bool operator_axioms = true;    // declared operators are convex/concave operators
  std::optional<CostMatrix> cost; // eval is optimal transport for this cost
  // T^-(g + a + b*coords) = T^-g + a + b*coords(source): the backward dual
  // is flat along affine potentials whenever the means of mu and nu agree.
  bool affine_invariant = false;
  // Target points a Dirac at x may reach; empty result means all.
  std::function<std::vector<std::size_t>(std::size_t)> dirac_support;
  // Set for pushforwards: eval is 0 when nu = map#mu and +inf otherwise.
  std::optional<std::vector<std::size_t>> map;

  double eval(const ProbMeasure& mu, const ProbMeasure& nu) const;
  Potential backward(const Potential& g) const;
  Potential forward(const Potential& f) const;
  bool has_backward() const { return static_cast<bool>(kop_backward); }
  bool has_forward() const { return static_cast<bool>(kop_forward); }
  void check_arguments(const ProbMeasure& mu, const ProbMeasure& nu) const;
};

struct DualReport {
  double value = 0.0;
  double upper_bound = 0.0;
  std::optional<Potential> potential;
  AscentResult ascent;
};

// sup_g <g,nu> - <T^- g, mu>.
DualReport backward_dual(const TransferHandle& t, const ProbMeasure& mu, const ProbMeasure& nu,
                         const AscentConfig& cfg = {});
// sup_f <T^+ f, nu> - <f, mu>.
DualReport forward_dual(const TransferHandle& t, const ProbMeasure& mu, const ProbMeasure& nu,
                        const AscentConfig& cfg = {});
// Dual objective and supergradient at a given potential.
Probe backward_dual_objective(const Operator& op, const ProbMeasure& mu, const ProbMeasure& nu, const Vec& g);

// Legendre transform of nu -> T(mu, nu) at g, with a gradient in g.
using Conjugate = std::function<Probe(const ProbMeasure& mu, const Vec& g)>;

// Indexed family of backward operators (a convex transfer): eval is the
// supremum over members of the corresponding linear duals.
struct ConvexTransferHandle {
  std::string name;
  Space source, target;
  std::function<Evaluation(const ProbMeasure&, const ProbMeasure&)> evaluate;
  std::vector<double> index;                   // member parameters
  std::function<Operator(double)> member;      // T_s^- for parameter s
  bool continuous_index = false;               // refine between grid members
  Conjugate conjugate;                         // set when known in closed form

  double eval(const ProbMeasure& mu, const ProbMeasure& nu) const { return evaluate(mu, nu).value; }
};

struct FamilyDualReport {
  double value = 0.0;       // best over the grid, refined if continuous
  double grid_value = 0.0;  // best over the grid alone
  double best_index = 0.0;
  std::optional<Potential> potential;
};

FamilyDualReport family_dual(const ConvexTransferHandle& t, const ProbMeasure& mu, const ProbMeasure& nu,
                             const AscentConfig& cfg = {});

// Operator helpers.
Operator compose(const Operator& outer, const Operator& inner);
KantorovichImage apply(const Operator& op, const Potential& f);

}  // namespace transfer
