#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "transfer/transfer.hpp"

namespace transfer {

// a * T(mu, nu), with operator a T^-(f / a).
TransferHandle scale(double a, const TransferHandle& t);

// T1 + T2 on the same pair of spaces. The operator
//   T^- f(x) = inf_g T1^- g(x) + T2^-(f - g)(x)
// is computed pointwise by convex minimization over g, started at f/2 and f.
TransferHandle add(const TransferHandle& t1, const TransferHandle& t2, const AscentConfig& cfg = {});

struct ConvolutionValue {
  double value = kInfinity;        // attained at sigma
  double lower_bound = kInfinity;  // certified by the minimization
  std::optional<Vec> sigma;        // optimal intermediate measure
  bool converged = false;
  std::string method;
};

// Inf-convolution of a chain of transfers, T1 * T2 * ... .
struct ComposedTransfer {
  std::vector<TransferHandle> parts;
  Direction direction = Direction::Backward;
  Operator composed_kop;  // T1^- o T2^- o ... (or T_k^+ o ... o T1^+ when forward)

  Space source() const { return parts.front().source; }
  Space target() const { return parts.back().target; }
  // min over sigma of T1(mu, sigma) + T2(sigma, nu), by convex minimization
  // over the simplex. Chains of more than two parts recurse on the prefix.
  ConvolutionValue primal(const ProbMeasure& mu, const ProbMeasure& nu, const AscentConfig& cfg = {}) const;
  // Min-plus composition of the parts' costs, when every part is an
  // optimal transport with a finite cost.
  std::optional<CostMatrix> exact_cost() const;
  TransferHandle handle(const AscentConfig& cfg = {}) const;
};

// For chains of optimal transports: intermediate marginals sigma_1, ...,
// sigma_{k-1} attaining the infimum, read off an optimal plan for the
// composed cost by routing each cell along a min-plus optimal path.
std::vector<Vec> optimal_intermediates(const ComposedTransfer& chain, const ProbMeasure& mu, const ProbMeasure& nu);

ComposedTransfer convolve(const TransferHandle& t1, const TransferHandle& t2);
ComposedTransfer convolve(const ComposedTransfer& head, const TransferHandle& tail);

// Swapped arguments: R(b, a) = T(a, b), with R^- f = -T^+(-f) and R^+ g = -T^-(-g).
TransferHandle reversed(const TransferHandle& t);

inline constexpr std::size_t kTensorMaxPoints = 64;

// Transfer on (X1 x X2) x (Y1 x Y2) with weak cost
//   c((x1, x2), pi) = T1(delta_x1, pi_1) + T2(delta_x2, pi_2).
TransferHandle tensor(const TransferHandle& t1, const TransferHandle& t2);

struct OrderReport {
  std::size_t samples = 0;
  double forward_after_backward = 0.0;   // max of (g - T^+ T^- g)_+
  double backward_after_forward = 0.0;   // max of (T^- T^+ f - f)_+
  double backward_triple = 0.0;          // max |T^- T^+ T^- g - T^- g|
  double forward_triple = 0.0;           // max |T^+ T^- T^+ f - T^+ f|
  double tol = 1e-10;
  bool holds() const {
    return forward_after_backward <= tol && backward_after_forward <= tol && backward_triple <= tol &&
           forward_triple <= tol;
  }
};

OrderReport check_order_relations(const TransferHandle& t, std::size_t samples, std::uint64_t seed,
                                  double scale = 2.0);

// T^- T^+ f for f on the source, and T^+ T^- g for g on the target.
Potential t_concave_projection(const TransferHandle& t, const Potential& f);
Potential t_convex_projection(const TransferHandle& t, const Potential& g);

}  // namespace transfer
