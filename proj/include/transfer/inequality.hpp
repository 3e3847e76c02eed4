#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "transfer/entropic.hpp"

namespace transfer {

// nu -> F(mu, nu) for a fixed first marginal, with its Legendre transform
// h -> sup_nu <h, nu> - F(mu, nu).
struct ConvexSide {
  std::string name;
  Space source, target;
  std::function<double(const ProbMeasure&, const ProbMeasure&)> eval;
  std::function<double(const ProbMeasure&, const Vec&)> conjugate;
};

ConvexSide convex_side(const EntropicHandle& e);
// Uses the closed-form conjugate when present, else inf over members of <F_i^- h, mu>.
ConvexSide convex_side(const ConvexTransferHandle& t);
// Backward linear: <T^- h, mu>.
ConvexSide convex_side(const TransferHandle& t);
// lambda F: value scaled, conjugate lambda F*(h / lambda).
ConvexSide scale(double lambda, const ConvexSide& s);

// F(sigma, nu) = sup_j sup_f <f, nu> - <F_j^- f, sigma>.
struct BackwardFamily {
  std::string name;
  Space source, target;
  std::function<double(const ProbMeasure&, const ProbMeasure&)> eval;
  std::vector<Operator> members;
};

// F(sigma, nu) = sup_j sup_g J_j(nu, g) - <g, sigma>; a forward linear
// transfer has J(nu, g) = <T^+ g, nu>, a forward alpha-transfer alpha(<E^+ g, nu>).
using ForwardMember = std::function<double(const ProbMeasure& nu, const Vec& g)>;
struct ForwardFamily {
  std::string name;
  Space source, target;
  std::function<double(const ProbMeasure&, const ProbMeasure&)> eval;
  std::vector<ForwardMember> members;
};

BackwardFamily backward_family(const TransferHandle& t);
BackwardFamily backward_family(const ConvexTransferHandle& t);
ForwardFamily forward_family(const TransferHandle& t);
// G(sigma, nu) = F(nu, sigma), members <-F_j^-(-g), nu>.
ForwardFamily reversed(const BackwardFamily& f);
// KL(sigma || nu) as a forward transfer: alpha = -log, E^+ g = e^{-g}.
ForwardFamily forward_log_entropy(const Space& space);

struct SearchConfig {
  double grid_step_2 = 1.0 / 256;  // simplex grid on 2-point spaces
  double grid_step_3 = 1.0 / 64;   // and on 3-point spaces
  std::size_t restarts = 32;       // dual multistart
  std::size_t polish = 4;          // best grid points refined by local descent
  double start_scale = 2.0;        // random dual starts in [-scale, scale]
  int max_iters = 4000;            // per local descent
  double tol = 1e-6;               // sign tolerance
  std::uint64_t seed = 0;
};

struct DualityPair {
  double primal = 0.0;
  double dual = 0.0;
  Vec sigma;                // primal minimizer
  Vec potential;            // dual minimizer
  std::size_t member = 0;   // family member attaining the dual
  std::string primal_path;  // grid+descent or descent
  std::vector<std::string> warnings;
  double gap() const { return std::abs(primal - dual); }
};

// inf_sigma F1(mu, sigma) - F2(sigma, nu)
//   = inf_{f, j} -F1*(-F2_j^- f) - <f, nu>.
DualityPair back_back_dual(const ConvexSide& f1, const BackwardFamily& f2, const ProbMeasure& mu,
                           const ProbMeasure& nu, const SearchConfig& cfg = {});
// inf_sigma F1(mu, sigma) - F2(sigma, nu) with F2 forward
//   = inf_{g, j} -F1*(-g) - J_j(nu, g).
DualityPair forward_back_dual(const ConvexSide& f1, const ForwardFamily& f2, const ProbMeasure& mu,
                              const ProbMeasure& nu, const SearchConfig& cfg = {});

enum class InequalityForm { BackwardBackward, ForwardBackward, Maurey };
const char* to_string(InequalityForm f);

// BackwardBackward: F(sigma, nu) <= lambda (E * T)(mu, sigma) for all sigma.
// ForwardBackward:  F(nu, sigma) <= lambda (E * T)(mu, sigma) for all sigma.
// Maurey: F(s1, s2) <= lambda (T1 * H)(s1, mu) + lambda2 (T2 * H)(s2, nu),
//   H the log entropy, T1 = link, T2 = link2 forward linear.
// An absent link is the identity.
struct InequalitySpec {
  InequalityForm form;
  BackwardFamily lhs;
  ProbMeasure mu, nu;
  std::optional<EntropicHandle> entropy = std::nullopt;  // defaults to the log entropy
  std::optional<TransferHandle> link = std::nullopt, link2 = std::nullopt;
  double lambda = 1.0, lambda2 = 1.0;
};

struct GapReport {
  InequalityForm form = InequalityForm::BackwardBackward;
  double primal_gap = 0.0;   // min over sigma of RHS - LHS
  double dual_gap = 0.0;     // min over potentials of the dual criterion
  Vec worst_sigma, worst_sigma2;
  Vec worst_potential;
  std::size_t worst_member = 0;
  std::string primal_path;
  double grid_step = 0.0;
  std::size_t restarts = 0;
  std::uint64_t seed = 0;
  double tol = 0.0;
  std::vector<std::string> warnings;

  bool holds() const { return primal_gap >= -tol; }
  bool dual_holds() const { return dual_gap >= -tol; }
  bool consistent() const { return holds() == dual_holds(); }
  const char* verdict() const { return holds() ? "HOLDS" : "VIOLATED"; }
};

GapReport check_te_inequality(const InequalitySpec& spec, const SearchConfig& cfg = {});

// The Maurey criterion: for all g and i,
//   lambda1 log <e^{-T1^+(F_i^- g / lambda1)}, mu> + lambda2 log <e^{-T2^+(-g / lambda2)}, nu> <= 0.
// Returns the left side (log domain).
double maurey_criterion(const Operator& member, const std::optional<TransferHandle>& t1,
                        const std::optional<TransferHandle>& t2, double lambda1, double lambda2,
                        const ProbMeasure& mu, const ProbMeasure& nu, const Vec& g);
GapReport maurey_check(const BackwardFamily& f, const std::optional<TransferHandle>& t1,
                       const std::optional<TransferHandle>& t2, double lambda1, double lambda2,
                       const ProbMeasure& mu, const ProbMeasure& nu, const SearchConfig& cfg = {});

// All points of the simplex in R^n with coordinates in (1/steps) Z.
std::vector<Vec> simplex_grid(std::size_t n, std::size_t steps);

}  // namespace transfer
