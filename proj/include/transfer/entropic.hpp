#pragma once

#include <functional>
#include <string>
#include <vector>

#include "transfer/algebra.hpp"
#include "transfer/scalar_fn.hpp"
#include "transfer/transfer.hpp"

namespace transfer {

// Backward beta-transfer: T(mu, nu) = sup_g <g, nu> - beta(<E^- g, mu>), or
// forward alpha-transfer: T(mu, nu) = sup_f alpha(<E^+ f, nu>) - <f, mu>.
struct EntropicHandle {
  std::string name;
  Direction direction = Direction::Backward;
  Space source, target;
  ScalarFn scalar = ScalarFn::log();  // beta (backward) or alpha (forward)
  Operator kop;                       // E^-: C(target) -> C(source); E^+: C(source) -> C(target)
  std::function<Evaluation(const ProbMeasure&, const ProbMeasure&)> evaluate;
  Conjugate conjugate;                // backward only

  double eval(const ProbMeasure& mu, const ProbMeasure& nu) const;
};

// beta(<E^- g, mu>) with gradient beta'(.) K^T mu.
Conjugate beta_conjugate(const ScalarFn& beta, const Operator& kop, const Space& target);

// sup_g <g, nu> - conj(mu, g) over potentials on `target`.
DualReport conjugate_dual(const Conjugate& conj, const Space& target, const ProbMeasure& mu, const ProbMeasure& nu,
                          const AscentConfig& cfg = {});
DualReport entropic_dual(const EntropicHandle& e, const ProbMeasure& mu, const ProbMeasure& nu,
                         const AscentConfig& cfg = {});

struct PowerGrid {
  double lo = 1e-3, hi = 1e3;
  std::size_t points = 64;
  std::vector<double> values() const;  // geometric, lo and hi included
};

// alpha(T) for a backward linear T, as the family s T^-(f/s) + alpha^+(s).
ConvexTransferHandle power_transfer(const ScalarFn& alpha, const TransferHandle& t, const PowerGrid& grid = {});

// sum_x mu(x) alpha(nu(x)/mu(x)), with members f -> alpha^+(f + t) - t and the
// conjugate inf_t sum mu [alpha^+(f + t) - t].
ConvexTransferHandle generalized_entropy(const ScalarFn& alpha, const Space& space);
// The inner minimization over t: returns the value and writes the minimizer.
double generalized_entropy_conjugate(const ScalarFn& alpha, const ProbMeasure& mu, const Vec& f, double* t_opt = nullptr);
// Dual over the conjugate (requires it); falls back to family_dual otherwise.
DualReport convex_dual(const ConvexTransferHandle& t, const ProbMeasure& mu, const ProbMeasure& nu,
                       const AscentConfig& cfg = {});

// H(mu, nu) = KL(nu || mu), beta = log, E^- f = e^f.
EntropicHandle log_entropy(const Space& space);
// Maximizer of the log-entropy dual on supp nu: log(nu / mu).
Potential log_entropy_witness(const ProbMeasure& mu, const ProbMeasure& nu);

struct GeneratorModel {
  Space space;
  Mat rates;  // zero row sums, nonnegative off the diagonal
  Vec mu;     // reversing probability, positive
  GeneratorModel(Space s, Mat l, Vec m);
  // Symmetrization D^{1/2} (L + diag f) D^{-1/2}.
  Mat symmetrized(const Vec& f) const;
  double dirichlet_form(const Vec& h) const;  // <-L h, h>_mu
};

// I(mu|nu) = E(sqrt f, sqrt f) with f = d nu / d mu; the conjugate is the top
// eigenvalue of L + diag g in L^2(mu). The first argument must be the
// reversing measure.
EntropicHandle donsker_varadhan(const GeneratorModel& gm);
// Top eigenvalue and its squared eigenvector (a probability vector).
double dv_top_eigenvalue(const GeneratorModel& gm, const Vec& g, Vec* weights = nullptr);
// log ||exp(L + diag g)||, by matrix exponential; equals the top eigenvalue.
double dv_log_semigroup_norm(const GeneratorModel& gm, const Vec& g);
// Dual maximizer -L h / h, h = sqrt(d nu / d mu), for full-support nu.
Potential dv_witness(const GeneratorModel& gm, const ProbMeasure& nu);

// E * T: operator E^- o T^-, eval by minimization over sigma << mu.
EntropicHandle entropic_convolve(const EntropicHandle& e, const TransferHandle& t, const AscentConfig& cfg = {});
// F * T: members F_i^- o T^-.
ConvexTransferHandle convex_convolve(const ConvexTransferHandle& f, const TransferHandle& t,
                                     const AscentConfig& cfg = {});

}  // namespace transfer
