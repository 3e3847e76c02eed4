#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "transfer/transfer.hpp"

namespace transfer {

struct KamConfig {
  int max_iters = 10000;
  double tol = 1e-10;
  std::size_t base_point = 0;  // fixed points are pinned to vanish here
  int window = 64;             // longest period searched; limsup window
  std::uint64_t seed = 0;
  std::size_t samples = 64;    // seeded potentials for the generic barrier
};

void validate(const KamConfig& cfg);

// n-fold backward operator.
Potential iterate_operator(const TransferHandle& t, const Potential& g, unsigned n);

struct EffectiveConstant {
  double ell = 0.0;       // exact value when known, else the estimate
  double estimate = 0.0;  // midpoint of the certified bracket
  double lower = -kInfinity, upper = kInfinity;
  std::optional<double> exact;  // min-mean-cycle for cost transfers
  // M_n, m_n for n = 1..N: max / min of T_n(delta_x, delta_y) for cost
  // transfers, of min_nu T_n(delta_x, nu) = -T^n 0 (x) otherwise.
  std::vector<double> M, m;
  double C = 0.0;           // max_n (M_n - m_n)
  double tv_modulus = 0.0;  // |T(mu,nu) - T(mu',nu')| <= this * (TV + TV), cost transfers
  int iterations = 0;
  bool converged = false;
  std::string method;
};

EffectiveConstant effective_constant(const TransferHandle& t, const KamConfig& cfg = {});

// eval - ell, backward operator T^- + ell, forward operator T^+ - ell.
TransferHandle calibrate(const TransferHandle& t, double ell);

struct KamResult {
  double ell = 0.0;
  std::optional<Potential> u;
  double residual = kInfinity;  // ||T^- u - u||_inf
  int iterations = 0;
  bool converged = false;
  std::string method;  // iteration or two-stage
  std::size_t period = 0;
  std::vector<double> M, m;
  double C = 0.0;
  std::vector<double> trace;  // ||u_{n+1} - u_n||_inf per iteration
  std::string message;
};

KamResult weak_kam_solve(const TransferHandle& calibrated, const KamConfig& cfg = {});

// Windowed limsup of T^n f followed by monotone iteration to a fixed point.
Potential t_infinity(const TransferHandle& calibrated, const Potential& f, const KamConfig& cfg = {});

struct PeierlsBarrier {
  std::optional<CostMatrix> h;  // cost route
  std::function<double(const ProbMeasure&, const ProbMeasure&)> eval;
  double ell_used = 0.0;
  std::size_t burn_in = 0, period = 0;
  bool exact = false;           // period found on the cost route
  bool lower_bound = false;     // generic route: sup over seeded potentials
  std::optional<Mat> lower, upper;
  std::string method;
};

PeierlsBarrier peierls_barrier(const TransferHandle& t, double ell, const KamConfig& cfg = {});
// max |h (x) h - h| over entries; cost route only.
double idempotence_defect(const PeierlsBarrier& b);

struct AubryReport {
  std::vector<std::size_t> aubry_points;
  std::vector<std::string> labels;
  std::vector<ProbMeasure> aubry_measures;  // Diracs at Aubry points, then the Mather marginal
  std::vector<double> certificates;         // T_inf(mu, mu) for each measure above
  std::optional<double> mather_value;       // stationary LP on the given cost
  std::optional<double> mather_calibrated;  // and on the calibrated cost
  std::optional<Mat> mather_plan;
  std::optional<Vec> mather_marginal;
  double factorization_error = 0.0;  // max |h(x,y) - min_a h(x,a) + h(a,y)|
  double tol_used = 0.0;
  std::vector<std::string> warnings;
};

AubryReport aubry_mather(const TransferHandle& t, double ell, const PeierlsBarrier& barrier, double tol = 1e-8);

}  // namespace transfer
