#pragma once

#include <functional>
#include <vector>

#include "transfer/scalar_fn.hpp"
#include "transfer/transfer.hpp"

namespace transfer {

TransferHandle mk_transfer(const CostMatrix& c);
// map[x] is the image of source point x in the target space.
TransferHandle pushforward_transfer(std::vector<std::size_t> map, const Space& source, const Space& target);
TransferHandle trivial_transfer(const Potential& c1, const Potential& c2);
TransferHandle tv_transfer(const Space& space);
TransferHandle kr_transfer(const CostMatrix& d);
TransferHandle brenier_transfer(const Space& grid);
// Source and target of c must carry coordinates.
TransferHandle martingale_transfer(const CostMatrix& c);

struct MartonParams {
  ScalarFn gamma;
  CostMatrix d;
};
TransferHandle marton_transfer(const MartonParams& p);
TransferHandle barycentric_transfer(const Space& source, const Space& target);
inline TransferHandle barycentric_transfer(const Space& grid) { return barycentric_transfer(grid, grid); }

struct MarkovKernelModel {
  Space space;
  Mat kernel;  // row-stochastic
  Vec m;       // reversing measure, normalized at construction
  MarkovKernelModel(Space s, Mat k, Vec reversing);
};
TransferHandle schrodinger_transfer(const MarkovKernelModel& model);

// c(x, sigma) convex in sigma, with a subgradient in sigma.
using WeakCostOracle = std::function<Probe(std::size_t x, const Vec& sigma)>;
// Optional restriction of the admissible target points per source point.
using SupportFn = std::function<std::vector<std::size_t>(std::size_t)>;
TransferHandle weak_ot_transfer(const Space& source, const Space& target, WeakCostOracle cost,
                                SupportFn support = nullptr, const std::string& name = "weak_ot");

// Strassen's criterion on the line: equal means and ordered call prices at
// every knot of either support.
bool convex_order(const ProbMeasure& mu, const ProbMeasure& nu);

// max_i [p * coords_i - h_i] and its maximizing index.
double discrete_legendre(const std::vector<double>& coords, const Vec& h, double p, std::size_t* arg = nullptr);

// Minimizes sum_x mu(x) c(x, pi_x) over couplings by cutting planes on the
// coupling polytope (one LP per round). Exposed for the algebra module.
Evaluation weak_transport_eval(const ProbMeasure& mu, const ProbMeasure& nu, const WeakCostOracle& cost,
                               const SupportFn& support, double tol = 1e-9, int max_rounds = 400);

}  // namespace transfer
