#include <gtest/gtest.h>

#include <cmath>

#include "transfer/catalog.hpp"
#include "transfer/inequality.hpp"
#include "transfer/solvers.hpp"
#include "util.hpp"

namespace transfer {
namespace {

using testing::measure;
using testing::random_matrix;
using testing::random_measure;

TransferHandle zero_transfer(const Space& a, const Space& b) {
  return trivial_transfer(Potential(a, Vec::Zero(static_cast<Eigen::Index>(a->size()))),
                          Potential(b, Vec::Zero(static_cast<Eigen::Index>(b->size()))));
}

double log_mean_exp(const Vec& v, const ProbMeasure& m) {
  return std::log(m.weights().dot(v.array().exp().matrix()));
}

// min over a fine grid of the 2-point simplex.
double grid_min_2(const std::function<double(const ProbMeasure&)>& f, const Space& s, int steps = 4096) {
  double best = kInfinity;
  for (int i = 0; i <= steps; ++i) {
    const double p = static_cast<double>(i) / steps;
    best = std::min(best, f(measure(s, {p, 1.0 - p})));
  }
  return best;
}

TEST(SimplexGrid, CountsAndSums) {
  EXPECT_EQ(simplex_grid(2, 256).size(), 257u);
  EXPECT_EQ(simplex_grid(3, 64).size(), 2145u);
  EXPECT_EQ(simplex_grid(1, 10).size(), 1u);
  for (const Vec& p : simplex_grid(3, 7)) {
    EXPECT_NEAR(p.sum(), 1.0, 1e-15);
    EXPECT_GE(p.minCoeff(), 0.0);
  }
}

TEST(BackBack, ZeroTransferGivesZero) {
  CounterRng rng(1);
  const Space X = make_space("X", 3), Z = make_space("Z", 2);
  const ProbMeasure mu = random_measure(rng, X, 0.2), nu = random_measure(rng, Z);
  const DualityPair d = back_back_dual(convex_side(log_entropy(X)), backward_family(zero_transfer(X, Z)), mu, nu);
  EXPECT_NEAR(d.primal, 0.0, 1e-9);
  EXPECT_NEAR(d.dual, 0.0, 1e-9);
  EXPECT_LE((d.sigma - mu.weights()).cwiseAbs().maxCoeff(), 1e-4);
  EXPECT_EQ(d.primal_path, "grid+descent");
}

TEST(BackBack, TrivialLinearClosedForm) {
  // inf_sigma KL(sigma || mu) - <c2, nu> + <c1, sigma> = -log <e^{-c1}, mu> - <c2, nu>.
  CounterRng rng(2);
  const Space X = make_space("X", 3), Z = make_space("Z", 3);
  for (int trial = 0; trial < 3; ++trial) {
    const Vec c1 = testing::random_potential(rng, X).values(), c2 = testing::random_potential(rng, Z).values();
    const ProbMeasure mu = random_measure(rng, X, 0.2), nu = random_measure(rng, Z);
    const double expected = -log_mean_exp(-c1, mu) - c2.dot(nu.weights());
    const DualityPair d = back_back_dual(convex_side(log_entropy(X)),
                                         backward_family(trivial_transfer(Potential(X, c1), Potential(Z, c2))), mu, nu);
    EXPECT_NEAR(d.primal, expected, 1e-7);
    EXPECT_NEAR(d.dual, expected, 1e-7);
  }
}

TEST(BackBack, LogEntropyAgainstMkTwoPoints) {
  CounterRng rng(3);
  const Space X = make_space("X", 2), Z = make_space("Z", 2);
  for (int trial = 0; trial < 4; ++trial) {
    const CostMatrix c(X, Z, random_matrix(rng, 2, 2, 0.0, 2.0));
    const ProbMeasure mu = random_measure(rng, X, 0.1), nu = random_measure(rng, Z);
    const EntropicHandle h = log_entropy(X);
    const DualityPair d = back_back_dual(convex_side(h), backward_family(mk_transfer(c)), mu, nu);
    const double oracle =
        grid_min_2([&](const ProbMeasure& s) { return h.eval(mu, s) - solve_transport_lp(c, s, nu).value; }, X);
    EXPECT_NEAR(d.primal, oracle, 2e-3);
    EXPECT_NEAR(d.dual, oracle, 2e-3);
    EXPECT_LE(d.primal, oracle + 1e-9);
    EXPECT_NEAR(d.primal, d.dual, 1e-6);
  }
}

TEST(BackBack, ThreePointAgreement) {
  CounterRng rng(4);
  const Space X = make_space("X", 3), Z = make_space("Z", 3);
  for (int trial = 0; trial < 3; ++trial) {
    const CostMatrix c(X, Z, random_matrix(rng, 3, 3));
    const ProbMeasure mu = random_measure(rng, X, 0.1), nu = random_measure(rng, Z);
    const DualityPair d = back_back_dual(convex_side(log_entropy(X)), backward_family(mk_transfer(c)), mu, nu);
    EXPECT_NEAR(d.primal, d.dual, 5e-3);
  }
}

TEST(BackBack, PowerFamilyOnTheRight) {
  // The subtracted transfer is a convex family: squared MK cost.
  CounterRng rng(5);
  const Space X = make_space("X", 2), Z = make_space("Z", 2);
  const CostMatrix c(X, Z, random_matrix(rng, 2, 2));
  PowerGrid grid;
  // The dual only sees the declared members, so the grid must be fine where s T - alpha^+(s) peaks.
  grid.lo = 0.1;
  grid.hi = 10.0;
  grid.points = 64;
  const ConvexTransferHandle sq = power_transfer(ScalarFn::power(2.0), mk_transfer(c), grid);
  const ProbMeasure mu = random_measure(rng, X, 0.1), nu = random_measure(rng, Z);
  const EntropicHandle h = log_entropy(X);
  SearchConfig cfg;
  cfg.restarts = 8;
  const DualityPair d = back_back_dual(convex_side(h), backward_family(sq), mu, nu, cfg);
  const double oracle = grid_min_2([&](const ProbMeasure& s) { return h.eval(mu, s) - sq.eval(s, nu); }, X);
  EXPECT_NEAR(d.primal, oracle, 2e-3);
  EXPECT_NEAR(d.dual, oracle, 2e-3);
}

TEST(ForwardBack, ZeroCostGivesZero) {
  const Space X = make_space("X", 3);
  const ProbMeasure mu = measure(X, {0.2, 0.3, 0.5});
  const TransferHandle t = mk_transfer(CostMatrix(X, X, Mat::Zero(3, 3)));
  const DualityPair d = forward_back_dual(convex_side(log_entropy(X)), forward_family(t), mu, mu);
  EXPECT_NEAR(d.primal, 0.0, 1e-9);
  EXPECT_NEAR(d.dual, 0.0, 1e-9);
  // g = 0 is a witness: -log <1, mu> - <T^+ 0, mu> = 0.
  EXPECT_NEAR(-std::log(1.0) - t.forward(Potential(X, Vec::Zero(3))).values().dot(mu.weights()), 0.0, 1e-15);
}

TEST(ForwardBack, TrivialForwardClosedForm) {
  // Forward trivial transfer with c = 0 vanishes: inf_sigma KL(sigma || mu) = 0.
  CounterRng rng(6);
  const Space X = make_space("X", 2);
  const ProbMeasure mu = random_measure(rng, X, 0.2), nu = random_measure(rng, X);
  const DualityPair d = forward_back_dual(convex_side(log_entropy(X)), forward_family(zero_transfer(X, X)), mu, nu);
  EXPECT_NEAR(d.primal, 0.0, 1e-9);
  EXPECT_NEAR(d.dual, 0.0, 1e-9);
}

TEST(ForwardBack, MkForwardTwoPoints) {
  CounterRng rng(7);
  const Space X = make_space("X", 2), Z = make_space("Z", 2);
  for (int trial = 0; trial < 4; ++trial) {
    const CostMatrix c(X, Z, random_matrix(rng, 2, 2, 0.0, 2.0));
    const TransferHandle t = mk_transfer(c);
    const ProbMeasure mu = random_measure(rng, X, 0.1), nu = random_measure(rng, Z);
    const EntropicHandle h = log_entropy(X);
    const DualityPair d = forward_back_dual(convex_side(h), forward_family(t), mu, nu);
    const double oracle = grid_min_2([&](const ProbMeasure& s) { return h.eval(mu, s) - t.eval(s, nu); }, X);
    EXPECT_NEAR(d.primal, oracle, 2e-3);
    EXPECT_NEAR(d.dual, oracle, 2e-3);
  }
}

TEST(ForwardBack, BothEntropicClosedForm) {
  // KL(sigma || mu) - KL(sigma || nu) = sum sigma log(nu / mu) is linear in
  // sigma, so its infimum is min_x log(nu(x) / mu(x)).
  CounterRng rng(8);
  const Space X = make_space("X", 3);
  for (int trial = 0; trial < 3; ++trial) {
    const ProbMeasure mu = random_measure(rng, X, 0.2), nu = random_measure(rng, X, 0.2);
    const double expected = (nu.weights().array() / mu.weights().array()).log().minCoeff();
    const DualityPair d = forward_back_dual(convex_side(log_entropy(X)), forward_log_entropy(X), mu, nu);
    EXPECT_NEAR(d.primal, expected, 1e-7);
    EXPECT_NEAR(d.dual, expected, 1e-6);
  }
}

TEST(TeInequality, TvAgainstKlIsViolated) {
  // TV(sigma, u) <= KL(sigma || u) fails near u (TV is linear, KL quadratic).
  const Space X = make_space("X", 2);
  const ProbMeasure u = uniform(X);
  const TransferHandle tv = tv_transfer(X);
  const GapReport r = check_te_inequality({InequalityForm::BackwardBackward, backward_family(tv), u, u});
  const double oracle =
      grid_min_2([&](const ProbMeasure& s) { return kl_divergence(s, u) - tv.eval(s, u); }, X, 1 << 16);
  EXPECT_NEAR(r.primal_gap, oracle, 1e-6);
  EXPECT_LT(r.primal_gap, -0.1);
  EXPECT_FALSE(r.holds());
  EXPECT_TRUE(r.consistent());
  EXPECT_STREQ(r.verdict(), "VIOLATED");
}

TEST(TeInequality, HugeWeightHolds) {
  const Space X = make_space("X", 2);
  const ProbMeasure u = uniform(X);
  InequalitySpec spec{InequalityForm::BackwardBackward, backward_family(tv_transfer(X)), u, u};
  spec.lambda = 1e6;
  const GapReport r = check_te_inequality(spec);
  EXPECT_TRUE(r.holds());
  EXPECT_TRUE(r.consistent());
  // min over d of 1e6 * 2 d^2 - d near the anchor (KL ~ 2 d^2, TV = d).
  EXPECT_NEAR(r.primal_gap, -1.0 / 8e6, 1e-9);
}

TEST(TeInequality, TinyWeightHammingViolatedAtDirac) {
  const Space X = make_space("X", 2);
  Mat hamming(2, 2);
  hamming << 0.0, 1.0, 1.0, 0.0;
  const TransferHandle mk = mk_transfer(CostMatrix(X, X, hamming));
  const ProbMeasure m = measure(X, {0.4, 0.6});
  InequalitySpec spec{InequalityForm::BackwardBackward, backward_family(mk), m, m};
  spec.lambda = 1e-6;
  const GapReport r = check_te_inequality(spec);
  EXPECT_FALSE(r.holds());
  EXPECT_TRUE(r.consistent());
  // The witness is a Dirac (the far one): LHS 0.6, RHS lambda log(1 / 0.4).
  EXPECT_NEAR(r.worst_sigma.maxCoeff(), 1.0, 1e-9);
  EXPECT_NEAR(r.primal_gap, 1e-6 * std::log(1.0 / 0.4) - 0.6, 1e-8);
}

TEST(TeInequality, SignConsistencyAndMonotonicity) {
  CounterRng rng(9);
  const Space X = make_space("X", 2), Z = make_space("Z", 2);
  SearchConfig cfg;
  cfg.restarts = 12;
  for (int trial = 0; trial < 3; ++trial) {
    const TransferHandle mk = mk_transfer(CostMatrix(X, Z, random_matrix(rng, 2, 2)));
    const ProbMeasure mu = random_measure(rng, X, 0.1), nu = random_measure(rng, Z);
    double last = -kInfinity;
    bool held = false;
    for (double lambda : {0.05, 0.2, 1.0, 5.0, 50.0}) {
      InequalitySpec spec{InequalityForm::BackwardBackward, backward_family(mk), mu, nu};
      spec.lambda = lambda;
      const GapReport r = check_te_inequality(spec, cfg);
      EXPECT_TRUE(r.consistent()) << lambda;
      EXPECT_NEAR(r.primal_gap, r.dual_gap, 1e-5);
      EXPECT_GE(r.primal_gap, last - 1e-9);
      if (held) EXPECT_TRUE(r.holds());
      held = held || r.holds();
      last = r.primal_gap;
    }
  }
}

TEST(TeInequality, ForwardFormAndLinkedChain) {
  CounterRng rng(10);
  const Space X = make_space("X", 2), Y = make_space("Y", 2), W = make_space("W", 2);
  SearchConfig cfg;
  cfg.restarts = 8;
  const TransferHandle link = mk_transfer(CostMatrix(X, Y, random_matrix(rng, 2, 2, 0.0, 0.3)));
  const TransferHandle lhs = mk_transfer(CostMatrix(W, Y, random_matrix(rng, 2, 2)));
  const ProbMeasure mu = random_measure(rng, X, 0.1), nu = random_measure(rng, W);
  for (double lambda : {0.3, 3.0}) {
    InequalitySpec spec{InequalityForm::ForwardBackward, backward_family(lhs), mu, nu};
    spec.link = link;
    spec.lambda = lambda;
    const GapReport r = check_te_inequality(spec, cfg);
    EXPECT_TRUE(r.consistent());
    EXPECT_NEAR(r.primal_gap, r.dual_gap, 2e-3);
    // grid oracle: lambda (H * T)(mu, sigma) - F(nu, sigma)
    const EntropicHandle chain = entropic_convolve(log_entropy(X), link);
    const double oracle = grid_min_2(
        [&](const ProbMeasure& s) { return lambda * chain.eval(mu, s) - lhs.eval(nu, s); }, Y, 512);
    EXPECT_NEAR(r.primal_gap, oracle, 2e-3);
  }
}

TEST(Maurey, ZeroFunctionalHolds) {
  const Space Y1 = make_space("Y1", 2), Y2 = make_space("Y2", 2);
  const ProbMeasure mu = measure(Y1, {0.25, 0.75}), nu = measure(Y2, {0.5, 0.5});
  for (double l : {0.1, 1.0, 7.0}) {
    const GapReport r = maurey_check(backward_family(zero_transfer(Y1, Y2)), std::nullopt, std::nullopt, l, l, mu, nu);
    EXPECT_TRUE(r.holds());
    EXPECT_TRUE(r.consistent());
    EXPECT_NEAR(r.primal_gap, 0.0, 1e-12);
    EXPECT_NEAR(r.dual_gap, 0.0, 1e-9);
    EXPECT_LE((r.worst_sigma - mu.weights()).cwiseAbs().maxCoeff(), 1e-6);
    EXPECT_LE((r.worst_sigma2 - nu.weights()).cwiseAbs().maxCoeff(), 1e-6);
  }
}

TEST(Maurey, TrivialFunctionalClosedForm) {
  // F(s1, s2) = <c, s2> - <c, s1>; both sides separate into Gibbs variational
  // problems: -l1 log <e^{-c/l1}, mu> - l2 log <e^{c/l2}, nu>.
  CounterRng rng(11);
  const Space Y = make_space("Y", 2);
  for (int trial = 0; trial < 3; ++trial) {
    const Vec c = testing::random_potential(rng, Y).values();
    const double l1 = rng.uniform(0.2, 2.0), l2 = rng.uniform(0.2, 2.0);
    const ProbMeasure mu = random_measure(rng, Y, 0.1), nu = random_measure(rng, Y, 0.1);
    const double expected = -l1 * log_mean_exp(-c / l1, mu) - l2 * log_mean_exp(c / l2, nu);
    const GapReport r = maurey_check(backward_family(trivial_transfer(Potential(Y, c), Potential(Y, c))),
                                     std::nullopt, std::nullopt, l1, l2, mu, nu);
    EXPECT_NEAR(r.primal_gap, expected, 2e-3);
    EXPECT_NEAR(r.dual_gap, expected, 2e-3);
    EXPECT_NEAR(r.primal_gap, r.dual_gap, 1e-6);
  }
}

TEST(Maurey, HammingSampledCriterion) {
  const Space Y = make_space("Y", 2);
  Mat hamming(2, 2);
  hamming << 0.0, 1.0, 1.0, 0.0;
  const BackwardFamily f = backward_family(mk_transfer(CostMatrix(Y, Y, hamming)));
  const ProbMeasure u = uniform(Y);
  const GapReport r = maurey_check(f, std::nullopt, std::nullopt, 0.5, 0.5, u, u);
  CounterRng rng(12);
  double worst = 0.0;
  for (int k = 0; k < 1000; ++k) {
    const Vec g = testing::random_potential(rng, Y, 3.0).values();
    worst = std::max(worst, std::exp(maurey_criterion(f.members[0], std::nullopt, std::nullopt, 0.5, 0.5, u, u, g)));
  }
  EXPECT_EQ(worst <= 1.0 + 1e-6, r.primal_gap >= -1e-6);
  EXPECT_TRUE(r.consistent());
  EXPECT_FALSE(r.holds());
}

TEST(Maurey, LinkedSidesAgree) {
  CounterRng rng(13);
  const Space Y1 = make_space("Y1", 2), Y2 = make_space("Y2", 2), X1 = make_space("X1", 2),
              X2 = make_space("X2", 2);
  const TransferHandle t1 = mk_transfer(CostMatrix(Y1, X1, random_matrix(rng, 2, 2, 0.0, 0.5)));
  const TransferHandle t2 = mk_transfer(CostMatrix(Y2, X2, random_matrix(rng, 2, 2, 0.0, 0.5)));
  const BackwardFamily f = backward_family(mk_transfer(CostMatrix(Y1, Y2, random_matrix(rng, 2, 2))));
  const ProbMeasure mu = random_measure(rng, X1, 0.1), nu = random_measure(rng, X2, 0.1);
  SearchConfig cfg;
  cfg.grid_step_2 = 1.0 / 64;
  cfg.restarts = 8;
  const GapReport r = maurey_check(f, t1, t2, 0.7, 1.3, mu, nu, cfg);
  EXPECT_NEAR(r.primal_gap, r.dual_gap, 2e-3);
  EXPECT_TRUE(r.consistent());
}

}  // namespace
}  // namespace transfer
