#include <gtest/gtest.h>

#include "transfer/catalog.hpp"
#include "transfer/errors.hpp"
#include "transfer/kam.hpp"
#include "transfer/solvers.hpp"
#include "util.hpp"

namespace transfer {
namespace {

using testing::random_matrix;

TransferHandle mk(const Space& X, const Mat& c) { return mk_transfer(CostMatrix(X, X, c)); }

Mat mat2(double a, double b, double c, double d) {
  Mat m(2, 2);
  m << a, b, c, d;
  return m;
}

// Same transfer with the cost hidden, so only the operator is used.
TransferHandle operator_only(TransferHandle t) {
  t.cost.reset();
  return t;
}

TEST(Iterate, ZeroStepsAndMinPlusPowers) {
  CounterRng rng(1);
  const Space X = make_space("X", 4);
  const Mat c = random_matrix(rng, 4, 4);
  const TransferHandle t = mk(X, c);
  const Potential g = testing::random_potential(rng, X);
  EXPECT_EQ(iterate_operator(t, g, 0).values(), g.values());
  for (unsigned n : {1u, 2u, 5u}) {
    const Mat cn = minplus_power(CostMatrix(X, X, c), n).entries();
    const Vec got = iterate_operator(t, g, n).values();
    for (Eigen::Index x = 0; x < 4; ++x)
      EXPECT_NEAR(got(x), (g.values().transpose().replicate(1, 1).array() - cn.row(x).array()).maxCoeff(), 1e-12);
  }
}

TEST(Iterate, TrivialTransferClosedForm) {
  // T g = a + max(g - b); from a constant k: a + k - min b + (n - 1) max(a - b).
  const Space X = make_space("X", 3);
  Vec a(3), b(3);
  a << 0.2, -0.5, 1.0;
  b << 0.3, 0.1, -0.4;
  const TransferHandle t = trivial_transfer(Potential(X, a), Potential(X, b));
  const double k = 2.5;
  for (unsigned n : {1u, 2u, 4u}) {
    const Vec expected = a.array() + k - b.minCoeff() + (n - 1.0) * (a - b).maxCoeff();
    EXPECT_LE((iterate_operator(t, Potential(X, Vec::Constant(3, k)), n).values() - expected).cwiseAbs().maxCoeff(),
              1e-14);
  }
}

TEST(EffectiveConstant, HandExamples) {
  const Space X = make_space("X", 2);
  const EffectiveConstant a = effective_constant(mk(X, mat2(1, 2, 3, 1)));
  EXPECT_DOUBLE_EQ(*a.exact, 1.0);
  EXPECT_NEAR(a.estimate, 1.0, 1e-10);
  EXPECT_TRUE(a.converged);
  const EffectiveConstant k = effective_constant(mk(X, Mat::Constant(2, 2, 3.5)));
  EXPECT_NEAR(k.ell, 3.5, 1e-15);
  EXPECT_EQ(k.C, 0.0);
  const EffectiveConstant z = effective_constant(mk(X, mat2(5, 0, 0, 5)));
  EXPECT_NEAR(z.ell, 0.0, 1e-15);
  EXPECT_NEAR(z.estimate, 0.0, 1e-10);
}

TEST(EffectiveConstant, RandomAgreesWithKarpAndSandwich) {
  CounterRng rng(2);
  for (int trial = 0; trial < 5; ++trial) {
    const Space X = make_space("X", 5);
    const TransferHandle t = mk(X, random_matrix(rng, 5, 5));
    const EffectiveConstant e = effective_constant(t);
    ASSERT_TRUE(e.converged);
    EXPECT_NEAR(e.estimate, *e.exact, 1e-9);
    EXPECT_LE(e.lower, *e.exact + 1e-12);
    EXPECT_GE(e.upper, *e.exact - 1e-12);
    const std::size_t N = std::min<std::size_t>(e.M.size(), 40);
    for (std::size_t i = 1; i <= N; ++i)
      for (std::size_t j = 1; i + j <= N; ++j) {
        EXPECT_LE(e.M[i + j - 1], e.M[i - 1] + e.M[j - 1] + 1e-9);
        EXPECT_GE(e.m[i + j - 1], e.m[i - 1] + e.m[j - 1] - 1e-9);
      }
    // n ell - C <= T_n(delta_x, delta_y) <= n ell + C
    Mat p = t.cost->entries();
    for (std::size_t n = 1; n <= N; ++n) {
      EXPECT_GE(p.minCoeff(), n * e.ell - e.C - 1e-9);
      EXPECT_LE(p.maxCoeff(), n * e.ell + e.C + 1e-9);
      p = minplus_product(p, t.cost->entries());
    }
  }
}

TEST(EffectiveConstant, OperatorRouteMatchesKarp) {
  CounterRng rng(3);
  const Space X = make_space("X", 4);
  const TransferHandle t = mk(X, random_matrix(rng, 4, 4));
  const EffectiveConstant e = effective_constant(operator_only(t));
  EXPECT_FALSE(e.exact.has_value());
  EXPECT_EQ(e.method, "increments");
  EXPECT_NEAR(e.ell, min_mean_cycle(*t.cost).mean, 1e-9);
  const std::size_t N = e.M.size();
  ASSERT_GE(N, 2u);
  for (std::size_t i = 1; i <= N; ++i)
    for (std::size_t j = 1; i + j <= N; ++j) {
      EXPECT_LE(e.M[i + j - 1], e.M[i - 1] + e.M[j - 1] + 1e-9);
      EXPECT_GE(e.m[i + j - 1], e.m[i - 1] + e.m[j - 1] - 1e-9);
    }
}

TEST(Calibrate, StationaryValueAndDualSign) {
  CounterRng rng(4);
  const Space X = make_space("X", 4);
  const TransferHandle t = mk(X, random_matrix(rng, 4, 4));
  const double ell = min_mean_cycle(*t.cost).mean;
  const TransferHandle cal = calibrate(t, ell);
  EXPECT_NEAR(solve_stationary_lp(*cal.cost).value, 0.0, 1e-10);
  EXPECT_NEAR(effective_constant(cal).estimate, 0.0, 1e-9);
  const ProbMeasure mu = testing::random_measure(rng, X), nu = testing::random_measure(rng, X);
  EXPECT_NEAR(cal.eval(mu, nu), t.eval(mu, nu) - ell, 1e-12);
  // the shifted operator reproduces the shifted value through duality
  EXPECT_NEAR(backward_dual(cal, mu, nu).value, t.eval(mu, nu) - ell, 1e-7);
  EXPECT_NEAR(backward_dual(operator_only(cal), mu, nu).value, t.eval(mu, nu) - ell, 1e-7);
  EXPECT_EQ(calibrate(t, 0.0).name, t.name);
  const TransferHandle twice = calibrate(cal, effective_constant(cal).ell);
  EXPECT_NEAR(twice.eval(mu, nu), cal.eval(mu, nu), 1e-12);
  EXPECT_THROW(calibrate(t, kInfinity), InputError);
}

double sup_norm(const Vec& v) { return v.cwiseAbs().maxCoeff(); }

TransferHandle calibrated_random(CounterRng& rng, std::size_t n) {
  const Space X = make_space("X", n);
  const TransferHandle t = mk(X, random_matrix(rng, n, n));
  return calibrate(t, min_mean_cycle(*t.cost).mean);
}

TEST(WeakKam, ZeroCostAndSwapCost) {
  const Space X = make_space("X", 3);
  const KamResult z = weak_kam_solve(mk(X, Mat::Zero(3, 3)));
  ASSERT_TRUE(z.converged);
  EXPECT_EQ(sup_norm(z.u->values()), 0.0);
  const Space Y = make_space("Y", 2);
  const KamResult s = weak_kam_solve(mk(Y, mat2(0, 1, 1, 0)));
  ASSERT_TRUE(s.converged);
  EXPECT_EQ(sup_norm(s.u->values()), 0.0);
  EXPECT_EQ(s.method, "iteration");
}

TEST(WeakKam, OscillatingIterationNeedsTwoStages) {
  // From 0 the iterates alternate between (-1, 1) and (0, 0); (0, 1) is fixed.
  const Space X = make_space("X", 2);
  const KamResult r = weak_kam_solve(mk(X, mat2(10, 1, -1, 10)));
  ASSERT_TRUE(r.converged) << r.message;
  EXPECT_EQ(r.period, 2u);
  EXPECT_EQ(r.method, "two-stage");
  EXPECT_NEAR((*r.u)[0], 0.0, 1e-15);
  EXPECT_NEAR((*r.u)[1], 1.0, 1e-15);
}

TEST(WeakKam, RandomFixedPointIsDominated) {
  CounterRng rng(5);
  for (int trial = 0; trial < 5; ++trial) {
    const TransferHandle cal = calibrated_random(rng, 5);
    const KamResult r = weak_kam_solve(cal);
    ASSERT_TRUE(r.converged) << r.message;
    EXPECT_LE(r.residual, 1e-10);
    const Vec& u = r.u->values();
    EXPECT_LE(sup_norm(cal.backward(*r.u).values() - u), 1e-10);
    for (Eigen::Index x = 0; x < 5; ++x)
      for (Eigen::Index y = 0; y < 5; ++y) EXPECT_LE(u(y) - u(x), cal.cost->entries()(x, y) + 1e-10);
  }
}

TEST(WeakKam, RejectsUncalibratedAndInfinite) {
  const Space X = make_space("X", 2);
  EXPECT_THROW(weak_kam_solve(mk(X, mat2(1, 2, 3, 1))), DomainError);
  EXPECT_THROW(weak_kam_solve(martingale_transfer(CostMatrix(X, X, Mat::Zero(2, 2)))), DomainError);
  KamConfig bad;
  bad.tol = 0.0;
  EXPECT_THROW(weak_kam_solve(mk(X, Mat::Zero(2, 2)), bad), InputError);
}

TEST(WeakKam, InfinityOperatorFixesFixedPoints) {
  CounterRng rng(6);
  const TransferHandle cal = calibrated_random(rng, 4);
  const Potential u = *weak_kam_solve(cal).u;
  EXPECT_LE(sup_norm(t_infinity(cal, u).values() - u.values()), 1e-10);
  const Potential f = testing::random_potential(rng, cal.source);
  const Potential tf = t_infinity(cal, f);
  EXPECT_LE(sup_norm(cal.backward(tf).values() - tf.values()), 1e-10);
  // with a cost, T_inf f (x) = max_y f(y) - h(x,y)
  const PeierlsBarrier b = peierls_barrier(cal, 0.0);
  ASSERT_TRUE(b.exact);
  for (Eigen::Index x = 0; x < 4; ++x)
    EXPECT_NEAR(tf.values()(x), (f.values().transpose() - b.h->entries().row(x)).maxCoeff(), 1e-9);
}

TEST(Peierls, HandExamples) {
  const Space X = make_space("X", 2);
  const PeierlsBarrier z = peierls_barrier(mk(X, Mat::Zero(2, 2)), 0.0);
  EXPECT_EQ(sup_norm(z.h->entries()), 0.0);
  const PeierlsBarrier s = peierls_barrier(mk(X, mat2(0, 1, 1, 0)), 0.0);
  EXPECT_EQ(s.h->entries(), mat2(0, 1, 1, 0));
  const PeierlsBarrier p = peierls_barrier(mk(X, mat2(5, 0, 0, 5)), 0.0);
  EXPECT_EQ(p.period, 2u);
  EXPECT_TRUE(p.exact);
  EXPECT_EQ(sup_norm(p.h->entries()), 0.0);
}

TEST(Peierls, RandomInvariants) {
  CounterRng rng(7);
  for (int trial = 0; trial < 5; ++trial) {
    const Space X = make_space("X", 5);
    const TransferHandle t = mk(X, random_matrix(rng, 5, 5));
    const double ell = min_mean_cycle(*t.cost).mean;
    const PeierlsBarrier b = peierls_barrier(t, ell);
    ASSERT_TRUE(b.exact);
    const Mat& h = b.h->entries();
    EXPECT_GE(h.diagonal().minCoeff(), -1e-9);
    EXPECT_LE(idempotence_defect(b), 1e-9);
    // h is below late calibrated powers (transients can be long)
    const CostMatrix cal = *calibrate(t, ell).cost;
    for (unsigned k : {200u, 201u, 257u})
      EXPECT_LE((h - minplus_power(cal, k).entries()).maxCoeff(), 1e-9);
    const ProbMeasure mu = testing::random_measure(rng, X), nu = testing::random_measure(rng, X);
    EXPECT_NEAR(b.eval(mu, nu), solve_transport_lp(*b.h, mu, nu).value, 1e-12);
  }
}

TEST(Peierls, OperatorRouteIsLowerBound) {
  CounterRng rng(8);
  const Space X = make_space("X", 4);
  const TransferHandle t = mk(X, random_matrix(rng, 4, 4));
  const double ell = min_mean_cycle(*t.cost).mean;
  const PeierlsBarrier exact = peierls_barrier(t, ell);
  KamConfig cfg;
  cfg.samples = 16;
  const PeierlsBarrier gen = peierls_barrier(operator_only(t), ell, cfg);
  EXPECT_TRUE(gen.lower_bound);
  EXPECT_FALSE(gen.h.has_value());
  for (std::size_t x = 0; x < 4; ++x)
    for (std::size_t y = 0; y < 4; ++y) {
      // indicator probes are exact on Diracs once the depth exceeds h
      EXPECT_NEAR(gen.eval(dirac(X, x), dirac(X, y)), (*exact.h)(x, y), 1e-9);
    }
  for (int k = 0; k < 5; ++k) {
    const ProbMeasure mu = testing::random_measure(rng, X), nu = testing::random_measure(rng, X);
    EXPECT_LE(gen.eval(mu, nu), exact.eval(mu, nu) + 1e-9);
  }
}

TEST(AubryMather, HandExamples) {
  const Space X = make_space("X", 2);
  {
    const TransferHandle t = mk(X, mat2(1, 2, 3, 1));
    const AubryReport r = aubry_mather(t, 1.0, peierls_barrier(t, 1.0));
    EXPECT_EQ(r.aubry_points, (std::vector<std::size_t>{0, 1}));
    EXPECT_NEAR(*r.mather_value, 1.0, 1e-12);
    EXPECT_NEAR(*r.mather_calibrated, 0.0, 1e-12);
    const Mat& plan = *r.mather_plan;
    EXPECT_NEAR(plan(0, 1) + plan(1, 0), 0.0, 1e-12);
  }
  {
    const TransferHandle t = mk(X, mat2(5, 0, 0, 5));
    const AubryReport r = aubry_mather(t, 0.0, peierls_barrier(t, 0.0));
    EXPECT_EQ(r.aubry_points.size(), 2u);
    EXPECT_NEAR(*r.mather_value, 0.0, 1e-12);
    EXPECT_LE((*r.mather_plan - mat2(0, 0.5, 0.5, 0)).cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_LE((*r.mather_marginal - Vec::Constant(2, 0.5)).cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_EQ(r.factorization_error, 0.0);
  }
}

TEST(AubryMather, ThreeComputationsOfTheConstantAgree) {
  CounterRng rng(9);
  for (int trial = 0; trial < 5; ++trial) {
    const Space X = make_space("X", 5);
    const TransferHandle t = mk(X, random_matrix(rng, 5, 5));
    const double karp = min_mean_cycle(*t.cost).mean;
    const double increments = effective_constant(operator_only(t)).ell;
    const PeierlsBarrier b = peierls_barrier(t, karp);
    const AubryReport r = aubry_mather(t, karp, b);
    EXPECT_NEAR(*r.mather_value, karp, 1e-8);
    EXPECT_NEAR(increments, karp, 1e-8);
    EXPECT_NEAR(*r.mather_calibrated, 0.0, 1e-8);
    EXPECT_FALSE(r.aubry_points.empty());
    EXPECT_LE(r.factorization_error, 1e-9);
    for (double cert : r.certificates) EXPECT_LE(std::abs(cert), 1e-8);
    // mixtures of Aubry measures stay in the Aubry set
    for (std::size_t i = 0; i < r.aubry_measures.size(); ++i)
      for (std::size_t j = i + 1; j < r.aubry_measures.size(); ++j) {
        const ProbMeasure mid(X, 0.5 * (r.aubry_measures[i].weights() + r.aubry_measures[j].weights()));
        EXPECT_LE(std::abs(b.eval(mid, mid)), 1e-8);
      }
  }
}

}  // namespace
}  // namespace transfer
