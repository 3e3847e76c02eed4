#include <gtest/gtest.h>

#include <cmath>

#include "transfer/catalog.hpp"
#include "transfer/entropic.hpp"
#include "transfer/errors.hpp"
#include "transfer/solvers.hpp"
#include "util.hpp"

namespace transfer {
namespace {

using testing::measure;
using testing::random_matrix;
using testing::random_measure;
using testing::random_potential;

std::vector<std::size_t> identity_map(std::size_t n) {
  std::vector<std::size_t> m(n);
  for (std::size_t i = 0; i < n; ++i) m[i] = i;
  return m;
}

GeneratorModel random_generator(CounterRng& rng, const Space& s) {
  const std::size_t n = s->size();
  const Vec mu = testing::random_weights(rng, n, 0.2);
  Mat w = random_matrix(rng, n, n, 0.1, 1.0);
  w = (0.5 * (w + w.transpose())).eval();
  Mat l(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  for (Eigen::Index i = 0; i < l.rows(); ++i)
    for (Eigen::Index j = 0; j < l.cols(); ++j) l(i, j) = i == j ? 0.0 : w(i, j) / mu(i);
  for (Eigen::Index i = 0; i < l.rows(); ++i) l(i, i) = -l.row(i).sum();
  return GeneratorModel(s, l, mu);
}

TEST(Conjugates, SpotValues) {
  const ScalarFn half_square = ScalarFn::power(2.0, 0.5);
  for (double t : {0.0, 0.3, 1.0, 2.5}) {
    EXPECT_NEAR(half_square.conj_inc(t), 0.5 * t * t, 1e-14);
    EXPECT_NEAR(half_square.conj_inc_numeric(t), 0.5 * t * t, 1e-9);
  }
  const ScalarFn id = ScalarFn::identity();
  EXPECT_EQ(id.conj_inc(0.5), 0.0);
  EXPECT_EQ(id.conj_inc(1.0), 0.0);
  EXPECT_TRUE(std::isinf(id.conj_inc(1.5)));
  // (-log) decreasing conjugate at 1: sup_s [-s + log s] = -1.
  EXPECT_NEAR(ScalarFn::log().negated().conj_dec(1.0), -1.0, 1e-15);
}

TEST(Conjugates, Biconjugation) {
  for (const ScalarFn& a : {ScalarFn::power(2.0), ScalarFn::power(3.0, 0.25), ScalarFn::exp(), ScalarFn::xlogx()}) {
    for (double t : {0.1, 0.5, 1.0, 2.0}) {
      // alpha^+ only sees the nondecreasing hull, so skip where alpha decreases.
      if (a.derivative(t) < 0.0) continue;
      // alpha(t) = sup_{s >= 0} t s - alpha^+(s), by golden search on a bracket.
      auto obj = [&](double s) { return t * s - a.conj_inc(s); };
      const double s = golden_section_max(obj, 0.0, 50.0, 1e-14);
      EXPECT_NEAR(std::max(obj(s), obj(0.0)), a(t), 1e-7) << a.name() << " t=" << t;
    }
  }
}

TEST(PowerTransfer, IdentityRecoversTransfer) {
  CounterRng rng(1);
  const Space X = make_space("X", 3), Y = make_space("Y", 3);
  const TransferHandle t = mk_transfer(CostMatrix(X, Y, random_matrix(rng, 3, 3)));
  const ConvexTransferHandle p = power_transfer(ScalarFn::identity(), t);
  const ProbMeasure mu = random_measure(rng, X), nu = random_measure(rng, Y);
  EXPECT_DOUBLE_EQ(p.eval(mu, nu), t.eval(mu, nu));
  EXPECT_NEAR(family_dual(p, mu, nu).value, t.eval(mu, nu), 1e-6);
}

TEST(PowerTransfer, SquareReachesSquaredLp) {
  CounterRng rng(2);
  for (int trial = 0; trial < 3; ++trial) {
    const Space X = make_space("X", 3), Y = make_space("Y", 3);
    const CostMatrix c(X, Y, random_matrix(rng, 3, 3));
    const ConvexTransferHandle p = power_transfer(ScalarFn::power(2.0), mk_transfer(c));
    const ProbMeasure mu = random_measure(rng, X), nu = random_measure(rng, Y);
    const double lp = solve_transport_lp(c, mu, nu).value;
    const FamilyDualReport d = family_dual(p, mu, nu);
    EXPECT_NEAR(d.value, lp * lp, 1e-4 * lp * lp);
    EXPECT_NEAR(p.eval(mu, nu), lp * lp, 1e-12);
    // every member's linear value stays below the supremum
    for (double s : {0.01, 0.3, 2.0, 50.0}) {
      ConcaveOracle f = [&](const Vec& g) { return backward_dual_objective(p.member(s), mu, nu, g); };
      EXPECT_LE(maximize_concave_over_potentials(3, f, {}).value, p.eval(mu, nu) + 1e-7);
    }
  }
}

TEST(PowerTransfer, ZeroTransferGivesAlphaAtZero) {
  const Space X = make_space("X", 3);
  const ConvexTransferHandle p = power_transfer(ScalarFn::power(2.0), tv_transfer(X));
  const ProbMeasure mu = measure(X, {0.2, 0.3, 0.5});
  EXPECT_EQ(p.eval(mu, mu), 0.0);
  EXPECT_NEAR(family_dual(p, mu, mu).value, 0.0, 1e-6);
}

TEST(GeneralizedEntropy, ClosedForms) {
  const Space X = make_space("X", 2);
  const ProbMeasure mu = measure(X, {0.5, 0.5}), nu = measure(X, {0.8, 0.2});
  EXPECT_NEAR(generalized_entropy(ScalarFn::xlogx(), X).eval(mu, nu), 0.8 * std::log(1.6) + 0.2 * std::log(0.4),
              1e-15);
  EXPECT_NEAR(generalized_entropy(ScalarFn::chi_square(), X).eval(mu, nu), 0.5 * 0.36 + 0.5 * 0.36, 1e-15);
  EXPECT_NEAR(generalized_entropy(ScalarFn::power(2.0), X).eval(mu, mu), 1.0, 1e-15);
  EXPECT_TRUE(std::isinf(generalized_entropy(ScalarFn::xlogx(), X).eval(measure(X, {1.0, 0.0}), nu)));
  EXPECT_THROW(generalized_entropy(ScalarFn::identity(), X), InputError);
  EXPECT_THROW(generalized_entropy(ScalarFn::log(), X), InputError);
}

TEST(GeneralizedEntropy, ConjugateMatchesLogSumExp) {
  CounterRng rng(3);
  const Space X = make_space("X", 4);
  for (int trial = 0; trial < 10; ++trial) {
    const ProbMeasure mu = random_measure(rng, X);
    const Vec f = random_potential(rng, X, 2.0).values();
    const double lse = std::log(mu.weights().dot(f.array().exp().matrix()));
    EXPECT_NEAR(generalized_entropy_conjugate(ScalarFn::xlogx(), mu, f), lse, 1e-12);
  }
}

TEST(GeneralizedEntropy, DualityForThreeAlphas) {
  CounterRng rng(4);
  const Space X = make_space("X", 3);
  for (const ScalarFn& a : {ScalarFn::xlogx(), ScalarFn::chi_square(), ScalarFn::power(2.0)}) {
    const ConvexTransferHandle t = generalized_entropy(a, X);
    for (int trial = 0; trial < 4; ++trial) {
      const ProbMeasure mu = random_measure(rng, X, 0.2), nu = random_measure(rng, X, 0.2);
      EXPECT_NEAR(convex_dual(t, mu, nu).value, t.eval(mu, nu), 1e-5) << a.name();
    }
  }
}

TEST(LogEntropy, ClosedFormsAndWitness) {
  const Space X = make_space("X", 2);
  const EntropicHandle h = log_entropy(X);
  const ProbMeasure u = uniform(X);
  EXPECT_EQ(h.eval(u, u), 0.0);
  EXPECT_NEAR(h.eval(u, dirac(X, std::size_t{0})), std::log(2.0), 1e-15);
  EXPECT_TRUE(std::isinf(h.eval(dirac(X, std::size_t{0}), u)));
  EXPECT_NEAR(h.conjugate(u, Vec::Zero(2)).value, 0.0, 1e-15);
}

TEST(LogEntropy, WitnessAttainsKlExactly) {
  CounterRng rng(5);
  const Space X = make_space("X", 5);
  const EntropicHandle h = log_entropy(X);
  for (int trial = 0; trial < 20; ++trial) {
    const ProbMeasure mu = random_measure(rng, X), nu = random_measure(rng, X);
    const Vec f = log_entropy_witness(mu, nu).values();
    EXPECT_NEAR(f.dot(nu.weights()) - h.conjugate(mu, f).value, kl_divergence(nu, mu), 1e-12);
  }
  // nu with holes in its support.
  const ProbMeasure mu = random_measure(rng, X);
  Vec w(5);
  w << 0.5, 0.0, 0.25, 0.0, 0.25;
  const ProbMeasure nu(X, w);
  const Vec f = log_entropy_witness(mu, nu).values();
  EXPECT_NEAR(f.dot(nu.weights()) - h.conjugate(mu, f).value, kl_divergence(nu, mu), 1e-12);
}

TEST(LogEntropy, AscentReachesKl) {
  CounterRng rng(6);
  const Space X = make_space("X", 3);
  const EntropicHandle h = log_entropy(X);
  for (int trial = 0; trial < 10; ++trial) {
    const ProbMeasure mu = random_measure(rng, X, 0.1), nu = random_measure(rng, X, 0.1);
    EXPECT_NEAR(entropic_dual(h, mu, nu).value, kl_divergence(nu, mu), 1e-8);
  }
}

TEST(DonskerVaradhan, StationaryIsZero) {
  CounterRng rng(7);
  const Space X = make_space("X", 4);
  const GeneratorModel gm = random_generator(rng, X);
  const EntropicHandle dv = donsker_varadhan(gm);
  const ProbMeasure mu(X, gm.mu);
  EXPECT_NEAR(dv.eval(mu, mu), 0.0, 1e-15);
  EXPECT_NEAR(dv.conjugate(mu, Vec::Zero(4)).value, 0.0, 1e-12);
  for (int trial = 0; trial < 20; ++trial) EXPECT_GT(dv.eval(mu, random_measure(rng, X)), 0.0);
}

TEST(DonskerVaradhan, TwoStateChain) {
  const double a = 0.7, b = 1.9;
  const Space X = make_space("X", 2);
  Mat l(2, 2);
  l << -a, a, b, -b;
  Vec m(2);
  m << b / (a + b), a / (a + b);
  const GeneratorModel gm(X, l, m);
  const EntropicHandle dv = donsker_varadhan(gm);
  const ProbMeasure mu(X, gm.mu);
  // From the 2x2 Dirichlet form: h = (1/sqrt(mu_0), 0), E(h, h) = mu_0 a h_0^2 = a.
  EXPECT_NEAR(dv.eval(mu, dirac(X, std::size_t{0})), a, 1e-14);
  AscentConfig cfg;
  cfg.radius = 1e8;
  EXPECT_NEAR(entropic_dual(dv, mu, dirac(X, std::size_t{0}), cfg).value, a, 1e-6);
}

TEST(DonskerVaradhan, DualityAndWitness) {
  CounterRng rng(8);
  for (std::size_t n : {2u, 3u, 4u}) {
    const Space X = make_space("X", n);
    const GeneratorModel gm = random_generator(rng, X);
    const EntropicHandle dv = donsker_varadhan(gm);
    const ProbMeasure mu(X, gm.mu);
    for (int trial = 0; trial < 3; ++trial) {
      const ProbMeasure nu = random_measure(rng, X, 0.1);
      const double v = dv.eval(mu, nu);
      const Vec f = dv_witness(gm, nu).values();
      EXPECT_NEAR(f.dot(nu.weights()) - dv.conjugate(mu, f).value, v, 1e-10);
      EXPECT_NEAR(entropic_dual(dv, mu, nu).value, v, 1e-6);
    }
  }
}

TEST(DonskerVaradhan, SemigroupNormCrossCheck) {
  CounterRng rng(9);
  const Space X = make_space("X", 4);
  const GeneratorModel gm = random_generator(rng, X);
  for (int trial = 0; trial < 10; ++trial) {
    const Vec g = random_potential(rng, X, 2.0).values();
    EXPECT_NEAR(dv_log_semigroup_norm(gm, g), dv_top_eigenvalue(gm, g), 1e-10);
  }
}

TEST(DonskerVaradhan, ScalingAndValidation) {
  CounterRng rng(10);
  const Space X = make_space("X", 3);
  const GeneratorModel gm = random_generator(rng, X);
  const GeneratorModel twice(X, 2.0 * gm.rates, gm.mu);
  const ProbMeasure mu(X, gm.mu), nu = random_measure(rng, X);
  EXPECT_NEAR(donsker_varadhan(twice).eval(mu, nu), 2.0 * donsker_varadhan(gm).eval(mu, nu), 1e-14);
  Mat l(2, 2);
  l << -1.0, 1.0, 1.0, -1.0;
  Vec m(2);
  m << 0.3, 0.7;
  EXPECT_THROW(GeneratorModel(make_space("Y", 2), l, m), InputError);
  EXPECT_THROW(donsker_varadhan(gm).eval(uniform(X), nu), DomainError);
}

TEST(EntropicConvolve, IdentityIsNeutral) {
  CounterRng rng(11);
  const Space X = make_space("X", 3);
  const EntropicHandle h = log_entropy(X);
  const EntropicHandle c = entropic_convolve(h, pushforward_transfer(identity_map(3), X, X));
  for (int trial = 0; trial < 5; ++trial) {
    const ProbMeasure mu = random_measure(rng, X), nu = random_measure(rng, X);
    EXPECT_DOUBLE_EQ(c.eval(mu, nu), h.eval(mu, nu));
  }
}

TEST(EntropicConvolve, LogEntropyWithMkMatchesGrid) {
  CounterRng rng(12);
  const Space X = make_space("X", 2), Z = make_space("Z", 2);
  for (int trial = 0; trial < 3; ++trial) {
    const CostMatrix c(X, Z, random_matrix(rng, 2, 2));
    const EntropicHandle h = log_entropy(X);
    const EntropicHandle e = entropic_convolve(h, mk_transfer(c));
    const ProbMeasure mu = random_measure(rng, X, 0.2), nu = random_measure(rng, Z);
    const double v = e.eval(mu, nu);
    double grid = kInfinity;
    const int steps = 100000;
    for (int i = 0; i <= steps; ++i) {
      const double p = static_cast<double>(i) / steps;
      const ProbMeasure s = measure(X, {p, 1.0 - p});
      const double w = h.eval(mu, s) + solve_transport_lp(c, s, nu).value;
      EXPECT_LE(v, w + 1e-8);
      grid = std::min(grid, w);
    }
    EXPECT_NEAR(v, grid, 1e-5);
    EXPECT_NEAR(entropic_dual(e, mu, nu).value, v, 1e-6);
  }
}

TEST(EntropicConvolve, ThreePointInfProperty) {
  CounterRng rng(13);
  const Space X = make_space("X", 3), Z = make_space("Z", 3);
  const CostMatrix c(X, Z, random_matrix(rng, 3, 3));
  const EntropicHandle h = log_entropy(X);
  const EntropicHandle e = entropic_convolve(h, mk_transfer(c));
  const ProbMeasure mu = random_measure(rng, X, 0.2), nu = random_measure(rng, Z);
  const double v = e.eval(mu, nu);
  for (int trial = 0; trial < 200; ++trial) {
    const ProbMeasure s = random_measure(rng, X);
    EXPECT_LE(v, h.eval(mu, s) + solve_transport_lp(c, s, nu).value + 1e-8);
  }
  EXPECT_NEAR(entropic_dual(e, mu, nu).value, v, 1e-6);
}

TEST(ConvexConvolve, IdentityMembersAndDuality) {
  CounterRng rng(14);
  const Space X = make_space("X", 2), Z = make_space("Z", 2);
  const ConvexTransferHandle f = generalized_entropy(ScalarFn::chi_square(), X);
  const ConvexTransferHandle same = convex_convolve(f, pushforward_transfer(identity_map(2), X, X));
  const ProbMeasure mu = random_measure(rng, X, 0.2), nu = random_measure(rng, X, 0.2);
  EXPECT_DOUBLE_EQ(same.eval(mu, nu), f.eval(mu, nu));

  const TransferHandle t = mk_transfer(CostMatrix(X, Z, random_matrix(rng, 2, 2)));
  const ConvexTransferHandle c = convex_convolve(f, t);
  for (double s : {-1.0, 0.0, 0.7}) {
    const Potential g = random_potential(rng, Z);
    const Vec direct = f.member(s)(t.backward(g)).values.values();
    EXPECT_LE((c.member(s)(g).values.values() - direct).cwiseAbs().maxCoeff(), 1e-15);
  }
  for (int trial = 0; trial < 3; ++trial) {
    const ProbMeasure m = random_measure(rng, X, 0.2), n = random_measure(rng, Z);
    EXPECT_NEAR(convex_dual(c, m, n).value, c.eval(m, n), 1e-4);
  }
}

}  // namespace
}  // namespace transfer
