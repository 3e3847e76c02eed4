#include <gtest/gtest.h>

#include <algorithm>
#include <functional>
#include <numeric>

#include "transfer/ascent.hpp"
#include "transfer/errors.hpp"
#include "transfer/solvers.hpp"
#include "util.hpp"

using namespace transfer;
using namespace transfer::testing;

namespace {

// Minimum of <c,pi> over all vertices of the transport polytope: every basic
// solution is supported on a spanning tree of the bipartite graph.
double vertex_enumeration(const Mat& c, const Vec& a, const Vec& b) {
  const auto m = c.rows(), n = c.cols();
  const Eigen::Index cells = m * n, k = m + n - 1;
  std::vector<int> pick(static_cast<std::size_t>(cells), 0);
  std::fill(pick.end() - k, pick.end(), 1);
  double best = std::numeric_limits<double>::infinity();
  do {
    // Solve the square system restricted to the chosen cells.
    Mat A = Mat::Zero(m + n, k);
    Vec rhs(m + n);
    rhs << a, b;
    Eigen::Index col = 0;
    std::vector<Eigen::Index> idx;
    for (Eigen::Index q = 0; q < cells; ++q)
      if (pick[static_cast<std::size_t>(q)]) {
        A(q / n, col) = 1.0;
        A(m + q % n, col) = 1.0;
        idx.push_back(q);
        ++col;
      }
    Eigen::FullPivLU<Mat> lu(A);
    if (lu.rank() < k) continue;
    Vec x = lu.solve(rhs);
    if ((A * x - rhs).norm() > 1e-9 || x.minCoeff() < -1e-12) continue;
    double v = 0.0;
    for (Eigen::Index q = 0; q < k; ++q) v += c(idx[static_cast<std::size_t>(q)] / n, idx[static_cast<std::size_t>(q)] % n) * x(q);
    best = std::min(best, v);
  } while (std::next_permutation(pick.begin(), pick.end()));
  return best;
}

// Minimum cycle mean by enumerating simple cycles.
double enumerate_cycle_mean(const Mat& c) {
  const auto n = c.rows();
  double best = std::numeric_limits<double>::infinity();
  std::vector<Eigen::Index> path;
  std::vector<bool> used(static_cast<std::size_t>(n), false);
  std::function<void(Eigen::Index, double)> go = [&](Eigen::Index u, double w) {
    const Eigen::Index s = path.front();
    if (!is_forbidden(c(u, s))) best = std::min(best, (w + c(u, s)) / static_cast<double>(path.size()));
    for (Eigen::Index v = s + 1; v < n; ++v) {
      if (used[static_cast<std::size_t>(v)] || is_forbidden(c(u, v))) continue;
      used[static_cast<std::size_t>(v)] = true;
      path.push_back(v);
      go(v, w + c(u, v));
      path.pop_back();
      used[static_cast<std::size_t>(v)] = false;
    }
  };
  for (Eigen::Index s = 0; s < n; ++s) {
    path = {s};
    used.assign(static_cast<std::size_t>(n), false);
    used[static_cast<std::size_t>(s)] = true;
    go(s, 0.0);
  }
  return best;
}

void check_lp(const LPSolution& s, const CostMatrix& c, const ProbMeasure& mu, const ProbMeasure& nu) {
  ASSERT_TRUE(s.feasible);
  const Mat& pi = s.coupling->matrix();
  const Vec& phi = s.phi->values();
  const Vec& psi = s.psi->values();
  EXPECT_NEAR(s.value, psi.dot(nu.weights()) - phi.dot(mu.weights()), 1e-9);
  for (Eigen::Index i = 0; i < pi.rows(); ++i)
    for (Eigen::Index j = 0; j < pi.cols(); ++j) {
      if (is_forbidden(c.entries()(i, j))) continue;
      EXPECT_LE(psi(j) - phi(i), c.entries()(i, j) + 1e-9);
      if (pi(i, j) > 1e-10) EXPECT_NEAR(psi(j) - phi(i), c.entries()(i, j), 1e-8);
    }
  EXPECT_EQ(phi(static_cast<Eigen::Index>(mu.first_support_point())), 0.0);
}

}  // namespace

TEST(TransportLp, UniqueFeasiblePlan) {
  auto X = make_space("X", {"a", "b"});
  CostMatrix c(X, X, matrix({{0, 1}, {1, 0}}));
  auto s = solve_transport_lp(c, measure(X, {1, 0}), measure(X, {0, 1}));
  EXPECT_DOUBLE_EQ(s.value, 1.0);
  EXPECT_EQ(s.coupling->matrix(), matrix({{0, 1}, {0, 0}}));
}

TEST(TransportLp, DiracToDirac) {
  CounterRng rng(4);
  auto X = make_space("X", 3);
  CostMatrix c(X, X, random_matrix(rng, 3, 3));
  auto s = solve_transport_lp(c, dirac(X, 1), dirac(X, 1));
  EXPECT_DOUBLE_EQ(s.value, c(1, 1));
}

TEST(TransportLp, MatchesVertexEnumeration) {
  CounterRng rng(5);
  auto X = make_space("X", 3);
  auto mu = measure(X, {0.5, 0.3, 0.2});
  auto nu = measure(X, {0.2, 0.3, 0.5});
  for (int k = 0; k < 30; ++k) {
    CostMatrix c(X, X, random_integer_matrix(rng, 3, 3, 9));
    auto s = solve_transport_lp(c, mu, nu);
    EXPECT_NEAR(s.value, vertex_enumeration(c.entries(), mu.weights(), nu.weights()), 1e-12);
    check_lp(s, c, mu, nu);
  }
}

TEST(TransportLp, RandomDualityAndSlackness) {
  CounterRng rng(6);
  for (int k = 0; k < 200; ++k) {
    const std::size_t m = 2 + rng.index(7), n = 2 + rng.index(7);
    auto X = make_space("X", m), Y = make_space("Y", n);
    auto mu = random_measure(rng, X), nu = random_measure(rng, Y);
    CostMatrix c(X, Y, random_matrix(rng, m, n, -1.0, 1.0));
    check_lp(solve_transport_lp(c, mu, nu), c, mu, nu);
  }
}

TEST(TransportLp, ForbiddenCellsAndInfeasibility) {
  auto X = make_space("X", {"a", "b"});
  CostMatrix c(X, X, matrix({{0, kForbidden}, {1, 0}}));
  auto mu = measure(X, {0.5, 0.5});
  auto s = solve_transport_lp(c, mu, measure(X, {0.7, 0.3}));
  check_lp(s, c, mu, measure(X, {0.7, 0.3}));
  EXPECT_NEAR(s.value, 0.2, 1e-12);
  EXPECT_FALSE(solve_transport_lp(c, measure(X, {1, 0}), measure(X, {0, 1})).feasible);
  CounterRng rng(7);
  auto Y = make_space("Y", 5);
  for (int k = 0; k < 40; ++k) {
    Mat m = random_matrix(rng, 5, 5);
    Mat ref = m;
    for (Eigen::Index i = 0; i < 5; ++i)
      for (Eigen::Index j = 0; j < 5; ++j)
        if (i != j && rng.uniform() < 0.3) {
          m(i, j) = kForbidden;
          ref(i, j) = 1e6;
        }
    auto a = random_measure(rng, Y, 0.5), b = random_measure(rng, Y, 0.5);
    CostMatrix cm(Y, Y, m);
    auto r = solve_transport_lp(cm, a, b);
    auto big = solve_transport_lp(CostMatrix(Y, Y, ref), a, b);
    if (big.value < 1e3) {
      ASSERT_TRUE(r.feasible);
      EXPECT_NEAR(r.value, big.value, 1e-9);
      check_lp(r, cm, a, b);
    } else {
      EXPECT_FALSE(r.feasible);
    }
  }
}

TEST(StationaryLp, ExamplesAndKarpAgreement) {
  auto X = make_space("X", {"a", "b"});
  EXPECT_NEAR(solve_stationary_lp(CostMatrix(X, X, matrix({{1, 2}, {3, 1}}))).value, 1.0, 1e-12);
  auto s = solve_stationary_lp(CostMatrix(X, X, matrix({{5, 0}, {0, 5}})));
  EXPECT_NEAR(s.value, 0.0, 1e-12);
  EXPECT_NEAR(s.marginal(0), 0.5, 1e-12);
  CounterRng rng(8);
  for (int k = 0; k < 100; ++k) {
    const std::size_t n = 2 + rng.index(7);
    auto Y = make_space("Y", n);
    CostMatrix c(Y, Y, random_matrix(rng, n, n, -1.0, 1.0));
    auto lp = solve_stationary_lp(c);
    auto cyc = min_mean_cycle(c);
    EXPECT_NEAR(lp.value, cyc.mean, 1e-9);
    EXPECT_NEAR(lp.value, enumerate_cycle_mean(c.entries()), 1e-9);
    EXPECT_LT((lp.plan.rowwise().sum() - lp.plan.colwise().sum().transpose()).norm(), 1e-10);
  }
}

TEST(MinMeanCycle, Examples) {
  auto X = make_space("X", {"a", "b"});
  auto r1 = min_mean_cycle(CostMatrix(X, X, matrix({{1, 2}, {3, 1}})));
  EXPECT_DOUBLE_EQ(r1.mean, 1.0);
  EXPECT_EQ(r1.cycle, std::vector<std::string>{"a"});
  auto r2 = min_mean_cycle(CostMatrix(X, X, matrix({{5, 0}, {0, 5}})));
  EXPECT_DOUBLE_EQ(r2.mean, 0.0);
  EXPECT_EQ(r2.cycle, (std::vector<std::string>{"a", "b"}));
  EXPECT_THROW(min_mean_cycle(CostMatrix(X, X, matrix({{kForbidden, 0}, {kForbidden, kForbidden}}))), DomainError);
}

TEST(MinMeanCycle, RandomAgainstEnumeration) {
  CounterRng rng(9);
  for (int k = 0; k < 100; ++k) {
    const std::size_t n = 1 + rng.index(7);
    auto X = make_space("X", n);
    Mat m = random_integer_matrix(rng, n, n, 6);
    CostMatrix c(X, X, m);
    auto r = min_mean_cycle(c);
    EXPECT_NEAR(r.mean, enumerate_cycle_mean(m), 1e-12);
    std::vector<std::size_t> nodes = r.nodes;
    std::sort(nodes.begin(), nodes.end());
    EXPECT_EQ(std::adjacent_find(nodes.begin(), nodes.end()), nodes.end());
  }
}

TEST(MinPlus, PowersAndSemigroup) {
  auto X = make_space("X", {"a", "b"});
  CostMatrix c(X, X, matrix({{0, 1}, {1, 0}}));
  EXPECT_EQ(minplus_power(c, 0).entries(), minplus_identity(2));
  EXPECT_EQ(minplus_power(c, 1).entries(), c.entries());
  EXPECT_EQ(minplus_power(c, 2).entries(), c.entries());
  CounterRng rng(10);
  auto Y = make_space("Y", 5);
  for (int k = 0; k < 20; ++k) {
    CostMatrix d(Y, Y, random_matrix(rng, 5, 5));
    for (unsigned a = 0; a < 4; ++a)
      for (unsigned b = 0; b < 4; ++b) {
        Mat lhs = minplus_power(d, a + b).entries();
        Mat rhs = minplus_product(minplus_power(d, a).entries(), minplus_power(d, b).entries());
        EXPECT_LT((lhs - rhs).cwiseAbs().maxCoeff(), 1e-12);
      }
  }
}

TEST(Envelope, ExamplesAndProperties) {
  auto e = concave_envelope_1d({0, 1, 2}, {0, -1, 0});
  ASSERT_EQ(e.knots().size(), 2u);
  EXPECT_DOUBLE_EQ(e(1.0), 0.0);
  EXPECT_EQ(e(2.5), -std::numeric_limits<double>::infinity());
  auto single = concave_envelope_1d({3}, {7});
  EXPECT_DOUBLE_EQ(single(3), 7);
  auto line = concave_envelope_1d({0, 1, 2, 3}, {1, 3, 5, 7});
  EXPECT_EQ(line.knots().size(), 2u);
  EXPECT_DOUBLE_EQ(line(1.5), 4.0);

  CounterRng rng(11);
  for (int k = 0; k < 100; ++k) {
    std::vector<double> t, v;
    for (int i = 0; i < 8; ++i) {
      t.push_back(rng.uniform(-3, 3));
      v.push_back(rng.uniform(-3, 3));
    }
    auto h = concave_envelope_1d(t, v);
    for (std::size_t i = 0; i < t.size(); ++i) EXPECT_GE(h(t[i]), v[i] - 1e-12);
    const auto& kn = h.knots();
    for (std::size_t i = 2; i < kn.size(); ++i) {
      const double s1 = (kn[i - 1].v - kn[i - 2].v) / (kn[i - 1].t - kn[i - 2].t);
      const double s2 = (kn[i].v - kn[i - 1].v) / (kn[i].t - kn[i - 1].t);
      EXPECT_GT(s1, s2);
    }
    // Minimality: removing an interior knot lets some input point poke above.
    for (std::size_t i = 1; i + 1 < kn.size(); ++i) {
      const double w = (kn[i].t - kn[i - 1].t) / (kn[i + 1].t - kn[i - 1].t);
      EXPECT_GT(kn[i].v, (1 - w) * kn[i - 1].v + w * kn[i + 1].v);
    }
  }
}

TEST(Ascent, QuadraticOverSimplexHasClosedForm) {
  // max <g,s> - |s|^2/2 over the simplex is attained at proj(g).
  CounterRng rng(12);
  for (int k = 0; k < 20; ++k) {
    Vec g(4);
    for (auto& x : g) x = rng.uniform(-1, 1);
    ConcaveOracle f = [&](const Vec& s) { return Probe{g.dot(s) - 0.5 * s.squaredNorm(), g - s}; };
    AscentConfig cfg;
    cfg.tol = 1e-10;
    auto r = maximize_concave_over_simplex(4, f, cfg);
    Vec s = project_to_simplex(g);
    EXPECT_TRUE(r.converged);
    EXPECT_NEAR(r.value, g.dot(s) - 0.5 * s.squaredNorm(), 1e-9);
    EXPECT_GE(r.upper_bound, g.dot(s) - 0.5 * s.squaredNorm() - 1e-12);
  }
}

TEST(Ascent, SupergradientFallbackReportsBestIterate) {
  Vec g(3);
  g << 0.3, -0.2, 0.1;
  ConcaveOracle f = [&](const Vec& s) { return Probe{g.dot(s) - 0.5 * s.squaredNorm(), g - s}; };
  AscentConfig cfg;
  cfg.method = AscentMethod::Supergradient;
  cfg.max_iters = 5;
  cfg.tol = 1e-14;
  auto r = maximize_concave_over_simplex(3, f, cfg);
  EXPECT_FALSE(r.converged);
  EXPECT_FALSE(r.warning.empty());
  cfg.max_iters = 20000;
  cfg.tol = 1e-6;
  auto r2 = maximize_concave_over_simplex(3, f, cfg);
  Vec s = project_to_simplex(g);
  EXPECT_NEAR(r2.value, g.dot(s) - 0.5 * s.squaredNorm(), 1e-5);
}

TEST(Ascent, PotentialsMatchLpDual) {
  CounterRng rng(13);
  for (int k = 0; k < 20; ++k) {
    const std::size_t n = 2 + rng.index(4);
    auto X = make_space("X", n);
    auto mu = random_measure(rng, X), nu = random_measure(rng, X);
    Mat c = random_matrix(rng, n, n);
    // Dual objective <g,nu> - <g^c, mu> with g^c(x) = max_y g(y) - c(x,y).
    ConcaveOracle f = [&](const Vec& g) {
      Vec grad = nu.weights();
      double val = g.dot(nu.weights());
      for (Eigen::Index x = 0; x < c.rows(); ++x) {
        Eigen::Index y;
        const double t = (g.transpose() - c.row(x)).maxCoeff(&y);
        val -= mu[static_cast<std::size_t>(x)] * t;
        grad(y) -= mu[static_cast<std::size_t>(x)];
      }
      return Probe{val, grad};
    };
    AscentConfig cfg;
    cfg.tol = 1e-10;
    auto r = maximize_concave_over_potentials(n, f, cfg);
    auto lp = solve_transport_lp(CostMatrix(X, X, c), mu, nu);
    EXPECT_NEAR(r.value, lp.value, 1e-8);
    EXPECT_EQ(r.point(0), 0.0);
  }
}

TEST(Ascent, GoldenSection) {
  const double t = golden_section_max([](double x) { return -(x - 0.3) * (x - 0.3); }, -2, 2);
  EXPECT_NEAR(t, 0.3, 1e-8);
}
