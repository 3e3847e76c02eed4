#include <gtest/gtest.h>

#include "transfer/errors.hpp"
#include "transfer/measure.hpp"
#include "util.hpp"

using namespace transfer;
using namespace transfer::testing;

TEST(Space, RejectsDuplicateLabelsAndUnsortedCoords) {
  EXPECT_THROW(make_space("X", {"a", "a"}), InputError);
  EXPECT_THROW(make_space("X", {}), InputError);
  EXPECT_THROW(make_space("X", {"a", "b"}, std::vector<double>{1.0, 1.0}), InputError);
  EXPECT_THROW(make_space("X", {"a", "b"}, std::vector<double>{0.0}), InputError);
  EXPECT_NO_THROW(make_space("X", {"a", "b"}, std::vector<double>{0.0, 2.0}));
}

TEST(Measure, ValidatesAndRenormalizes) {
  auto X = make_space("X", {"a", "b"});
  EXPECT_THROW(measure(X, {0.5, 0.6}), InputError);
  EXPECT_THROW(measure(X, {1.2, -0.2}), InputError);
  auto m = measure(X, {0.5 + 4e-13, 0.5});
  EXPECT_DOUBLE_EQ(m.weights().sum(), 1.0);
}

TEST(Measure, DiracExamples) {
  auto X2 = make_space("X", {"a", "b"});
  auto X3 = make_space("Y", {"a", "b", "c"});
  auto X1 = make_space("Z", {"a"});
  EXPECT_EQ(dirac(X2, "a").weights(), (Vec(2) << 1, 0).finished());
  EXPECT_EQ(dirac(X3, "c").weights(), (Vec(3) << 0, 0, 1).finished());
  EXPECT_EQ(dirac(X1, "a").weights(), (Vec(1) << 1).finished());
  EXPECT_THROW(dirac(X2, "q"), InputError);
}

TEST(Coupling, DisintegrateRowNormalization) {
  auto X = make_space("X", {"a", "b"});
  auto Y = make_space("Y", {"c", "d"});
  Coupling pi(measure(X, {0.5, 0.5}), measure(Y, {0.3, 0.7}), matrix({{0.2, 0.3}, {0.1, 0.4}}));
  auto rows = disintegrate(pi);
  EXPECT_NEAR(rows[0].law[0], 0.4, 1e-15);
  EXPECT_NEAR(rows[0].law[1], 0.6, 1e-15);
  EXPECT_NEAR(rows[1].law[0], 0.2, 1e-15);
  EXPECT_NEAR(rows[1].law[1], 0.8, 1e-15);
}

TEST(Coupling, ProductAndIdentityCases) {
  CounterRng rng(1);
  auto X = make_space("X", 4);
  auto mu = random_measure(rng, X, 0.1);
  auto nu = random_measure(rng, X, 0.1);
  for (const auto& r : disintegrate(product_coupling(mu, nu)))
    EXPECT_LT((r.law.weights() - nu.weights()).norm(), 1e-14);
  Mat d = mu.weights().asDiagonal();
  auto rows = disintegrate(Coupling(mu, mu, d));
  for (std::size_t x = 0; x < 4; ++x) EXPECT_NEAR(rows[x].law[x], 1.0, 1e-15);
}

TEST(Coupling, ZeroRowsAreUniformAndFlagged) {
  auto X = make_space("X", {"a", "b"});
  Coupling pi(measure(X, {1, 0}), measure(X, {0.5, 0.5}), matrix({{0.5, 0.5}, {0, 0}}));
  auto rows = disintegrate(pi);
  EXPECT_FALSE(rows[0].degenerate);
  EXPECT_TRUE(rows[1].degenerate);
  EXPECT_DOUBLE_EQ(rows[1].law[0], 0.5);
}

TEST(Coupling, RejectsMarginalViolation) {
  auto X = make_space("X", {"a", "b"});
  EXPECT_THROW(Coupling(measure(X, {0.5, 0.5}), measure(X, {0.5, 0.5}), matrix({{0.5, 0.1}, {0, 0.4}})), InputError);
  EXPECT_THROW(Coupling(measure(X, {0.5, 0.5}), measure(X, {0.5, 0.5}), matrix({{0.6, -0.1}, {-0.1, 0.6}})),
               InputError);
  Coupling ok(measure(X, {0.5, 0.5}), measure(X, {0.5, 0.5}), matrix({{0.5, -1e-15}, {1e-15, 0.5}}));
  EXPECT_EQ(ok.matrix()(0, 1), 0.0);
}

TEST(Coupling, DisintegrateReassembleIsIdentity) {
  CounterRng rng(2);
  auto X = make_space("X", 5);
  auto Y = make_space("Y", 4);
  for (int k = 0; k < 50; ++k) {
    Mat m = random_matrix(rng, 5, 4, 0.01, 1.0);
    m /= m.sum();
    Vec r = m.rowwise().sum(), c = m.colwise().sum().transpose();
    Coupling pi(ProbMeasure(X, r / r.sum()), ProbMeasure(Y, c / c.sum()), m);
    Coupling back = reassemble(pi.row_marginal(), disintegrate(pi));
    EXPECT_LT((back.matrix() - pi.matrix()).cwiseAbs().maxCoeff(), 1e-10);
  }
}

TEST(Pushforward, Examples) {
  auto X = make_space("X", {"a", "b"});
  auto mu = measure(X, {0.3, 0.7});
  EXPECT_EQ(pushforward({0, 1}, mu, X).weights(), mu.weights());
  EXPECT_EQ(pushforward({1, 1}, mu, X).weights(), dirac(X, "b").weights());
  auto sw = pushforward({1, 0}, mu, X);
  EXPECT_DOUBLE_EQ(sw[0], 0.7);
  EXPECT_DOUBLE_EQ(sw[1], 0.3);
}

TEST(TotalVariation, ExamplesAndMetric) {
  auto X = make_space("X", {"a", "b"});
  EXPECT_DOUBLE_EQ(total_variation(measure(X, {1, 0}), measure(X, {0, 1})), 1.0);
  EXPECT_DOUBLE_EQ(total_variation(measure(X, {0.3, 0.7}), measure(X, {0.3, 0.7})), 0.0);
  EXPECT_NEAR(total_variation(measure(X, {0.6, 0.4}), measure(X, {0.5, 0.5})), 0.1, 1e-15);
  CounterRng rng(3);
  auto Y = make_space("Y", 6);
  for (int k = 0; k < 200; ++k) {
    auto a = random_measure(rng, Y), b = random_measure(rng, Y), c = random_measure(rng, Y);
    EXPECT_LE(total_variation(a, c), total_variation(a, b) + total_variation(b, c) + 1e-12);
    EXPECT_DOUBLE_EQ(total_variation(a, b), total_variation(b, a));
  }
  EXPECT_THROW(total_variation(measure(X, {1, 0}), dirac(Y, 0)), InputError);
}
