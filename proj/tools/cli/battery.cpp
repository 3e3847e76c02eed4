#include "cli/battery.hpp"

#include <algorithm>
#include <cmath>

#include "transfer/algebra.hpp"
#include "transfer/catalog.hpp"
#include "transfer/entropic.hpp"
#include "transfer/errors.hpp"
#include "transfer/inequality.hpp"
#include "transfer/kam.hpp"
#include "transfer/rng.hpp"
#include "transfer/solvers.hpp"

namespace transfer::cli {
namespace {

Vec weights(CounterRng& rng, std::size_t n, double floor = 0.0) {
  Vec w(static_cast<Eigen::Index>(n));
  for (auto& x : w) x = floor - std::log(1.0 - rng.uniform());
  return w / w.sum();
}

ProbMeasure rmeasure(CounterRng& rng, const Space& s, double floor = 0.0) {
  return ProbMeasure(s, weights(rng, s->size(), floor));
}

Potential rpotential(CounterRng& rng, const Space& s, double scale = 1.0) {
  Vec v(static_cast<Eigen::Index>(s->size()));
  for (auto& x : v) x = rng.uniform(-scale, scale);
  return Potential(s, v);
}

Mat rmatrix(CounterRng& rng, std::size_t m, std::size_t n, double lo = 0.0, double hi = 1.0) {
  Mat c(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(n));
  for (Eigen::Index i = 0; i < c.size(); ++i) c.data()[i] = rng.uniform(lo, hi);
  return c;
}

Mat line_metric(const Space& g) {
  const auto& x = g->coords();
  const auto n = static_cast<Eigen::Index>(x.size());
  Mat d(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j) d(i, j) = std::abs(x[static_cast<std::size_t>(i)] - x[static_cast<std::size_t>(j)]);
  return d;
}

MarkovKernelModel reversible_kernel(CounterRng& rng, const Space& s) {
  const auto n = static_cast<Eigen::Index>(s->size());
  Mat w = rmatrix(rng, s->size(), s->size(), 0.1, 1.0);
  w = (0.5 * (w + w.transpose())).eval();
  const Vec m = w.rowwise().sum();
  Mat k(n, n);
  for (Eigen::Index i = 0; i < n; ++i) k.row(i) = w.row(i) / m(i);
  return MarkovKernelModel(s, k, m);
}

GeneratorModel reversible_generator(CounterRng& rng, const Space& s) {
  const std::size_t n = s->size();
  const Vec mu = weights(rng, n, 0.2);
  Mat w = rmatrix(rng, n, n, 0.1, 1.0);
  w = (0.5 * (w + w.transpose())).eval();
  Mat l(w.rows(), w.cols());
  for (Eigen::Index i = 0; i < l.rows(); ++i)
    for (Eigen::Index j = 0; j < l.cols(); ++j) l(i, j) = i == j ? 0.0 : w(i, j) / mu(i);
  for (Eigen::Index i = 0; i < l.rows(); ++i) l(i, i) = -l.row(i).sum();
  return GeneratorModel(s, l, mu);
}

// nu obtained from mu by spreading mass to neighbours, so mu <= nu in convex order.
ProbMeasure spread(CounterRng& rng, const ProbMeasure& mu) {
  const Vec w = mu.weights();
  const Eigen::Index n = w.size();
  Vec s = Vec::Zero(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double keep = rng.uniform();
    s(i) += keep * w(i);
    if (i > 0 && i + 1 < n) {
      s(i - 1) += 0.5 * (1 - keep) * w(i);
      s(i + 1) += 0.5 * (1 - keep) * w(i);
    } else {
      s(i) += (1 - keep) * w(i);
    }
  }
  return ProbMeasure(mu.space(), s);
}

json where(const std::string& what, const json& extra = json::object()) {
  json j = extra;
  j["case"] = what;
  return j;
}

Criterion make(int id, const char* key, const char* title, double bound, const char* method) {
  Criterion c;
  c.id = id;
  c.key = key;
  c.title = title;
  c.bound = bound;
  c.method = method;
  return c;
}

std::size_t pick(Level l, std::size_t fast, std::size_t full) { return l == Level::Full ? full : fast; }

// 1. Transport LP strong duality and complementary slackness.
Criterion lp_duality(Level, std::uint64_t seed) {
  Criterion c = make(1, "lp_duality", "LP duality and complementary slackness", 1e-9, "exact-lp");
  CounterRng rng(seed, 101);
  for (std::size_t k = 0; k < 200; ++k) {
    const std::size_t m = 2 + rng.index(7), n = 2 + rng.index(7);
    const Space X = make_space("X", m), Y = make_space("Y", n);
    // every third instance has a hole in each marginal
    Vec a = weights(rng, m), b = weights(rng, n);
    if (k % 3 == 2) {
      a(0) = 0.0;
      b(static_cast<Eigen::Index>(n - 1)) = 0.0;
      a /= a.sum();
      b /= b.sum();
    }
    const ProbMeasure mu(X, a), nu(Y, b);
    const CostMatrix cost(X, Y, rmatrix(rng, m, n, -1.0, 1.0));
    const LPSolution s = solve_transport_lp(cost, mu, nu);
    ++c.instances;
    const Mat& pi = s.coupling->matrix();
    const Vec& phi = s.phi->values();
    const Vec& psi = s.psi->values();
    const double primal = (pi.array() * cost.entries().array()).sum();
    const double dual = psi.dot(b) - phi.dot(a);
    const json at = {{"instance", k}, {"m", m}, {"n", n}};
    c.record(std::abs(primal - s.value), where("primal value", at));
    c.record(std::abs(primal - dual), where("primal - dual", at));
    for (Eigen::Index x = 0; x < pi.rows(); ++x)
      for (Eigen::Index y = 0; y < pi.cols(); ++y) {
        const double slack = cost.entries()(x, y) - (psi(y) - phi(x));
        c.record(std::max(0.0, -slack), where("dual feasibility", at));
        if (pi(x, y) > 1e-12) c.record(std::abs(slack), where("complementary slackness", at));
      }
  }
  return c;
}

std::vector<TransferHandle> catalog_sample(CounterRng& rng) {
  const Space a = make_space("A", 4), b = make_space("B", 3);
  const Space g = make_grid("G", {-1.0, -0.25, 0.5, 1.5});
  std::vector<TransferHandle> out;
  out.push_back(mk_transfer(CostMatrix(a, b, rmatrix(rng, 4, 3))));
  out.push_back(trivial_transfer(rpotential(rng, a), rpotential(rng, b)));
  out.push_back(tv_transfer(a));
  out.push_back(kr_transfer(CostMatrix(g, g, line_metric(g))));
  out.push_back(brenier_transfer(g));
  out.push_back(martingale_transfer(CostMatrix(g, g, rmatrix(rng, 4, 4))));
  out.push_back(marton_transfer({ScalarFn::power(2.0), CostMatrix(a, b, rmatrix(rng, 4, 3))}));
  out.push_back(barycentric_transfer(g));
  out.push_back(pushforward_transfer({2, 0, 1, 1}, a, b));
  out.push_back(schrodinger_transfer(reversible_kernel(rng, a)));
  return out;
}

// 2. Monotone, convex, 1-Lipschitz, translation covariant backward operators.
Criterion operator_axioms(Level level, std::uint64_t seed) {
  Criterion c = make(2, "operator_axioms", "operator axioms on catalog backward operators", 1e-10, "exact-lp");
  CounterRng rng(seed, 102);
  const std::size_t samples = pick(level, 25, 100);
  for (const TransferHandle& t : catalog_sample(rng)) {
    if (!t.has_backward() || !t.operator_axioms) {
      c.notes.push_back(t.name + ": no axiomatic backward operator, skipped");
      continue;
    }
    for (std::size_t k = 0; k < samples; ++k) {
      ++c.instances;
      const json at = {{"transfer", t.name}, {"sample", k}};
      const Potential g1 = rpotential(rng, t.target, 2.0), h = rpotential(rng, t.target, 2.0);
      Vec bump(static_cast<Eigen::Index>(t.target->size()));
      for (auto& v : bump) v = rng.uniform();
      const Vec b1 = t.backward(g1).values();
      const Vec b2 = t.backward(Potential(t.target, g1.values() + bump)).values();
      const Vec bh = t.backward(h).values();
      c.record(std::max(0.0, -(b2 - b1).minCoeff()), where("monotonicity", at));
      const double lam = rng.uniform();
      const Vec mix = t.backward(Potential(t.target, lam * g1.values() + (1 - lam) * h.values())).values();
      c.record(std::max(0.0, (mix - lam * b1 - (1 - lam) * bh).maxCoeff()), where("convexity", at));
      c.record(std::max(0.0, (b1 - bh).cwiseAbs().maxCoeff() - (g1.values() - h.values()).cwiseAbs().maxCoeff()),
               where("1-Lipschitz", at));
      if (t.dirac_domain) {
        const double shift = rng.uniform(-3.0, 3.0);
        const Vec moved = t.backward(Potential(t.target, g1.values().array() + shift)).values();
        c.record((moved.array() - shift - b1.array()).abs().maxCoeff(), where("translation covariance", at));
      }
    }
  }
  return c;
}

// 3. Ascent dual against the primal, per transfer.
Criterion duality_closure(Level level, std::uint64_t seed) {
  Criterion c = make(3, "duality_closure", "dual sup matches primal per transfer", 1e-5, "ascent");
  CounterRng rng(seed, 103);
  const std::size_t reps = pick(level, 1, 3);
  const Space a = make_space("A", 4), b = make_space("B", 3), e = make_space("E", 5);
  const Space g = make_grid("G", {0.0, 1.0, 2.0, 3.0});
  auto check = [&](const std::string& name, double primal, double dual, std::size_t k) {
    ++c.instances;
    c.record(std::abs(primal - dual), where("primal - dual", {{"transfer", name}, {"rep", k}, {"primal", num(primal)},
                                                              {"dual", num(dual)}}));
  };
  for (std::size_t k = 0; k < reps; ++k) {
    std::vector<TransferHandle> ts{
        mk_transfer(CostMatrix(a, b, rmatrix(rng, 4, 3))),
        tv_transfer(a),
        kr_transfer(CostMatrix(g, g, line_metric(g))),
        trivial_transfer(rpotential(rng, a), rpotential(rng, b)),
        marton_transfer({ScalarFn::power(2.0), CostMatrix(a, b, rmatrix(rng, 4, 3))}),
        barycentric_transfer(g),
    };
    for (const TransferHandle& t : ts) {
      const ProbMeasure mu = rmeasure(rng, t.source, 0.1), nu = rmeasure(rng, t.target, 0.1);
      check(t.name, t.eval(mu, nu), backward_dual(t, mu, nu).value, k);
    }
    // martingale on pairs in convex order
    const TransferHandle mart = martingale_transfer(CostMatrix(g, g, rmatrix(rng, 4, 4)));
    const ProbMeasure mu = rmeasure(rng, g, 0.1);
    const ProbMeasure nu = spread(rng, mu);
    check(mart.name, mart.eval(mu, nu), backward_dual(mart, mu, nu).value, k);
    // generalized entropy
    const ConvexTransferHandle ge = generalized_entropy(ScalarFn::chi_square(), a);
    const ProbMeasure m2 = rmeasure(rng, a, 0.2), n2 = rmeasure(rng, a, 0.2);
    check(ge.name, ge.eval(m2, n2), convex_dual(ge, m2, n2).value, k);
    // log entropy: ascent, then the closed-form witness
    const EntropicHandle h = log_entropy(e);
    const ProbMeasure m3 = rmeasure(rng, e, 0.1), n3 = rmeasure(rng, e, 0.1);
    const double kl = h.eval(m3, n3);
    check(h.name, kl, entropic_dual(h, m3, n3).value, k);
    const Vec f = log_entropy_witness(m3, n3).values();
    const double at_witness = f.dot(n3.weights()) - h.conjugate(m3, f).value;
    ++c.instances;
    const double err = std::abs(at_witness - kl);
    if (err > 1e-12) c.fail(where("log entropy witness", {{"error", err}, {"rep", k}}));
  }
  return c;
}

// 4. MK * MK = MK of the min-plus composed cost; composed-operator duality.
Criterion convolution(Level level, std::uint64_t seed) {
  Criterion c = make(4, "convolution", "inf-convolution of optimal transports", 1e-8, "min-plus");
  CounterRng rng(seed, 104);
  const std::size_t triples = pick(level, 20, 100);
  for (std::size_t k = 0; k < triples; ++k) {
    const std::size_t p = 2 + rng.index(4), q = 2 + rng.index(4), r = 2 + rng.index(4);
    const Space X = make_space("X", p), Y = make_space("Y", q), Z = make_space("Z", r);
    const CostMatrix c1(X, Y, rmatrix(rng, p, q)), c2(Y, Z, rmatrix(rng, q, r));
    const ProbMeasure mu = rmeasure(rng, X), nu = rmeasure(rng, Z);
    const ComposedTransfer ct = convolve(mk_transfer(c1), mk_transfer(c2));
    const double exact = solve_transport_lp(minplus_compose(c1, c2), mu, nu).value;
    const ConvolutionValue v = ct.primal(mu, nu);
    ++c.instances;
    const json at = {{"triple", k}, {"sizes", {p, q, r}}};
    c.record(std::abs(v.value - exact), where("simplex-min primal vs composed LP", at));
    const ProbMeasure s(Y, optimal_intermediates(ct, mu, nu).front());
    c.record(std::abs(solve_transport_lp(c1, mu, s).value + solve_transport_lp(c2, s, nu).value - exact),
             where("intermediate attains", at));
  }
  const std::size_t duals = pick(level, 2, 5);
  const Space X = make_space("X", 3), Y = make_space("Y", 3), Z = make_space("Z", 3);
  for (std::size_t k = 0; k < duals; ++k) {
    const TransferHandle t1 = mk_transfer(CostMatrix(X, Y, rmatrix(rng, 3, 3)));
    const TransferHandle t2 = marton_transfer({ScalarFn::power(2.0), CostMatrix(Y, Z, rmatrix(rng, 3, 3))});
    const ComposedTransfer ct = convolve(t1, t2);
    const ProbMeasure mu = rmeasure(rng, X, 0.2), nu = rmeasure(rng, Z, 0.2);
    const double gap = std::abs(ct.primal(mu, nu).value - backward_dual(ct.handle(), mu, nu).value);
    ++c.instances;
    if (gap > 1e-5) c.fail(where("composed-operator dual", {{"gap", gap}, {"rep", k}}));
  }
  return c;
}

// 5. Order relations and idempotence of the operator pair.
Criterion order_relations(Level level, std::uint64_t seed) {
  Criterion c = make(5, "order_relations", "order relations and idempotence", 1e-10, "exact-lp");
  CounterRng rng(seed, 105);
  const std::size_t samples = pick(level, 25, 100);
  const Space X = make_space("X", 4), Y = make_space("Y", 3);
  const Space g = make_grid("G", {0.0, 0.7, 1.5, 2.0});
  const std::vector<TransferHandle> ts{
      mk_transfer(CostMatrix(X, Y, rmatrix(rng, 4, 3))),
      kr_transfer(CostMatrix(g, g, line_metric(g))),
      trivial_transfer(rpotential(rng, X), rpotential(rng, Y)),
  };
  for (const TransferHandle& t : ts) {
    const OrderReport r = check_order_relations(t, samples, seed + 17);
    c.instances += r.samples;
    const json at = {{"transfer", t.name}};
    c.record(r.forward_after_backward, where("g <= T+ T- g", at));
    c.record(r.backward_after_forward, where("T- T+ f <= f", at));
    c.record(r.backward_triple, where("T- T+ T- = T-", at));
    c.record(r.forward_triple, where("T+ T- T+ = T+", at));
  }
  return c;
}

// 6. Martingale LP feasibility against the convex-order predicate.
Criterion strassen(Level level, std::uint64_t seed) {
  Criterion c = make(6, "strassen", "martingale feasibility agrees with convex order", 0.0, "exact-lp");
  CounterRng rng(seed, 106);
  const Space g = make_grid("G", {0.0, 1.0, 2.0, 3.0});
  const TransferHandle t = martingale_transfer(CostMatrix(g, g, Mat::Zero(4, 4)));
  const std::size_t pairs = pick(level, 50, 200);
  std::size_t ordered = 0;
  for (std::size_t k = 0; k < pairs; ++k) {
    const ProbMeasure mu = rmeasure(rng, g);
    const ProbMeasure nu = k % 2 == 0 ? spread(rng, mu) : rmeasure(rng, g);
    ++c.instances;
    bool feasible = false;
    try {
      feasible = std::isfinite(t.eval(mu, nu));
    } catch (const ConsistencyError& e) {
      c.fail(where("internal disagreement", {{"pair", k}, {"error", e.what()}}));
      continue;
    }
    const bool order = convex_order(mu, nu);
    ordered += order;
    if (feasible != order)
      c.fail(where("feasibility vs convex order", {{"pair", k}, {"mu", vec_json(mu.weights())},
                                                   {"nu", vec_json(nu.weights())}, {"lp_feasible", feasible}}));
  }
  c.notes.push_back(std::to_string(ordered) + " of " + std::to_string(pairs) + " pairs in convex order");
  return c;
}

// 7. Entropy dualities: KL witness, generalized entropies, Donsker-Varadhan.
Criterion entropy_dualities(Level level, std::uint64_t seed) {
  Criterion c = make(7, "entropy_dualities", "entropy dualities", 1e-5, "ascent");
  CounterRng rng(seed, 107);
  const Space X5 = make_space("X", 5);
  const EntropicHandle h = log_entropy(X5);
  for (std::size_t k = 0; k < 20; ++k) {
    const ProbMeasure mu = rmeasure(rng, X5), nu = rmeasure(rng, X5);
    const Vec f = log_entropy_witness(mu, nu).values();
    const double err = std::abs(f.dot(nu.weights()) - h.conjugate(mu, f).value - kl_divergence(nu, mu));
    ++c.instances;
    if (err > 1e-12) c.fail(where("KL witness", {{"error", err}, {"rep", k}}));
  }
  const Space X3 = make_space("X", 3);
  const std::size_t reps = pick(level, 1, 3);
  for (const ScalarFn& alpha : {ScalarFn::xlogx(), ScalarFn::chi_square(), ScalarFn::power(2.0)}) {
    const ConvexTransferHandle t = generalized_entropy(alpha, X3);
    for (std::size_t k = 0; k < reps; ++k) {
      const ProbMeasure mu = rmeasure(rng, X3, 0.2), nu = rmeasure(rng, X3, 0.2);
      ++c.instances;
      c.record(std::abs(convex_dual(t, mu, nu).value - t.eval(mu, nu)),
               where("generalized entropy duality", {{"alpha", alpha.name()}, {"rep", k}}));
    }
  }
  for (std::size_t n : {2u, 3u, 4u}) {
    const Space X = make_space("X", n);
    const GeneratorModel gm = reversible_generator(rng, X);
    const EntropicHandle dv = donsker_varadhan(gm);
    const ProbMeasure mu(X, gm.mu);
    for (std::size_t k = 0; k < reps; ++k) {
      const ProbMeasure nu = rmeasure(rng, X, 0.1);
      const double gap = std::abs(entropic_dual(dv, mu, nu).value - dv.eval(mu, nu));
      ++c.instances;
      if (gap > 1e-6) c.fail(where("Donsker-Varadhan duality", {{"states", n}, {"gap", gap}}));
    }
  }
  return c;
}

// 8. Transport-entropy inequality equivalences on small simplices.
Criterion inequality_equivalences(Level level, std::uint64_t seed) {
  Criterion c = make(8, "inequality_equivalences", "primal and dual inequality gaps agree", 5e-3, "grid");
  CounterRng rng(seed, 108);
  SearchConfig cfg;
  cfg.seed = seed;
  cfg.restarts = 12;
  auto run = [&](const std::string& name, const GapReport& r, double bound) {
    ++c.instances;
    const json at = {{"instance", name}, {"primal_gap", num(r.primal_gap)}, {"dual_gap", num(r.dual_gap)}};
    if (!r.consistent()) c.fail(where("sign disagreement", at));
    const double err = std::abs(r.primal_gap - r.dual_gap);
    c.worst = std::max(c.worst, err);
    if (err > bound) c.fail(where("primal vs dual value", at));
  };
  const Space X2 = make_space("X", 2), Z2 = make_space("Z", 2), Y2 = make_space("Y", 2), W2 = make_space("W", 2);
  const Space X3 = make_space("X3", 3), Z3 = make_space("Z3", 3);
  const bool full = level == Level::Full;

  // back-back, two points
  const std::vector<double> lambdas = full ? std::vector<double>{0.2, 1.0, 5.0} : std::vector<double>{1.0};
  for (double lambda : lambdas) {
    const TransferHandle mk = mk_transfer(CostMatrix(X2, Z2, rmatrix(rng, 2, 2)));
    InequalitySpec spec{InequalityForm::BackwardBackward, backward_family(mk), rmeasure(rng, X2, 0.1),
                        rmeasure(rng, Z2)};
    spec.lambda = lambda;
    run("backward_backward mk 2-point", check_te_inequality(spec, cfg), 2e-3);
  }
  {
    const ProbMeasure u = uniform(X2);
    run("backward_backward tv vs kl", check_te_inequality({InequalityForm::BackwardBackward,
                                                           backward_family(tv_transfer(X2)), u, u},
                                                          cfg),
        2e-3);
  }
  // Maurey, two points
  for (std::size_t k = 0; k < pick(level, 1, 2); ++k) {
    const BackwardFamily f = backward_family(mk_transfer(CostMatrix(Y2, W2, rmatrix(rng, 2, 2))));
    const double l1 = rng.uniform(0.3, 2.0), l2 = rng.uniform(0.3, 2.0);
    run("maurey mk 2-point",
        maurey_check(f, std::nullopt, std::nullopt, l1, l2, rmeasure(rng, Y2, 0.1), rmeasure(rng, W2, 0.1), cfg),
        2e-3);
  }
  if (full) {
    // forward-back with a link, two points
    const TransferHandle link = mk_transfer(CostMatrix(X2, Y2, rmatrix(rng, 2, 2, 0.0, 0.3)));
    const TransferHandle lhs = mk_transfer(CostMatrix(W2, Y2, rmatrix(rng, 2, 2)));
    for (double lambda : {0.3, 3.0}) {
      InequalitySpec spec{InequalityForm::ForwardBackward, backward_family(lhs), rmeasure(rng, X2, 0.1),
                          rmeasure(rng, W2)};
      spec.link = link;
      spec.lambda = lambda;
      run("forward_backward linked 2-point", check_te_inequality(spec, cfg), 2e-3);
    }
    // three points
    for (double lambda : {0.5, 2.0}) {
      const TransferHandle mk = mk_transfer(CostMatrix(X3, Z3, rmatrix(rng, 3, 3)));
      InequalitySpec spec{InequalityForm::BackwardBackward, backward_family(mk), rmeasure(rng, X3, 0.1),
                          rmeasure(rng, Z3)};
      spec.lambda = lambda;
      run("backward_backward mk 3-point", check_te_inequality(spec, cfg), 5e-3);
    }
    const TransferHandle mk = mk_transfer(CostMatrix(Z3, X3, rmatrix(rng, 3, 3)));
    InequalitySpec spec{InequalityForm::ForwardBackward, backward_family(mk), rmeasure(rng, X3, 0.1),
                        rmeasure(rng, Z3)};
    run("forward_backward mk 3-point", check_te_inequality(spec, cfg), 5e-3);
  }
  return c;
}

// 9. Effective constant three ways, fixed-point residual, n-step sandwich.
Criterion weak_kam_agreement(Level level, std::uint64_t seed) {
  Criterion c = make(9, "weak_kam_agreement", "effective constant triple agreement", 1e-8, "min-plus");
  CounterRng rng(seed, 109);
  const std::size_t count = pick(level, 20, 100);
  for (std::size_t k = 0; k < count; ++k) {
    const std::size_t n = 2 + rng.index(7);
    const Space X = make_space("X", n);
    const CostMatrix cost(X, X, rmatrix(rng, n, n));
    const TransferHandle t = mk_transfer(cost);
    const double karp = min_mean_cycle(cost).mean;
    const double lp = solve_stationary_lp(cost).value;
    TransferHandle bare = t;
    bare.cost.reset();
    const EffectiveConstant inc = effective_constant(bare);
    ++c.instances;
    const json at = {{"instance", k}, {"states", n}};
    c.record(std::abs(karp - lp), where("karp vs stationary LP", at));
    c.record(std::abs(karp - inc.estimate), where("karp vs increment bracket", at));
    const KamResult r = weak_kam_solve(calibrate(t, karp));
    if (!r.converged || r.residual > 1e-10)
      c.fail(where("fixed-point residual", {{"instance", k}, {"residual", num(r.residual)}}));
    const EffectiveConstant ec = effective_constant(t);
    Mat p = cost.entries();
    for (std::size_t m = 1; m <= 50; ++m) {
      const double dev = (p.array() - static_cast<double>(m) * karp).abs().maxCoeff();
      if (dev > ec.C + 1e-9) {
        c.fail(where("sandwich", {{"instance", k}, {"n", m}, {"deviation", dev}, {"C", ec.C}}));
        break;
      }
      p = minplus_product(p, cost.entries());
    }
  }
  return c;
}

// 10. Barrier idempotence, Aubry set, factorization.
Criterion peierls_aubry(Level level, std::uint64_t seed) {
  Criterion c = make(10, "peierls_aubry", "Peierls barrier and Aubry set", 1e-8, "min-plus");
  CounterRng rng(seed, 110);
  const std::size_t count = pick(level, 20, 100);
  for (std::size_t k = 0; k < count; ++k) {
    const std::size_t n = 2 + rng.index(5);
    const Space X = make_space("X", n);
    const TransferHandle t = mk_transfer(CostMatrix(X, X, rmatrix(rng, n, n)));
    const double ell = min_mean_cycle(*t.cost).mean;
    const PeierlsBarrier b = peierls_barrier(t, ell);
    ++c.instances;
    const json at = {{"instance", k}, {"states", n}};
    c.record(idempotence_defect(b), where("idempotence", at));
    if (b.h->entries().diagonal().minCoeff() < -1e-10) c.fail(where("h(x,x) >= 0", at));
    try {
      const AubryReport r = aubry_mather(t, ell, b);
      if (r.aubry_points.empty()) c.fail(where("empty Aubry set", at));
      if (r.factorization_error > 1e-6)
        c.fail(where("factorization", {{"instance", k}, {"error", r.factorization_error}}));
    } catch (const ConvergenceError& e) {
      c.fail(where("empty Aubry set", {{"instance", k}, {"error", e.what()}}));
    }
  }
  return c;
}

}  // namespace

void Criterion::record(double err, const json& at) {
  if (!(err <= worst)) worst = std::isnan(err) ? kInfinity : err;
  if (!(err <= bound)) fail(at);
}

void Criterion::fail(const json& at) {
  if (pass) counterexample = at;
  pass = false;
}

Level parse_level(const std::string& s) {
  if (s == "fast") return Level::Fast;
  if (s == "full") return Level::Full;
  throw InputError("unknown level '" + s + "' (fast or full)");
}

const std::vector<BatteryEntry>& batteries() {
  static const std::vector<BatteryEntry> all{
      {1, lp_duality, 5.0},          {2, operator_axioms, 10.0},          {3, duality_closure, 120.0},
      {4, convolution, 30.0},        {5, order_relations, 0.0},           {6, strassen, 0.0},
      {7, entropy_dualities, 0.0},   {8, inequality_equivalences, 300.0}, {9, weak_kam_agreement, 0.0},
      {10, peierls_aubry, 0.0},
  };
  return all;
}

Report verify_suite(Level level, std::uint64_t seed) {
  Report r;
  r.verb = "verify";
  r.inputs = {{"level", level == Level::Full ? "full" : "fast"}, {"seed", seed}};
  json counts = json::object();
  for (const BatteryEntry& e : batteries()) {
    Criterion c;
    try {
      c = e.run(level, seed);
    } catch (const std::exception& ex) {
      c.id = e.id;
      c.key = "battery_" + std::to_string(e.id);
      c.method = "ascent";
      c.fail(where("exception", {{"what", ex.what()}}));
    }
    r.values[c.key] = {{"pass", c.pass}, {"title", c.title}, {"worst", claim(c.worst, c.bound, c.method)}};
    counts[c.key] = c.instances;
    if (!c.pass) {
      r.witnesses[c.key] = c.counterexample;
      r.status = "failed";
    }
    for (const auto& n : c.notes) r.warnings.push_back(c.key + ": " + n);
  }
  r.provenance = {{"seed", seed}, {"level", level == Level::Full ? "full" : "fast"}, {"instances", counts}};
  return r;
}

}  // namespace transfer::cli
