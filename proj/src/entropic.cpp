#include "transfer/entropic.hpp"

#include <algorithm>
#include <cmath>
#include <unsupported/Eigen/MatrixFunctions>

#include "transfer/errors.hpp"

namespace transfer {

namespace {

constexpr double kTiny = 1e-300;

// min over sigma in P(mid), supported on `allowed`, of first(sigma) + second(sigma).
Evaluation minimize_split(const Space& mid, const std::vector<std::size_t>& allowed,
                          const std::function<Evaluation(const ProbMeasure&)>& first,
                          const std::function<Evaluation(const ProbMeasure&)>& second, const AscentConfig& cfg) {
  const std::size_t k = allowed.size();
  auto embed = [&](const Vec& r) {
    Vec s = Vec::Zero(static_cast<Eigen::Index>(mid->size()));
    for (std::size_t i = 0; i < k; ++i) s(static_cast<Eigen::Index>(allowed[i])) = r(static_cast<Eigen::Index>(i));
    return s;
  };
  ConcaveOracle oracle = [&](const Vec& r) {
    const ProbMeasure s(mid, embed(r));
    const Evaluation a = first(s), b = second(s);
    if (!a.d_nu || !b.d_mu) throw DomainError("convolution: factor evaluations carry no subgradients");
    Vec g(static_cast<Eigen::Index>(k));
    for (std::size_t i = 0; i < k; ++i) {
      const auto y = static_cast<Eigen::Index>(allowed[i]);
      g(static_cast<Eigen::Index>(i)) = -((*a.d_nu)(y) + (*b.d_mu)(y));
    }
    return Probe{-(a.value + b.value), g};
  };
  AscentConfig c = cfg;
  if (c.restarts == 0) c.restarts = 10;
  const AscentResult r = maximize_concave_over_simplex(k, oracle, c);
  const ProbMeasure s(mid, embed(r.point));
  const Evaluation a = first(s), b = second(s);
  Evaluation e;
  e.value = a.value + b.value;
  e.method = "simplex-min";
  e.tol = r.gap();
  e.converged = r.converged;
  e.d_mu = a.d_mu;
  e.d_nu = b.d_nu;
  return e;
}

// Shared evaluation of a convolution whose first factor needs sigma << mu.
Evaluation convolve_eval(const std::function<Evaluation(const ProbMeasure&, const ProbMeasure&)>& first,
                         bool same_space_first, const TransferHandle& t, const ProbMeasure& mu, const ProbMeasure& nu,
                         const AscentConfig& cfg) {
  const Space& mid = t.source;
  if (t.map) {
    const auto& map = *t.map;
    std::vector<int> hits(nu.size(), 0);
    for (std::size_t y : map) ++hits[y];
    if (map.size() != nu.size() || std::any_of(hits.begin(), hits.end(), [](int h) { return h != 1; }))
      throw DomainError("convolve: a pushforward second factor must be a bijection");
    Vec s(static_cast<Eigen::Index>(map.size()));
    for (std::size_t x = 0; x < map.size(); ++x) s(static_cast<Eigen::Index>(x)) = nu[map[x]];
    Evaluation e = first(mu, ProbMeasure(mid, s));
    e.method = "pushforward";
    if (e.d_nu) {
      Vec d(static_cast<Eigen::Index>(map.size()));
      for (std::size_t x = 0; x < map.size(); ++x)
        d(static_cast<Eigen::Index>(map[x])) = (*e.d_nu)(static_cast<Eigen::Index>(x));
      e.d_nu = d;
    }
    return e;
  }
  if (!t.finite) throw DomainError("convolve: the linear factor must be finite (or a pushforward)");
  std::vector<std::size_t> allowed;
  if (same_space_first) allowed = mu.support();
  else
    for (std::size_t i = 0; i < mid->size(); ++i) allowed.push_back(i);
  return minimize_split(
      mid, allowed, [&](const ProbMeasure& s) { return first(mu, s); },
      [&](const ProbMeasure& s) { return t.evaluate(s, nu); }, cfg);
}

void require_backward_linear(const TransferHandle& t, const char* what) {
  if (t.direction == Direction::Forward || !t.kop_backward)
    throw DomainError(std::string(what) + ": " + t.name + " has no backward operator");
}

}  // namespace

double EntropicHandle::eval(const ProbMeasure& mu, const ProbMeasure& nu) const {
  require_same_space(source, mu.space(), (name + " (first argument)").c_str());
  require_same_space(target, nu.space(), (name + " (second argument)").c_str());
  return evaluate(mu, nu).value;
}

Conjugate beta_conjugate(const ScalarFn& beta, const Operator& kop, const Space& target) {
  return [beta, kop, target](const ProbMeasure& mu, const Vec& g) {
    KantorovichImage img = kop(Potential(target, g));
    const double s = img.values.values().dot(mu.weights());
    return Probe{beta(s), beta.derivative(s) * (img.kernel.transpose() * mu.weights())};
  };
}

DualReport conjugate_dual(const Conjugate& conj, const Space& target, const ProbMeasure& mu, const ProbMeasure& nu,
                          const AscentConfig& cfg) {
  require_same_space(target, nu.space(), "conjugate_dual");
  ConcaveOracle f = [&](const Vec& g) {
    Probe p = conj(mu, g);
    return Probe{g.dot(nu.weights()) - p.value, nu.weights() - p.grad};
  };
  DualReport r;
  r.ascent = maximize_concave_over_potentials(target->size(), f, cfg, true);
  r.value = r.ascent.unbounded ? kInfinity : r.ascent.value;
  r.upper_bound = r.ascent.unbounded ? kInfinity : r.ascent.upper_bound;
  r.potential.emplace(target, r.ascent.point);
  return r;
}

DualReport entropic_dual(const EntropicHandle& e, const ProbMeasure& mu, const ProbMeasure& nu, const AscentConfig& cfg) {
  if (e.direction != Direction::Backward || !e.conjugate) throw DomainError(e.name + ": no backward conjugate");
  require_same_space(e.source, mu.space(), "entropic_dual");
  return conjugate_dual(e.conjugate, e.target, mu, nu, cfg);
}

std::vector<double> PowerGrid::values() const {
  if (!(lo > 0.0) || !(hi > lo) || points < 2) throw InputError("power grid: need 0 < lo < hi and at least 2 points");
  std::vector<double> v(points);
  const double r = std::log(hi / lo) / static_cast<double>(points - 1);
  for (std::size_t i = 0; i < points; ++i) v[i] = lo * std::exp(r * static_cast<double>(i));
  v.back() = hi;
  return v;
}

ConvexTransferHandle power_transfer(const ScalarFn& alpha, const TransferHandle& t, const PowerGrid& grid) {
  if (alpha.concave() || !alpha.increasing()) throw InputError("power_transfer: alpha must be convex increasing");
  require_backward_linear(t, "power_transfer");
  ConvexTransferHandle c;
  c.name = alpha.name() + "(" + t.name + ")";
  c.source = t.source;
  c.target = t.target;
  auto ev = t.evaluate;
  c.evaluate = [alpha, ev](const ProbMeasure& mu, const ProbMeasure& nu) {
    Evaluation e = ev(mu, nu);
    const double v = e.value;
    e.value = std::isfinite(v) ? alpha(v) : kInfinity;
    if (std::isfinite(v)) {
      const double d = alpha.derivative(v);
      if (e.d_mu) *e.d_mu *= d;
      if (e.d_nu) *e.d_nu *= d;
    }
    return e;
  };
  // Keep only parameters where alpha^+ is finite; close the gap to its domain edge.
  for (double s : grid.values())
    if (std::isfinite(alpha.conj_inc(s))) c.index.push_back(s);
  if (c.index.empty()) throw DomainError("power_transfer: alpha^+ is infinite on the whole grid");
  if (c.index.back() < grid.hi) {
    double lo = c.index.back(), hi = c.index.size() < grid.points ? grid.values()[c.index.size()] : grid.hi;
    for (int i = 0; i < 200 && hi - lo > 1e-15 * hi; ++i) {
      const double mid = 0.5 * (lo + hi);
      (std::isfinite(alpha.conj_inc(mid)) ? lo : hi) = mid;
    }
    if (lo > c.index.back()) c.index.push_back(lo);
  }
  c.continuous_index = true;
  const Operator op = t.kop_backward;
  c.member = [op, alpha](double s) -> Operator {
    const double shift = alpha.conj_inc(s);
    return [op, s, shift](const Potential& f) {
      KantorovichImage img = op(Potential(f.space(), f.values() / s));
      return KantorovichImage{Potential(img.values.space(), (s * img.values.values()).array() + shift), img.kernel};
    };
  };
  return c;
}

double generalized_entropy_conjugate(const ScalarFn& alpha, const ProbMeasure& mu, const Vec& f, double* t_opt) {
  const auto supp = mu.support();
  auto slope = [&](double t) {
    double s = -1.0;
    for (std::size_t x : supp) s += mu[x] * alpha.conj_inc_argmax(f(static_cast<Eigen::Index>(x)) + t);
    return s;
  };
  double top = -kInfinity;
  for (std::size_t x : supp) top = std::max(top, f(static_cast<Eigen::Index>(x)));
  double lo = -top - 1.0, hi = -top + 1.0, step = 1.0;
  for (int i = 0; i < 200 && slope(lo) > 0.0; ++i, step *= 2.0) lo -= step;
  step = 1.0;
  for (int i = 0; i < 200 && slope(hi) < 0.0; ++i, step *= 2.0) hi += step;
  // The slope is nondecreasing in t; bisect to its sign change.
  for (int i = 0; i < 400 && hi - lo > 1e-15 * (1.0 + std::abs(lo)); ++i) {
    const double mid = 0.5 * (lo + hi);
    (slope(mid) < 0.0 ? lo : hi) = mid;
  }
  const double t = 0.5 * (lo + hi);
  if (t_opt) *t_opt = t;
  double v = -t;
  for (std::size_t x : supp) v += mu[x] * alpha.conj_inc(f(static_cast<Eigen::Index>(x)) + t);
  return v;
}

ConvexTransferHandle generalized_entropy(const ScalarFn& alpha, const Space& space) {
  using K = ScalarFn::Kind;
  const K k = alpha.kind();
  if (alpha.concave() || k == K::Identity || k == K::NegLog || (k == K::Power && alpha.p() == 1.0))
    throw InputError("generalized_entropy: alpha must be strictly convex and superlinear on [0, inf)");
  ConvexTransferHandle c;
  c.name = "entropy[" + alpha.name() + "]";
  c.source = c.target = space;
  c.evaluate = [alpha](const ProbMeasure& mu, const ProbMeasure& nu) {
    Evaluation e;
    e.method = "closed-form";
    const auto n = static_cast<Eigen::Index>(mu.size());
    Vec dm = Vec::Zero(n), dn = Vec::Zero(n);
    double v = 0.0;
    for (Eigen::Index x = 0; x < n; ++x) {
      const double m = mu.weights()(x), w = nu.weights()(x);
      if (m <= 0.0) {
        if (w > 0.0) v = kInfinity;
        continue;
      }
      const double r = w / m;
      const double d = alpha.derivative(std::max(r, kTiny));
      v += m * alpha(r);
      dn(x) = d;
      dm(x) = alpha(r) - r * d;
    }
    e.value = v;
    e.d_mu = dm;
    e.d_nu = dn;
    return e;
  };
  c.conjugate = [alpha](const ProbMeasure& mu, const Vec& f) {
    double t = 0.0;
    const double v = generalized_entropy_conjugate(alpha, mu, f, &t);
    // Mix the one-sided slopes so the gradient sums to one at kinks.
    const double h = 1e-9 * (1.0 + std::abs(t));
    const auto n = static_cast<Eigen::Index>(mu.size());
    Vec gl = Vec::Zero(n), gh = Vec::Zero(n);
    for (Eigen::Index x = 0; x < n; ++x) {
      if (mu.weights()(x) <= 0.0) continue;
      gl(x) = mu.weights()(x) * alpha.conj_inc_argmax(f(x) + t - h);
      gh(x) = mu.weights()(x) * alpha.conj_inc_argmax(f(x) + t + h);
    }
    const double sl = gl.sum(), sh = gh.sum();
    const double th = sh > sl ? std::clamp((1.0 - sl) / (sh - sl), 0.0, 1.0) : 0.5;
    return Probe{v, (1.0 - th) * gl + th * gh};
  };
  c.member = [alpha](double t) -> Operator {
    return [alpha, t](const Potential& f) {
      const auto n = static_cast<Eigen::Index>(f.size());
      Vec out(n);
      Mat k = Mat::Zero(n, n);
      for (Eigen::Index x = 0; x < n; ++x) {
        out(x) = alpha.conj_inc(f.values()(x) + t) - t;
        k(x, x) = alpha.conj_inc_argmax(f.values()(x) + t);
      }
      return KantorovichImage{Potential(f.space(), out), k};
    };
  };
  return c;
}

DualReport convex_dual(const ConvexTransferHandle& t, const ProbMeasure& mu, const ProbMeasure& nu,
                       const AscentConfig& cfg) {
  require_same_space(t.source, mu.space(), "convex_dual");
  if (t.conjugate) return conjugate_dual(t.conjugate, t.target, mu, nu, cfg);
  const FamilyDualReport f = family_dual(t, mu, nu, cfg);
  DualReport r;
  r.value = r.upper_bound = f.value;
  r.potential = f.potential;
  return r;
}

EntropicHandle log_entropy(const Space& space) {
  EntropicHandle e;
  e.name = "log_entropy";
  e.source = e.target = space;
  e.scalar = ScalarFn::log();
  e.kop = [](const Potential& f) {
    const Vec v = f.values().array().exp();
    return KantorovichImage{Potential(f.space(), v), Mat(v.asDiagonal())};
  };
  e.evaluate = [](const ProbMeasure& mu, const ProbMeasure& nu) {
    Evaluation r;
    r.method = "closed-form";
    r.value = kl_divergence(nu, mu);
    const auto n = static_cast<Eigen::Index>(mu.size());
    Vec dm = Vec::Zero(n), dn = Vec::Zero(n);
    for (Eigen::Index x = 0; x < n; ++x) {
      const double m = mu.weights()(x), w = nu.weights()(x);
      if (m <= 0.0) continue;
      dn(x) = std::log(std::max(w, kTiny) / m);
      dm(x) = -w / m;
    }
    r.d_mu = dm;
    r.d_nu = dn;
    return r;
  };
  // log <e^g, mu>, shifted by the max for overflow safety.
  e.conjugate = [](const ProbMeasure& mu, const Vec& g) {
    double top = -kInfinity;
    for (std::size_t x : mu.support()) top = std::max(top, g(static_cast<Eigen::Index>(x)));
    Vec w = Vec::Zero(g.size());
    for (std::size_t x : mu.support())
      w(static_cast<Eigen::Index>(x)) = mu[x] * std::exp(g(static_cast<Eigen::Index>(x)) - top);
    const double z = w.sum();
    return Probe{top + std::log(z), w / z};
  };
  return e;
}

Potential log_entropy_witness(const ProbMeasure& mu, const ProbMeasure& nu) {
  const auto n = static_cast<Eigen::Index>(mu.size());
  // Off supp nu the maximizer is -inf; -1000 underflows e^f to exactly 0.
  Vec f = Vec::Constant(n, -1000.0);
  for (Eigen::Index x = 0; x < n; ++x) {
    const double w = nu.weights()(x), m = mu.weights()(x);
    if (w <= 0.0) continue;
    if (m <= 0.0) throw DomainError("log_entropy_witness: nu is not absolutely continuous w.r.t. mu");
    f(x) = std::log(w / m);
  }
  return Potential(nu.space(), f);
}

GeneratorModel::GeneratorModel(Space s, Mat l, Vec m) : space(std::move(s)), rates(std::move(l)), mu(std::move(m)) {
  const auto n = static_cast<Eigen::Index>(space->size());
  if (rates.rows() != n || rates.cols() != n || mu.size() != n)
    throw InputError("generator: dimensions do not match the space");
  if (!rates.allFinite() || !mu.allFinite()) throw InputError("generator: non-finite entries");
  const double scale = 1.0 + rates.cwiseAbs().maxCoeff();
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j)
      if (i != j && rates(i, j) < 0.0) throw InputError("generator: negative off-diagonal rate");
    if (std::abs(rates.row(i).sum()) > 1e-12 * scale) throw InputError("generator: rows must sum to zero");
  }
  if ((mu.array() <= 0.0).any()) throw InputError("generator: mu must be positive");
  if (std::abs(mu.sum() - 1.0) > 1e-10) throw InputError("generator: mu must be a probability vector");
  mu /= mu.sum();
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j)
      if (std::abs(mu(i) * rates(i, j) - mu(j) * rates(j, i)) > 1e-10 * scale)
        throw InputError("generator: not reversible with respect to mu");
}

Mat GeneratorModel::symmetrized(const Vec& f) const {
  const Vec r = mu.array().sqrt();
  Mat a = r.asDiagonal() * rates * r.cwiseInverse().asDiagonal();
  a.diagonal() += f;
  return 0.5 * (a + a.transpose());
}

double GeneratorModel::dirichlet_form(const Vec& h) const {
  return -(mu.array() * h.array() * (rates * h).array()).sum();
}

double dv_top_eigenvalue(const GeneratorModel& gm, const Vec& g, Vec* weights) {
  Eigen::SelfAdjointEigenSolver<Mat> es(gm.symmetrized(g));
  if (es.info() != Eigen::Success) throw ConvergenceError("donsker_varadhan: eigensolver failed");
  const auto n = es.eigenvalues().size();
  if (weights) *weights = es.eigenvectors().col(n - 1).cwiseAbs2();
  return es.eigenvalues()(n - 1);
}

double dv_log_semigroup_norm(const GeneratorModel& gm, const Vec& g) {
  const Mat a = gm.symmetrized(g);
  const Mat e = a.exp();
  Eigen::JacobiSVD<Mat> svd(e);
  return std::log(svd.singularValues()(0));
}

Potential dv_witness(const GeneratorModel& gm, const ProbMeasure& nu) {
  require_same_space(gm.space, nu.space(), "dv_witness");
  if ((nu.weights().array() <= 0.0).any()) throw DomainError("dv_witness: nu must have full support");
  const Vec h = (nu.weights().array() / gm.mu.array()).sqrt();
  return Potential(gm.space, (-(gm.rates * h)).cwiseQuotient(h));
}

EntropicHandle donsker_varadhan(const GeneratorModel& gm) {
  EntropicHandle e;
  e.name = "donsker_varadhan";
  e.source = e.target = gm.space;
  e.scalar = ScalarFn::log();
  const GeneratorModel model = gm;
  e.evaluate = [model](const ProbMeasure& mu, const ProbMeasure& nu) {
    if ((mu.weights() - model.mu).cwiseAbs().maxCoeff() > 1e-10)
      throw DomainError("donsker_varadhan: first argument must be the reversing measure");
    Evaluation r;
    r.method = "closed-form";
    const Vec h = (nu.weights().array() / model.mu.array()).sqrt();
    r.value = model.dirichlet_form(h);
    r.d_nu = (-(model.rates * h)).cwiseQuotient(h.cwiseMax(1e-12));
    return r;
  };
  // E^- g = e^{lambda(g)} 1, so that log <E^- g, mu> is the top eigenvalue.
  e.kop = [model](const Potential& g) {
    Vec w;
    const double lam = dv_top_eigenvalue(model, g.values(), &w);
    const auto n = static_cast<Eigen::Index>(g.size());
    Mat k(n, n);
    for (Eigen::Index i = 0; i < n; ++i) k.row(i) = std::exp(lam) * w.transpose();
    return KantorovichImage{Potential(g.space(), Vec::Constant(n, std::exp(lam))), k};
  };
  e.conjugate = [model](const ProbMeasure& mu, const Vec& g) {
    if ((mu.weights() - model.mu).cwiseAbs().maxCoeff() > 1e-10)
      throw DomainError("donsker_varadhan: first argument must be the reversing measure");
    Vec w;
    const double lam = dv_top_eigenvalue(model, g, &w);
    return Probe{lam, w};
  };
  return e;
}

EntropicHandle entropic_convolve(const EntropicHandle& e, const TransferHandle& t, const AscentConfig& cfg) {
  if (e.direction != Direction::Backward) throw DomainError("entropic_convolve: the entropic factor must be backward");
  require_backward_linear(t, "entropic_convolve");
  require_same_space(e.target, t.source, "entropic_convolve (intermediate space)");
  EntropicHandle r;
  r.name = e.name + "*" + t.name;
  r.source = e.source;
  r.target = t.target;
  r.scalar = e.scalar;
  const Operator top = t.kop_backward;
  if (e.kop) r.kop = compose(e.kop, top);
  if (e.conjugate) {
    const Conjugate ec = e.conjugate;
    const Space mid = t.source;
    r.conjugate = [ec, top, mid](const ProbMeasure& mu, const Vec& g) {
      KantorovichImage img = top(Potential(mid, g));
      Probe p = ec(mu, img.values.values());
      return Probe{p.value, img.kernel.transpose() * p.grad};
    };
  }
  const bool same = same_space(e.source, e.target);
  auto first = e.evaluate;
  r.evaluate = [first, same, t, cfg](const ProbMeasure& mu, const ProbMeasure& nu) {
    return convolve_eval(first, same, t, mu, nu, cfg);
  };
  return r;
}

ConvexTransferHandle convex_convolve(const ConvexTransferHandle& f, const TransferHandle& t, const AscentConfig& cfg) {
  require_backward_linear(t, "convex_convolve");
  require_same_space(f.target, t.source, "convex_convolve (intermediate space)");
  ConvexTransferHandle r;
  r.name = f.name + "*" + t.name;
  r.source = f.source;
  r.target = t.target;
  r.index = f.index;
  r.continuous_index = f.continuous_index;
  const Operator top = t.kop_backward;
  if (f.member) {
    auto member = f.member;
    r.member = [member, top](double s) { return compose(member(s), top); };
  }
  if (f.conjugate) {
    const Conjugate fc = f.conjugate;
    const Space mid = t.source;
    r.conjugate = [fc, top, mid](const ProbMeasure& mu, const Vec& g) {
      KantorovichImage img = top(Potential(mid, g));
      Probe p = fc(mu, img.values.values());
      return Probe{p.value, img.kernel.transpose() * p.grad};
    };
  }
  const bool same = same_space(f.source, f.target);
  auto first = f.evaluate;
  r.evaluate = [first, same, t, cfg](const ProbMeasure& mu, const ProbMeasure& nu) {
    return convolve_eval(first, same, t, mu, nu, cfg);
  };
  return r;
}

}  // namespace transfer
