#include "transfer/algebra.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "transfer/catalog.hpp"
#include "transfer/errors.hpp"
#include "transfer/rng.hpp"
#include "transfer/solvers.hpp"

namespace transfer {

namespace {

bool has_backward_dir(const TransferHandle& t) { return t.direction != Direction::Forward; }
bool has_forward_dir(const TransferHandle& t) { return t.direction != Direction::Backward; }

Operator scaled_operator(const Operator& op, double a) {
  return [op, a](const Potential& f) {
    KantorovichImage img = op(Potential(f.space(), f.values() / a));
    return KantorovichImage{Potential(img.values.space(), a * img.values.values()), img.kernel};
  };
}

// Pointwise inf (sign = +1) or sup (sign = -1) over splits f = g + (f - g)
// of op1(g)(x) + op2(f - g)(x).
Operator split_operator(const Operator& op1, const Operator& op2, const Space& out_space, bool covariant,
                        double sign, const AscentConfig& cfg, const std::string& name) {
  return [=](const Potential& f) {
    const Space& in = f.space();
    const std::size_t m = out_space->size(), n = in->size();
    const Vec fv = f.values();
    Vec out(static_cast<Eigen::Index>(m));
    Mat k = Mat::Zero(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(n));
    for (std::size_t x = 0; x < m; ++x) {
      const auto xi = static_cast<Eigen::Index>(x);
      auto split = [&](const Vec& g, Vec* row) {
        KantorovichImage a = op1(Potential(in, g));
        KantorovichImage b = op2(Potential(in, fv - g));
        if (row) *row = b.kernel.row(xi).transpose();
        const double v = a.values[x] + b.values[x];
        Vec grad = (a.kernel.row(xi) - b.kernel.row(xi)).transpose();
        return Probe{-sign * v, -sign * grad};
      };
      ConcaveOracle oracle = [&](const Vec& g) { return split(g, nullptr); };
      double best = -kInfinity;
      Vec best_g;
      bool ok = false;
      for (const Vec& start : {Vec(0.5 * fv), fv}) {
        const double v0 = split(start, nullptr).value;
        if (v0 > best) {
          best = v0;
          best_g = start;
        }
        AscentResult r = maximize_concave_over_potentials(n, oracle, cfg, covariant, &start);
        if (r.unbounded) throw ConvergenceError(name + ": split operator is unbounded");
        ok = ok || r.gap() <= 1e-6 * (1.0 + std::abs(r.value));
        if (r.value > best) {
          best = r.value;
          best_g = r.point;
        }
      }
      if (!ok) throw ConvergenceError(name + ": split minimization did not converge");
      Vec row;
      split(best_g, &row);
      out(xi) = -sign * best;
      k.row(xi) = row.transpose();
    }
    return KantorovichImage{Potential(out_space, out), k};
  };
}

std::function<std::vector<std::size_t>(std::size_t)> chain_support(const TransferHandle& a, const TransferHandle& b) {
  if (!a.dirac_support || !b.dirac_support) return nullptr;
  auto sa = a.dirac_support, sb = b.dirac_support;
  return [sa, sb](std::size_t x) {
    std::vector<std::size_t> out;
    const auto mid = sa(x);
    if (mid.empty()) return out;
    for (std::size_t y : mid) {
      const auto z = sb(y);
      if (z.empty()) return std::vector<std::size_t>{};
      out.insert(out.end(), z.begin(), z.end());
    }
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
  };
}

struct PairResult {
  ConvolutionValue cv;
  std::optional<Vec> d_mu, d_nu;
};

PairResult convolve_pair(const TransferHandle& a, const TransferHandle& b, const ProbMeasure& mu, const ProbMeasure& nu,
                         const AscentConfig& cfg) {
  PairResult out;
  const Space& mid = a.target;
  auto at = [&](const Vec& s) {
    Evaluation e1 = a.evaluate(mu, ProbMeasure(mid, s));
    Evaluation e2 = b.evaluate(ProbMeasure(mid, s), nu);
    return std::make_pair(e1, e2);
  };
  auto fixed = [&](const Vec& s, const std::string& method) {
    auto [e1, e2] = at(s);
    out.cv.value = out.cv.lower_bound = e1.value + e2.value;
    out.cv.sigma = s;
    out.cv.converged = e1.converged && e2.converged;
    out.cv.method = method;
    if (std::isfinite(out.cv.value)) {
      out.d_mu = e1.d_mu;
      out.d_nu = e2.d_nu;
    }
  };
  // A pushforward pins the intermediate measure; subgradients pass through the map.
  if (a.map) {
    const auto& map = *a.map;
    fixed(pushforward(map, mu, mid).weights(), "pushforward");
    out.d_mu.reset();
    if (std::isfinite(out.cv.value)) {
      auto [e1, e2] = at(*out.cv.sigma);
      if (!e2.d_mu) return out;
      Vec d(static_cast<Eigen::Index>(map.size()));
      for (std::size_t x = 0; x < map.size(); ++x) d(static_cast<Eigen::Index>(x)) = (*e2.d_mu)(static_cast<Eigen::Index>(map[x]));
      out.d_mu = d;
    }
    return out;
  }
  if (b.map) {
    const auto& map = *b.map;
    std::vector<int> hits(nu.size(), 0);
    for (std::size_t y : map) ++hits[y];
    if (map.size() != nu.size() || std::any_of(hits.begin(), hits.end(), [](int h) { return h != 1; }))
      throw DomainError("convolve: a pushforward second factor must be a bijection");
    Vec s(static_cast<Eigen::Index>(map.size()));
    for (std::size_t x = 0; x < map.size(); ++x) s(static_cast<Eigen::Index>(x)) = nu[map[x]];
    fixed(s, "pushforward");
    out.d_nu.reset();
    if (std::isfinite(out.cv.value)) {
      auto [e1, e2] = at(s);
      if (!e1.d_nu) return out;
      Vec d(static_cast<Eigen::Index>(map.size()));
      for (std::size_t x = 0; x < map.size(); ++x) d(static_cast<Eigen::Index>(map[x])) = (*e1.d_nu)(static_cast<Eigen::Index>(x));
      out.d_nu = d;
    }
    return out;
  }
  if (!a.finite || !b.finite)
    throw DomainError("convolve: the simplex minimization needs finite factors (or a pushforward)");

  const std::size_t n = mid->size();
  ConcaveOracle oracle = [&](const Vec& s) {
    auto [e1, e2] = at(s);
    if (!e1.d_nu || !e2.d_mu) throw DomainError("convolve: factor evaluations carry no subgradients");
    return Probe{-(e1.value + e2.value), -(*e1.d_nu + *e2.d_mu)};
  };
  AscentConfig c = cfg;
  if (c.restarts == 0) c.restarts = 10;
  AscentResult r = maximize_concave_over_simplex(n, oracle, c);
  out.cv.value = -r.value;
  out.cv.lower_bound = -r.upper_bound;
  out.cv.sigma = r.point;
  out.cv.converged = r.converged;
  out.cv.method = "simplex-min";
  auto [e1, e2] = at(r.point);
  out.d_mu = e1.d_mu;
  out.d_nu = e2.d_nu;
  return out;
}

Direction composed_direction(const TransferHandle& a, const TransferHandle& b) {
  const bool back = has_backward_dir(a) && has_backward_dir(b) && a.kop_backward && b.kop_backward;
  const bool fwd = has_forward_dir(a) && has_forward_dir(b) && a.kop_forward && b.kop_forward;
  if (back && fwd) return Direction::Both;
  if (back) return Direction::Backward;
  if (fwd) return Direction::Forward;
  throw DomainError("convolve: " + a.name + " and " + b.name + " share no direction");
}

}  // namespace

TransferHandle scale(double a, const TransferHandle& t) {
  if (!(a > 0.0) || !std::isfinite(a)) throw InputError("scale: factor must be positive and finite");
  if (a == 1.0) return t;
  TransferHandle s = t;
  std::ostringstream label;
  label << a << "*" << t.name;
  s.name = label.str();
  auto ev = t.evaluate;
  s.evaluate = [ev, a](const ProbMeasure& mu, const ProbMeasure& nu) {
    Evaluation e = ev(mu, nu);
    e.value *= a;
    if (e.d_mu) *e.d_mu *= a;
    if (e.d_nu) *e.d_nu *= a;
    return e;
  };
  if (t.kop_backward) s.kop_backward = scaled_operator(t.kop_backward, a);
  if (t.kop_forward) s.kop_forward = scaled_operator(t.kop_forward, a);
  if (t.cost) {
    Mat c = t.cost->entries();
    for (Eigen::Index i = 0; i < c.size(); ++i)
      if (!is_forbidden(c.data()[i])) c.data()[i] *= a;
    s.cost = CostMatrix(t.source, t.target, c);
  }
  return s;
}

TransferHandle add(const TransferHandle& t1, const TransferHandle& t2, const AscentConfig& cfg) {
  require_same_space(t1.source, t2.source, "add (sources)");
  require_same_space(t1.target, t2.target, "add (targets)");
  TransferHandle t;
  t.name = t1.name + "+" + t2.name;
  t.source = t1.source;
  t.target = t2.target;
  auto e1 = t1.evaluate, e2 = t2.evaluate;
  t.evaluate = [e1, e2](const ProbMeasure& mu, const ProbMeasure& nu) {
    Evaluation a = e1(mu, nu), b = e2(mu, nu);
    Evaluation e;
    e.value = a.value + b.value;
    e.method = a.method == b.method ? a.method : a.method + "+" + b.method;
    e.tol = a.tol + b.tol;
    e.converged = a.converged && b.converged;
    if (a.d_mu && b.d_mu) e.d_mu = *a.d_mu + *b.d_mu;
    if (a.d_nu && b.d_nu) e.d_nu = *a.d_nu + *b.d_nu;
    e.note = a.note.empty() ? b.note : (b.note.empty() ? a.note : a.note + "; " + b.note);
    return e;
  };
  const bool covariant = t1.dirac_domain && t2.dirac_domain;
  if (has_backward_dir(t1) && has_backward_dir(t2) && t1.kop_backward && t2.kop_backward)
    t.kop_backward = split_operator(t1.kop_backward, t2.kop_backward, t.source, covariant, 1.0, cfg, t.name);
  if (has_forward_dir(t1) && has_forward_dir(t2) && t1.kop_forward && t2.kop_forward)
    t.kop_forward = split_operator(t1.kop_forward, t2.kop_forward, t.target, covariant, -1.0, cfg, t.name);
  if (t.kop_backward && t.kop_forward) t.direction = Direction::Both;
  else if (t.kop_forward) t.direction = Direction::Forward;
  else t.direction = Direction::Backward;
  t.dirac_domain = covariant;
  t.finite = t1.finite && t2.finite;
  t.operator_axioms = t1.operator_axioms && t2.operator_axioms;
  t.affine_invariant = t1.affine_invariant && t2.affine_invariant;
  if (t1.dirac_support && t2.dirac_support) {
    auto s1 = t1.dirac_support, s2 = t2.dirac_support;
    t.dirac_support = [s1, s2](std::size_t x) {
      auto a = s1(x), b = s2(x);
      if (a.empty()) return b;
      if (b.empty()) return a;
      std::sort(a.begin(), a.end());
      std::sort(b.begin(), b.end());
      std::vector<std::size_t> both;
      std::set_intersection(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(both));
      return both;
    };
  }
  return t;
}

ComposedTransfer convolve(const TransferHandle& t1, const TransferHandle& t2) {
  require_same_space(t1.target, t2.source, "convolve (intermediate space)");
  ComposedTransfer c;
  c.parts = {t1, t2};
  c.direction = composed_direction(t1, t2);
  if (c.direction == Direction::Forward) c.composed_kop = compose(t2.kop_forward, t1.kop_forward);
  else c.composed_kop = compose(t1.kop_backward, t2.kop_backward);
  return c;
}

ComposedTransfer convolve(const ComposedTransfer& head, const TransferHandle& tail) {
  ComposedTransfer c = convolve(head.handle(), tail);
  c.parts = head.parts;
  c.parts.push_back(tail);
  return c;
}

std::optional<CostMatrix> ComposedTransfer::exact_cost() const {
  for (const auto& p : parts)
    if (!p.cost) return std::nullopt;
  CostMatrix c = *parts.front().cost;
  for (std::size_t i = 1; i < parts.size(); ++i) c = minplus_compose(c, *parts[i].cost);
  return c;
}

ConvolutionValue ComposedTransfer::primal(const ProbMeasure& mu, const ProbMeasure& nu, const AscentConfig& cfg) const {
  if (parts.size() < 2) throw InputError("convolve: need at least two parts");
  require_same_space(source(), mu.space(), "convolve (first argument)");
  require_same_space(target(), nu.space(), "convolve (second argument)");
  if (parts.size() == 2) return convolve_pair(parts[0], parts[1], mu, nu, cfg).cv;
  ComposedTransfer head;
  head.parts.assign(parts.begin(), parts.end() - 1);
  head.direction = direction;
  return convolve_pair(head.handle(cfg), parts.back(), mu, nu, cfg).cv;
}

TransferHandle ComposedTransfer::handle(const AscentConfig& cfg) const {
  if (parts.size() < 2) throw InputError("convolve: need at least two parts");
  TransferHandle t;
  t.name = parts.front().name;
  for (std::size_t i = 1; i < parts.size(); ++i) t.name += "*" + parts[i].name;
  t.direction = direction;
  t.source = source();
  t.target = target();
  t.cost = exact_cost();
  t.dirac_domain = t.finite = t.operator_axioms = true;
  for (const auto& p : parts) {
    t.dirac_domain = t.dirac_domain && p.dirac_domain;
    t.finite = t.finite && p.finite;
    t.operator_axioms = t.operator_axioms && p.operator_axioms;
  }
  TransferHandle head = parts.front();
  if (parts.size() > 2) {
    ComposedTransfer prefix;
    prefix.parts.assign(parts.begin(), parts.end() - 1);
    prefix.direction = direction;
    head = prefix.handle(cfg);
  }
  const TransferHandle tail = parts.back();
  if (t.cost) {
    const TransferHandle exact = mk_transfer(*t.cost);
    t.evaluate = [exact](const ProbMeasure& mu, const ProbMeasure& nu) {
      Evaluation e = exact.evaluate(mu, nu);
      e.method = "min-plus";
      return e;
    };
  } else {
    t.evaluate = [head, tail, cfg](const ProbMeasure& mu, const ProbMeasure& nu) {
      PairResult r = convolve_pair(head, tail, mu, nu, cfg);
      Evaluation e;
      e.value = r.cv.value;
      e.method = r.cv.method;
      e.tol = cfg.tol;
      e.converged = r.cv.converged;
      e.d_mu = r.d_mu;
      e.d_nu = r.d_nu;
      return e;
    };
  }
  if (direction != Direction::Forward) {
    Operator op = parts.back().kop_backward;
    for (std::size_t i = parts.size() - 1; i-- > 0;) op = compose(parts[i].kop_backward, op);
    t.kop_backward = op;
  }
  if (direction != Direction::Backward) {
    Operator op = parts.front().kop_forward;
    for (std::size_t i = 1; i < parts.size(); ++i) op = compose(parts[i].kop_forward, op);
    t.kop_forward = op;
  }
  TransferHandle acc = parts.front();
  for (std::size_t i = 1; i < parts.size(); ++i) acc.dirac_support = chain_support(acc, parts[i]);
  t.dirac_support = acc.dirac_support;
  return t;
}

std::vector<Vec> optimal_intermediates(const ComposedTransfer& chain, const ProbMeasure& mu, const ProbMeasure& nu) {
  const auto composed = chain.exact_cost();
  if (!composed) throw DomainError("optimal_intermediates: every part must be an optimal transport");
  const LPSolution sol = solve_transport_lp(*composed, mu, nu);
  if (!sol.feasible) throw DomainError("optimal_intermediates: no coupling of finite cost");
  const std::size_t k = chain.parts.size();
  // prefix[i] = c_1 (x) ... (x) c_{i+1}
  std::vector<CostMatrix> prefix{*chain.parts.front().cost};
  for (std::size_t i = 1; i < k; ++i) prefix.push_back(minplus_compose(prefix.back(), *chain.parts[i].cost));
  std::vector<Vec> sig;
  for (std::size_t i = 0; i + 1 < k; ++i) sig.push_back(Vec::Zero(static_cast<Eigen::Index>(chain.parts[i].target->size())));
  const Mat& plan = sol.coupling->matrix();
  for (Eigen::Index x = 0; x < plan.rows(); ++x)
    for (Eigen::Index z = 0; z < plan.cols(); ++z) {
      const double w = plan(x, z);
      if (w <= 0.0) continue;
      std::size_t end = static_cast<std::size_t>(z);
      for (std::size_t i = k - 1; i >= 1; --i) {
        const CostMatrix& head = prefix[i - 1];
        const CostMatrix& step = *chain.parts[i].cost;
        std::size_t arg = 0;
        double best = kInfinity;
        for (std::size_t y = 0; y < head.target()->size(); ++y) {
          const double v = head(static_cast<std::size_t>(x), y) + step(y, end);
          if (v < best) {
            best = v;
            arg = y;
          }
        }
        sig[i - 1](static_cast<Eigen::Index>(arg)) += w;
        end = arg;
      }
    }
  for (auto& s : sig) s /= s.sum();
  return sig;
}

TransferHandle tensor(const TransferHandle& t1, const TransferHandle& t2) {
  for (const TransferHandle* t : {&t1, &t2}) {
    if (!t->dirac_domain || !has_backward_dir(*t))
      throw DomainError("tensor: " + t->name + " must be a Dirac-domained backward transfer");
    if (!t->finite && !t->map)
      throw DomainError("tensor: " + t->name + " may be infinite on Dirac pairs");
  }
  const std::size_t m1 = t1.source->size(), m2 = t2.source->size();
  const std::size_t n1 = t1.target->size(), n2 = t2.target->size();
  if (m1 * m2 > kTensorMaxPoints || n1 * n2 > kTensorMaxPoints)
    throw InputError("tensor: product spaces are capped at " + std::to_string(kTensorMaxPoints) + " points");
  const Space X = product_space(t1.source, t2.source), Y = product_space(t1.target, t2.target);
  const Space X1 = t1.source, X2 = t2.source, Y1 = t1.target, Y2 = t2.target;
  auto e1 = t1.evaluate, e2 = t2.evaluate;
  const std::string name = t1.name + "(x)" + t2.name;
  WeakCostOracle cost = [=](std::size_t x, const Vec& sigma) {
    const Eigen::Map<const Mat> pi(sigma.data(), static_cast<Eigen::Index>(n2), static_cast<Eigen::Index>(n1));
    const Vec p1 = pi.colwise().sum().transpose(), p2 = pi.rowwise().sum();
    Evaluation a = e1(dirac(X1, x / m2), ProbMeasure(Y1, p1 / p1.sum()));
    Evaluation b = e2(dirac(X2, x % m2), ProbMeasure(Y2, p2 / p2.sum()));
    if (!std::isfinite(a.value) || !std::isfinite(b.value)) return Probe{kInfinity, Vec::Zero(sigma.size())};
    if (!a.d_nu || !b.d_nu) throw DomainError(name + ": factor evaluations carry no subgradients");
    Vec grad(sigma.size());
    for (std::size_t y1 = 0; y1 < n1; ++y1)
      for (std::size_t y2 = 0; y2 < n2; ++y2)
        grad(static_cast<Eigen::Index>(y1 * n2 + y2)) =
            (*a.d_nu)(static_cast<Eigen::Index>(y1)) + (*b.d_nu)(static_cast<Eigen::Index>(y2));
    return Probe{a.value + b.value, grad};
  };
  SupportFn support = nullptr;
  if (t1.dirac_support || t2.dirac_support) {
    auto s1 = t1.dirac_support, s2 = t2.dirac_support;
    support = [=](std::size_t x) {
      std::vector<std::size_t> a = s1 ? s1(x / m2) : std::vector<std::size_t>{};
      std::vector<std::size_t> b = s2 ? s2(x % m2) : std::vector<std::size_t>{};
      if (a.empty() && b.empty()) return std::vector<std::size_t>{};
      if (a.empty()) for (std::size_t i = 0; i < n1; ++i) a.push_back(i);
      if (b.empty()) for (std::size_t i = 0; i < n2; ++i) b.push_back(i);
      std::vector<std::size_t> out;
      for (std::size_t y1 : a)
        for (std::size_t y2 : b) out.push_back(y1 * n2 + y2);
      return out;
    };
  }
  TransferHandle t = weak_ot_transfer(X, Y, cost, support, name);
  t.finite = t1.finite && t2.finite;
  return t;
}

OrderReport check_order_relations(const TransferHandle& t, std::size_t samples, std::uint64_t seed, double scale) {
  if (!t.kop_backward || !t.kop_forward) throw DomainError("check_order_relations: " + t.name + " needs both operators");
  OrderReport rep;
  rep.samples = samples;
  CounterRng rng(seed, 41);
  auto random_on = [&](const Space& s) {
    Vec v(static_cast<Eigen::Index>(s->size()));
    for (auto& x : v) x = rng.uniform(-scale, scale);
    return Potential(s, v);
  };
  for (std::size_t k = 0; k < samples; ++k) {
    const Potential g = random_on(t.target), f = random_on(t.source);
    const Potential bg = t.backward(g), fbg = t.forward(bg);
    const Potential ff = t.forward(f), bff = t.backward(ff);
    rep.forward_after_backward =
        std::max(rep.forward_after_backward, (g.values() - fbg.values()).maxCoeff());
    rep.backward_after_forward =
        std::max(rep.backward_after_forward, (bff.values() - f.values()).maxCoeff());
    rep.backward_triple =
        std::max(rep.backward_triple, (t.backward(fbg).values() - bg.values()).cwiseAbs().maxCoeff());
    rep.forward_triple = std::max(rep.forward_triple, (t.forward(bff).values() - ff.values()).cwiseAbs().maxCoeff());
  }
  return rep;
}

TransferHandle reversed(const TransferHandle& t) {
  TransferHandle r;
  r.name = "reversed(" + t.name + ")";
  r.source = t.target;
  r.target = t.source;
  if (t.direction == Direction::Both)
    r.direction = Direction::Both;
  else
    r.direction = t.direction == Direction::Forward ? Direction::Backward : Direction::Forward;
  auto ev = t.evaluate;
  r.evaluate = [ev](const ProbMeasure& a, const ProbMeasure& b) {
    Evaluation e = ev(b, a);
    std::swap(e.d_mu, e.d_nu);
    return e;
  };
  auto negated = [](const Operator& op) -> Operator {
    if (!op) return {};
    return [op](const Potential& f) {
      KantorovichImage img = op(Potential(f.space(), -f.values()));
      return KantorovichImage{Potential(img.values.space(), -img.values.values()), img.kernel};
    };
  };
  r.kop_backward = negated(t.kop_forward);
  r.kop_forward = negated(t.kop_backward);
  r.finite = t.finite;
  r.operator_axioms = t.operator_axioms;
  if (t.cost) r.cost = CostMatrix(t.target, t.source, t.cost->entries().transpose());
  if (t.map) {
    const auto& m = *t.map;
    std::vector<std::size_t> inv(t.target->size(), m.size());
    bool bijective = m.size() == inv.size();
    for (std::size_t x = 0; bijective && x < m.size(); ++x) {
      if (inv[m[x]] != m.size()) bijective = false;
      inv[m[x]] = x;
    }
    if (bijective) r.map = inv;
  }
  r.dirac_domain = t.dirac_domain && (r.cost.has_value() || r.map.has_value());
  return r;
}

Potential t_concave_projection(const TransferHandle& t, const Potential& f) { return t.backward(t.forward(f)); }

Potential t_convex_projection(const TransferHandle& t, const Potential& g) { return t.forward(t.backward(g)); }

}  // namespace transfer
