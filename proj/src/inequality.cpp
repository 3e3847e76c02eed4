#include "transfer/inequality.hpp"

#include <gsl/gsl_errno.h>
#include <gsl/gsl_multimin.h>

#include <algorithm>
#include <cmath>
#include <memory>
#include <numeric>
#include <sstream>

#include "transfer/errors.hpp"
#include "transfer/rng.hpp"

namespace transfer {

namespace {

constexpr double kBig = 1e30;

double clamp_big(double v) {
  if (std::isnan(v) || v > kBig) return kBig;
  return std::max(v, -kBig);
}

using Objective = std::function<double(const Vec&)>;

double nm_eval(const gsl_vector* v, void* p) {
  const auto* f = static_cast<const Objective*>(p);
  Vec x(static_cast<Eigen::Index>(v->size));
  for (std::size_t i = 0; i < v->size; ++i) x(static_cast<Eigen::Index>(i)) = gsl_vector_get(v, i);
  try {
    return clamp_big((*f)(x));
  } catch (const std::exception&) {
    return kBig;
  }
}

struct GslVector {
  gsl_vector* v;
  explicit GslVector(std::size_t n) : v(gsl_vector_alloc(n)) {}
  ~GslVector() { gsl_vector_free(v); }
};

struct LocalMin {
  Vec x;
  double value = kBig;
};

// Nelder-Mead (GSL nmsimplex2), restarted once with a smaller simplex.
LocalMin nelder_mead(const Objective& f, const Vec& start, double step, int max_iters, double size_tol) {
  static const bool quiet = [] {
    gsl_set_error_handler_off();
    return true;
  }();
  (void)quiet;
  const auto n = static_cast<std::size_t>(start.size());
  LocalMin best{start, clamp_big(f(start))};
  if (n == 0) return best;
  gsl_multimin_function fn{&nm_eval, n, const_cast<void*>(static_cast<const void*>(&f))};
  for (double s : {step, 0.1 * step}) {
    GslVector x(n), ss(n);
    for (std::size_t i = 0; i < n; ++i) gsl_vector_set(x.v, i, best.x(static_cast<Eigen::Index>(i)));
    gsl_vector_set_all(ss.v, s);
    std::unique_ptr<gsl_multimin_fminimizer, void (*)(gsl_multimin_fminimizer*)> m(
        gsl_multimin_fminimizer_alloc(gsl_multimin_fminimizer_nmsimplex2, n), gsl_multimin_fminimizer_free);
    gsl_multimin_fminimizer_set(m.get(), &fn, x.v, ss.v);
    for (int it = 0; it < max_iters; ++it) {
      if (gsl_multimin_fminimizer_iterate(m.get()) != GSL_SUCCESS) break;
      if (gsl_multimin_test_size(gsl_multimin_fminimizer_size(m.get()), size_tol) == GSL_SUCCESS) break;
      if (m->fval < -1e12) break;
    }
    if (m->fval < best.value) {
      for (std::size_t i = 0; i < n; ++i) best.x(static_cast<Eigen::Index>(i)) = gsl_vector_get(m->x, i);
      best.value = m->fval;
    }
  }
  return best;
}

std::size_t grid_steps(std::size_t n, const SearchConfig& cfg) {
  if (n <= 1) return 1;
  const double h = n == 2 ? cfg.grid_step_2 : cfg.grid_step_3;
  if (!(h > 0.0) || h > 1.0) throw InputError("inequality: grid step must lie in (0, 1]");
  return static_cast<std::size_t>(std::llround(1.0 / h));
}

std::vector<Vec> split_blocks(const std::vector<std::size_t>& dims, const Vec& y) {
  std::vector<Vec> out;
  Eigen::Index at = 0;
  for (std::size_t d : dims) {
    out.push_back(y.segment(at, static_cast<Eigen::Index>(d)));
    at += static_cast<Eigen::Index>(d);
  }
  return out;
}

using SimplexObjective = std::function<double(const std::vector<Vec>&)>;

// Local descent over a product of simplices: free coordinates are projected
// block by block and the distance to the projection is added as a penalty.
LocalMin polish(const std::vector<std::size_t>& dims, const SimplexObjective& fn, const Vec& start,
                const SearchConfig& cfg) {
  Objective f = [&](const Vec& y) {
    std::vector<Vec> blocks = split_blocks(dims, y);
    double penalty = 0.0;
    for (Vec& b : blocks) {
      const Vec p = project_to_simplex(b);
      penalty += (b - p).norm();
      b = p;
    }
    return clamp_big(fn(blocks)) + penalty;
  };
  LocalMin r = nelder_mead(f, start, 0.05, cfg.max_iters, 1e-12);
  Vec x = r.x;
  Eigen::Index at = 0;
  for (const Vec& b : split_blocks(dims, r.x)) {
    x.segment(at, b.size()) = project_to_simplex(b);
    at += b.size();
  }
  return {x, clamp_big(fn(split_blocks(dims, x)))};
}

Vec random_simplex_point(CounterRng& rng, std::size_t n) {
  Vec w(static_cast<Eigen::Index>(n));
  for (auto& x : w) x = -std::log(1.0 - rng.uniform());
  return w / w.sum();
}

struct PrimalResult {
  double value = kBig;
  Vec sigma;
  std::string path;
  std::vector<std::string> warnings;
  double grid_step = 0.0;
};

// Grid sweep on spaces of at most 3 points, then local descent from the best
// grid points; descent from random starts on larger spaces.
PrimalResult minimize_over_simplex(std::size_t n, const std::function<double(const Vec&)>& fn,
                                   const SearchConfig& cfg, CounterRng rng) {
  PrimalResult r;
  std::vector<Vec> starts;
  if (n <= 3) {
    const std::size_t steps = grid_steps(n, cfg);
    r.grid_step = 1.0 / static_cast<double>(steps);
    std::vector<std::pair<double, std::size_t>> vals;
    const std::vector<Vec> grid = simplex_grid(n, steps);
    for (std::size_t k = 0; k < grid.size(); ++k) vals.emplace_back(clamp_big(fn(grid[k])), k);
    std::stable_sort(vals.begin(), vals.end(),
                     [](const auto& a, const auto& b) { return a.first < b.first; });
    r.value = vals.front().first;
    r.sigma = grid[vals.front().second];
    for (std::size_t k = 0; k < std::min(cfg.polish, vals.size()); ++k) starts.push_back(grid[vals[k].second]);
    r.path = cfg.polish > 0 ? "grid+descent" : "grid";
  } else {
    std::ostringstream w;
    w << "space has " << n << " points: grid skipped, descent only";
    r.warnings.push_back(w.str());
    starts.push_back(Vec::Constant(static_cast<Eigen::Index>(n), 1.0 / static_cast<double>(n)));
    for (std::size_t k = 1; k < cfg.restarts; ++k) starts.push_back(random_simplex_point(rng, n));
    r.path = "descent";
  }
  const SimplexObjective block_fn = [&](const std::vector<Vec>& b) { return fn(b[0]); };
  for (const Vec& s : starts) {
    const LocalMin m = polish({n}, block_fn, s, cfg);
    if (m.value < r.value) {
      r.value = m.value;
      r.sigma = m.x;
    }
  }
  return r;
}

struct DualResult {
  double value = kBig;
  Vec x;
  std::size_t member = 0;
};

// Seeded multistart descent of fn(j, x) over x in R^dim and members j. With
// several members each gets a short search; the best one gets the full restarts.
DualResult minimize_potentials(std::size_t dim, std::size_t members,
                               const std::function<double(std::size_t, const Vec&)>& fn, const SearchConfig& cfg,
                               CounterRng rng) {
  if (members == 0) throw InputError("inequality: empty family");
  const auto n = static_cast<Eigen::Index>(dim);
  auto run = [&](std::size_t j, std::size_t restarts, DualResult& best) {
    for (std::size_t k = 0; k < std::max<std::size_t>(restarts, 1); ++k) {
      Vec start = Vec::Zero(n);
      if (k > 0)
        for (auto& v : start) v = rng.uniform(-cfg.start_scale, cfg.start_scale);
      const LocalMin m = nelder_mead([&](const Vec& x) { return fn(j, x); }, start, 1.0, cfg.max_iters, 1e-10);
      if (m.value < best.value) best = {m.value, m.x, j};
    }
  };
  DualResult best;
  best.x = Vec::Zero(n);
  if (members == 1) {
    run(0, cfg.restarts, best);
    return best;
  }
  const std::size_t scan = std::min<std::size_t>(4, cfg.restarts);
  for (std::size_t j = 0; j < members; ++j) run(j, scan, best);
  if (cfg.restarts > scan) run(best.member, cfg.restarts - scan, best);
  return best;
}

double pair_integral(const Operator& op, const Space& space, const Vec& g, const ProbMeasure& m) {
  return op(Potential(space, g)).values.values().dot(m.weights());
}

// log sum_x m(x) e^{v(x)} over supp m.
double log_mean_exp(const Vec& v, const ProbMeasure& m) {
  double top = -kInfinity;
  for (std::size_t x : m.support()) top = std::max(top, v(static_cast<Eigen::Index>(x)));
  if (!std::isfinite(top)) return top;
  double s = 0.0;
  for (std::size_t x : m.support()) s += m[x] * std::exp(v(static_cast<Eigen::Index>(x)) - top);
  return top + std::log(s);
}

}  // namespace

std::vector<Vec> simplex_grid(std::size_t n, std::size_t steps) {
  if (n == 0 || steps == 0) throw InputError("simplex_grid: need n >= 1 and steps >= 1");
  std::vector<Vec> out;
  std::vector<std::size_t> k(n, 0);
  const double h = 1.0 / static_cast<double>(steps);
  // Enumerate compositions of `steps` into n parts in lexicographic order.
  std::function<void(std::size_t, std::size_t)> rec = [&](std::size_t i, std::size_t left) {
    if (i + 1 == n) {
      k[i] = left;
      Vec p(static_cast<Eigen::Index>(n));
      double acc = 0.0;
      for (std::size_t j = 0; j + 1 < n; ++j) {
        p(static_cast<Eigen::Index>(j)) = static_cast<double>(k[j]) * h;
        acc += p(static_cast<Eigen::Index>(j));
      }
      p(static_cast<Eigen::Index>(n - 1)) = std::max(0.0, 1.0 - acc);
      out.push_back(p);
      return;
    }
    for (std::size_t a = 0; a <= left; ++a) {
      k[i] = a;
      rec(i + 1, left - a);
    }
  };
  rec(0, steps);
  return out;
}

ConvexSide convex_side(const EntropicHandle& e) {
  if (!e.conjugate) throw InputError(e.name + ": needs a backward conjugate");
  ConvexSide s;
  s.name = e.name;
  s.source = e.source;
  s.target = e.target;
  s.eval = [e](const ProbMeasure& mu, const ProbMeasure& nu) { return e.eval(mu, nu); };
  auto conj = e.conjugate;
  s.conjugate = [conj](const ProbMeasure& mu, const Vec& h) { return conj(mu, h).value; };
  return s;
}

ConvexSide convex_side(const ConvexTransferHandle& t) {
  ConvexSide s;
  s.name = t.name;
  s.source = t.source;
  s.target = t.target;
  s.eval = [t](const ProbMeasure& mu, const ProbMeasure& nu) { return t.eval(mu, nu); };
  if (t.conjugate) {
    auto conj = t.conjugate;
    s.conjugate = [conj](const ProbMeasure& mu, const Vec& h) { return conj(mu, h).value; };
  } else {
    std::vector<Operator> ops;
    for (double i : t.index) ops.push_back(t.member(i));
    const Space Y = t.target;
    s.conjugate = [ops, Y](const ProbMeasure& mu, const Vec& h) {
      double v = kInfinity;
      for (const Operator& op : ops) v = std::min(v, pair_integral(op, Y, h, mu));
      return v;
    };
  }
  return s;
}

ConvexSide convex_side(const TransferHandle& t) {
  if (!t.has_backward()) throw InputError(t.name + ": needs a backward operator");
  ConvexSide s;
  s.name = t.name;
  s.source = t.source;
  s.target = t.target;
  s.eval = [t](const ProbMeasure& mu, const ProbMeasure& nu) { return t.eval(mu, nu); };
  const Operator op = t.kop_backward;
  const Space Y = t.target;
  s.conjugate = [op, Y](const ProbMeasure& mu, const Vec& h) { return pair_integral(op, Y, h, mu); };
  return s;
}

ConvexSide scale(double lambda, const ConvexSide& s) {
  if (!(lambda > 0.0) || !std::isfinite(lambda)) throw InputError("scale: factor must be positive and finite");
  ConvexSide r = s;
  std::ostringstream name;
  name << lambda << "*" << s.name;
  r.name = name.str();
  auto ev = s.eval;
  auto conj = s.conjugate;
  r.eval = [ev, lambda](const ProbMeasure& mu, const ProbMeasure& nu) { return lambda * ev(mu, nu); };
  r.conjugate = [conj, lambda](const ProbMeasure& mu, const Vec& h) { return lambda * conj(mu, h / lambda); };
  return r;
}

BackwardFamily backward_family(const TransferHandle& t) {
  if (!t.has_backward()) throw InputError(t.name + ": needs a backward operator");
  return {t.name, t.source, t.target, [t](const ProbMeasure& a, const ProbMeasure& b) { return t.eval(a, b); },
          {t.kop_backward}};
}

BackwardFamily backward_family(const ConvexTransferHandle& t) {
  BackwardFamily f{t.name, t.source, t.target,
                   [t](const ProbMeasure& a, const ProbMeasure& b) { return t.eval(a, b); }, {}};
  for (double i : t.index) f.members.push_back(t.member(i));
  if (f.members.empty()) throw InputError(t.name + ": empty family");
  return f;
}

ForwardFamily forward_family(const TransferHandle& t) {
  if (!t.has_forward()) throw InputError(t.name + ": needs a forward operator");
  const Operator op = t.kop_forward;
  const Space X = t.source;
  return {t.name, t.source, t.target, [t](const ProbMeasure& a, const ProbMeasure& b) { return t.eval(a, b); },
          {[op, X](const ProbMeasure& nu, const Vec& g) { return pair_integral(op, X, g, nu); }}};
}

ForwardFamily reversed(const BackwardFamily& f) {
  ForwardFamily r;
  r.name = "reversed(" + f.name + ")";
  r.source = f.target;
  r.target = f.source;
  auto ev = f.eval;
  r.eval = [ev](const ProbMeasure& a, const ProbMeasure& b) { return ev(b, a); };
  const Space Y = f.target;
  for (const Operator& op : f.members)
    r.members.push_back([op, Y](const ProbMeasure& nu, const Vec& g) { return -pair_integral(op, Y, -g, nu); });
  return r;
}

ForwardFamily forward_log_entropy(const Space& space) {
  ForwardFamily r;
  r.name = "forward-log-entropy";
  r.source = space;
  r.target = space;
  r.eval = [](const ProbMeasure& sigma, const ProbMeasure& nu) { return kl_divergence(sigma, nu); };
  r.members.push_back([](const ProbMeasure& nu, const Vec& g) { return -log_mean_exp(-g, nu); });
  return r;
}

DualityPair back_back_dual(const ConvexSide& f1, const BackwardFamily& f2, const ProbMeasure& mu,
                           const ProbMeasure& nu, const SearchConfig& cfg) {
  require_same_space(f1.target, f2.source, "back_back_dual: middle space");
  require_same_space(mu.space(), f1.source, "back_back_dual: first marginal");
  require_same_space(nu.space(), f2.target, "back_back_dual: second marginal");
  const Space mid = f1.target;
  DualityPair out;
  const PrimalResult p = minimize_over_simplex(
      mid->size(),
      [&](const Vec& s) {
        const ProbMeasure sigma(mid, s);
        return f1.eval(mu, sigma) - f2.eval(sigma, nu);
      },
      cfg, CounterRng(cfg.seed, 71));
  const Space Z = f2.target;
  const DualResult d = minimize_potentials(
      Z->size(), f2.members.size(),
      [&](std::size_t j, const Vec& f) {
        const Vec h = -f2.members[j](Potential(Z, f)).values.values();
        return -f1.conjugate(mu, h) - f.dot(nu.weights());
      },
      cfg, CounterRng(cfg.seed, 72));
  out.primal = p.value;
  out.sigma = p.sigma;
  out.primal_path = p.path;
  out.warnings = p.warnings;
  out.dual = d.value;
  out.potential = d.x;
  out.member = d.member;
  return out;
}

DualityPair forward_back_dual(const ConvexSide& f1, const ForwardFamily& f2, const ProbMeasure& mu,
                              const ProbMeasure& nu, const SearchConfig& cfg) {
  require_same_space(f1.target, f2.source, "forward_back_dual: middle space");
  require_same_space(mu.space(), f1.source, "forward_back_dual: first marginal");
  require_same_space(nu.space(), f2.target, "forward_back_dual: second marginal");
  const Space mid = f1.target;
  DualityPair out;
  const PrimalResult p = minimize_over_simplex(
      mid->size(),
      [&](const Vec& s) {
        const ProbMeasure sigma(mid, s);
        return f1.eval(mu, sigma) - f2.eval(sigma, nu);
      },
      cfg, CounterRng(cfg.seed, 73));
  const DualResult d = minimize_potentials(
      mid->size(), f2.members.size(),
      [&](std::size_t j, const Vec& g) { return -f1.conjugate(mu, -g) - f2.members[j](nu, g); }, cfg,
      CounterRng(cfg.seed, 74));
  out.primal = p.value;
  out.sigma = p.sigma;
  out.primal_path = p.path;
  out.warnings = p.warnings;
  out.dual = d.value;
  out.potential = d.x;
  out.member = d.member;
  return out;
}

const char* to_string(InequalityForm f) {
  switch (f) {
    case InequalityForm::BackwardBackward: return "backward_backward";
    case InequalityForm::ForwardBackward: return "forward_backward";
    case InequalityForm::Maurey: return "maurey";
  }
  return "?";
}

GapReport check_te_inequality(const InequalitySpec& spec, const SearchConfig& cfg) {
  if (spec.form == InequalityForm::Maurey)
    return maurey_check(spec.lhs, spec.link, spec.link2, spec.lambda, spec.lambda2, spec.mu, spec.nu, cfg);
  const EntropicHandle e = spec.entropy ? *spec.entropy : log_entropy(spec.mu.space());
  const EntropicHandle chain = spec.link ? entropic_convolve(e, *spec.link) : e;
  const ConvexSide rhs = scale(spec.lambda, convex_side(chain));
  const DualityPair pair = spec.form == InequalityForm::BackwardBackward
                               ? back_back_dual(rhs, spec.lhs, spec.mu, spec.nu, cfg)
                               : forward_back_dual(rhs, reversed(spec.lhs), spec.mu, spec.nu, cfg);
  GapReport r;
  r.form = spec.form;
  r.primal_gap = pair.primal;
  r.dual_gap = pair.dual;
  r.worst_sigma = pair.sigma;
  r.worst_potential = pair.potential;
  r.worst_member = pair.member;
  r.primal_path = pair.primal_path;
  const std::size_t n = rhs.target->size();
  r.grid_step = n <= 3 ? 1.0 / static_cast<double>(grid_steps(n, cfg)) : 0.0;
  r.restarts = cfg.restarts;
  r.seed = cfg.seed;
  r.tol = cfg.tol;
  r.warnings = pair.warnings;
  return r;
}

double maurey_criterion(const Operator& member, const std::optional<TransferHandle>& t1,
                        const std::optional<TransferHandle>& t2, double lambda1, double lambda2,
                        const ProbMeasure& mu, const ProbMeasure& nu, const Vec& g) {
  const Space Y2 = t2 ? t2->source : nu.space();
  KantorovichImage u = member(Potential(Y2, g));
  Vec a = u.values.values() / lambda1;
  if (t1) a = t1->forward(Potential(t1->source, a)).values();
  Vec b = -g / lambda2;
  if (t2) b = t2->forward(Potential(t2->source, b)).values();
  return lambda1 * log_mean_exp(-a, mu) + lambda2 * log_mean_exp(-b, nu);
}

GapReport maurey_check(const BackwardFamily& f, const std::optional<TransferHandle>& t1,
                       const std::optional<TransferHandle>& t2, double lambda1, double lambda2,
                       const ProbMeasure& mu, const ProbMeasure& nu, const SearchConfig& cfg) {
  if (!(lambda1 > 0.0) || !(lambda2 > 0.0) || !std::isfinite(lambda1) || !std::isfinite(lambda2))
    throw InputError("maurey_check: weights must be positive and finite");
  const Space Y1 = f.source, Y2 = f.target;
  if (t1) {
    require_same_space(t1->source, Y1, "maurey_check: first link source");
    require_same_space(t1->target, mu.space(), "maurey_check: first anchor");
    if (!t1->has_forward()) throw InputError("maurey_check: links must be forward linear");
  } else {
    require_same_space(Y1, mu.space(), "maurey_check: first anchor");
  }
  if (t2) {
    require_same_space(t2->source, Y2, "maurey_check: second link source");
    require_same_space(t2->target, nu.space(), "maurey_check: second anchor");
    if (!t2->has_forward()) throw InputError("maurey_check: links must be forward linear");
  } else {
    require_same_space(Y2, nu.space(), "maurey_check: second anchor");
  }

  // lambda (T * H)(sigma, anchor) = lambda inf_rho T(sigma, rho) + KL(rho || anchor).
  auto side = [](const std::optional<TransferHandle>& t, double lambda, const ProbMeasure& anchor)
      -> std::function<double(const ProbMeasure&)> {
    if (!t) return [lambda, anchor](const ProbMeasure& s) { return lambda * kl_divergence(s, anchor); };
    const EntropicHandle chain = entropic_convolve(log_entropy(anchor.space()), reversed(*t));
    return [lambda, anchor, chain](const ProbMeasure& s) { return lambda * chain.eval(anchor, s); };
  };
  const auto rhs1 = side(t1, lambda1, mu);
  const auto rhs2 = side(t2, lambda2, nu);
  const std::size_t n1 = Y1->size(), n2 = Y2->size();
  const SimplexObjective fn = [&](const std::vector<Vec>& b) {
    const ProbMeasure s1(Y1, b[0]), s2(Y2, b[1]);
    return rhs1(s1) + rhs2(s2) - f.eval(s1, s2);
  };

  GapReport r;
  r.form = InequalityForm::Maurey;
  r.restarts = cfg.restarts;
  r.seed = cfg.seed;
  r.tol = cfg.tol;
  double best = kBig;
  Vec best_x;
  std::vector<Vec> starts;
  if (n1 <= 3 && n2 <= 3) {
    // The right side separates, so it is tabulated once per grid.
    const std::vector<Vec> g1 = simplex_grid(n1, grid_steps(n1, cfg)), g2 = simplex_grid(n2, grid_steps(n2, cfg));
    r.grid_step = 1.0 / static_cast<double>(std::max(grid_steps(n1, cfg), grid_steps(n2, cfg)));
    std::vector<double> r1, r2;
    for (const Vec& s : g1) r1.push_back(clamp_big(rhs1(ProbMeasure(Y1, s))));
    for (const Vec& s : g2) r2.push_back(clamp_big(rhs2(ProbMeasure(Y2, s))));
    std::vector<std::pair<double, std::size_t>> vals;
    for (std::size_t i = 0; i < g1.size(); ++i)
      for (std::size_t k = 0; k < g2.size(); ++k) {
        double v = r1[i] + r2[k];
        if (v < kBig) v -= f.eval(ProbMeasure(Y1, g1[i]), ProbMeasure(Y2, g2[k]));
        vals.emplace_back(clamp_big(v), i * g2.size() + k);
      }
    std::stable_sort(vals.begin(), vals.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
    for (std::size_t q = 0; q < std::min(cfg.polish, vals.size()) || q == 0; ++q) {
      Vec x(static_cast<Eigen::Index>(n1 + n2));
      x << g1[vals[q].second / g2.size()], g2[vals[q].second % g2.size()];
      starts.push_back(x);
      if (q == 0) {
        best = vals[q].first;
        best_x = x;
      }
    }
    r.primal_path = cfg.polish > 0 ? "grid+descent" : "grid";
  } else {
    r.warnings.push_back("spaces exceed 3 points: grid skipped, descent only");
    CounterRng rng(cfg.seed, 75);
    for (std::size_t k = 0; k < cfg.restarts; ++k) {
      Vec x(static_cast<Eigen::Index>(n1 + n2));
      x << random_simplex_point(rng, n1), random_simplex_point(rng, n2);
      starts.push_back(x);
    }
    r.primal_path = "descent";
  }
  if (cfg.polish > 0 || r.primal_path == "descent")
    for (const Vec& s : starts) {
      const LocalMin m = polish({n1, n2}, fn, s, cfg);
      if (m.value < best) {
        best = m.value;
        best_x = m.x;
      }
    }
  r.primal_gap = best;
  r.worst_sigma = best_x.head(static_cast<Eigen::Index>(n1));
  r.worst_sigma2 = best_x.tail(static_cast<Eigen::Index>(n2));

  const DualResult d = minimize_potentials(
      n2, f.members.size(),
      [&](std::size_t j, const Vec& g) {
        return -maurey_criterion(f.members[j], t1, t2, lambda1, lambda2, mu, nu, g);
      },
      cfg, CounterRng(cfg.seed, 76));
  r.dual_gap = d.value;
  r.worst_potential = d.x;
  r.worst_member = d.member;
  return r;
}

}  // namespace transfer
