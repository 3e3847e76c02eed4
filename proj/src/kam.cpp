#include "transfer/kam.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <sstream>

#include "transfer/errors.hpp"
#include "transfer/rng.hpp"
#include "transfer/solvers.hpp"

namespace transfer {

namespace {

void require_domain(const TransferHandle& t, const char* what) {
  require_same_space(t.source, t.target, what);
  if (!t.has_backward()) throw InputError(std::string(what) + ": needs a backward operator");
  if (!t.dirac_domain) throw DomainError(std::string(what) + ": transfer must be Dirac-domained");
  if (!t.finite) throw DomainError(std::string(what) + ": only everywhere-finite transfers are supported");
}

bool cost_route(const TransferHandle& t) { return t.cost.has_value() && t.cost->all_finite(); }

Vec apply_backward(const TransferHandle& t, const Vec& g) { return t.backward(Potential(t.target, g)).values(); }

double sup_norm(const Vec& v) { return v.size() ? v.cwiseAbs().maxCoeff() : 0.0; }

}  // namespace

void validate(const KamConfig& cfg) {
  if (cfg.max_iters < 1) throw InputError("KamConfig: max_iters must be >= 1");
  if (!(cfg.tol > 0.0)) throw InputError("KamConfig: tol must be positive");
  if (cfg.window < 1) throw InputError("KamConfig: window must be >= 1");
}

Potential iterate_operator(const TransferHandle& t, const Potential& g, unsigned n) {
  require_same_space(t.source, t.target, "iterate_operator");
  Potential u = g;
  for (unsigned k = 0; k < n; ++k) u = t.backward(u);
  return u;
}

EffectiveConstant effective_constant(const TransferHandle& t, const KamConfig& cfg) {
  validate(cfg);
  require_domain(t, "effective_constant");
  const auto n = static_cast<Eigen::Index>(t.source->size());
  EffectiveConstant r;
  const bool mk = cost_route(t);
  if (mk) {
    r.exact = min_mean_cycle(*t.cost).mean;
    r.tv_modulus = t.cost->entries().maxCoeff() - t.cost->entries().minCoeff();
    r.method = "karp+increments";
  } else {
    r.method = "increments";
  }
  // Any u brackets ell: min(u - T^k u) / k <= ell <= max(u - T^k u) / k.
  std::deque<Vec> hist{Vec::Zero(n)};
  double shift = 0.0;
  for (int it = 1; it <= cfg.max_iters; ++it) {
    Vec u = apply_backward(t, hist.back());
    if (!mk) {
      r.M.push_back(-(u.minCoeff() + shift));
      r.m.push_back(-(u.maxCoeff() + shift));
    }
    // Common shifts keep the history small without changing differences.
    const double c = u(0);
    u.array() -= c;
    for (Vec& h : hist) h.array() -= c;
    shift += c;
    hist.push_back(u);
    if (hist.size() > static_cast<std::size_t>(cfg.window) + 1) hist.pop_front();
    for (std::size_t k = 1; k < hist.size(); ++k) {
      const Vec d = hist[hist.size() - 1 - k] - u;
      r.lower = std::max(r.lower, d.minCoeff() / static_cast<double>(k));
      r.upper = std::min(r.upper, d.maxCoeff() / static_cast<double>(k));
    }
    r.iterations = it;
    if (r.upper - r.lower <= cfg.tol) {
      r.converged = true;
      break;
    }
  }
  if (mk) {
    // Exact sandwich sequences from min-plus powers.
    const int count = std::clamp(r.iterations, 64, 256);
    Mat p = t.cost->entries();
    for (int k = 1; k <= count; ++k) {
      r.M.push_back(p.maxCoeff());
      r.m.push_back(p.minCoeff());
      if (k < count) p = minplus_product(p, t.cost->entries());
    }
  }
  for (std::size_t k = 0; k < r.M.size(); ++k) r.C = std::max(r.C, r.M[k] - r.m[k]);
  r.estimate = 0.5 * (r.lower + r.upper);
  r.ell = r.exact ? *r.exact : r.estimate;
  return r;
}

TransferHandle calibrate(const TransferHandle& t, double ell) {
  if (!std::isfinite(ell)) throw InputError("calibrate: ell must be finite");
  if (ell == 0.0) return t;
  TransferHandle r = t;
  std::ostringstream name;
  name << "calibrated(" << t.name << ", " << ell << ")";
  r.name = name.str();
  auto ev = t.evaluate;
  r.evaluate = [ev, ell](const ProbMeasure& mu, const ProbMeasure& nu) {
    Evaluation e = ev(mu, nu);
    if (std::isfinite(e.value)) e.value -= ell;
    return e;
  };
  auto shifted = [](const Operator& op, double by) -> Operator {
    if (!op) return {};
    return [op, by](const Potential& f) {
      KantorovichImage img = op(f);
      return KantorovichImage{Potential(img.values.space(), img.values.values().array() + by), img.kernel};
    };
  };
  r.kop_backward = shifted(t.kop_backward, ell);
  r.kop_forward = shifted(t.kop_forward, -ell);
  if (t.cost) {
    Mat c = t.cost->entries();
    for (Eigen::Index i = 0; i < c.size(); ++i)
      if (!is_forbidden(c.data()[i])) c.data()[i] -= ell;
    r.cost = CostMatrix(t.cost->source(), t.cost->target(), c);
  }
  return r;
}

Potential t_infinity(const TransferHandle& t, const Potential& f, const KamConfig& cfg) {
  validate(cfg);
  require_domain(t, "t_infinity");
  const std::size_t n = t.source->size();
  Vec u = f.values();
  for (std::size_t k = 0; k < n * n + static_cast<std::size_t>(cfg.window); ++k) u = apply_backward(t, u);
  Vec v = u;
  for (int k = 1; k < cfg.window; ++k) {
    u = apply_backward(t, u);
    v = v.cwiseMax(u);
  }
  // T v >= v once the window covers a period; the iteration then increases.
  for (int it = 0; it < cfg.max_iters; ++it) {
    const Vec w = apply_backward(t, v);
    if (sup_norm(w - v) <= cfg.tol) return Potential(t.source, w);
    v = w;
  }
  throw ConvergenceError("t_infinity: no fixed point within max_iters");
}

KamResult weak_kam_solve(const TransferHandle& t, const KamConfig& cfg) {
  validate(cfg);
  require_domain(t, "weak_kam_solve");
  const std::size_t n = t.source->size();
  if (cfg.base_point >= n) throw InputError("weak_kam_solve: base point outside the space");
  const auto b = static_cast<Eigen::Index>(cfg.base_point);
  const EffectiveConstant ec = effective_constant(t, cfg);
  if (ec.lower > cfg.tol || ec.upper < -cfg.tol) {
    std::ostringstream msg;
    msg << "weak_kam_solve: transfer is not calibrated (ell in [" << ec.lower << ", " << ec.upper << "])";
    throw DomainError(msg.str());
  }
  KamResult r;
  r.ell = ec.ell;
  r.M = ec.M;
  r.m = ec.m;
  r.C = ec.C;

  auto finish = [&](Vec u, const std::string& method) {
    u.array() -= u(b);
    r.residual = sup_norm(apply_backward(t, u) - u);
    r.u = Potential(t.source, u);
    r.method = method;
    r.converged = r.residual <= cfg.tol;
  };

  // Stage one: plain iteration with normalization, watching for cycles.
  std::deque<Vec> normalized, raw;
  Vec u = Vec::Zero(static_cast<Eigen::Index>(n));
  normalized.push_back(u);
  raw.push_back(u);
  for (int it = 1; it <= cfg.max_iters; ++it) {
    const Vec next = apply_backward(t, raw.back());
    Vec w = next;
    w.array() -= w(b);
    const double step = sup_norm(w - normalized.back());
    r.trace.push_back(step);
    r.iterations = it;
    normalized.push_back(w);
    raw.push_back(next);
    if (normalized.size() > static_cast<std::size_t>(cfg.window) + 2) {
      normalized.pop_front();
      raw.pop_front();
    }
    if (step <= cfg.tol) {
      finish(w, "iteration");
      if (r.converged) return r;
    }
    for (std::size_t p = 2; p + 1 <= normalized.size() - 1 && p <= static_cast<std::size_t>(cfg.window); ++p) {
      if (sup_norm(w - normalized[normalized.size() - 1 - p]) <= cfg.tol) {
        r.period = p;
        break;
      }
    }
    if (r.period) break;
  }

  // Stage two: windowed limsup, then monotone iteration.
  const std::size_t span = r.period ? r.period : std::min(raw.size(), static_cast<std::size_t>(cfg.window));
  Vec v = raw.back();
  for (std::size_t k = 1; k < span; ++k) v = v.cwiseMax(raw[raw.size() - 1 - k]);
  for (int it = 0; it < cfg.max_iters; ++it) {
    const Vec w = apply_backward(t, v);
    r.trace.push_back(sup_norm(w - v));
    ++r.iterations;
    if (r.trace.back() <= cfg.tol) {
      finish(w, "two-stage");
      if (r.converged) return r;
      break;
    }
    v = w;
  }
  if (!r.u) finish(v, "two-stage");
  if (!r.converged) {
    std::ostringstream msg;
    msg << "weak_kam_solve: no fixed point within " << cfg.max_iters << " iterations (residual " << r.residual
        << ", C = " << r.C << ")";
    r.message = msg.str();
  }
  return r;
}

PeierlsBarrier peierls_barrier(const TransferHandle& t, double ell, const KamConfig& cfg) {
  validate(cfg);
  require_domain(t, "peierls_barrier");
  const TransferHandle cal = calibrate(t, ell);
  const Space X = t.source;
  const std::size_t n = X->size();
  PeierlsBarrier r;
  r.ell_used = ell;
  if (cost_route(t)) {
    const Mat c = cal.cost->entries();
    const double scale_tol = 1e-9 * (1.0 + c.cwiseAbs().maxCoeff());
    r.burn_in = n * n;
    r.method = "minplus-period";
    std::deque<Mat> hist;
    Mat p = c;
    for (int k = 1; k <= cfg.max_iters; ++k) {
      if (static_cast<std::size_t>(k) >= r.burn_in) {
        hist.push_back(p);
        if (hist.size() > static_cast<std::size_t>(cfg.window) + 1) hist.pop_front();
        for (std::size_t q = 1; q < hist.size(); ++q) {
          if ((p - hist[hist.size() - 1 - q]).cwiseAbs().maxCoeff() <= scale_tol) {
            r.period = q;
            break;
          }
        }
        if (r.period) break;
      }
      p = minplus_product(p, c);
    }
    // liminf over an eventually periodic sequence is the min over one period.
    const std::size_t span = r.period ? r.period : hist.size();
    Mat lo = hist.back(), hi = hist.back();
    for (std::size_t q = 1; q < span; ++q) {
      lo = lo.cwiseMin(hist[hist.size() - 1 - q]);
      hi = hi.cwiseMax(hist[hist.size() - 1 - q]);
    }
    r.exact = r.period > 0;
    if (!r.exact) {
      r.lower = lo;
      r.upper = hi;
    }
    r.h = CostMatrix(X, X, lo);
    const CostMatrix h = *r.h;
    r.eval = [h](const ProbMeasure& mu, const ProbMeasure& nu) { return solve_transport_lp(h, mu, nu).value; };
    return r;
  }
  // Generic route: sup over seeded potentials, a lower bound.
  r.method = "seeded-potentials";
  r.lower_bound = true;
  std::vector<std::pair<Vec, Vec>> probes;
  auto add = [&](const Vec& f) { probes.emplace_back(f, t_infinity(cal, Potential(X, f), cfg).values()); };
  const auto dim = static_cast<Eigen::Index>(n);
  add(Vec::Zero(dim));
  for (double k : {1.0, 10.0, 100.0})
    for (std::size_t y = 0; y < n; ++y) {
      Vec f = Vec::Constant(dim, -k);
      f(static_cast<Eigen::Index>(y)) = 0.0;
      add(f);
    }
  CounterRng rng(cfg.seed, 81);
  for (std::size_t s = 0; s < cfg.samples; ++s) {
    Vec f(dim);
    for (auto& x : f) x = rng.uniform(-1.0, 1.0);
    add(f);
  }
  r.eval = [probes](const ProbMeasure& mu, const ProbMeasure& nu) {
    double best = -kInfinity;
    for (const auto& [f, tf] : probes) best = std::max(best, f.dot(nu.weights()) - tf.dot(mu.weights()));
    return best;
  };
  return r;
}

double idempotence_defect(const PeierlsBarrier& b) {
  if (!b.h) throw DomainError("idempotence_defect: needs the cost route");
  const Mat& h = b.h->entries();
  return (minplus_product(h, h) - h).cwiseAbs().maxCoeff();
}

AubryReport aubry_mather(const TransferHandle& t, double ell, const PeierlsBarrier& barrier, double tol) {
  require_domain(t, "aubry_mather");
  if (!barrier.eval) throw InputError("aubry_mather: barrier not computed");
  const Space X = t.source;
  const std::size_t n = X->size();
  auto h = [&](std::size_t x, std::size_t y) {
    return barrier.h ? (*barrier.h)(x, y) : barrier.eval(dirac(X, x), dirac(X, y));
  };
  AubryReport r;
  r.tol_used = tol;
  for (;;) {
    r.aubry_points.clear();
    for (std::size_t x = 0; x < n; ++x)
      if (h(x, x) <= r.tol_used) r.aubry_points.push_back(x);
    if (!r.aubry_points.empty() || r.tol_used >= 1e-4) break;
    r.tol_used *= 10.0;
    std::ostringstream w;
    w << "empty Aubry set; tolerance raised to " << r.tol_used;
    r.warnings.push_back(w.str());
  }
  if (r.aubry_points.empty()) throw ConvergenceError("aubry_mather: empty Aubry set (numerical failure)");
  for (std::size_t x : r.aubry_points) {
    r.labels.push_back(X->label(x));
    r.aubry_measures.push_back(dirac(X, x));
    r.certificates.push_back(h(x, x));
  }
  if (t.cost) {
    const StationaryResult plain = solve_stationary_lp(*t.cost);
    const StationaryResult cal = solve_stationary_lp(*calibrate(t, ell).cost);
    r.mather_value = plain.value;
    r.mather_calibrated = cal.value;
    r.mather_plan = cal.plan;
    r.mather_marginal = cal.marginal;
    const ProbMeasure bar(X, cal.marginal / cal.marginal.sum());
    r.aubry_measures.push_back(bar);
    r.certificates.push_back(barrier.eval(bar, bar));
  }
  for (std::size_t x = 0; x < n; ++x)
    for (std::size_t y = 0; y < n; ++y) {
      double best = kInfinity;
      for (std::size_t a : r.aubry_points) best = std::min(best, h(x, a) + h(a, y));
      r.factorization_error = std::max(r.factorization_error, std::abs(h(x, y) - best));
    }
  if (r.factorization_error > r.tol_used) {
    std::ostringstream w;
    w << "factorization through the Aubry set off by " << r.factorization_error;
    r.warnings.push_back(w.str());
  }
  return r;
}

}  // namespace transfer
