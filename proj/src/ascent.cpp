#include "transfer/ascent.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "transfer/errors.hpp"
#include "transfer/rng.hpp"

namespace transfer {

void validate(const AscentConfig& cfg) {
  if (!(cfg.tol > 0.0)) throw InputError("ascent: tol must be positive");
  if (cfg.max_iters < 1) throw InputError("ascent: max_iters must be at least 1");
  if (!(cfg.radius > 0.0)) throw InputError("ascent: radius must be positive");
}

Vec project_to_simplex(const Vec& y) {
  const auto n = y.size();
  std::vector<double> s(y.data(), y.data() + n);
  std::sort(s.begin(), s.end(), std::greater<>());
  double cum = 0.0, theta = 0.0;
  for (Eigen::Index k = 0; k < n; ++k) {
    cum += s[static_cast<std::size_t>(k)];
    const double t = (cum - 1.0) / static_cast<double>(k + 1);
    if (s[static_cast<std::size_t>(k)] - t > 0.0) theta = t;
  }
  Vec x = (y.array() - theta).cwiseMax(0.0);
  return x / x.sum();
}

double golden_section_max(const std::function<double(double)>& f, double a, double b, double tol, int max_iters) {
  const double r = 0.5 * (std::sqrt(5.0) - 1.0);
  double c = b - r * (b - a), d = a + r * (b - a);
  double fc = f(c), fd = f(d);
  for (int i = 0; i < max_iters && (b - a) > tol * (1.0 + std::abs(a) + std::abs(b)); ++i) {
    if (fc >= fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - r * (b - a);
      fc = f(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + r * (b - a);
      fd = f(d);
    }
  }
  return fc >= fd ? c : d;
}

namespace {

// Central-cut ellipsoid method in factored form E = {x + B u : |u| <= 1}.
// `feasible` returns a violated-constraint normal a (keep a.(z - x) <= 0) or
// an empty vector when x is feasible.
struct Ellipsoid {
  Vec x;
  Mat B;

  void cut(const Vec& a) {
    const auto d = x.size();
    Vec p = B.transpose() * a;
    const double np = p.norm();
    if (np == 0.0) return;
    Vec xi = p / np;
    Vec Bxi = B * xi;
    if (d == 1) {
      x -= 0.5 * Bxi;
      B *= 0.5;
      return;
    }
    const double dd = static_cast<double>(d);
    x -= Bxi / (dd + 1.0);
    B = (dd / std::sqrt(dd * dd - 1.0)) * (B + (std::sqrt((dd - 1.0) / (dd + 1.0)) - 1.0) * Bxi * xi.transpose());
  }
  double width(const Vec& g) const { return (B.transpose() * g).norm(); }
};

using Lift = std::function<Vec(const Vec&)>;          // reduced coords -> full point
using Reduce = std::function<Vec(const Vec&)>;        // full gradient -> reduced gradient
using Feasibility = std::function<Vec(const Vec&)>;   // reduced coords -> violated normal or empty

AscentResult run_ellipsoid(Vec center, double radius, const ConcaveOracle& f, const Lift& lift, const Reduce& reduce,
                           const Feasibility& feasible, const AscentConfig& cfg) {
  AscentResult best;
  best.value = -std::numeric_limits<double>::infinity();
  best.upper_bound = std::numeric_limits<double>::infinity();
  const auto d = center.size();
  if (d == 0) {
    Probe p = f(lift(center));
    best.point = lift(center);
    best.value = best.upper_bound = p.value;
    best.converged = true;
    return best;
  }
  Ellipsoid e{center, radius * Mat::Identity(d, d)};
  for (int it = 0; it < cfg.max_iters; ++it) {
    best.iterations = it + 1;
    Vec viol = feasible(e.x);
    if (viol.size() > 0) {
      e.cut(viol);
      continue;
    }
    Vec full = lift(e.x);
    Probe p = f(full);
    if (!std::isfinite(p.value)) throw ConsistencyError("ascent: oracle returned a non-finite value");
    Vec g = reduce(p.grad);
    if (p.value > best.value) {
      best.value = p.value;
      best.point = full;
    }
    best.upper_bound = std::min(best.upper_bound, p.value + e.width(g));
    if (best.value > cfg.ceiling) {
      best.unbounded = true;
      return best;
    }
    if (best.upper_bound - best.value <= cfg.tol) {
      best.converged = true;
      return best;
    }
    if (g.norm() == 0.0) {
      best.upper_bound = best.value;
      best.converged = true;
      return best;
    }
    e.cut(-g);
    if (e.B.norm() < 1e-15 * (1.0 + e.x.norm())) break;
  }
  best.upper_bound = std::max(best.upper_bound, best.value);
  return best;
}

AscentResult run_supergradient_simplex(std::size_t n, const ConcaveOracle& f, const AscentConfig& cfg, Vec x) {
  AscentResult best;
  best.value = -std::numeric_limits<double>::infinity();
  best.upper_bound = std::numeric_limits<double>::infinity();
  for (int it = 0; it < cfg.max_iters; ++it) {
    best.iterations = it + 1;
    Probe p = f(x);
    // Linear upper bound of a concave function over the simplex.
    const double ub = p.value + p.grad.maxCoeff() - p.grad.dot(x);
    best.upper_bound = std::min(best.upper_bound, ub);
    if (p.value > best.value) {
      best.value = p.value;
      best.point = x;
    }
    if (best.upper_bound - best.value <= cfg.tol) {
      best.converged = true;
      break;
    }
    const double step = cfg.step_rule == StepRule::Fixed ? cfg.step : cfg.step / std::sqrt(1.0 + it);
    const double gn = p.grad.norm();
    if (gn == 0.0) {
      best.converged = true;
      break;
    }
    x = project_to_simplex(x + step * p.grad / gn);
  }
  (void)n;
  return best;
}

AscentResult run_supergradient_free(const ConcaveOracle& f, const AscentConfig& cfg, Vec x, bool ti) {
  AscentResult best;
  best.value = -std::numeric_limits<double>::infinity();
  for (int it = 0; it < cfg.max_iters; ++it) {
    best.iterations = it + 1;
    Probe p = f(x);
    if (p.value > best.value) {
      best.value = p.value;
      best.point = x;
    }
    Vec g = p.grad;
    if (ti) g.array() -= g.mean();
    const double gn = g.norm();
    if (gn * cfg.radius <= cfg.tol) {
      best.converged = true;
      break;
    }
    const double step = cfg.step_rule == StepRule::Fixed ? cfg.step : cfg.step / std::sqrt(1.0 + it);
    x += step * g / gn;
  }
  best.upper_bound = std::numeric_limits<double>::infinity();
  if (best.converged) best.upper_bound = best.value;
  return best;
}

void finish(AscentResult& r) {
  if (!r.converged && r.warning.empty())
    r.warning = "did not reach tolerance; returning best iterate (gap " + std::to_string(r.gap()) + ")";
}

}  // namespace

AscentResult maximize_concave_over_simplex(std::size_t n, const ConcaveOracle& f, const AscentConfig& cfg,
                                           const Vec* start) {
  validate(cfg);
  if (n == 0) throw InputError("maximize_concave_over_simplex: empty simplex");
  const auto ni = static_cast<Eigen::Index>(n);
  Vec x0 = start ? *start : Vec::Constant(ni, 1.0 / static_cast<double>(n));
  if (cfg.method == AscentMethod::Supergradient) {
    auto r = run_supergradient_simplex(n, f, cfg, x0);
    finish(r);
    return r;
  }
  // Reduced coordinates drop the first component.
  Lift lift = [ni](const Vec& z) {
    Vec s(ni);
    s(0) = 1.0 - z.sum();
    s.tail(ni - 1) = z;
    s = s.cwiseMax(0.0);
    return Vec(s / s.sum());
  };
  Reduce reduce = [ni](const Vec& g) { return Vec(g.tail(ni - 1).array() - g(0)); };
  Feasibility feas = [ni](const Vec& z) {
    double worst = 0.0;
    Vec a;
    for (Eigen::Index i = 0; i < z.size(); ++i)
      if (-z(i) > worst) {
        worst = -z(i);
        a = -Vec::Unit(ni - 1, i);
      }
    if (z.sum() - 1.0 > worst) a = Vec::Ones(ni - 1);
    return a;
  };
  auto r = run_ellipsoid(x0.tail(ni - 1), 1.0, f, lift, reduce, feas, cfg);
  CounterRng rng(cfg.seed, 17);
  for (int k = 0; k < cfg.restarts && !r.converged; ++k) {
    Vec w(ni);
    for (Eigen::Index i = 0; i < ni; ++i) w(i) = -std::log(1.0 - rng.uniform());
    w /= w.sum();
    auto rk = run_ellipsoid(w.tail(ni - 1), 1.0, f, lift, reduce, feas, cfg);
    if (rk.value > r.value) {
      rk.upper_bound = std::min(rk.upper_bound, r.upper_bound);
      r = rk;
    } else {
      r.upper_bound = std::min(r.upper_bound, rk.upper_bound);
    }
    r.converged = r.gap() <= cfg.tol;
  }
  finish(r);
  return r;
}

AscentResult maximize_concave_over_potentials(std::size_t n, const ConcaveOracle& f, const AscentConfig& cfg,
                                              bool translation_invariant, const Vec* start) {
  validate(cfg);
  if (n == 0) throw InputError("maximize_concave_over_potentials: empty space");
  const auto ni = static_cast<Eigen::Index>(n);
  Vec x0 = start ? *start : Vec::Zero(ni);
  if (translation_invariant) x0.array() -= x0(0);
  auto normalize = [&](AscentResult& r) {
    if (translation_invariant && r.point.size() > 0) r.point.array() -= r.point(0);
  };
  if (cfg.method == AscentMethod::Supergradient) {
    auto r = run_supergradient_free(f, cfg, x0, translation_invariant);
    normalize(r);
    finish(r);
    return r;
  }
  const Eigen::Index off = translation_invariant ? 1 : 0;
  Lift lift = [ni, off](const Vec& z) {
    Vec s = Vec::Zero(ni);
    s.tail(ni - off) = z;
    return s;
  };
  Reduce reduce = [ni, off](const Vec& g) { return Vec(g.tail(ni - off)); };
  Feasibility feas = [](const Vec&) { return Vec(); };
  double radius = cfg.radius;
  Vec center = x0.tail(ni - off);
  AscentResult r;
  // Grow the search ball while the best point sits near its boundary.
  for (int grow = 0; grow < 8; ++grow) {
    r = run_ellipsoid(center, radius, f, lift, reduce, feas, cfg);
    if (r.unbounded) break;
    const double dist = (r.point.tail(ni - off) - center).norm();
    if (dist < 0.75 * radius) break;
    if (radius * 8.0 > 1e9) {
      r.unbounded = r.value > cfg.ceiling;
      r.converged = false;
      r.warning = "optimum not contained in the search ball";
      break;
    }
    center = r.point.tail(ni - off);
    radius *= 8.0;
  }
  normalize(r);
  finish(r);
  return r;
}

}  // namespace transfer
