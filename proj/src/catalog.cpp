#include "transfer/catalog.hpp"

#include <algorithm>
#include <cmath>

#include "transfer/errors.hpp"
#include "transfer/lp.hpp"
#include "transfer/solvers.hpp"

namespace transfer {

namespace {

Evaluation lp_evaluation(const CostMatrix& c, const ProbMeasure& mu, const ProbMeasure& nu) {
  LPSolution s = solve_transport_lp(c, mu, nu);
  Evaluation e;
  e.method = "exact-lp";
  e.tol = 1e-9;
  if (!s.feasible) {
    e.value = kInfinity;
    e.note = "no admissible coupling";
    return e;
  }
  e.value = s.value;
  e.d_mu = -s.phi->values();
  e.d_nu = s.psi->values();
  return e;
}

// T^- g(x) = max_y g(y) - c(x,y), first maximizer on ties.
KantorovichImage c_backward(const CostMatrix& c, const Vec& g) {
  const Mat& m = c.entries();
  Vec out(m.rows());
  Mat k = Mat::Zero(m.rows(), m.cols());
  for (Eigen::Index x = 0; x < m.rows(); ++x) {
    Eigen::Index arg = -1;
    double best = -kInfinity;
    for (Eigen::Index y = 0; y < m.cols(); ++y) {
      if (is_forbidden(m(x, y))) continue;
      const double v = g(y) - m(x, y);
      if (v > best) {
        best = v;
        arg = y;
      }
    }
    if (arg < 0) throw DomainError("backward operator: every pair from '" + c.source()->label(static_cast<std::size_t>(x)) + "' is forbidden");
    out(x) = best;
    k(x, arg) = 1.0;
  }
  return {Potential(c.source(), out), k};
}

// T^+ f(y) = min_x c(x,y) + f(x).
KantorovichImage c_forward(const CostMatrix& c, const Vec& f) {
  const Mat& m = c.entries();
  Vec out(m.cols());
  Mat k = Mat::Zero(m.cols(), m.rows());
  for (Eigen::Index y = 0; y < m.cols(); ++y) {
    Eigen::Index arg = -1;
    double best = kInfinity;
    for (Eigen::Index x = 0; x < m.rows(); ++x) {
      if (is_forbidden(m(x, y))) continue;
      const double v = m(x, y) + f(x);
      if (v < best) {
        best = v;
        arg = x;
      }
    }
    if (arg < 0) throw DomainError("forward operator: every pair into '" + c.target()->label(static_cast<std::size_t>(y)) + "' is forbidden");
    out(y) = best;
    k(y, arg) = 1.0;
  }
  return {Potential(c.target(), out), k};
}

}  // namespace

TransferHandle mk_transfer(const CostMatrix& c) {
  TransferHandle t;
  t.name = "mk";
  t.direction = Direction::Both;
  t.source = c.source();
  t.target = c.target();
  t.cost = c;
  t.finite = c.all_finite();
  t.evaluate = [c](const ProbMeasure& mu, const ProbMeasure& nu) { return lp_evaluation(c, mu, nu); };
  t.kop_backward = [c](const Potential& g) { return c_backward(c, g.values()); };
  t.kop_forward = [c](const Potential& f) { return c_forward(c, f.values()); };
  return t;
}

TransferHandle pushforward_transfer(std::vector<std::size_t> map, const Space& source, const Space& target) {
  if (map.size() != source->size()) throw InputError("pushforward_transfer: map must be total");
  for (std::size_t y : map)
    if (y >= target->size()) throw InputError("pushforward_transfer: image outside target");
  TransferHandle t;
  t.name = "pushforward";
  t.direction = Direction::Backward;
  t.source = source;
  t.target = target;
  t.finite = false;
  t.evaluate = [map, target](const ProbMeasure& mu, const ProbMeasure& nu) {
    Evaluation e;
    e.method = "closed-form";
    const bool ok = (pushforward(map, mu, target).weights() - nu.weights()).cwiseAbs().maxCoeff() <= 1e-10;
    e.value = ok ? 0.0 : kInfinity;
    if (ok) {
      e.d_mu = Vec::Zero(static_cast<Eigen::Index>(mu.size()));
      e.d_nu = Vec::Zero(static_cast<Eigen::Index>(nu.size()));
    }
    return e;
  };
  t.kop_backward = [map, source](const Potential& g) {
    Vec out(static_cast<Eigen::Index>(map.size()));
    Mat k = Mat::Zero(static_cast<Eigen::Index>(map.size()), static_cast<Eigen::Index>(g.size()));
    for (std::size_t x = 0; x < map.size(); ++x) {
      out(static_cast<Eigen::Index>(x)) = g[map[x]];
      k(static_cast<Eigen::Index>(x), static_cast<Eigen::Index>(map[x])) = 1.0;
    }
    return KantorovichImage{Potential(source, out), k};
  };
  t.dirac_support = [map](std::size_t x) { return std::vector<std::size_t>{map[x]}; };
  t.map = map;
  return t;
}

TransferHandle trivial_transfer(const Potential& c1, const Potential& c2) {
  TransferHandle t;
  t.name = "trivial";
  t.direction = Direction::Both;
  t.source = c1.space();
  t.target = c2.space();
  const Vec a = c1.values(), b = c2.values();
  const Space X = t.source, Y = t.target;
  t.evaluate = [a, b](const ProbMeasure& mu, const ProbMeasure& nu) {
    Evaluation e;
    e.method = "closed-form";
    e.value = b.dot(nu.weights()) - a.dot(mu.weights());
    e.d_mu = -a;
    e.d_nu = b;
    return e;
  };
  t.kop_backward = [a, b, X](const Potential& g) {
    Eigen::Index arg;
    const double m = (g.values() - b).maxCoeff(&arg);
    Mat k = Mat::Zero(a.size(), b.size());
    k.col(arg).setOnes();
    return KantorovichImage{Potential(X, a.array() + m), k};
  };
  t.kop_forward = [a, b, Y](const Potential& f) {
    Eigen::Index arg;
    const double m = (f.values() - a).minCoeff(&arg);
    Mat k = Mat::Zero(b.size(), a.size());
    k.col(arg).setOnes();
    return KantorovichImage{Potential(Y, b.array() + m), k};
  };
  return t;
}

TransferHandle tv_transfer(const Space& space) {
  const auto n = static_cast<Eigen::Index>(space->size());
  Mat ham = Mat::Ones(n, n);
  ham.diagonal().setZero();
  CostMatrix c(space, space, ham);
  TransferHandle t;
  t.name = "tv";
  t.direction = Direction::Both;
  t.source = t.target = space;
  t.cost = c;
  t.evaluate = [c](const ProbMeasure& mu, const ProbMeasure& nu) {
    Evaluation e = lp_evaluation(c, mu, nu);
    e.value = total_variation(mu, nu);
    e.method = "closed-form";
    return e;
  };
  // max{ max_{y != x} g(y) - 1, g(x) }
  t.kop_backward = [space, n](const Potential& g) {
    Vec out(n);
    Mat k = Mat::Zero(n, n);
    for (Eigen::Index x = 0; x < n; ++x) {
      Eigen::Index arg = x;
      double best = g[static_cast<std::size_t>(x)];
      for (Eigen::Index y = 0; y < n; ++y)
        if (y != x && g[static_cast<std::size_t>(y)] - 1.0 > best) {
          best = g[static_cast<std::size_t>(y)] - 1.0;
          arg = y;
        }
      out(x) = best;
      k(x, arg) = 1.0;
    }
    return KantorovichImage{Potential(space, out), k};
  };
  // min{ min_{x != y} f(x) + 1, f(y) }
  t.kop_forward = [space, n](const Potential& f) {
    Vec out(n);
    Mat k = Mat::Zero(n, n);
    for (Eigen::Index y = 0; y < n; ++y) {
      Eigen::Index arg = y;
      double best = f[static_cast<std::size_t>(y)];
      for (Eigen::Index x = 0; x < n; ++x)
        if (x != y && f[static_cast<std::size_t>(x)] + 1.0 < best) {
          best = f[static_cast<std::size_t>(x)] + 1.0;
          arg = x;
        }
      out(y) = best;
      k(y, arg) = 1.0;
    }
    return KantorovichImage{Potential(space, out), k};
  };
  return t;
}

TransferHandle kr_transfer(const CostMatrix& d) {
  if (!same_space(d.source(), d.target())) throw InputError("kr_transfer: metric must live on one space");
  const Mat& m = d.entries();
  const auto n = m.rows();
  const double tol = 1e-12 * (1.0 + m.cwiseAbs().maxCoeff());
  for (Eigen::Index x = 0; x < n; ++x)
    for (Eigen::Index y = 0; y < n; ++y) {
      if (is_forbidden(m(x, y))) throw InputError("kr_transfer: metric must be finite");
      if (x == y && m(x, y) != 0.0) throw InputError("kr_transfer: metric needs a zero diagonal");
      if (x != y && !(m(x, y) > 0.0)) throw InputError("kr_transfer: metric must separate points");
      if (std::abs(m(x, y) - m(y, x)) > tol) throw InputError("kr_transfer: metric must be symmetric");
      for (Eigen::Index z = 0; z < n; ++z)
        if (m(x, z) > m(x, y) + m(y, z) + tol) throw InputError("kr_transfer: triangle inequality fails");
    }
  TransferHandle t = mk_transfer(d);
  t.name = "kr";
  return t;
}

double discrete_legendre(const std::vector<double>& coords, const Vec& h, double p, std::size_t* arg) {
  double best = -kInfinity;
  for (std::size_t i = 0; i < coords.size(); ++i) {
    const double v = p * coords[i] - h(static_cast<Eigen::Index>(i));
    if (v > best) {
      best = v;
      if (arg) *arg = i;
    }
  }
  return best;
}

TransferHandle brenier_transfer(const Space& grid) {
  const auto& x = grid->coords();
  const auto n = static_cast<Eigen::Index>(x.size());
  Mat c(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j) c(i, j) = x[static_cast<std::size_t>(i)] * x[static_cast<std::size_t>(j)];
  TransferHandle t = mk_transfer(CostMatrix(grid, grid, c));
  t.name = "brenier";
  // T^+ f(x) = -f*(-x)
  t.kop_forward = [grid, x, n](const Potential& f) {
    Vec out(n);
    Mat k = Mat::Zero(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
      std::size_t arg = 0;
      out(i) = -discrete_legendre(x, f.values(), -x[static_cast<std::size_t>(i)], &arg);
      k(i, static_cast<Eigen::Index>(arg)) = 1.0;
    }
    return KantorovichImage{Potential(grid, out), k};
  };
  // T^- g(y) = (-g)*(-y)
  t.kop_backward = [grid, x, n](const Potential& g) {
    Vec out(n);
    Mat k = Mat::Zero(n, n);
    const Vec neg = -g.values();
    for (Eigen::Index i = 0; i < n; ++i) {
      std::size_t arg = 0;
      out(i) = discrete_legendre(x, neg, -x[static_cast<std::size_t>(i)], &arg);
      k(i, static_cast<Eigen::Index>(arg)) = 1.0;
    }
    return KantorovichImage{Potential(grid, out), k};
  };
  return t;
}

bool convex_order(const ProbMeasure& mu, const ProbMeasure& nu) {
  const Vec a = mu.space()->coord_vector(), b = nu.space()->coord_vector();
  const double scale = 1.0 + std::max(a.cwiseAbs().maxCoeff(), b.cwiseAbs().maxCoeff());
  const double tol = 1e-10 * scale;
  if (std::abs(a.dot(mu.weights()) - b.dot(nu.weights())) > tol) return false;
  std::vector<double> knots(a.data(), a.data() + a.size());
  knots.insert(knots.end(), b.data(), b.data() + b.size());
  for (double k : knots) {
    const double cm = (a.array() - k).cwiseMax(0.0).matrix().dot(mu.weights());
    const double cn = (b.array() - k).cwiseMax(0.0).matrix().dot(nu.weights());
    if (cm > cn + tol) return false;
  }
  return true;
}

TransferHandle martingale_transfer(const CostMatrix& c) {
  if (!c.all_finite()) throw InputError("martingale_transfer: cost must be finite");
  const Space X = c.source(), Y = c.target();
  const Vec xc = X->coord_vector(), yc = Y->coord_vector();
  TransferHandle t;
  t.name = "martingale";
  t.direction = Direction::Backward;
  t.source = X;
  t.target = Y;
  t.finite = false;
  t.affine_invariant = true;
  t.evaluate = [c, xc, yc](const ProbMeasure& mu, const ProbMeasure& nu) {
    const auto m = static_cast<std::size_t>(xc.size()), n = static_cast<std::size_t>(yc.size());
    LinearProgram lp;
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < n; ++j) lp.add_variable(c(i, j));
    auto var = [n](std::size_t i, std::size_t j) { return i * n + j; };
    for (std::size_t i = 0; i < m; ++i) {
      std::vector<std::pair<std::size_t, double>> r;
      for (std::size_t j = 0; j < n; ++j) r.emplace_back(var(i, j), 1.0);
      lp.add_constraint(r, Sense::Equal, mu[i]);
    }
    for (std::size_t j = 0; j < n; ++j) {
      std::vector<std::pair<std::size_t, double>> r;
      for (std::size_t i = 0; i < m; ++i) r.emplace_back(var(i, j), 1.0);
      lp.add_constraint(r, Sense::Equal, nu[j]);
    }
    std::vector<std::size_t> bary_row(m, SIZE_MAX);
    for (std::size_t i = 0; i < m; ++i) {
      if (mu[i] <= 0.0) continue;
      std::vector<std::pair<std::size_t, double>> r;
      for (std::size_t j = 0; j < n; ++j) r.emplace_back(var(i, j), yc(static_cast<Eigen::Index>(j)));
      bary_row[i] = lp.num_constraints();
      lp.add_constraint(r, Sense::Equal, xc(static_cast<Eigen::Index>(i)) * mu[i]);
    }
    const LpResult res = lp.minimize();
    const bool ordered = convex_order(mu, nu);
    const bool feasible = res.status == LpStatus::Optimal;
    if (res.status == LpStatus::Unbounded || res.status == LpStatus::IterationLimit)
      throw ConvergenceError("martingale LP did not terminate normally");
    if (ordered != feasible)
      throw ConsistencyError("martingale: LP feasibility disagrees with the convex-order check");
    Evaluation e;
    e.method = "exact-lp";
    e.tol = 1e-9;
    if (!feasible) {
      e.value = kInfinity;
      e.note = "marginals are not in convex order";
      return e;
    }
    e.value = res.value;
    Vec dm(static_cast<Eigen::Index>(m)), dn(static_cast<Eigen::Index>(n));
    for (std::size_t i = 0; i < m; ++i) {
      dm(static_cast<Eigen::Index>(i)) = res.duals[i];
      if (bary_row[i] != SIZE_MAX) dm(static_cast<Eigen::Index>(i)) += xc(static_cast<Eigen::Index>(i)) * res.duals[bary_row[i]];
    }
    for (std::size_t j = 0; j < n; ++j) dn(static_cast<Eigen::Index>(j)) = res.duals[m + j];
    e.d_mu = dm;
    e.d_nu = dn;
    std::size_t off = 0;
    for (std::size_t i = 0; i < m; ++i) off += mu[i] <= 0.0;
    if (off > 0) e.note = std::to_string(off) + " source point(s) off the support carry no barycenter constraint";
    return e;
  };
  // Concave envelope of y -> f(y) - c(x,y), read at coords(x).
  t.kop_backward = [c, X, xc, yc](const Potential& f) {
    const auto m = xc.size(), n = yc.size();
    Vec out(m);
    Mat k = Mat::Zero(m, n);
    std::vector<double> ts(yc.data(), yc.data() + n);
    for (Eigen::Index i = 0; i < m; ++i) {
      std::vector<double> vs(static_cast<std::size_t>(n));
      for (Eigen::Index j = 0; j < n; ++j) vs[static_cast<std::size_t>(j)] = f.values()(j) - c.entries()(i, j);
      EnvelopeResult env = concave_envelope_1d(ts, vs);
      std::size_t a, b;
      double w;
      if (!env.locate(xc(i), a, b, w))
        throw DomainError("martingale operator: source coordinate outside the target range");
      out(i) = env(xc(i));
      k(i, static_cast<Eigen::Index>(env.knots()[a].source)) += 1.0 - w;
      k(i, static_cast<Eigen::Index>(env.knots()[b].source)) += w;
    }
    return KantorovichImage{Potential(X, out), k};
  };
  return t;
}

TransferHandle barycentric_transfer(const Space& source, const Space& target) {
  const Vec xc = source->coord_vector(), yc = target->coord_vector();
  TransferHandle t;
  t.name = "barycentric";
  t.direction = Direction::Backward;
  t.source = source;
  t.target = target;
  t.evaluate = [xc, yc](const ProbMeasure& mu, const ProbMeasure& nu) {
    const auto m = static_cast<std::size_t>(xc.size()), n = static_cast<std::size_t>(yc.size());
    LinearProgram lp;
    for (std::size_t i = 0; i < m * n; ++i) lp.add_variable(0.0);
    std::vector<std::size_t> s(m);
    for (std::size_t i = 0; i < m; ++i) s[i] = lp.add_variable(1.0);
    for (std::size_t i = 0; i < m; ++i) {
      std::vector<std::pair<std::size_t, double>> r;
      for (std::size_t j = 0; j < n; ++j) r.emplace_back(i * n + j, 1.0);
      lp.add_constraint(r, Sense::Equal, mu[i]);
    }
    for (std::size_t j = 0; j < n; ++j) {
      std::vector<std::pair<std::size_t, double>> r;
      for (std::size_t i = 0; i < m; ++i) r.emplace_back(i * n + j, 1.0);
      lp.add_constraint(r, Sense::Equal, nu[j]);
    }
    // s_x >= |mu(x) coords(x) - sum_y coords(y) pi(x,y)|
    for (std::size_t i = 0; i < m; ++i) {
      std::vector<std::pair<std::size_t, double>> up{{s[i], 1.0}}, dn{{s[i], 1.0}};
      for (std::size_t j = 0; j < n; ++j) {
        up.emplace_back(i * n + j, yc(static_cast<Eigen::Index>(j)));
        dn.emplace_back(i * n + j, -yc(static_cast<Eigen::Index>(j)));
      }
      lp.add_constraint(up, Sense::GreaterEq, mu[i] * xc(static_cast<Eigen::Index>(i)));
      lp.add_constraint(dn, Sense::GreaterEq, -mu[i] * xc(static_cast<Eigen::Index>(i)));
    }
    const LpResult r = lp.minimize();
    if (r.status != LpStatus::Optimal) throw ConvergenceError(std::string("barycentric LP: ") + to_string(r.status));
    Evaluation e;
    e.method = "exact-lp";
    e.tol = 1e-9;
    e.value = r.value;
    Vec dm(static_cast<Eigen::Index>(m)), dnv(static_cast<Eigen::Index>(n));
    for (std::size_t i = 0; i < m; ++i) {
      const std::size_t base = m + n + 2 * i;
      dm(static_cast<Eigen::Index>(i)) =
          r.duals[i] + xc(static_cast<Eigen::Index>(i)) * (r.duals[base] - r.duals[base + 1]);
    }
    for (std::size_t j = 0; j < n; ++j) dnv(static_cast<Eigen::Index>(j)) = r.duals[m + j];
    e.d_mu = dm;
    e.d_nu = dnv;
    return e;
  };
  // max over t of f**(t) - |t - x|; the maximum sits at a hull knot or at t = x.
  t.kop_backward = [source, xc, yc](const Potential& f) {
    const auto m = xc.size(), n = yc.size();
    std::vector<double> ts(yc.data(), yc.data() + n);
    std::vector<double> vs(f.values().data(), f.values().data() + n);
    EnvelopeResult env = concave_envelope_1d(ts, vs);
    Vec out(m);
    Mat k = Mat::Zero(m, n);
    for (Eigen::Index i = 0; i < m; ++i) {
      std::vector<double> cand(ts);
      if (xc(i) >= ts.front() && xc(i) <= ts.back()) cand.push_back(xc(i));
      double best = -kInfinity, tbest = ts.front();
      for (double tt : cand) {
        const double v = env(tt) - std::abs(tt - xc(i));
        if (v > best) {
          best = v;
          tbest = tt;
        }
      }
      std::size_t a, b;
      double w;
      env.locate(tbest, a, b, w);
      out(i) = best;
      k(i, static_cast<Eigen::Index>(env.knots()[a].source)) += 1.0 - w;
      k(i, static_cast<Eigen::Index>(env.knots()[b].source)) += w;
    }
    return KantorovichImage{Potential(source, out), k};
  };
  return t;
}

}  // namespace transfer
