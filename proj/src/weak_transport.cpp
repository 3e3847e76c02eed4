#include <algorithm>
#include <cmath>
#include <numeric>

#include "transfer/catalog.hpp"
#include "transfer/errors.hpp"
#include "transfer/lp.hpp"
#include "transfer/solvers.hpp"

namespace transfer {

namespace {

std::vector<std::size_t> allowed_targets(const SupportFn& support, std::size_t x, std::size_t n) {
  std::vector<std::size_t> out;
  if (support) out = support(x);
  if (out.empty()) {
    out.resize(n);
    std::iota(out.begin(), out.end(), 0);
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  for (std::size_t y : out)
    if (y >= n) throw InputError("weak transport: support index outside the target space");
  return out;
}

struct Cut {
  std::size_t x;
  Vec slope;   // supergradient in sigma
  double off;  // c_k - slope . sigma_k
};

}  // namespace

Evaluation weak_transport_eval(const ProbMeasure& mu, const ProbMeasure& nu, const WeakCostOracle& cost,
                               const SupportFn& support, double tol, int max_rounds) {
  const std::size_t m = mu.size(), n = nu.size();
  std::vector<std::vector<std::size_t>> allowed(m);
  for (std::size_t x = 0; x < m; ++x) allowed[x] = allowed_targets(support, x, n);

  // Feasibility of the support pattern alone.
  {
    Mat pattern = Mat::Constant(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(n), kForbidden);
    for (std::size_t x = 0; x < m; ++x)
      for (std::size_t y : allowed[x]) pattern(static_cast<Eigen::Index>(x), static_cast<Eigen::Index>(y)) = 0.0;
    if (!solve_transport_lp(CostMatrix(mu.space(), nu.space(), pattern), mu, nu).feasible) {
      Evaluation e;
      e.method = "exact-lp";
      e.note = "no admissible coupling";
      return e;
    }
  }

  std::vector<Cut> cuts;
  auto add_cut = [&](std::size_t x, const Vec& sigma) {
    Probe p = cost(x, sigma);
    if (!std::isfinite(p.value)) return;
    if (p.grad.size() != static_cast<Eigen::Index>(n)) throw InputError("weak transport: oracle gradient has wrong size");
    cuts.push_back({x, p.grad, p.value - p.grad.dot(sigma)});
  };
  for (std::size_t x = 0; x < m; ++x) {
    Vec restricted = Vec::Zero(static_cast<Eigen::Index>(n));
    double mass = 0.0;
    for (std::size_t y : allowed[x]) mass += nu[y];
    for (std::size_t y : allowed[x]) {
      Vec d = Vec::Zero(static_cast<Eigen::Index>(n));
      d(static_cast<Eigen::Index>(y)) = 1.0;
      add_cut(x, d);
      restricted(static_cast<Eigen::Index>(y)) = mass > 0.0 ? nu[y] / mass : 1.0 / static_cast<double>(allowed[x].size());
    }
    add_cut(x, restricted);
  }

  Evaluation e;
  e.method = "cutting-plane";
  e.tol = tol;
  double upper = kInfinity;
  double best_gap = kInfinity;
  int stalled = 0;
  for (int round = 0; round < max_rounds; ++round) {
    LinearProgram lp;
    std::vector<std::vector<std::size_t>> var(m, std::vector<std::size_t>(n, SIZE_MAX));
    for (std::size_t x = 0; x < m; ++x)
      for (std::size_t y : allowed[x]) var[x][y] = lp.add_variable(0.0);
    std::vector<std::size_t> z(m);
    for (std::size_t x = 0; x < m; ++x) z[x] = lp.add_variable(1.0, true);
    for (std::size_t x = 0; x < m; ++x) {
      std::vector<std::pair<std::size_t, double>> r;
      for (std::size_t y : allowed[x]) r.emplace_back(var[x][y], 1.0);
      lp.add_constraint(r, Sense::Equal, mu[x]);
    }
    for (std::size_t y = 0; y < n; ++y) {
      std::vector<std::pair<std::size_t, double>> r;
      for (std::size_t x = 0; x < m; ++x)
        if (var[x][y] != SIZE_MAX) r.emplace_back(var[x][y], 1.0);
      lp.add_constraint(r, Sense::Equal, nu[y]);
    }
    // z_x >= mu(x) off_k + slope_k . pi_x
    for (const Cut& c : cuts) {
      std::vector<std::pair<std::size_t, double>> r{{z[c.x], 1.0}};
      for (std::size_t y : allowed[c.x]) r.emplace_back(var[c.x][y], -c.slope(static_cast<Eigen::Index>(y)));
      lp.add_constraint(r, Sense::GreaterEq, mu[c.x] * c.off);
    }
    const LpResult res = lp.minimize();
    if (res.status != LpStatus::Optimal)
      throw ConvergenceError(std::string("weak transport LP: ") + to_string(res.status));

    double truth = 0.0;
    std::vector<Vec> sigma(m);
    for (std::size_t x = 0; x < m; ++x) {
      if (mu[x] <= 0.0) continue;
      Vec s = Vec::Zero(static_cast<Eigen::Index>(n));
      for (std::size_t y : allowed[x]) s(static_cast<Eigen::Index>(y)) = std::max(0.0, res.x[var[x][y]]) / mu[x];
      s /= s.sum();
      sigma[x] = s;
      truth += mu[x] * cost(x, s).value;
    }
    upper = std::min(upper, truth);
    const double lower = res.value;

    Vec dm(static_cast<Eigen::Index>(m)), dn(static_cast<Eigen::Index>(n));
    for (std::size_t x = 0; x < m; ++x) dm(static_cast<Eigen::Index>(x)) = res.duals[x];
    for (std::size_t y = 0; y < n; ++y) dn(static_cast<Eigen::Index>(y)) = res.duals[m + y];
    for (std::size_t k = 0; k < cuts.size(); ++k)
      dm(static_cast<Eigen::Index>(cuts[k].x)) += res.duals[m + n + k] * cuts[k].off;
    e.d_mu = dm;
    e.d_nu = dn;
    e.value = upper;

    const double gap = upper - lower;
    if (gap <= tol * (1.0 + std::abs(upper))) {
      e.converged = true;
      return e;
    }
    // The LP solves to about 1e-10; stop once the gap stops shrinking there.
    stalled = gap < 0.99 * best_gap ? 0 : stalled + 1;
    best_gap = std::min(best_gap, gap);
    if (stalled >= 5) {
      e.converged = best_gap <= 1e-7 * (1.0 + std::abs(upper));
      e.note = "cutting planes stalled at gap " + std::to_string(best_gap);
      return e;
    }
    const std::size_t before = cuts.size();
    for (std::size_t x = 0; x < m; ++x) {
      if (mu[x] <= 0.0) continue;
      if (mu[x] * cost(x, sigma[x]).value > res.x[z[x]] + 0.1 * tol) add_cut(x, sigma[x]);
    }
    if (cuts.size() == before) {
      e.converged = true;
      return e;
    }
  }
  e.converged = false;
  e.note = "cutting-plane round limit reached";
  return e;
}

TransferHandle weak_ot_transfer(const Space& source, const Space& target, WeakCostOracle cost, SupportFn support,
                                const std::string& name) {
  TransferHandle t;
  t.name = name;
  t.direction = Direction::Backward;
  t.source = source;
  t.target = target;
  t.evaluate = [cost, support](const ProbMeasure& mu, const ProbMeasure& nu) {
    return weak_transport_eval(mu, nu, cost, support);
  };
  const std::size_t n = target->size();
  t.kop_backward = [source, cost, support, n](const Potential& g) {
    const std::size_t m = source->size();
    Vec out(static_cast<Eigen::Index>(m));
    Mat k = Mat::Zero(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(n));
    AscentConfig cfg;
    cfg.tol = 1e-12;
    for (std::size_t x = 0; x < m; ++x) {
      const auto ys = allowed_targets(support, x, n);
      auto embed = [&](const Vec& r) {
        Vec s = Vec::Zero(static_cast<Eigen::Index>(n));
        for (std::size_t i = 0; i < ys.size(); ++i) s(static_cast<Eigen::Index>(ys[i])) = r(static_cast<Eigen::Index>(i));
        return s;
      };
      auto oracle = [&](const Vec& r) {
        const Vec s = embed(r);
        Probe p = cost(x, s);
        Probe q{-kInfinity, Vec::Zero(r.size())};
        double lin = 0.0;
        for (std::size_t i = 0; i < ys.size(); ++i) {
          lin += g[ys[i]] * r(static_cast<Eigen::Index>(i));
          q.grad(static_cast<Eigen::Index>(i)) = g[ys[i]] - p.grad(static_cast<Eigen::Index>(ys[i]));
        }
        q.value = lin - p.value;
        return q;
      };
      // Best vertex as a floor for the ascent.
      double best = -kInfinity;
      Vec arg;
      for (std::size_t i = 0; i < ys.size(); ++i) {
        Vec r = Vec::Zero(static_cast<Eigen::Index>(ys.size()));
        r(static_cast<Eigen::Index>(i)) = 1.0;
        const double v = oracle(r).value;
        if (v > best) {
          best = v;
          arg = r;
        }
      }
      if (ys.size() > 1) {
        AscentResult a = maximize_concave_over_simplex(ys.size(), oracle, cfg);
        if (a.value > best) {
          best = a.value;
          arg = a.point;
        }
      }
      out(static_cast<Eigen::Index>(x)) = best;
      k.row(static_cast<Eigen::Index>(x)) = embed(arg).transpose();
    }
    return KantorovichImage{Potential(source, out), k};
  };
  if (support) t.dirac_support = support;
  return t;
}

TransferHandle marton_transfer(const MartonParams& p) {
  const ScalarFn gamma = p.gamma;
  const CostMatrix d = p.d;
  if (gamma.concave()) throw InputError("marton_transfer: gamma must be convex");
  if (!d.all_finite()) throw InputError("marton_transfer: d must be finite");
  {
    const double lo = std::max(gamma.domain_min(), d.entries().minCoeff());
    const double hi = std::max(lo, std::min(gamma.domain_max(), d.entries().maxCoeff()));
    for (int i = 0; i <= 32; ++i)
      for (int j = i + 2; j <= 32; j += 2) {
        const double a = lo + (hi - lo) * i / 32.0, b = lo + (hi - lo) * j / 32.0;
        const double mid = gamma(0.5 * (a + b));
        if (mid > 0.5 * (gamma(a) + gamma(b)) + 1e-10 * (1.0 + std::abs(mid)))
          throw InputError("marton_transfer: gamma fails the midpoint convexity check");
      }
  }
  const Space X = d.source(), Y = d.target();
  const std::size_t n = Y->size();
  WeakCostOracle cost = [gamma, d, n](std::size_t x, const Vec& sigma) {
    const Vec row = d.entries().row(static_cast<Eigen::Index>(x)).transpose();
    const double t = row.dot(sigma);
    const double v = gamma(t);
    if (!std::isfinite(v)) throw DomainError("marton: gamma undefined at " + std::to_string(t));
    return Probe{v, gamma.derivative(t) * row};
  };
  TransferHandle t = weak_ot_transfer(X, Y, cost, nullptr, "marton");
  // T^- f(x) = max_t U_x(t) - gamma(t), U_x the upper hull of (d(x,y), f(y)).
  t.kop_backward = [gamma, d, X, n](const Potential& f) {
    const std::size_t m = X->size();
    Vec out(static_cast<Eigen::Index>(m));
    Mat k = Mat::Zero(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(n));
    std::vector<double> vs(f.values().data(), f.values().data() + n);
    for (std::size_t x = 0; x < m; ++x) {
      std::vector<double> ts(n);
      for (std::size_t y = 0; y < n; ++y) ts[y] = d(x, y);
      const EnvelopeResult env = concave_envelope_1d(ts, vs);
      const auto& kn = env.knots();
      auto obj = [&](double s) { return env(s) - gamma(s); };
      double best = -kInfinity, tbest = kn.front().t;
      for (const auto& knot : kn) {
        const double v = obj(knot.t);
        if (v > best) {
          best = v;
          tbest = knot.t;
        }
      }
      for (std::size_t i = 0; i + 1 < kn.size(); ++i) {
        const double a = kn[i].t, b = kn[i + 1].t;
        const double s = golden_section_max(obj, a, b);
        const double v = obj(s);
        if (v > best) {
          best = v;
          tbest = s;
        }
      }
      if (!std::isfinite(best)) throw DomainError("marton operator: gamma undefined on the hull range");
      std::size_t i, j;
      double w;
      env.locate(tbest, i, j, w);
      out(static_cast<Eigen::Index>(x)) = best;
      k(static_cast<Eigen::Index>(x), static_cast<Eigen::Index>(kn[i].source)) += 1.0 - w;
      k(static_cast<Eigen::Index>(x), static_cast<Eigen::Index>(kn[j].source)) += w;
    }
    return KantorovichImage{Potential(X, out), k};
  };
  return t;
}

}  // namespace transfer
