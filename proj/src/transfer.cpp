#include "transfer/transfer.hpp"

#include <cmath>

#include "transfer/errors.hpp"

namespace transfer {

const char* to_string(Direction d) {
  switch (d) {
    case Direction::Backward: return "backward";
    case Direction::Forward: return "forward";
    case Direction::Both: return "both";
  }
  return "?";
}

void TransferHandle::check_arguments(const ProbMeasure& mu, const ProbMeasure& nu) const {
  require_same_space(source, mu.space(), (name + " (first argument)").c_str());
  require_same_space(target, nu.space(), (name + " (second argument)").c_str());
}

double TransferHandle::eval(const ProbMeasure& mu, const ProbMeasure& nu) const {
  check_arguments(mu, nu);
  return evaluate(mu, nu).value;
}

Potential TransferHandle::backward(const Potential& g) const {
  if (!kop_backward) throw DomainError(name + ": no backward Kantorovich operator");
  require_same_space(target, g.space(), (name + " backward operator").c_str());
  return kop_backward(g).values;
}

Potential TransferHandle::forward(const Potential& f) const {
  if (!kop_forward) throw DomainError(name + ": no forward Kantorovich operator");
  require_same_space(source, f.space(), (name + " forward operator").c_str());
  return kop_forward(f).values;
}

KantorovichImage apply(const Operator& op, const Potential& f) { return op(f); }

Operator compose(const Operator& outer, const Operator& inner) {
  return [outer, inner](const Potential& f) {
    KantorovichImage a = inner(f);
    KantorovichImage b = outer(a.values);
    return KantorovichImage{b.values, b.kernel * a.kernel};
  };
}

Probe backward_dual_objective(const Operator& op, const ProbMeasure& mu, const ProbMeasure& nu, const Vec& g) {
  KantorovichImage img = op(Potential(nu.space(), g));
  const double v = g.dot(nu.weights()) - img.values.values().dot(mu.weights());
  Vec grad = nu.weights() - img.kernel.transpose() * mu.weights();
  return {v, grad};
}

DualReport backward_dual(const TransferHandle& t, const ProbMeasure& mu, const ProbMeasure& nu,
                         const AscentConfig& cfg) {
  t.check_arguments(mu, nu);
  if (!t.kop_backward) throw DomainError(t.name + ": no backward Kantorovich operator");
  DualReport r;
  const std::size_t n = t.target->size();
  if (t.affine_invariant && n >= 2) {
    const Vec xs = t.source->coord_vector(), ys = t.target->coord_vector();
    const double drift = ys.dot(nu.weights()) - xs.dot(mu.weights());
    if (std::abs(drift) > 1e-10 * (1.0 + ys.cwiseAbs().maxCoeff())) {
      r.value = r.upper_bound = kInfinity;
      r.ascent.unbounded = true;
      r.ascent.warning = "means differ; the dual is unbounded along affine potentials";
      r.potential.emplace(t.target, Vec::Zero(static_cast<Eigen::Index>(n)));
      return r;
    }
    // Every potential is an affine function plus one vanishing at both ends.
    auto embed = [n](const Vec& h) {
      Vec g = Vec::Zero(static_cast<Eigen::Index>(n));
      g.segment(1, static_cast<Eigen::Index>(n) - 2) = h;
      return g;
    };
    ConcaveOracle f = [&](const Vec& h) {
      Probe p = backward_dual_objective(t.kop_backward, mu, nu, embed(h));
      return Probe{p.value, p.grad.segment(1, static_cast<Eigen::Index>(n) - 2)};
    };
    if (n == 2) {
      r.ascent.point = Vec::Zero(0);
      r.ascent.value = r.ascent.upper_bound = f(r.ascent.point).value;
      r.ascent.converged = true;
    } else {
      r.ascent = maximize_concave_over_potentials(n - 2, f, cfg, false);
    }
    r.ascent.point = embed(r.ascent.point);
  } else {
    ConcaveOracle f = [&](const Vec& g) { return backward_dual_objective(t.kop_backward, mu, nu, g); };
    r.ascent = maximize_concave_over_potentials(n, f, cfg, true);
  }
  r.value = r.ascent.unbounded ? kInfinity : r.ascent.value;
  r.upper_bound = r.ascent.unbounded ? kInfinity : r.ascent.upper_bound;
  r.potential.emplace(t.target, r.ascent.point);
  return r;
}

DualReport forward_dual(const TransferHandle& t, const ProbMeasure& mu, const ProbMeasure& nu,
                        const AscentConfig& cfg) {
  t.check_arguments(mu, nu);
  if (!t.kop_forward) throw DomainError(t.name + ": no forward Kantorovich operator");
  ConcaveOracle f = [&](const Vec& x) {
    KantorovichImage img = t.kop_forward(Potential(t.source, x));
    const double v = img.values.values().dot(nu.weights()) - x.dot(mu.weights());
    Vec grad = img.kernel.transpose() * nu.weights() - mu.weights();
    return Probe{v, grad};
  };
  DualReport r;
  r.ascent = maximize_concave_over_potentials(t.source->size(), f, cfg, true);
  r.value = r.ascent.unbounded ? kInfinity : r.ascent.value;
  r.upper_bound = r.ascent.unbounded ? kInfinity : r.ascent.upper_bound;
  r.potential.emplace(t.source, r.ascent.point);
  return r;
}

FamilyDualReport family_dual(const ConvexTransferHandle& t, const ProbMeasure& mu, const ProbMeasure& nu,
                             const AscentConfig& cfg) {
  require_same_space(t.source, mu.space(), "family_dual");
  require_same_space(t.target, nu.space(), "family_dual");
  if (t.index.empty()) throw InputError(t.name + ": empty family");
  // Members need not be translation covariant (they carry additive offsets),
  // but the dual objective still is, since <1,nu> = <1,mu> = 1.
  auto member_value = [&](double s, Vec* point) {
    Operator op = t.member(s);
    ConcaveOracle f = [&](const Vec& g) { return backward_dual_objective(op, mu, nu, g); };
    AscentResult r = maximize_concave_over_potentials(t.target->size(), f, cfg, true);
    if (point) *point = r.point;
    return r.unbounded ? kInfinity : r.value;
  };
  FamilyDualReport rep;
  std::size_t arg = 0;
  std::vector<double> vals(t.index.size());
  Vec best_point;
  for (std::size_t k = 0; k < t.index.size(); ++k) {
    Vec p;
    vals[k] = member_value(t.index[k], &p);
    if (k == 0 || vals[k] > vals[arg]) {
      arg = k;
      best_point = p;
    }
  }
  rep.grid_value = rep.value = vals[arg];
  rep.best_index = t.index[arg];
  if (t.continuous_index && t.index.size() > 1) {
    // The member dual is concave in the parameter; refine on a log scale.
    const double a = std::log(t.index[arg == 0 ? 0 : arg - 1]);
    const double b = std::log(t.index[std::min(arg + 1, t.index.size() - 1)]);
    const double ls = golden_section_max([&](double u) { return member_value(std::exp(u), nullptr); }, a, b, 1e-10, 80);
    Vec p;
    const double v = member_value(std::exp(ls), &p);
    if (v > rep.value) {
      rep.value = v;
      rep.best_index = std::exp(ls);
      best_point = p;
    }
  }
  rep.potential.emplace(t.target, best_point);
  return rep;
}

}  // namespace transfer
