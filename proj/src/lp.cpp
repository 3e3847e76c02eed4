#include "transfer/lp.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <limits>

#include "transfer/errors.hpp"

namespace transfer {

std::size_t LinearProgram::add_variable(double cost, bool free) {
  cost_.push_back(cost);
  free_.push_back(free);
  return cost_.size() - 1;
}

void LinearProgram::add_constraint(std::vector<std::pair<std::size_t, double>> terms, Sense sense, double rhs) {
  for (const auto& [j, a] : terms)
    if (j >= cost_.size()) throw InputError("lp: constraint references unknown variable");
  rows_.push_back({std::move(terms), sense, rhs});
}

const char* to_string(LpStatus s) {
  switch (s) {
    case LpStatus::Optimal: return "optimal";
    case LpStatus::Infeasible: return "infeasible";
    case LpStatus::Unbounded: return "unbounded";
    case LpStatus::IterationLimit: return "iteration-limit";
  }
  return "?";
}

namespace {

constexpr double kPivotEps = 1e-9;
constexpr double kCostEps = 1e-10;
constexpr double kHarrisTol = 1e-10;

struct Tableau {
  std::size_t m, n;  // rows, structural+slack+artificial columns
  std::vector<double> a;  // (m+1) x (n+1); last row objective, last column rhs
  std::vector<std::size_t> basis;
  Eigen::MatrixXd original;  // m x (n+1), the starting rows
  std::vector<double> cost;  // current objective over all columns
  std::size_t since_refresh = 0;

  double& at(std::size_t i, std::size_t j) { return a[i * (n + 1) + j]; }
  double at(std::size_t i, std::size_t j) const { return a[i * (n + 1) + j]; }

  void pivot(std::size_t r, std::size_t c) {
    const double p = at(r, c);
    for (std::size_t j = 0; j <= n; ++j) at(r, j) /= p;
    at(r, c) = 1.0;
    for (std::size_t i = 0; i <= m; ++i) {
      if (i == r) continue;
      const double f = at(i, c);
      if (f == 0.0) continue;
      double* ri = &a[i * (n + 1)];
      const double* rr = &a[r * (n + 1)];
      for (std::size_t j = 0; j <= n; ++j) ri[j] -= f * rr[j];
      ri[c] = 0.0;
    }
    basis[r] = c;
  }

  // Recomputes the tableau from the starting rows and the current basis,
  // discarding accumulated rounding. Returns false if the basis is singular.
  bool reinvert() {
    since_refresh = 0;
    Eigen::MatrixXd b(m, m);
    for (std::size_t i = 0; i < m; ++i) b.col(static_cast<Eigen::Index>(i)) = original.col(static_cast<Eigen::Index>(basis[i]));
    Eigen::PartialPivLU<Eigen::MatrixXd> lu(b);
    if (std::abs(lu.determinant()) < 1e-300 || !std::isfinite(lu.determinant())) return false;
    const Eigen::MatrixXd fresh = lu.solve(original);
    if (!fresh.allFinite()) return false;
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j <= n; ++j) at(i, j) = fresh(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
    for (std::size_t i = 0; i < m; ++i) {
      at(i, basis[i]) = 1.0;
      if (at(i, n) < 0.0 && at(i, n) > -1e-9) at(i, n) = 0.0;
    }
    for (std::size_t j = 0; j <= n; ++j) {
      double r = j < n ? cost[j] : 0.0;
      for (std::size_t i = 0; i < m; ++i) r -= cost[basis[i]] * at(i, j);
      at(m, j) = r;
    }
    for (std::size_t i = 0; i < m; ++i) at(m, basis[i]) = 0.0;
    return true;
  }

  // Primal simplex on columns [0, limit): Dantzig pricing with a Harris
  // ratio test; after a run of degenerate pivots it falls back to Bland's
  // rule until the objective moves again.
  // In phase 1 (feasibility) the run stops once every basic artificial
  // column (index >= limit) has reached zero.
  LpStatus run(std::size_t limit, std::size_t max_pivots, std::size_t& pivots, bool feasibility = false) {
    const std::size_t refresh = std::max<std::size_t>(64, m);
    std::size_t degenerate = 0;
    while (true) {
      if (since_refresh >= refresh) reinvert();
      if (feasibility) {
        double art = 0.0;
        for (std::size_t i = 0; i < m; ++i)
          if (basis[i] >= limit) art += at(i, n);
        if (art <= 1e-13) return LpStatus::Optimal;
      }
      const bool bland = degenerate >= 32;
      std::size_t enter = n;
      double most = -kCostEps;
      for (std::size_t j = 0; j < limit; ++j) {
        if (at(m, j) < most) {
          enter = j;
          if (bland) break;
          most = at(m, j);
        }
      }
      if (enter == n) return LpStatus::Optimal;
      std::size_t leave = m;
      if (bland) {
        double best = std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i < m; ++i) {
          const double aij = at(i, enter);
          if (aij <= kPivotEps) continue;
          const double ratio = std::max(0.0, at(i, n)) / aij;
          if (ratio < best - 1e-14 || (std::abs(ratio - best) <= 1e-14 && basis[i] < basis[leave])) {
            best = ratio;
            leave = i;
          }
        }
      } else {
        double bound = std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i < m; ++i) {
          const double aij = at(i, enter);
          if (aij > kPivotEps) bound = std::min(bound, (std::max(0.0, at(i, n)) + kHarrisTol) / aij);
        }
        double biggest = 0.0;
        for (std::size_t i = 0; i < m; ++i) {
          const double aij = at(i, enter);
          if (aij > kPivotEps && std::max(0.0, at(i, n)) / aij <= bound && aij > biggest) {
            biggest = aij;
            leave = i;
          }
        }
      }
      if (leave == m) return LpStatus::Unbounded;
      const bool moved = std::max(0.0, at(leave, n)) > 1e-12;
      pivot(leave, enter);
      for (std::size_t i = 0; i < m; ++i)
        if (at(i, n) < 0.0) at(i, n) = 0.0;
      degenerate = moved ? 0 : degenerate + 1;
      ++since_refresh;
      if (++pivots > max_pivots) return LpStatus::IterationLimit;
    }
  }
};

}  // namespace

LpResult LinearProgram::minimize(std::size_t max_pivots) const {
  const std::size_t nv = cost_.size();
  const std::size_t m = rows_.size();
  // Column layout: structural (free vars split into +/-), slacks, artificials.
  std::vector<std::size_t> pos_col(nv), neg_col(nv, static_cast<std::size_t>(-1));
  std::size_t ncol = 0;
  for (std::size_t j = 0; j < nv; ++j) {
    pos_col[j] = ncol++;
    if (free_[j]) neg_col[j] = ncol++;
  }
  std::vector<std::size_t> slack_col(m, static_cast<std::size_t>(-1));
  for (std::size_t i = 0; i < m; ++i)
    if (rows_[i].sense != Sense::Equal) slack_col[i] = ncol++;
  const std::size_t art0 = ncol;
  ncol += m;

  Tableau t{m, ncol, std::vector<double>((m + 1) * (ncol + 1), 0.0), std::vector<std::size_t>(m), {}, {}};
  std::vector<double> sign(m, 1.0);
  for (std::size_t i = 0; i < m; ++i) {
    const Row& r = rows_[i];
    double big = 0.0;
    for (const auto& term : r.terms) big = std::max(big, std::abs(term.second));
    sign[i] = (r.rhs < 0.0 ? -1.0 : 1.0) / (big > 0.0 ? big : 1.0);
    for (const auto& [j, a] : r.terms) {
      t.at(i, pos_col[j]) += sign[i] * a;
      if (free_[j]) t.at(i, neg_col[j]) -= sign[i] * a;
    }
    if (r.sense == Sense::LessEq) t.at(i, slack_col[i]) = sign[i] > 0.0 ? 1.0 : -1.0;
    if (r.sense == Sense::GreaterEq) t.at(i, slack_col[i]) = sign[i] > 0.0 ? -1.0 : 1.0;
    t.at(i, art0 + i) = 1.0;
    t.at(i, ncol) = sign[i] * r.rhs;
    t.basis[i] = art0 + i;
  }

  t.original.resize(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(ncol + 1));
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j <= ncol; ++j) t.original(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = t.at(i, j);
  t.cost.assign(ncol, 0.0);
  for (std::size_t i = 0; i < m; ++i) t.cost[art0 + i] = 1.0;

  LpResult res;
  // Phase 1: minimize the sum of artificials.
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j <= ncol; ++j)
      if (j < art0 || j == ncol) t.at(m, j) -= t.at(i, j);
  LpStatus st = t.run(art0, max_pivots, res.pivots, true);
  if (st == LpStatus::Optimal && t.reinvert()) st = t.run(art0, max_pivots, res.pivots, true);
  if (st == LpStatus::IterationLimit) {
    res.status = st;
    return res;
  }
  double scale = 1.0;
  for (std::size_t i = 0; i < m; ++i) scale = std::max(scale, std::abs(t.original(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(ncol))));
  double residual = 0.0;
  for (std::size_t i = 0; i < m; ++i)
    if (t.basis[i] >= art0) residual += t.at(i, ncol);
  if (residual > 1e-9 * scale) {
    res.status = LpStatus::Infeasible;
    return res;
  }
  // Drive remaining artificials out of the basis where possible.
  for (std::size_t i = 0; i < m; ++i) {
    if (t.basis[i] < art0) continue;
    std::size_t best = ncol;
    double bestabs = 1e-9;
    for (std::size_t j = 0; j < art0; ++j)
      if (std::abs(t.at(i, j)) > bestabs) { best = j; bestabs = std::abs(t.at(i, j)); }
    if (best != ncol) t.pivot(i, best);
  }

  // Phase 2 objective row: c_j - c_B B^{-1} A_j.
  std::vector<double> cc(ncol, 0.0);
  for (std::size_t j = 0; j < nv; ++j) {
    cc[pos_col[j]] = cost_[j];
    if (free_[j]) cc[neg_col[j]] = -cost_[j];
  }
  for (std::size_t j = 0; j <= ncol; ++j) t.at(m, j) = j < ncol ? cc[j] : 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    const double cb = cc[t.basis[i]];
    if (cb == 0.0) continue;
    for (std::size_t j = 0; j <= ncol; ++j) t.at(m, j) -= cb * t.at(i, j);
  }
  t.cost = cc;
  st = t.run(art0, max_pivots, res.pivots);
  // Confirm optimality on a freshly inverted basis; resume if rounding lied.
  for (int round = 0; round < 8 && st == LpStatus::Optimal; ++round) {
    if (!t.reinvert()) break;
    bool clean = true;
    for (std::size_t j = 0; j < art0 && clean; ++j)
      if (t.at(m, j) < -kCostEps) clean = false;
    if (clean) break;
    st = t.run(art0, max_pivots, res.pivots);
  }
  res.status = st;
  if (st != LpStatus::Optimal) return res;

  std::vector<double> col(ncol, 0.0);
  for (std::size_t i = 0; i < m; ++i) col[t.basis[i]] = std::max(0.0, t.at(i, ncol));
  res.x.assign(nv, 0.0);
  for (std::size_t j = 0; j < nv; ++j) res.x[j] = col[pos_col[j]] - (free_[j] ? col[neg_col[j]] : 0.0);
  res.value = 0.0;
  for (std::size_t j = 0; j < nv; ++j) res.value += cost_[j] * res.x[j];
  // y = c_B B^{-1}; B^{-1} sits in the artificial columns.
  res.duals.assign(m, 0.0);
  for (std::size_t r = 0; r < m; ++r) {
    double y = 0.0;
    for (std::size_t i = 0; i < m; ++i) y += cc[t.basis[i]] * t.at(i, art0 + r);
    res.duals[r] = y * sign[r];
  }
  return res;
}

}  // namespace transfer
