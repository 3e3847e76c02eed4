#include "transfer/solvers.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>

#include "transfer/errors.hpp"
#include "transfer/lp.hpp"

namespace transfer {

namespace {

// Transportation simplex on a fully finite cost. Rows are sources, columns
// targets; the basis is a spanning tree on m+n nodes with m+n-1 cells.
struct TransportSimplex {
  std::size_t m, n;
  const Mat& c;
  Mat flow;
  std::vector<std::vector<bool>> basic;
  Vec u, v;
  std::size_t pivots = 0;

  TransportSimplex(const Mat& cost, const Vec& a, const Vec& b)
      : m(static_cast<std::size_t>(cost.rows())), n(static_cast<std::size_t>(cost.cols())), c(cost),
        flow(Mat::Zero(cost.rows(), cost.cols())), basic(m, std::vector<bool>(n, false)) {
    // Northwest corner start.
    Vec ra = a, rb = b;
    std::size_t i = 0, j = 0;
    while (true) {
      const double q = std::min(ra(i), rb(j));
      flow(i, j) = q;
      basic[i][j] = true;
      ra(i) -= q;
      rb(j) -= q;
      if (i == m - 1 && j == n - 1) break;
      if (j == n - 1 || (i < m - 1 && ra(i) <= rb(j))) {
        rb(j) = std::max(rb(j), 0.0);
        ++i;
      } else {
        ++j;
      }
    }
  }

  // Node ids: rows 0..m-1, columns m..m+n-1.
  std::vector<std::vector<std::size_t>> adjacency() const {
    std::vector<std::vector<std::size_t>> adj(m + n);
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < n; ++j)
        if (basic[i][j]) {
          adj[i].push_back(m + j);
          adj[m + j].push_back(i);
        }
    return adj;
  }

  void potentials() {
    auto adj = adjacency();
    u = Vec::Zero(static_cast<Eigen::Index>(m));
    v = Vec::Zero(static_cast<Eigen::Index>(n));
    std::vector<bool> seen(m + n, false);
    std::deque<std::size_t> q{0};
    seen[0] = true;
    while (!q.empty()) {
      const std::size_t k = q.front();
      q.pop_front();
      for (std::size_t nb : adj[k]) {
        if (seen[nb]) continue;
        seen[nb] = true;
        if (k < m) v(nb - m) = c(k, nb - m) - u(k);
        else u(nb) = c(nb, k - m) - v(k - m);
        q.push_back(nb);
      }
    }
  }

  // Tree path between two nodes, as a node sequence.
  std::vector<std::size_t> path(std::size_t from, std::size_t to) const {
    auto adj = adjacency();
    std::vector<std::size_t> parent(m + n, m + n);
    std::deque<std::size_t> q{from};
    parent[from] = from;
    while (!q.empty()) {
      const std::size_t k = q.front();
      q.pop_front();
      if (k == to) break;
      for (std::size_t nb : adj[k])
        if (parent[nb] == m + n) {
          parent[nb] = k;
          q.push_back(nb);
        }
    }
    std::vector<std::size_t> p;
    for (std::size_t k = to; k != from; k = parent[k]) p.push_back(k);
    p.push_back(from);
    std::reverse(p.begin(), p.end());
    return p;
  }

  bool solve(std::size_t max_pivots) {
    const double eps = 1e-12 * (1.0 + c.cwiseAbs().maxCoeff());
    while (true) {
      potentials();
      std::size_t ei = m, ej = n;
      for (std::size_t i = 0; i < m && ei == m; ++i)
        for (std::size_t j = 0; j < n; ++j)
          if (!basic[i][j] && c(i, j) - u(i) - v(j) < -eps) {
            ei = i;
            ej = j;
            break;
          }
      if (ei == m) return true;
      if (++pivots > max_pivots) return false;
      // Cycle: entering cell (+), then the tree path from column ej back to row ei.
      auto p = path(m + ej, ei);
      std::vector<std::pair<std::size_t, std::size_t>> cells;
      for (std::size_t k = 0; k + 1 < p.size(); ++k) {
        const std::size_t a = p[k], b = p[k + 1];
        cells.push_back(a < m ? std::make_pair(a, b - m) : std::make_pair(b, a - m));
      }
      double theta = std::numeric_limits<double>::infinity();
      std::size_t li = m, lj = n;
      for (std::size_t k = 0; k < cells.size(); k += 2) {
        const auto [i, j] = cells[k];
        const double f = flow(i, j);
        if (f < theta - 1e-15 || (std::abs(f - theta) <= 1e-15 && i * n + j < li * n + lj)) {
          theta = f;
          li = i;
          lj = j;
        }
      }
      theta = std::max(theta, 0.0);
      flow(ei, ej) += theta;
      for (std::size_t k = 0; k < cells.size(); ++k) {
        const auto [i, j] = cells[k];
        flow(i, j) += (k % 2 == 0 ? -theta : theta);
      }
      flow(li, lj) = 0.0;
      basic[li][lj] = false;
      basic[ei][ej] = true;
    }
  }
};

LPSolution finalize(const CostMatrix& c, const ProbMeasure& mu, const ProbMeasure& nu, Mat plan, Vec phi, Vec psi) {
  LPSolution s;
  s.feasible = true;
  plan = plan.cwiseMax(0.0);
  // Remove rounding drift on the marginals by rescaling rows.
  for (Eigen::Index i = 0; i < plan.rows(); ++i) {
    const double r = plan.row(i).sum();
    if (r > 0.0) plan.row(i) *= mu[static_cast<std::size_t>(i)] / r;
  }
  const double shift = phi(static_cast<Eigen::Index>(mu.first_support_point()));
  phi.array() -= shift;
  psi.array() -= shift;
  s.value = 0.0;
  for (Eigen::Index i = 0; i < plan.rows(); ++i)
    for (Eigen::Index j = 0; j < plan.cols(); ++j)
      if (plan(i, j) > 0.0) s.value += plan(i, j) * c.entries()(i, j);
  s.coupling.emplace(mu, nu, plan);
  s.phi.emplace(c.source(), phi);
  s.psi.emplace(c.target(), psi);
  return s;
}

}  // namespace

LPSolution solve_transport_lp(const CostMatrix& c, const ProbMeasure& mu, const ProbMeasure& nu) {
  require_same_space(c.source(), mu.space(), "solve_transport_lp (source)");
  require_same_space(c.target(), nu.space(), "solve_transport_lp (target)");
  const auto m = static_cast<std::size_t>(c.entries().rows());
  const auto n = static_cast<std::size_t>(c.entries().cols());
  if (c.all_finite()) {
    TransportSimplex ts(c.entries(), mu.weights(), nu.weights());
    if (!ts.solve(100000 + 100 * m * n)) throw ConvergenceError("transport simplex exceeded its pivot budget");
    ts.potentials();
    auto s = finalize(c, mu, nu, ts.flow, -ts.u, ts.v);
    s.pivots = ts.pivots;
    return s;
  }
  LinearProgram lp;
  std::vector<std::vector<std::size_t>> var(m, std::vector<std::size_t>(n, SIZE_MAX));
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j)
      if (!is_forbidden(c(i, j))) var[i][j] = lp.add_variable(c(i, j));
  for (std::size_t i = 0; i < m; ++i) {
    std::vector<std::pair<std::size_t, double>> t;
    for (std::size_t j = 0; j < n; ++j)
      if (var[i][j] != SIZE_MAX) t.emplace_back(var[i][j], 1.0);
    lp.add_constraint(t, Sense::Equal, mu[i]);
  }
  for (std::size_t j = 0; j < n; ++j) {
    std::vector<std::pair<std::size_t, double>> t;
    for (std::size_t i = 0; i < m; ++i)
      if (var[i][j] != SIZE_MAX) t.emplace_back(var[i][j], 1.0);
    lp.add_constraint(t, Sense::Equal, nu[j]);
  }
  const LpResult r = lp.minimize();
  if (r.status == LpStatus::Infeasible) return LPSolution{};
  if (r.status != LpStatus::Optimal) throw ConvergenceError(std::string("transport LP: ") + to_string(r.status));
  Mat plan = Mat::Zero(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(n));
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j)
      if (var[i][j] != SIZE_MAX) plan(i, j) = r.x[var[i][j]];
  Vec phi(static_cast<Eigen::Index>(m)), psi(static_cast<Eigen::Index>(n));
  for (std::size_t i = 0; i < m; ++i) phi(i) = -r.duals[i];
  for (std::size_t j = 0; j < n; ++j) psi(j) = r.duals[m + j];
  auto s = finalize(c, mu, nu, plan, phi, psi);
  s.pivots = r.pivots;
  return s;
}

StationaryResult solve_stationary_lp(const CostMatrix& c) {
  if (!same_space(c.source(), c.target())) throw InputError("solve_stationary_lp: cost must be square on one space");
  const auto n = static_cast<std::size_t>(c.entries().rows());
  LinearProgram lp;
  std::vector<std::vector<std::size_t>> var(n, std::vector<std::size_t>(n, SIZE_MAX));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      if (!is_forbidden(c(i, j))) var[i][j] = lp.add_variable(c(i, j));
  std::vector<std::pair<std::size_t, double>> all;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      if (var[i][j] != SIZE_MAX) all.emplace_back(var[i][j], 1.0);
  lp.add_constraint(all, Sense::Equal, 1.0);
  for (std::size_t x = 0; x < n; ++x) {
    std::vector<std::pair<std::size_t, double>> t;
    for (std::size_t y = 0; y < n; ++y) {
      if (y == x) continue;
      if (var[x][y] != SIZE_MAX) t.emplace_back(var[x][y], 1.0);
      if (var[y][x] != SIZE_MAX) t.emplace_back(var[y][x], -1.0);
    }
    lp.add_constraint(t, Sense::Equal, 0.0);
  }
  const LpResult r = lp.minimize();
  StationaryResult s;
  if (r.status == LpStatus::Infeasible) return s;
  if (r.status != LpStatus::Optimal) throw ConvergenceError(std::string("stationary LP: ") + to_string(r.status));
  s.feasible = true;
  s.value = r.value;
  s.plan = Mat::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      if (var[i][j] != SIZE_MAX) s.plan(i, j) = r.x[var[i][j]];
  s.marginal = s.plan.rowwise().sum();
  return s;
}

}  // namespace transfer
