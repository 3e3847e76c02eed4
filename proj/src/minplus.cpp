#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>

#include "transfer/errors.hpp"
#include "transfer/solvers.hpp"

namespace transfer {

Mat minplus_product(const Mat& a, const Mat& b) {
  if (a.cols() != b.rows()) throw InputError("minplus_product: inner dimensions differ");
  Mat r = Mat::Constant(a.rows(), b.cols(), kForbidden);
  for (Eigen::Index x = 0; x < a.rows(); ++x)
    for (Eigen::Index y = 0; y < a.cols(); ++y) {
      const double axy = a(x, y);
      if (is_forbidden(axy)) continue;
      for (Eigen::Index z = 0; z < b.cols(); ++z) {
        const double byz = b(y, z);
        if (is_forbidden(byz)) continue;
        r(x, z) = std::min(r(x, z), axy + byz);
      }
    }
  return r;
}

Mat minplus_identity(std::size_t n) {
  Mat r = Mat::Constant(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n), kForbidden);
  r.diagonal().setZero();
  return r;
}

CostMatrix minplus_power(const CostMatrix& c, unsigned n) {
  if (!same_space(c.source(), c.target())) throw InputError("minplus_power: cost must be square on one space");
  Mat r = minplus_identity(c.source()->size());
  for (unsigned k = 0; k < n; ++k) r = minplus_product(r, c.entries());
  return CostMatrix(c.source(), c.target(), r);
}

CostMatrix minplus_compose(const CostMatrix& a, const CostMatrix& b) {
  require_same_space(a.target(), b.source(), "minplus_compose");
  return CostMatrix(a.source(), b.target(), minplus_product(a.entries(), b.entries()));
}

CycleResult min_mean_cycle(const CostMatrix& c) {
  if (!same_space(c.source(), c.target())) throw InputError("min_mean_cycle: cost must be square on one space");
  const auto n = static_cast<Eigen::Index>(c.source()->size());
  const Mat& w = c.entries();
  const double inf = std::numeric_limits<double>::infinity();
  // D(k, v): least weight of a walk with exactly k edges ending at v, any start.
  Mat D = Mat::Constant(n + 1, n, inf);
  D.row(0).setZero();
  for (Eigen::Index k = 1; k <= n; ++k)
    for (Eigen::Index u = 0; u < n; ++u) {
      if (!std::isfinite(D(k - 1, u))) continue;
      for (Eigen::Index v = 0; v < n; ++v)
        if (!is_forbidden(w(u, v))) D(k, v) = std::min(D(k, v), D(k - 1, u) + w(u, v));
    }
  double lambda = inf;
  for (Eigen::Index v = 0; v < n; ++v) {
    if (!std::isfinite(D(n, v))) continue;
    double worst = -inf;
    for (Eigen::Index k = 0; k < n; ++k)
      if (std::isfinite(D(k, v))) worst = std::max(worst, (D(n, v) - D(k, v)) / static_cast<double>(n - k));
    lambda = std::min(lambda, worst);
  }
  if (!std::isfinite(lambda)) throw DomainError("min_mean_cycle: the graph of finite entries has no cycle");

  // Shortest-path potentials for w - lambda; cycles of tight edges are optimal.
  const double scale = 1.0 + std::abs(lambda) + [&] {
    double m = 0.0;
    for (Eigen::Index i = 0; i < w.size(); ++i)
      if (!is_forbidden(w.data()[i])) m = std::max(m, std::abs(w.data()[i]));
    return m;
  }();
  Vec d = Vec::Zero(n);
  for (Eigen::Index it = 0; it < n; ++it)
    for (Eigen::Index u = 0; u < n; ++u)
      for (Eigen::Index v = 0; v < n; ++v)
        if (!is_forbidden(w(u, v))) d(v) = std::min(d(v), d(u) + w(u, v) - lambda);

  auto cycle_from = [&](double tol) -> std::vector<std::size_t> {
    auto tight = [&](Eigen::Index u, Eigen::Index v) {
      return !is_forbidden(w(u, v)) && d(u) + w(u, v) - lambda - d(v) <= tol;
    };
    std::vector<int> color(static_cast<std::size_t>(n), 0);
    std::vector<Eigen::Index> stack;
    std::vector<std::size_t> found;
    std::function<bool(Eigen::Index)> dfs = [&](Eigen::Index u) {
      color[static_cast<std::size_t>(u)] = 1;
      stack.push_back(u);
      for (Eigen::Index v = 0; v < n; ++v) {
        if (!tight(u, v)) continue;
        if (color[static_cast<std::size_t>(v)] == 1) {
          auto it = std::find(stack.begin(), stack.end(), v);
          for (; it != stack.end(); ++it) found.push_back(static_cast<std::size_t>(*it));
          return true;
        }
        if (color[static_cast<std::size_t>(v)] == 0 && dfs(v)) return true;
      }
      color[static_cast<std::size_t>(u)] = 2;
      stack.pop_back();
      return false;
    };
    for (Eigen::Index s = 0; s < n; ++s)
      if (color[static_cast<std::size_t>(s)] == 0 && dfs(s)) break;
    return found;
  };
  std::vector<std::size_t> cyc;
  for (double tol = 1e-12 * scale; cyc.empty() && tol < 1e-3 * scale; tol *= 10.0) cyc = cycle_from(tol);
  if (cyc.empty()) throw ConsistencyError("min_mean_cycle: no tight cycle found");
  std::rotate(cyc.begin(), std::min_element(cyc.begin(), cyc.end()), cyc.end());

  CycleResult r;
  double total = 0.0;
  for (std::size_t k = 0; k < cyc.size(); ++k)
    total += w(static_cast<Eigen::Index>(cyc[k]), static_cast<Eigen::Index>(cyc[(k + 1) % cyc.size()]));
  r.mean = total / static_cast<double>(cyc.size());
  r.nodes = cyc;
  for (std::size_t v : cyc) r.cycle.push_back(c.source()->label(v));
  if (std::abs(r.mean - lambda) > 1e-9 * scale) throw ConsistencyError("min_mean_cycle: cycle mean differs from Karp value");
  return r;
}

}  // namespace transfer
