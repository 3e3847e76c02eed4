#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "transfer/errors.hpp"
#include "transfer/solvers.hpp"

namespace transfer {

EnvelopeResult concave_envelope_1d(const std::vector<double>& t, const std::vector<double>& v) {
  if (t.size() != v.size() || t.empty()) throw InputError("concave_envelope_1d: need matching nonempty inputs");
  for (std::size_t i = 0; i < t.size(); ++i)
    if (!std::isfinite(t[i]) || !std::isfinite(v[i])) throw InputError("concave_envelope_1d: non-finite input");
  std::vector<std::size_t> order(t.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return t[a] < t[b] || (t[a] == t[b] && v[a] > v[b]);
  });
  std::vector<EnvelopeKnot> hull;
  for (std::size_t k : order) {
    if (!hull.empty() && hull.back().t == t[k]) continue;  // keep the highest value per abscissa
    EnvelopeKnot p{t[k], v[k], k};
    while (hull.size() >= 2) {
      const auto& a = hull[hull.size() - 2];
      const auto& b = hull.back();
      // Drop b unless it lies strictly above the chord a-p.
      const double cross = (b.t - a.t) * (p.v - a.v) - (b.v - a.v) * (p.t - a.t);
      if (cross >= 0.0) hull.pop_back();
      else break;
    }
    hull.push_back(p);
  }
  return EnvelopeResult(std::move(hull));
}

bool EnvelopeResult::locate(double t, std::size_t& i, std::size_t& j, double& w) const {
  const auto& k = knots_;
  if (t < k.front().t || t > k.back().t) return false;
  if (k.size() == 1) {
    i = j = 0;
    w = 0.0;
    return true;
  }
  auto it = std::upper_bound(k.begin(), k.end(), t, [](double x, const EnvelopeKnot& e) { return x < e.t; });
  std::size_t hi = static_cast<std::size_t>(it - k.begin());
  if (hi >= k.size()) hi = k.size() - 1;
  if (hi == 0) hi = 1;
  i = hi - 1;
  j = hi;
  w = (t - k[i].t) / (k[j].t - k[i].t);
  return true;
}

double EnvelopeResult::operator()(double t) const {
  std::size_t i, j;
  double w;
  if (!locate(t, i, j, w)) return -std::numeric_limits<double>::infinity();
  if (w == 0.0) return knots_[i].v;
  if (w == 1.0) return knots_[j].v;
  return (1.0 - w) * knots_[i].v + w * knots_[j].v;
}

}  // namespace transfer
