#include "transfer/measure.hpp"

#include <cmath>
#include <limits>
#include <set>

#include "transfer/errors.hpp"

namespace transfer {

FiniteSpace::FiniteSpace(std::string id, std::vector<std::string> points,
                         std::optional<std::vector<double>> coords)
    : id_(std::move(id)), points_(std::move(points)), coords_(std::move(coords)) {
  if (points_.empty()) throw InputError("space '" + id_ + "' has no points");
  std::set<std::string> seen;
  for (const auto& p : points_)
    if (!seen.insert(p).second) throw InputError("space '" + id_ + "': duplicate label '" + p + "'");
  if (coords_) {
    if (coords_->size() != points_.size())
      throw InputError("space '" + id_ + "': coords length differs from points");
    for (std::size_t i = 0; i < coords_->size(); ++i) {
      if (!std::isfinite((*coords_)[i])) throw InputError("space '" + id_ + "': non-finite coord");
      if (i > 0 && !((*coords_)[i] > (*coords_)[i - 1]))
        throw InputError("space '" + id_ + "': coords must be strictly increasing");
    }
  }
}

std::size_t FiniteSpace::index_of(const std::string& label) const {
  for (std::size_t i = 0; i < points_.size(); ++i)
    if (points_[i] == label) return i;
  throw InputError("unknown point '" + label + "' in space '" + id_ + "'");
}

const std::vector<double>& FiniteSpace::coords() const {
  if (!coords_) throw DomainError("space '" + id_ + "' has no coordinates");
  return *coords_;
}

Vec FiniteSpace::coord_vector() const {
  const auto& c = coords();
  return Eigen::Map<const Vec>(c.data(), static_cast<Eigen::Index>(c.size()));
}

Space make_space(std::string id, std::vector<std::string> points, std::optional<std::vector<double>> coords) {
  return std::make_shared<const FiniteSpace>(std::move(id), std::move(points), std::move(coords));
}

Space make_space(std::string id, std::size_t n) {
  std::vector<std::string> pts;
  for (std::size_t i = 0; i < n; ++i) pts.push_back("x" + std::to_string(i));
  return make_space(std::move(id), std::move(pts));
}

Space make_grid(std::string id, std::vector<double> coords) {
  std::vector<std::string> pts;
  for (std::size_t i = 0; i < coords.size(); ++i) pts.push_back("g" + std::to_string(i));
  return make_space(std::move(id), std::move(pts), std::move(coords));
}

Space product_space(const Space& a, const Space& b) {
  std::vector<std::string> pts;
  for (const auto& p : a->points())
    for (const auto& q : b->points()) pts.push_back(p + "|" + q);
  return make_space(a->id() + "*" + b->id(), std::move(pts));
}

bool same_space(const Space& a, const Space& b) { return a == b || *a == *b; }

void require_same_space(const Space& a, const Space& b, const char* what) {
  if (!same_space(a, b))
    throw InputError(std::string(what) + ": space mismatch ('" + a->id() + "' vs '" + b->id() + "')");
}

ProbMeasure::ProbMeasure(Space space, Vec weights) : space_(std::move(space)), w_(std::move(weights)) {
  if (static_cast<std::size_t>(w_.size()) != space_->size())
    throw InputError("measure on '" + space_->id() + "': weight count differs from space size");
  for (Eigen::Index i = 0; i < w_.size(); ++i) {
    if (!std::isfinite(w_(i)) || w_(i) < 0.0)
      throw InputError("measure on '" + space_->id() + "': weights must be finite and nonnegative");
  }
  const double s = w_.sum();
  if (std::abs(s - 1.0) > 1e-12)
    throw InputError("measure on '" + space_->id() + "': weights sum to " + std::to_string(s));
  w_ /= s;
}

std::vector<std::size_t> ProbMeasure::support(double eps) const {
  std::vector<std::size_t> s;
  for (Eigen::Index i = 0; i < w_.size(); ++i)
    if (w_(i) > eps) s.push_back(static_cast<std::size_t>(i));
  return s;
}

std::size_t ProbMeasure::first_support_point() const {
  for (Eigen::Index i = 0; i < w_.size(); ++i)
    if (w_(i) > 0.0) return static_cast<std::size_t>(i);
  return 0;
}

Potential::Potential(Space space, Vec values) : space_(std::move(space)), v_(std::move(values)) {
  if (static_cast<std::size_t>(v_.size()) != space_->size())
    throw InputError("potential on '" + space_->id() + "': value count differs from space size");
  if (!v_.allFinite()) throw InputError("potential on '" + space_->id() + "': non-finite value");
}

double integrate(const Potential& f, const ProbMeasure& mu) {
  require_same_space(f.space(), mu.space(), "integrate");
  return f.values().dot(mu.weights());
}

CostMatrix::CostMatrix(Space source, Space target, Mat entries)
    : src_(std::move(source)), tgt_(std::move(target)), c_(std::move(entries)) {
  if (static_cast<std::size_t>(c_.rows()) != src_->size() || static_cast<std::size_t>(c_.cols()) != tgt_->size())
    throw InputError("cost matrix dimensions do not match spaces");
  for (Eigen::Index i = 0; i < c_.size(); ++i) {
    double& v = c_.data()[i];
    if (std::isnan(v) || v == -std::numeric_limits<double>::infinity())
      throw InputError("cost matrix: NaN or -inf entry");
    if (is_forbidden(v)) v = kForbidden;
  }
}

bool CostMatrix::all_finite() const {
  for (Eigen::Index i = 0; i < c_.size(); ++i)
    if (is_forbidden(c_.data()[i])) return false;
  return true;
}

Coupling::Coupling(const ProbMeasure& row_marginal, const ProbMeasure& col_marginal, Mat matrix)
    : row_(row_marginal), col_(col_marginal), m_(std::move(matrix)) {
  if (static_cast<std::size_t>(m_.rows()) != row_.size() || static_cast<std::size_t>(m_.cols()) != col_.size())
    throw InputError("invalid coupling: dimensions do not match marginals");
  for (Eigen::Index i = 0; i < m_.size(); ++i) {
    double& v = m_.data()[i];
    if (!std::isfinite(v) || v < -1e-14) throw InputError("invalid coupling: negative or non-finite entry");
    if (v < 0.0) v = 0.0;
  }
  if ((m_.rowwise().sum() - row_.weights()).cwiseAbs().maxCoeff() > 1e-10)
    throw InputError("invalid coupling: row sums differ from row marginal");
  if ((m_.colwise().sum().transpose() - col_.weights()).cwiseAbs().maxCoeff() > 1e-10)
    throw InputError("invalid coupling: column sums differ from column marginal");
}

ProbMeasure dirac(const Space& space, std::size_t index) {
  if (index >= space->size()) throw InputError("dirac: index out of range");
  Vec w = Vec::Zero(static_cast<Eigen::Index>(space->size()));
  w(static_cast<Eigen::Index>(index)) = 1.0;
  return ProbMeasure(space, w);
}

ProbMeasure dirac(const Space& space, const std::string& label) { return dirac(space, space->index_of(label)); }

ProbMeasure uniform(const Space& space) {
  const auto n = static_cast<Eigen::Index>(space->size());
  return ProbMeasure(space, Vec::Constant(n, 1.0 / static_cast<double>(n)));
}

std::vector<KernelRow> disintegrate(const Coupling& pi) {
  std::vector<KernelRow> rows;
  const Mat& m = pi.matrix();
  for (Eigen::Index x = 0; x < m.rows(); ++x) {
    const double mass = m.row(x).sum();
    if (mass <= 0.0) {
      rows.push_back({uniform(pi.target()), true});
    } else {
      Vec w = m.row(x).transpose() / mass;
      w /= w.sum();
      rows.push_back({ProbMeasure(pi.target(), w), false});
    }
  }
  return rows;
}

Coupling reassemble(const ProbMeasure& mu, const std::vector<KernelRow>& rows) {
  if (rows.size() != mu.size()) throw InputError("reassemble: one kernel row per source point required");
  const Space& tgt = rows.front().law.space();
  Mat m(static_cast<Eigen::Index>(mu.size()), static_cast<Eigen::Index>(tgt->size()));
  for (std::size_t x = 0; x < rows.size(); ++x) {
    require_same_space(rows[x].law.space(), tgt, "reassemble");
    m.row(static_cast<Eigen::Index>(x)) = mu[x] * rows[x].law.weights().transpose();
  }
  Vec col = m.colwise().sum().transpose();
  col = col.cwiseMax(0.0);
  return Coupling(mu, ProbMeasure(tgt, col / col.sum()), m);
}

Coupling product_coupling(const ProbMeasure& mu, const ProbMeasure& nu) {
  return Coupling(mu, nu, mu.weights() * nu.weights().transpose());
}

ProbMeasure pushforward(const std::vector<std::size_t>& map, const ProbMeasure& mu, const Space& target) {
  if (map.size() != mu.size()) throw InputError("pushforward: map must be total on the source space");
  Vec w = Vec::Zero(static_cast<Eigen::Index>(target->size()));
  for (std::size_t x = 0; x < map.size(); ++x) {
    if (map[x] >= target->size()) throw InputError("pushforward: map image outside target space");
    w(static_cast<Eigen::Index>(map[x])) += mu[x];
  }
  return ProbMeasure(target, w);
}

double total_variation(const ProbMeasure& mu, const ProbMeasure& nu) {
  require_same_space(mu.space(), nu.space(), "total_variation");
  return 0.5 * (mu.weights() - nu.weights()).cwiseAbs().sum();
}

double kl_divergence(const ProbMeasure& mu, const ProbMeasure& nu) {
  require_same_space(mu.space(), nu.space(), "kl_divergence");
  double s = 0.0;
  for (std::size_t i = 0; i < mu.size(); ++i) {
    if (mu[i] <= 0.0) continue;
    if (nu[i] <= 0.0) return std::numeric_limits<double>::infinity();
    s += mu[i] * std::log(mu[i] / nu[i]);
  }
  return s;
}

ProbMeasure product_measure(const ProbMeasure& a, const ProbMeasure& b) {
  Space s = product_space(a.space(), b.space());
  Vec w(static_cast<Eigen::Index>(s->size()));
  Eigen::Index k = 0;
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t j = 0; j < b.size(); ++j) w(k++) = a[i] * b[j];
  return ProbMeasure(s, w);
}

}  // namespace transfer
