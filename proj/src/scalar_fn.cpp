#include "transfer/scalar_fn.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "transfer/ascent.hpp"
#include "transfer/errors.hpp"

namespace transfer {

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();
}

ScalarFn ScalarFn::identity() { return ScalarFn(Kind::Identity); }
ScalarFn ScalarFn::exp() { return ScalarFn(Kind::Exp); }
ScalarFn ScalarFn::log() { return ScalarFn(Kind::Log); }
ScalarFn ScalarFn::neg_log() { return ScalarFn(Kind::NegLog); }
ScalarFn ScalarFn::xlogx() { return ScalarFn(Kind::XLogX); }
ScalarFn ScalarFn::chi_square() { return ScalarFn(Kind::ChiSquare); }

ScalarFn ScalarFn::power(double p, double scale) {
  if (!(p >= 1.0) || !(scale > 0.0)) throw InputError("power: need p >= 1 and scale > 0");
  ScalarFn f(Kind::Power);
  f.p_ = p;
  f.scale_ = scale;
  return f;
}

ScalarFn ScalarFn::sampled(std::vector<double> s, std::vector<double> v) {
  if (s.size() != v.size() || s.size() < 2) throw InputError("sampled: need at least two matching knots");
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (!std::isfinite(s[i]) || !std::isfinite(v[i])) throw InputError("sampled: non-finite knot");
    if (i > 0 && !(s[i] > s[i - 1])) throw InputError("sampled: knots must be strictly increasing");
  }
  if (s.front() < 0.0) throw InputError("sampled: knots must lie in [0, inf)");
  for (std::size_t i = 2; i < s.size(); ++i) {
    const double s1 = (v[i - 1] - v[i - 2]) / (s[i - 1] - s[i - 2]);
    const double s2 = (v[i] - v[i - 1]) / (s[i] - s[i - 1]);
    if (s2 < s1 - 1e-12 * (1.0 + std::abs(s1))) throw InputError("sampled: knots are not convex");
  }
  ScalarFn f(Kind::Sampled);
  f.ks_ = std::move(s);
  f.kv_ = std::move(v);
  return f;
}

std::string ScalarFn::name() const {
  switch (kind_) {
    case Kind::Identity: return "identity";
    case Kind::Power: return "power";
    case Kind::Exp: return "exp";
    case Kind::Log: return "log";
    case Kind::NegLog: return "neg_log";
    case Kind::XLogX: return "xlogx";
    case Kind::ChiSquare: return "chi_square";
    case Kind::Sampled: return "sampled";
  }
  return "?";
}

bool ScalarFn::increasing() const {
  switch (kind_) {
    case Kind::Identity:
    case Kind::Power:
    case Kind::Exp:
    case Kind::Log: return true;
    case Kind::Sampled: return kv_[1] >= kv_[0];
    default: return false;
  }
}

double ScalarFn::domain_min() const {
  switch (kind_) {
    case Kind::Identity:
    case Kind::Exp:
    case Kind::ChiSquare: return -kInf;
    case Kind::Sampled: return ks_.front();
    default: return 0.0;
  }
}

double ScalarFn::domain_max() const { return kind_ == Kind::Sampled ? ks_.back() : kInf; }

ScalarFn ScalarFn::negated() const {
  if (kind_ == Kind::Log) return neg_log();
  if (kind_ == Kind::NegLog) return log();
  throw DomainError("negated: only log and neg_log have a representable negation");
}

double ScalarFn::operator()(double s) const {
  switch (kind_) {
    case Kind::Identity: return s;
    case Kind::Power: return s < 0.0 ? kInf : scale_ * std::pow(s, p_);
    case Kind::Exp: return std::exp(s);
    case Kind::Log: return s > 0.0 ? std::log(s) : -kInf;
    case Kind::NegLog: return s > 0.0 ? -std::log(s) : kInf;
    case Kind::XLogX:
      if (s < 0.0) return kInf;
      return s == 0.0 ? 1.0 : s * std::log(s) - s + 1.0;
    case Kind::ChiSquare: return (s - 1.0) * (s - 1.0);
    case Kind::Sampled: {
      if (s < ks_.front() || s > ks_.back()) return kInf;
      auto it = std::upper_bound(ks_.begin(), ks_.end(), s);
      std::size_t j = static_cast<std::size_t>(it - ks_.begin());
      if (j >= ks_.size()) return kv_.back();
      const std::size_t i = j - 1;
      const double w = (s - ks_[i]) / (ks_[j] - ks_[i]);
      return (1.0 - w) * kv_[i] + w * kv_[j];
    }
  }
  return kInf;
}

double ScalarFn::derivative(double s) const {
  switch (kind_) {
    case Kind::Identity: return 1.0;
    case Kind::Power: return s <= 0.0 ? (p_ == 1.0 ? scale_ : 0.0) : scale_ * p_ * std::pow(s, p_ - 1.0);
    case Kind::Exp: return std::exp(s);
    case Kind::Log: return 1.0 / s;
    case Kind::NegLog: return -1.0 / s;
    case Kind::XLogX: return s > 0.0 ? std::log(s) : -kInf;
    case Kind::ChiSquare: return 2.0 * (s - 1.0);
    case Kind::Sampled: {
      auto it = std::upper_bound(ks_.begin(), ks_.end(), s);
      std::size_t j = std::min<std::size_t>(static_cast<std::size_t>(it - ks_.begin()), ks_.size() - 1);
      if (j == 0) j = 1;
      return (kv_[j] - kv_[j - 1]) / (ks_[j] - ks_[j - 1]);
    }
  }
  return 0.0;
}

double ScalarFn::conj_inc(double t) const {
  switch (kind_) {
    case Kind::Identity: return t <= 1.0 ? 0.0 : kInf;
    case Kind::Power: {
      if (p_ == 1.0) return t <= scale_ ? 0.0 : kInf;
      if (t <= 0.0) return 0.0;
      const double s = std::pow(t / (scale_ * p_), 1.0 / (p_ - 1.0));
      return (p_ - 1.0) * scale_ * std::pow(s, p_);
    }
    case Kind::Exp: return t <= 1.0 ? -1.0 : t * std::log(t) - t;
    case Kind::Log: throw DomainError("conj_inc: log is concave; use neg_log with conj_dec");
    case Kind::NegLog: return t >= 0.0 ? kInf : -1.0 - std::log(-t);
    case Kind::XLogX: return std::exp(t) - 1.0;
    case Kind::ChiSquare: return t >= -2.0 ? t + 0.25 * t * t : -1.0;
    case Kind::Sampled: {
      double best = -kInf;
      for (std::size_t i = 0; i < ks_.size(); ++i) best = std::max(best, t * ks_[i] - kv_[i]);
      return best;
    }
  }
  return kInf;
}

double ScalarFn::conj_inc_argmax(double t) const {
  switch (kind_) {
    case Kind::Identity: return t < 1.0 ? 0.0 : kInf;
    case Kind::Power:
      if (p_ == 1.0) return t < scale_ ? 0.0 : kInf;
      return t <= 0.0 ? 0.0 : std::pow(t / (scale_ * p_), 1.0 / (p_ - 1.0));
    case Kind::Exp: return t <= 1.0 ? 0.0 : std::log(t);
    case Kind::Log: throw DomainError("conj_inc_argmax: log is concave");
    case Kind::NegLog: return t >= 0.0 ? kInf : -1.0 / t;
    case Kind::XLogX: return std::exp(t);
    case Kind::ChiSquare: return t >= -2.0 ? 1.0 + 0.5 * t : 0.0;
    case Kind::Sampled: {
      std::size_t arg = 0;
      for (std::size_t i = 1; i < ks_.size(); ++i)
        if (t * ks_[i] - kv_[i] > t * ks_[arg] - kv_[arg]) arg = i;
      return ks_[arg];
    }
  }
  return 0.0;
}

double ScalarFn::conj_inc_numeric(double t, double s_max) const {
  if (concave()) throw DomainError("conj_inc_numeric: function is concave");
  const double lo = std::max(0.0, domain_min());
  const double hi = std::min(s_max, domain_max());
  auto obj = [&](double s) {
    const double v = (*this)(s);
    return std::isfinite(v) ? t * s - v : -kInf;
  };
  // Coarse logarithmic scan, then golden refinement around the best sample.
  std::vector<double> grid{lo};
  for (double s = std::max(lo, 1e-12); s < hi; s *= 1.05) grid.push_back(s);
  grid.push_back(hi);
  std::size_t arg = 0;
  for (std::size_t i = 1; i < grid.size(); ++i)
    if (obj(grid[i]) > obj(grid[arg])) arg = i;
  const double a = grid[arg == 0 ? 0 : arg - 1];
  const double b = grid[std::min(arg + 1, grid.size() - 1)];
  const double s = golden_section_max(obj, a, b, 1e-15);
  return std::max({obj(s), obj(grid[arg]), obj(a), obj(b)});
}

}  // namespace transfer
