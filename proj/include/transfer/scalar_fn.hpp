#pragma once

#include <string>
#include <vector>

namespace transfer {

// One-dimensional convex (or, for Log, concave) function with its increasing
// and decreasing Legendre transforms:
//   conj_inc(t) = sup_{s>=0} [t s - f(s)]
//   conj_dec(t) = sup_{s>0}  [-t s - f(s)]
class ScalarFn {
 public:
  enum class Kind { Identity, Power, Exp, Log, NegLog, XLogX, ChiSquare, Sampled };

  static ScalarFn identity();
  // scale * s^p on s >= 0, p >= 1.
  static ScalarFn power(double p, double scale = 1.0);
  static ScalarFn exp();
  // log s; concave, increasing.
  static ScalarFn log();
  // -log s; convex, decreasing.
  static ScalarFn neg_log();
  // s log s - s + 1.
  static ScalarFn xlogx();
  // (s - 1)^2.
  static ScalarFn chi_square();
  // Piecewise-linear interpolation of knots (s_i, v_i), s_0 >= 0; +inf outside.
  static ScalarFn sampled(std::vector<double> s, std::vector<double> v);

  Kind kind() const { return kind_; }
  std::string name() const;
  double p() const { return p_; }
  double scale() const { return scale_; }
  const std::vector<double>& knots_s() const { return ks_; }
  const std::vector<double>& knots_v() const { return kv_; }

  double operator()(double s) const;
  // A subgradient at s (left or right derivative at kinks).
  double derivative(double s) const;
  bool concave() const { return kind_ == Kind::Log; }
  bool increasing() const;
  // Lower end of the effective domain (the function is +inf below it).
  double domain_min() const;
  double domain_max() const;
  // Log <-> NegLog.
  ScalarFn negated() const;

  double conj_inc(double t) const;
  double conj_dec(double t) const { return conj_inc(-t); }
  // A maximizer s of the increasing transform (its derivative at t).
  double conj_inc_argmax(double t) const;
  // Same transform by one-dimensional search; independent of the closed forms.
  double conj_inc_numeric(double t, double s_max = 1e4) const;

 private:
  ScalarFn(Kind k) : kind_(k) {}
  Kind kind_;
  double p_ = 1.0, scale_ = 1.0;
  std::vector<double> ks_, kv_;
};

}  // namespace transfer
