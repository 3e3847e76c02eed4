#pragma once

#include <cmath>

#include "transfer/measure.hpp"
#include "transfer/rng.hpp"

namespace transfer::testing {

inline Vec random_weights(CounterRng& rng, std::size_t n, double floor = 0.0) {
  Vec w(static_cast<Eigen::Index>(n));
  for (auto& x : w) x = floor - std::log(1.0 - rng.uniform());
  return w / w.sum();
}

inline ProbMeasure random_measure(CounterRng& rng, const Space& s, double floor = 0.0) {
  return ProbMeasure(s, random_weights(rng, s->size(), floor));
}

inline Potential random_potential(CounterRng& rng, const Space& s, double scale = 1.0) {
  Vec v(static_cast<Eigen::Index>(s->size()));
  for (auto& x : v) x = rng.uniform(-scale, scale);
  return Potential(s, v);
}

inline Mat random_matrix(CounterRng& rng, std::size_t m, std::size_t n, double lo = 0.0, double hi = 1.0) {
  Mat c(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(n));
  for (Eigen::Index i = 0; i < c.size(); ++i) c.data()[i] = rng.uniform(lo, hi);
  return c;
}

inline Mat random_integer_matrix(CounterRng& rng, std::size_t m, std::size_t n, int hi) {
  Mat c(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(n));
  for (Eigen::Index i = 0; i < c.size(); ++i) c.data()[i] = static_cast<double>(rng.index(static_cast<std::size_t>(hi) + 1));
  return c;
}

inline ProbMeasure measure(const Space& s, std::initializer_list<double> w) {
  Vec v(static_cast<Eigen::Index>(w.size()));
  Eigen::Index i = 0;
  for (double x : w) v(i++) = x;
  return ProbMeasure(s, v);
}

inline Mat matrix(std::initializer_list<std::initializer_list<double>> rows) {
  Mat m(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows.begin()->size()));
  Eigen::Index i = 0;
  for (const auto& r : rows) {
    Eigen::Index j = 0;
    for (double x : r) m(i, j++) = x;
    ++i;
  }
  return m;
}

}  // namespace transfer::testing
