#include <cmath>

#include "transfer/catalog.hpp"
#include "transfer/errors.hpp"
#include "transfer/solvers.hpp"

namespace transfer {

namespace {

double log_sum_exp(const Vec& a) {
  const double mx = a.maxCoeff();
  if (!std::isfinite(mx)) return mx;
  return mx + std::log((a.array() - mx).exp().sum());
}

// log sum_z K(y,z) e^{f(z)} and the normalized weights.
KantorovichImage log_kernel(const Space& s, const Mat& logk, const Vec& f) {
  const auto n = logk.rows();
  Vec out(n);
  Mat w(n, n);
  for (Eigen::Index y = 0; y < n; ++y) {
    const Vec a = logk.row(y).transpose() + f;
    out(y) = log_sum_exp(a);
    w.row(y) = (a.array() - out(y)).exp().matrix().transpose();
  }
  return {Potential(s, out), w};
}

}  // namespace

MarkovKernelModel::MarkovKernelModel(Space s, Mat k, Vec reversing) : space(std::move(s)), kernel(std::move(k)), m(std::move(reversing)) {
  const auto n = static_cast<Eigen::Index>(space->size());
  if (kernel.rows() != n || kernel.cols() != n || m.size() != n)
    throw InputError("MarkovKernelModel: dimensions do not match the space");
  if (!kernel.allFinite() || kernel.minCoeff() < 0.0) throw InputError("MarkovKernelModel: kernel entries must be nonnegative");
  for (Eigen::Index x = 0; x < n; ++x)
    if (std::abs(kernel.row(x).sum() - 1.0) > 1e-12) throw InputError("MarkovKernelModel: kernel rows must sum to 1");
  if (!m.allFinite() || m.minCoeff() <= 0.0) throw InputError("MarkovKernelModel: reversing measure must be positive");
  m /= m.sum();
  for (Eigen::Index x = 0; x < n; ++x)
    for (Eigen::Index y = 0; y < n; ++y)
      if (std::abs(m(x) * kernel(x, y) - m(y) * kernel(y, x)) > 1e-10)
        throw InputError("MarkovKernelModel: detailed balance fails");
}

TransferHandle schrodinger_transfer(const MarkovKernelModel& model) {
  const Space X = model.space;
  const Mat K = model.kernel;
  const Vec m = model.m;
  const auto n = K.rows();
  Mat logk(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j) logk(i, j) = K(i, j) > 0.0 ? std::log(K(i, j)) : -kInfinity;
  Mat logr = logk;
  for (Eigen::Index i = 0; i < n; ++i) logr.row(i).array() += std::log(m(i));

  TransferHandle t;
  t.name = "schrodinger";
  t.direction = Direction::Both;
  t.source = t.target = X;
  t.operator_axioms = false;
  t.evaluate = [X, K, m, logr, n](const ProbMeasure& mu, const ProbMeasure& nu) {
    Evaluation e;
    e.method = "sinkhorn";
    e.tol = 1e-10;
    Mat pattern(n, n);
    for (Eigen::Index i = 0; i < n; ++i)
      for (Eigen::Index j = 0; j < n; ++j) pattern(i, j) = K(i, j) > 0.0 ? 0.0 : kForbidden;
    if (!solve_transport_lp(CostMatrix(X, X, pattern), mu, nu).feasible) {
      e.value = kInfinity;
      e.note = "marginals not reachable under the kernel";
      return e;
    }
    const Vec lmu = mu.weights().array().log().matrix(), lnu = nu.weights().array().log().matrix();
    Vec u = Vec::Zero(n), v = Vec::Zero(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      if (mu.weights()(i) <= 0.0) u(i) = -kInfinity;
      if (nu.weights()(i) <= 0.0) v(i) = -kInfinity;
    }
    auto log_plan = [&](Eigen::Index i, Eigen::Index j) { return u(i) + logr(i, j) + v(j); };
    double residual = kInfinity;
    const int max_iters = 200000;
    int it = 0;
    for (; it < max_iters && residual > 1e-10; ++it) {
      for (Eigen::Index i = 0; i < n; ++i) {
        if (mu.weights()(i) <= 0.0) continue;
        Vec a(n);
        for (Eigen::Index j = 0; j < n; ++j) a(j) = logr(i, j) + v(j);
        u(i) = lmu(i) - log_sum_exp(a);
      }
      residual = 0.0;
      for (Eigen::Index j = 0; j < n; ++j) {
        if (nu.weights()(j) <= 0.0) continue;
        Vec a(n);
        for (Eigen::Index i = 0; i < n; ++i) a(i) = u(i) + logr(i, j);
        const double col = log_sum_exp(a);
        residual = std::max(residual, std::abs(std::exp(col + v(j)) - nu.weights()(j)));
        v(j) = lnu(j) - col;
      }
      // Row residual after the column update.
      for (Eigen::Index i = 0; i < n; ++i) {
        if (mu.weights()(i) <= 0.0) continue;
        Vec a(n);
        for (Eigen::Index j = 0; j < n; ++j) a(j) = log_plan(i, j);
        residual = std::max(residual, std::abs(std::exp(log_sum_exp(a)) - mu.weights()(i)));
      }
    }
    e.converged = residual <= 1e-10;
    if (!e.converged) e.note = "sinkhorn stopped with marginal residual " + std::to_string(residual);
    double s = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      if (mu.weights()(i) > 0.0) s += u(i) * mu.weights()(i);
      if (nu.weights()(i) > 0.0) s += v(i) * nu.weights()(i);
    }
    const ProbMeasure mhat(X, m);
    e.value = s - 0.5 * kl_divergence(mu, mhat) - 0.5 * kl_divergence(nu, mhat);
    if (mu.weights().minCoeff() > 0.0 && nu.weights().minCoeff() > 0.0) {
      e.d_mu = u - 0.5 * (lmu - m.array().log().matrix());
      e.d_nu = v - 0.5 * (lnu - m.array().log().matrix());
    }
    return e;
  };
  t.kop_forward = [X, logk](const Potential& f) { return log_kernel(X, logk, f.values()); };
  t.kop_backward = [X, logk](const Potential& g) {
    KantorovichImage r = log_kernel(X, logk, -g.values());
    return KantorovichImage{Potential(X, -r.values.values()), r.kernel};
  };
  return t;
}

}  // namespace transfer
