#pragma once

#include <Eigen/Dense>
#include <cstddef>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace transfer {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

// Entries at or above this value mark forbidden pairs.
inline constexpr double kForbidden = 1e18;
inline bool is_forbidden(double c) { return c >= kForbidden; }

class FiniteSpace {
 public:
  FiniteSpace(std::string id, std::vector<std::string> points,
              std::optional<std::vector<double>> coords = std::nullopt);

  const std::string& id() const { return id_; }
  std::size_t size() const { return points_.size(); }
  const std::vector<std::string>& points() const { return points_; }
  const std::string& label(std::size_t i) const { return points_.at(i); }
  std::size_t index_of(const std::string& label) const;
  bool has_coords() const { return coords_.has_value(); }
  // Throws DomainError if the space carries no 1-D embedding.
  const std::vector<double>& coords() const;
  Vec coord_vector() const;

  bool operator==(const FiniteSpace& o) const {
    return id_ == o.id_ && points_ == o.points_ && coords_ == o.coords_;
  }

 private:
  std::string id_;
  std::vector<std::string> points_;
  std::optional<std::vector<double>> coords_;
};

using Space = std::shared_ptr<const FiniteSpace>;

Space make_space(std::string id, std::vector<std::string> points,
                 std::optional<std::vector<double>> coords = std::nullopt);
// Points labelled x0, x1, ... with the given id.
Space make_space(std::string id, std::size_t n);
// Points labelled by index with the given strictly increasing coordinates.
Space make_grid(std::string id, std::vector<double> coords);
// Labels "a|b" for (a, b), row-major in the first factor.
Space product_space(const Space& a, const Space& b);

bool same_space(const Space& a, const Space& b);
void require_same_space(const Space& a, const Space& b, const char* what);

class ProbMeasure {
 public:
  ProbMeasure(Space space, Vec weights);

  const Space& space() const { return space_; }
  const Vec& weights() const { return w_; }
  double operator[](std::size_t i) const { return w_(static_cast<Eigen::Index>(i)); }
  std::size_t size() const { return space_->size(); }
  std::vector<std::size_t> support(double eps = 0.0) const;
  std::size_t first_support_point() const;

 private:
  Space space_;
  Vec w_;
};

class Potential {
 public:
  Potential(Space space, Vec values);

  const Space& space() const { return space_; }
  const Vec& values() const { return v_; }
  double operator[](std::size_t i) const { return v_(static_cast<Eigen::Index>(i)); }
  std::size_t size() const { return space_->size(); }

 private:
  Space space_;
  Vec v_;
};

double integrate(const Potential& f, const ProbMeasure& mu);

class CostMatrix {
 public:
  CostMatrix(Space source, Space target, Mat entries);

  const Space& source() const { return src_; }
  const Space& target() const { return tgt_; }
  const Mat& entries() const { return c_; }
  double operator()(std::size_t x, std::size_t y) const {
    return c_(static_cast<Eigen::Index>(x), static_cast<Eigen::Index>(y));
  }
  bool all_finite() const;

 private:
  Space src_, tgt_;
  Mat c_;
};

class Coupling {
 public:
  // Validates marginals to 1e-10 and clamps entries in [-1e-14, 0) to 0.
  Coupling(const ProbMeasure& row_marginal, const ProbMeasure& col_marginal, Mat matrix);

  const Mat& matrix() const { return m_; }
  const ProbMeasure& row_marginal() const { return row_; }
  const ProbMeasure& col_marginal() const { return col_; }
  const Space& source() const { return row_.space(); }
  const Space& target() const { return col_.space(); }

 private:
  ProbMeasure row_, col_;
  Mat m_;
};

struct KernelRow {
  ProbMeasure law;
  bool degenerate = false;
};

ProbMeasure dirac(const Space& space, const std::string& label);
ProbMeasure dirac(const Space& space, std::size_t index);
ProbMeasure uniform(const Space& space);
std::vector<KernelRow> disintegrate(const Coupling& pi);
Coupling reassemble(const ProbMeasure& mu, const std::vector<KernelRow>& rows);
Coupling product_coupling(const ProbMeasure& mu, const ProbMeasure& nu);
// map[i] is the target index of source point i.
ProbMeasure pushforward(const std::vector<std::size_t>& map, const ProbMeasure& mu, const Space& target);
double total_variation(const ProbMeasure& mu, const ProbMeasure& nu);
// Sum of mu(x) log(mu(x)/nu(x)); +inf when mu is not absolutely continuous.
double kl_divergence(const ProbMeasure& mu, const ProbMeasure& nu);
ProbMeasure product_measure(const ProbMeasure& a, const ProbMeasure& b);

}  // namespace transfer
