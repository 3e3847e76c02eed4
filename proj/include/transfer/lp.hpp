#pragma once

#include <cstddef>
#include <string>
#include <utility>
#include <vector>

namespace transfer {

enum class Sense { LessEq, Equal, GreaterEq };
enum class LpStatus { Optimal, Infeasible, Unbounded, IterationLimit };

struct LpResult {
  LpStatus status = LpStatus::Infeasible;
  double value = 0.0;
  std::vector<double> x;
  // d value / d rhs for each constraint, in insertion order.
  std::vector<double> duals;
  std::size_t pivots = 0;
};

// Dense two-phase tableau simplex, Bland's rule (lowest index enters, lowest
// basic index leaves on ratio ties). Meant for the small programs this
// library builds; sizes stay in the low hundreds.
class LinearProgram {
 public:
  // Adds a variable with the given objective coefficient; returns its index.
  std::size_t add_variable(double cost, bool free = false);
  std::size_t num_variables() const { return cost_.size(); }
  void add_constraint(std::vector<std::pair<std::size_t, double>> terms, Sense sense, double rhs);
  std::size_t num_constraints() const { return rows_.size(); }

  LpResult minimize(std::size_t max_pivots = 200000) const;

 private:
  struct Row {
    std::vector<std::pair<std::size_t, double>> terms;
    Sense sense;
    double rhs;
  };
  std::vector<double> cost_;
  std::vector<bool> free_;
  std::vector<Row> rows_;
};

const char* to_string(LpStatus s);

}  // namespace transfer
