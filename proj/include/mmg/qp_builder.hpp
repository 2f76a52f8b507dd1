#pragma once

#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "mmg/qp.hpp"

namespace mmg::qp {

/// Incremental assembly of a QpProblem. Variable bounds become single-entry
/// inequality rows at build time.
class QpAssembler {
 public:
  static constexpr double kInf = std::numeric_limits<double>::infinity();

  using Terms = std::vector<std::pair<int, double>>;

  int add_var(std::string name, double lb, double ub);
  int num_vars() const { return static_cast<int>(names_.size()); }

  /// Adds coef * x_i^2 to the objective.
  void add_quad_cost(int i, double coef);
  /// Adds coef * (x_i + x_j)^2 to the objective.
  void add_pair_quad_cost(int i, int j, double coef);
  void add_lin_cost(int i, double coef);

  void add_eq(const Terms& terms, double rhs, const std::string& label);
  void add_le(const Terms& terms, double rhs, const std::string& label);

  QpProblem build() const;

 private:
  std::vector<std::string> names_;
  std::vector<double> lb_, ub_;
  std::vector<Eigen::Triplet<double>> q_trips_;
  std::vector<double> lin_;
  std::vector<Eigen::Triplet<double>> eq_trips_, in_trips_;
  std::vector<double> b_eq_, b_in_;
  std::vector<std::string> eq_labels_, in_labels_;
};

}  // namespace mmg::qp
