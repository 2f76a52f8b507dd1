#include "mmg/qp_builder.hpp"

#include <stdexcept>

namespace mmg::qp {

int QpAssembler::add_var(std::string name, double lb, double ub) {
  if (lb > ub) throw std::invalid_argument("qp: variable '" + name + "' has lb > ub");
  const int idx = num_vars();
  names_.push_back(std::move(name));
  lb_.push_back(lb);
  ub_.push_back(ub);
  lin_.push_back(0.0);
  return idx;
}

void QpAssembler::add_quad_cost(int i, double coef) {
  if (coef != 0.0) q_trips_.emplace_back(i, i, 2.0 * coef);
}

void QpAssembler::add_pair_quad_cost(int i, int j, double coef) {
  if (coef == 0.0) return;
  q_trips_.emplace_back(i, i, 2.0 * coef);
  q_trips_.emplace_back(j, j, 2.0 * coef);
  q_trips_.emplace_back(i, j, 2.0 * coef);
  q_trips_.emplace_back(j, i, 2.0 * coef);
}

void QpAssembler::add_lin_cost(int i, double coef) { lin_[i] += coef; }

void QpAssembler::add_eq(const Terms& terms, double rhs, const std::string& label) {
  const int row = static_cast<int>(b_eq_.size());
  for (const auto& [idx, v] : terms) eq_trips_.emplace_back(row, idx, v);
  b_eq_.push_back(rhs);
  eq_labels_.push_back(label);
}

void QpAssembler::add_le(const Terms& terms, double rhs, const std::string& label) {
  const int row = static_cast<int>(b_in_.size());
  for (const auto& [idx, v] : terms) in_trips_.emplace_back(row, idx, v);
  b_in_.push_back(rhs);
  in_labels_.push_back(label);
}

QpProblem QpAssembler::build() const {
  QpProblem p;
  p.n = num_vars();
  p.Q.resize(p.n, p.n);
  p.Q.setFromTriplets(q_trips_.begin(), q_trips_.end());
  p.c = Eigen::Map<const Vector>(lin_.data(), p.n);
  p.var_names = names_;

  std::vector<Eigen::Triplet<double>> in = in_trips_;
  std::vector<double> b_in = b_in_;
  std::vector<std::string> in_labels = in_labels_;
  for (int i = 0; i < p.n; ++i) {
    if (ub_[i] < kInf) {
      in.emplace_back(static_cast<int>(b_in.size()), i, 1.0);
      b_in.push_back(ub_[i]);
      in_labels.push_back("bound:" + names_[i]);
    }
    if (lb_[i] > -kInf) {
      in.emplace_back(static_cast<int>(b_in.size()), i, -1.0);
      b_in.push_back(-lb_[i]);
      in_labels.push_back("bound:" + names_[i]);
    }
  }

  p.A_eq.resize(static_cast<int>(b_eq_.size()), p.n);
  p.A_eq.setFromTriplets(eq_trips_.begin(), eq_trips_.end());
  p.b_eq = Eigen::Map<const Vector>(b_eq_.data(), static_cast<int>(b_eq_.size()));
  p.eq_labels = eq_labels_;

  p.A_in.resize(static_cast<int>(b_in.size()), p.n);
  p.A_in.setFromTriplets(in.begin(), in.end());
  p.b_in = Eigen::Map<const Vector>(b_in.data(), static_cast<int>(b_in.size()));
  p.in_labels = std::move(in_labels);
  return p;
}

}  // namespace mmg::qp
