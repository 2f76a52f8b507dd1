#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <memory>
#include <string>
#include <vector>

namespace mmg::qp {

using SparseMat = Eigen::SparseMatrix<double>;
using Vector = Eigen::VectorXd;

/// Convex QP in standard form:
///   minimize    1/2 x'Qx + c'x
///   subject to  A_eq x  = b_eq
///               A_in x <= b_in
struct QpProblem {
  int n = 0;
  SparseMat Q;
  Vector c;
  SparseMat A_eq;
  Vector b_eq;
  SparseMat A_in;
  Vector b_in;
  std::vector<std::string> var_names;   // optional, size n when present
  std::vector<std::string> eq_labels;   // optional constraint-family tags
  std::vector<std::string> in_labels;

  int num_eq() const { return static_cast<int>(A_eq.rows()); }
  int num_in() const { return static_cast<int>(A_in.rows()); }

  /// Throws std::invalid_argument on dimension mismatch, asymmetric Q, or
  /// Q indefinite beyond tolerance.
  void validate(double psd_tol = 1e-6) const;
};

struct KktResiduals {
  double stationarity = 0.0;    // ||Qx + c + A_eq'nu + A_in'mu||_inf
  double primal_eq = 0.0;       // ||A_eq x - b_eq||_inf
  double primal_in = 0.0;       // max(A_in x - b_in)_+
  double dual_feas = 0.0;       // max(0, -min mu)
  double complementarity = 0.0; // max |mu_i (A_in x - b_in)_i|

  double max() const;
};

enum class SolveStatus { optimal, infeasible, iteration_limit };

std::string to_string(SolveStatus s);

struct QpSolution {
  Vector x;
  Vector duals_eq;  // nu: stationarity Qx + c + A_eq'nu + A_in'mu = 0
  Vector duals_in;  // mu >= 0
  double objective = 0.0;
  SolveStatus status = SolveStatus::iteration_limit;
  KktResiduals kkt;
  int iterations = 0;
  bool polished = false;
  std::string infeasible_row;  // label of the dominant certificate row
};

struct QpSettings {
  double tol = 1e-6;       // absolute KKT tolerance for status=optimal
  int max_iter = 20000;
  double sigma = 1e-6;     // proximal regularization
  double rho = 0.1;        // initial dual step; equality rows use 1e3 * rho
  double relax = 1.6;      // over-relaxation
  bool scaling = true;
  int scaling_iters = 10;
  int check_every = 25;
  bool polish = true;
  double infeas_tol = 1e-8;
};

KktResiduals kkt_residuals(const QpProblem& problem, const Vector& x,
                           const Vector& duals_eq, const Vector& duals_in);

/// Reusable solver: keeps the constraint factorization and a warm start
/// across solves. Only the linear cost may change between calls, which is
/// exactly what iterated market clearing needs.
class QpSolver {
 public:
  explicit QpSolver(QpProblem problem, QpSettings settings = {});
  ~QpSolver();
  QpSolver(QpSolver&&) noexcept;
  QpSolver& operator=(QpSolver&&) noexcept;

  void set_linear_cost(const Vector& c);
  /// Adjust the KKT tolerance between solves (factorization is kept).
  void set_tolerance(double tol);
  QpSolution solve();
  const QpProblem& problem() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

/// One-shot interface.
QpSolution solve_qp(const QpProblem& problem, double tol = 1e-6,
                    int max_iter = 20000);

/// Plain-text dump (triplet form) for external verification.
std::string dump_problem(const QpProblem& problem);

}  // namespace mmg::qp
