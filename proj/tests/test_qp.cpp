#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include "mmg/qp.hpp"
#include "mmg/qp_builder.hpp"
#include "test_util.hpp"

using namespace mmg::qp;

namespace {

QpProblem x_squared_ge_one() {
  QpAssembler qb;
  int x = qb.add_var("x", -QpAssembler::kInf, QpAssembler::kInf);
  qb.add_quad_cost(x, 1.0);            // x^2
  qb.add_le({{x, -1.0}}, -1.0, "lb");  // x >= 1
  return qb.build();
}

// Dual objective for 1/2 x'Qx + c'x with A_eq x = b_eq, A_in x <= b_in,
// evaluated at a stationary (x, nu, mu).
double dual_objective(const QpProblem& p, const QpSolution& s) {
  double quad = 0.5 * s.x.dot(p.Q * s.x);
  double val = -quad;
  if (p.num_eq() > 0) val -= p.b_eq.dot(s.duals_eq);
  if (p.num_in() > 0) val -= p.b_in.dot(s.duals_in);
  return val;
}

}  // namespace

TEST_CASE("minimize x^2 subject to x >= 1") {
  QpSolution s = solve_qp(x_squared_ge_one());
  REQUIRE(s.status == SolveStatus::optimal);
  CHECK(s.x[0] == doctest::Approx(1.0).epsilon(1e-6));
  CHECK(s.objective == doctest::Approx(1.0).epsilon(1e-6));
  CHECK(s.duals_in[0] == doctest::Approx(2.0).epsilon(1e-5));
  CHECK(s.kkt.max() <= 1e-6);
}

TEST_CASE("two-generator economic dispatch with an equality coupling") {
  // minimize 5 p1^2 + 70 p1 + 5 p2^2 + 100 p2
  // s.t. p1 + p2 = 0.5, p >= 0.
  QpAssembler qb;
  int p1 = qb.add_var("p1", 0.0, QpAssembler::kInf);
  int p2 = qb.add_var("p2", 0.0, QpAssembler::kInf);
  qb.add_quad_cost(p1, 5.0);
  qb.add_lin_cost(p1, 70.0);
  qb.add_quad_cost(p2, 5.0);
  qb.add_lin_cost(p2, 100.0);
  qb.add_eq({{p1, 1.0}, {p2, 1.0}}, 0.5, "balance");
  QpSolution s = solve_qp(qb.build());
  REQUIRE(s.status == SolveStatus::optimal);
  CHECK(s.x[0] == doctest::Approx(0.5).epsilon(1e-5));
  CHECK(s.x[1] == doctest::Approx(0.0).epsilon(1e-5));
  CHECK(s.objective == doctest::Approx(5 * 0.25 + 70 * 0.5).epsilon(1e-6));
  // Stationarity convention Qx + c + A_eq'nu + A_in'mu = 0 puts the
  // marginal price of the balance row at -nu: the multiplier is -75
  // while the economic shadow price is +75 $/MWh.
  CHECK(s.duals_eq[0] == doctest::Approx(-75.0).epsilon(1e-4));
  CHECK(s.kkt.max() <= 1e-6);
}

TEST_CASE("contradictory equalities produce an infeasibility certificate") {
  QpAssembler qb;
  int x = qb.add_var("x", -QpAssembler::kInf, QpAssembler::kInf);
  qb.add_quad_cost(x, 1.0);
  qb.add_eq({{x, 1.0}}, 1.0, "pin-one");
  qb.add_eq({{x, 1.0}}, 2.0, "pin-two");
  QpSolution s = solve_qp(qb.build());
  CHECK(s.status == SolveStatus::infeasible);
  CHECK(!s.infeasible_row.empty());
}

TEST_CASE("kkt_residuals evaluates hand-built points") {
  QpProblem p = x_squared_ge_one();
  Eigen::VectorXd x(1), mu(1);
  Eigen::VectorXd nu(0);

  x[0] = 1.0;
  mu[0] = 2.0;
  KktResiduals at_opt = kkt_residuals(p, x, nu, mu);
  CHECK(at_opt.max() <= 1e-9);

  // Perturbed primal: stationarity |2x - mu| = 0.2.
  x[0] = 1.1;
  KktResiduals off = kkt_residuals(p, x, nu, mu);
  CHECK(off.stationarity == doctest::Approx(0.2));
  CHECK(off.complementarity == doctest::Approx(0.2));

  // Unconstrained interior point with zero duals: residual = |Qx + c|.
  QpAssembler qb;
  int v = qb.add_var("v", -QpAssembler::kInf, QpAssembler::kInf);
  qb.add_quad_cost(v, 1.0);
  qb.add_lin_cost(v, -4.0);
  QpProblem q = qb.build();
  Eigen::VectorXd xv(1);
  xv[0] = 1.0;  // optimum is 2
  KktResiduals r = kkt_residuals(q, xv, Eigen::VectorXd(0), Eigen::VectorXd(0));
  CHECK(r.stationarity == doctest::Approx(std::abs(2.0 * 1.0 - 4.0)));
}

TEST_CASE("solver is deterministic") {
  std::mt19937 rng(7);
  auto inst = testutil::make_random_box_qp(rng);
  QpSolution a = solve_qp(inst.problem);
  QpSolution b = solve_qp(inst.problem);
  REQUIRE(a.status == SolveStatus::optimal);
  CHECK(a.x == b.x);
  CHECK(a.objective == b.objective);
  CHECK(a.iterations == b.iterations);
}

TEST_CASE("primal-dual gap is small at reported optima") {
  std::mt19937 rng(11);
  for (int i = 0; i < 10; ++i) {
    auto inst = testutil::make_random_box_qp(rng);
    QpSolution s = solve_qp(inst.problem);
    REQUIRE(s.status == SolveStatus::optimal);
    const double scale = std::max(1.0, std::abs(s.objective));
    CHECK(std::abs(s.objective - dual_objective(inst.problem, s)) <=
          1e-5 * scale);
  }
}

TEST_CASE("random box QPs match an independent projected-gradient oracle") {
  std::mt19937 rng(42);
  for (int i = 0; i < 200; ++i) {
    auto inst = testutil::make_random_box_qp(rng);
    QpSolution s = solve_qp(inst.problem);
    REQUIRE(s.status == SolveStatus::optimal);
    CHECK(s.kkt.max() <= 1e-6);
    const double oracle =
        testutil::pg_box_qp_objective(inst.Q, inst.c, inst.lb, inst.ub);
    const double scale = std::max(1.0, std::abs(oracle));
    CHECK(std::abs(s.objective - oracle) <= 1e-5 * scale);
  }
}

TEST_CASE("dimension mismatches and indefinite costs are rejected") {
  QpProblem p = x_squared_ge_one();
  p.c = Eigen::VectorXd::Zero(3);
  CHECK_THROWS_AS(p.validate(), std::invalid_argument);

  QpAssembler qb;
  int x = qb.add_var("x", -1.0, 1.0);
  qb.add_quad_cost(x, -1.0);  // concave
  CHECK_THROWS_AS(solve_qp(qb.build()), std::invalid_argument);
}

TEST_CASE("tolerance can be tightened between warm solves") {
  std::mt19937 rng(3);
  auto inst = testutil::make_random_box_qp(rng);
  QpSettings st;
  st.tol = 1e-3;
  QpSolver solver(inst.problem, st);
  QpSolution loose = solver.solve();
  REQUIRE(loose.status == SolveStatus::optimal);
  solver.set_tolerance(1e-8);
  QpSolution tight = solver.solve();
  REQUIRE(tight.status == SolveStatus::optimal);
  CHECK(tight.kkt.max() <= 1e-8);
}
