#include "mmg/qp.hpp"

#include <Eigen/SparseCholesky>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace mmg::qp {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double inf_norm(const Vector& v) { return v.size() ? v.cwiseAbs().maxCoeff() : 0.0; }

}  // namespace

double KktResiduals::max() const {
  return std::max({stationarity, primal_eq, primal_in, dual_feas, complementarity});
}

std::string to_string(SolveStatus s) {
  switch (s) {
    case SolveStatus::optimal: return "optimal";
    case SolveStatus::infeasible: return "infeasible";
    case SolveStatus::iteration_limit: return "iteration-limit";
  }
  return "unknown";
}

void QpProblem::validate(double psd_tol) const {
  if (Q.rows() != n || Q.cols() != n)
    throw std::invalid_argument("qp: Q must be n x n");
  if (c.size() != n) throw std::invalid_argument("qp: c must have length n");
  if (A_eq.rows() != b_eq.size())
    throw std::invalid_argument("qp: A_eq/b_eq row mismatch");
  if (A_in.rows() != b_in.size())
    throw std::invalid_argument("qp: A_in/b_in row mismatch");
  if ((A_eq.rows() > 0 && A_eq.cols() != n) || (A_in.rows() > 0 && A_in.cols() != n))
    throw std::invalid_argument("qp: constraint matrix column count != n");

  SparseMat diff = SparseMat(Q.transpose()) - Q;
  double asym = 0.0;
  for (int k = 0; k < diff.outerSize(); ++k)
    for (SparseMat::InnerIterator it(diff, k); it; ++it)
      asym = std::max(asym, std::abs(it.value()));
  double qscale = 0.0;
  for (int k = 0; k < Q.outerSize(); ++k)
    for (SparseMat::InnerIterator it(Q, k); it; ++it)
      qscale = std::max(qscale, std::abs(it.value()));
  if (asym > psd_tol * std::max(1.0, qscale))
    throw std::invalid_argument("qp: Q is not symmetric");

  // Cheap PSD probe: LDLT of Q + eps I must not produce a pivot that is
  // negative beyond tolerance.
  if (n > 0 && qscale > 0.0) {
    SparseMat shifted = Q;
    const double eps = 1e-10 * std::max(1.0, qscale);
    SparseMat ident(n, n);
    ident.setIdentity();
    shifted += eps * ident;
    Eigen::SimplicialLDLT<SparseMat> ldlt(shifted);
    if (ldlt.info() == Eigen::Success) {
      const double dmin = ldlt.vectorD().minCoeff();
      if (dmin < -psd_tol * std::max(1.0, qscale))
        throw std::invalid_argument("qp: Q is not positive semidefinite");
    }
  }
}

KktResiduals kkt_residuals(const QpProblem& p, const Vector& x,
                           const Vector& duals_eq, const Vector& duals_in) {
  if (x.size() != p.n || duals_eq.size() != p.A_eq.rows() ||
      duals_in.size() != p.A_in.rows())
    throw std::invalid_argument("kkt_residuals: dimension mismatch");

  KktResiduals r;
  Vector grad = p.Q * x + p.c;
  if (p.A_eq.rows() > 0) grad += p.A_eq.transpose() * duals_eq;
  if (p.A_in.rows() > 0) grad += p.A_in.transpose() * duals_in;
  r.stationarity = inf_norm(grad);

  if (p.A_eq.rows() > 0) r.primal_eq = inf_norm(p.A_eq * x - p.b_eq);
  if (p.A_in.rows() > 0) {
    Vector slack = p.A_in * x - p.b_in;  // <= 0 when feasible
    r.primal_in = std::max(0.0, slack.maxCoeff());
    r.dual_feas = std::max(0.0, -duals_in.minCoeff());
    r.complementarity = (duals_in.array() * slack.array()).abs().maxCoeff();
  }
  return r;
}

struct QpSolver::Impl {
  QpProblem prob;
  QpSettings cfg;

  int n = 0, me = 0, mi = 0, m = 0;

  // Scaled data.
  SparseMat Qs, As;
  Vector qs, lo, up;
  Vector D, E;  // x = D xs, y = E ys / gamma
  double gamma = 1.0;

  Vector rho;      // per-row dual step
  double rho_bar;  // scalar the rows derive from

  Eigen::SimplicialLDLT<SparseMat> kkt;
  bool factorized = false;
  int iters_since_refactor = 0;
  int refactor_count = 0;

  // Iterates (scaled).
  Vector xs, zs, ys;

  Impl(QpProblem p, QpSettings s) : prob(std::move(p)), cfg(s) {
    prob.validate();
    n = prob.n;
    me = prob.num_eq();
    mi = prob.num_in();
    m = me + mi;
    rho_bar = cfg.rho;
    setup();
  }

  void setup() {
    // Stack constraints: equality rows first.
    std::vector<Eigen::Triplet<double>> trips;
    trips.reserve(prob.A_eq.nonZeros() + prob.A_in.nonZeros());
    for (int k = 0; k < prob.A_eq.outerSize(); ++k)
      for (SparseMat::InnerIterator it(prob.A_eq, k); it; ++it)
        trips.emplace_back(static_cast<int>(it.row()), static_cast<int>(it.col()),
                           it.value());
    for (int k = 0; k < prob.A_in.outerSize(); ++k)
      for (SparseMat::InnerIterator it(prob.A_in, k); it; ++it)
        trips.emplace_back(me + static_cast<int>(it.row()),
                           static_cast<int>(it.col()), it.value());
    As.resize(m, n);
    As.setFromTriplets(trips.begin(), trips.end());

    Qs = prob.Q;
    qs = prob.c;
    lo.resize(m);
    up.resize(m);
    for (int i = 0; i < me; ++i) lo[i] = up[i] = prob.b_eq[i];
    for (int i = 0; i < mi; ++i) {
      lo[me + i] = -kInf;
      up[me + i] = prob.b_in[i];
    }

    D = Vector::Ones(n);
    E = Vector::Ones(m);
    gamma = 1.0;
    if (cfg.scaling) equilibrate();

    rebuild_rho();
    build_and_factor();

    xs = Vector::Zero(n);
    zs = Vector::Zero(m);
    ys = Vector::Zero(m);
  }

  // Ruiz equilibration on the symmetric stack [[Q, A'],[A, 0]].
  void equilibrate() {
    for (int pass = 0; pass < cfg.scaling_iters; ++pass) {
      Vector cnorm = Vector::Zero(n);
      Vector rnorm = Vector::Zero(m);
      for (int k = 0; k < Qs.outerSize(); ++k)
        for (SparseMat::InnerIterator it(Qs, k); it; ++it)
          cnorm[it.col()] = std::max(cnorm[it.col()], std::abs(it.value()));
      for (int k = 0; k < As.outerSize(); ++k)
        for (SparseMat::InnerIterator it(As, k); it; ++it) {
          cnorm[it.col()] = std::max(cnorm[it.col()], std::abs(it.value()));
          rnorm[it.row()] = std::max(rnorm[it.row()], std::abs(it.value()));
        }
      Vector d(n), e(m);
      for (int j = 0; j < n; ++j)
        d[j] = cnorm[j] > 1e-12 ? 1.0 / std::sqrt(cnorm[j]) : 1.0;
      for (int i = 0; i < m; ++i)
        e[i] = rnorm[i] > 1e-12 ? 1.0 / std::sqrt(rnorm[i]) : 1.0;

      Qs = d.asDiagonal() * Qs * d.asDiagonal();
      As = e.asDiagonal() * As * d.asDiagonal();
      qs = qs.cwiseProduct(d);
      lo = lo.cwiseProduct(e);  // -inf entries stay -inf
      up = up.cwiseProduct(e);
      D = D.cwiseProduct(d);
      E = E.cwiseProduct(e);
    }
    // Cost scaling.
    double qmean = 0.0;
    for (int j = 0; j < n; ++j) {
      double cj = 0.0;
      for (SparseMat::InnerIterator it(Qs, j); it; ++it)
        cj = std::max(cj, std::abs(it.value()));
      qmean += cj;
    }
    qmean /= std::max(1, n);
    const double denom = std::max(qmean, inf_norm(qs));
    gamma = denom > 1e-12 ? 1.0 / denom : 1.0;
    Qs *= gamma;
    qs *= gamma;
  }

  void rebuild_rho() {
    rho.resize(m);
    for (int i = 0; i < m; ++i) rho[i] = (i < me) ? rho_bar * 1e3 : rho_bar;
  }

  void build_and_factor() {
    SparseMat K(n + m, n + m);
    std::vector<Eigen::Triplet<double>> trips;
    trips.reserve(Qs.nonZeros() + 2 * As.nonZeros() + n + m);
    for (int k = 0; k < Qs.outerSize(); ++k)
      for (SparseMat::InnerIterator it(Qs, k); it; ++it)
        trips.emplace_back(static_cast<int>(it.row()), static_cast<int>(it.col()),
                           it.value());
    for (int j = 0; j < n; ++j) trips.emplace_back(j, j, cfg.sigma);
    for (int k = 0; k < As.outerSize(); ++k)
      for (SparseMat::InnerIterator it(As, k); it; ++it) {
        trips.emplace_back(n + static_cast<int>(it.row()),
                           static_cast<int>(it.col()), it.value());
        trips.emplace_back(static_cast<int>(it.col()),
                           n + static_cast<int>(it.row()), it.value());
      }
    for (int i = 0; i < m; ++i) trips.emplace_back(n + i, n + i, -1.0 / rho[i]);
    K.setFromTriplets(trips.begin(), trips.end());
    kkt.compute(K);
    if (kkt.info() != Eigen::Success)
      throw std::runtime_error("qp: KKT factorization failed");
    factorized = true;
  }

  void unscale(Vector& x, Vector& y, Vector* z = nullptr) const {
    x = D.cwiseProduct(xs);
    y = E.cwiseProduct(ys) / gamma;
    if (z) *z = zs.cwiseQuotient(E);
  }

  struct Residuals {
    double primal, dual;
  };

  Residuals unscaled_residuals(const Vector& x, const Vector& y) const {
    Residuals r{0.0, 0.0};
    Vector grad = prob.Q * x + prob.c;
    if (me) grad += prob.A_eq.transpose() * y.head(me);
    if (mi) grad += prob.A_in.transpose() * y.tail(mi);
    r.dual = inf_norm(grad);
    if (me) r.primal = inf_norm(prob.A_eq * x - prob.b_eq);
    if (mi) {
      Vector s = prob.A_in * x - prob.b_in;
      r.primal = std::max(r.primal, s.size() ? std::max(0.0, s.maxCoeff()) : 0.0);
    }
    return r;
  }

  void adapt_rho(const Vector& x, const Vector& y) {
    // Balance scaled primal and dual residuals.
    Vector axs = As * xs;
    const double rp_den = std::max({inf_norm(axs), inf_norm(zs), 1e-10});
    const double rp = (m ? inf_norm(axs - zs) : 0.0) / rp_den;
    Vector qx = Qs * xs;
    Vector aty = m ? Vector(As.transpose() * ys) : Vector::Zero(n);
    const double rd_den = std::max({inf_norm(qx), inf_norm(qs), inf_norm(aty), 1e-10});
    Vector grads = qx + qs + aty;
    const double rd = inf_norm(grads) / rd_den;
    (void)x;
    (void)y;
    if (rp < 1e-14 || rd < 1e-14) return;
    if (iters_since_refactor < 100 || refactor_count >= 30) return;
    const double ratio = std::sqrt(rp / rd);
    if (ratio > 5.0 || ratio < 0.2) {
      rho_bar = std::clamp(rho_bar * ratio, 1e-6, 1e6);
      rebuild_rho();
      build_and_factor();
      iters_since_refactor = 0;
      ++refactor_count;
    }
  }

  bool primal_infeasible(const Vector& dy, std::string* row_label) const {
    const double norm = inf_norm(dy);
    if (norm < 1e-12) return false;
    Vector v = dy / norm;
    Vector atv = Vector::Zero(n);
    if (me) atv += prob.A_eq.transpose() * v.head(me);
    if (mi) atv += prob.A_in.transpose() * v.tail(mi);
    if (inf_norm(atv) > cfg.infeas_tol) return false;
    if (mi && v.tail(mi).minCoeff() < -cfg.infeas_tol) return false;
    double support = 0.0;
    if (me) support += prob.b_eq.dot(v.head(me));
    if (mi) support += prob.b_in.dot(v.tail(mi).cwiseMax(0.0));
    if (support > -cfg.infeas_tol) return false;
    if (row_label) {
      int idx = 0;
      v.cwiseAbs().maxCoeff(&idx);
      if (idx < me && idx < static_cast<int>(prob.eq_labels.size()))
        *row_label = prob.eq_labels[idx];
      else if (idx >= me && idx - me < static_cast<int>(prob.in_labels.size()))
        *row_label = prob.in_labels[idx - me];
    }
    return true;
  }

  // Equality-constrained solve on the active set; refined against the
  // unregularized KKT system.
  bool polish(QpSolution& sol) const {
    std::vector<int> active;
    active.reserve(mi);
    for (int i = 0; i < mi; ++i) {
      // Strictly positive multiplier, or slack pinched to the bound: the
      // second test catches weakly-active rows (mu = 0 at a degenerate
      // vertex) that projection leaves with a tiny positive slack.
      const double slack = up[me + i] - zs[me + i];
      if (ys[me + i] > 0.0 ||
          slack <= 1e-7 * std::max(1.0, std::abs(up[me + i])))
        active.push_back(i);
    }
    const int ma = me + static_cast<int>(active.size());

    std::vector<Eigen::Triplet<double>> atrips;
    for (int k = 0; k < prob.A_eq.outerSize(); ++k)
      for (SparseMat::InnerIterator it(prob.A_eq, k); it; ++it)
        atrips.emplace_back(static_cast<int>(it.row()), static_cast<int>(it.col()),
                            it.value());
    SparseMat AinT = prob.A_in.transpose();  // column = inequality row
    for (size_t a = 0; a < active.size(); ++a)
      for (SparseMat::InnerIterator it(AinT, active[a]); it; ++it)
        atrips.emplace_back(me + static_cast<int>(a), static_cast<int>(it.row()),
                            it.value());
    SparseMat Aact(ma, n);
    Aact.setFromTriplets(atrips.begin(), atrips.end());

    Vector bact(ma);
    bact.head(me) = prob.b_eq;
    for (size_t a = 0; a < active.size(); ++a) bact[me + a] = prob.b_in[active[a]];

    Vector rhs(n + ma);
    rhs.head(n) = -prob.c;
    rhs.tail(ma) = bact;

    double delta = 1e-7;
    Eigen::SimplicialLDLT<SparseMat> fact;
    for (int attempt = 0; attempt < 4; ++attempt, delta *= 100.0) {
      SparseMat K(n + ma, n + ma);
      std::vector<Eigen::Triplet<double>> trips;
      for (int k = 0; k < prob.Q.outerSize(); ++k)
        for (SparseMat::InnerIterator it(prob.Q, k); it; ++it)
          trips.emplace_back(static_cast<int>(it.row()), static_cast<int>(it.col()),
                             it.value());
      for (int j = 0; j < n; ++j) trips.emplace_back(j, j, delta);
      for (int k = 0; k < Aact.outerSize(); ++k)
        for (SparseMat::InnerIterator it(Aact, k); it; ++it) {
          trips.emplace_back(n + static_cast<int>(it.row()),
                             static_cast<int>(it.col()), it.value());
          trips.emplace_back(static_cast<int>(it.col()),
                             n + static_cast<int>(it.row()), it.value());
        }
      for (int i = 0; i < ma; ++i) trips.emplace_back(n + i, n + i, -delta);
      K.setFromTriplets(trips.begin(), trips.end());
      fact.compute(K);
      if (fact.info() == Eigen::Success) break;
      if (attempt == 3) {
        if (std::getenv("MMG_QP_DEBUG"))
          std::fprintf(stderr, "polish: KKT factorization failed (ma=%d)\n", ma);
        return false;
      }
    }

    Vector s = fact.solve(rhs);
    // Iterative refinement against the unregularized system.
    auto apply_K0 = [&](const Vector& v) {
      Vector out(n + ma);
      out.head(n) = prob.Q * v.head(n);
      if (ma) {
        out.head(n) += Aact.transpose() * v.tail(ma);
        out.tail(ma) = Aact * v.head(n);
      }
      return out;
    };
    for (int it = 0; it < 8; ++it) {
      Vector resid = rhs - apply_K0(s);
      if (std::getenv("MMG_QP_DEBUG"))
        std::fprintf(stderr, "polish refine %d: resid=%.3e delta=%.1e\n", it,
                     inf_norm(resid), delta);
      if (inf_norm(resid) <= 1e-12 * std::max(1.0, inf_norm(rhs))) break;
      s += fact.solve(resid);
    }

    Vector x = s.head(n);
    Vector nu = s.segment(n, me);
    Vector mu = Vector::Zero(mi);
    for (size_t a = 0; a < active.size(); ++a) mu[active[a]] = s[n + me + a];
    mu = mu.cwiseMax(0.0);

    KktResiduals kr = kkt_residuals(prob, x, nu, mu);
    if (std::getenv("MMG_QP_DEBUG"))
      std::fprintf(stderr,
                   "polish: ma=%d stat=%.2e peq=%.2e pin=%.2e comp=%.2e vs admm %.2e\n",
                   ma, kr.stationarity, kr.primal_eq, kr.primal_in,
                   kr.complementarity, sol.kkt.max());
    if (kr.max() <= sol.kkt.max() || kr.max() <= cfg.tol) {
      sol.x = x;
      sol.duals_eq = nu;
      sol.duals_in = mu;
      sol.kkt = kr;
      sol.polished = true;
      return kr.max() <= cfg.tol;
    }
    return false;
  }

  QpSolution run() {
    QpSolution sol;
    Vector ys_prev_check = ys;
    double polish_gate = std::max(100.0 * cfg.tol, 1e-4);
    int k = 0;
    Vector xtilde(n), rhs(n + m), sv(n + m), ztilde(m), w(m);

    for (k = 1; k <= cfg.max_iter; ++k) {
      ++iters_since_refactor;
      rhs.head(n) = cfg.sigma * xs - qs;
      if (m) rhs.tail(m) = zs - ys.cwiseQuotient(rho);
      sv = kkt.solve(rhs);
      xtilde = sv.head(n);
      if (m) {
        Vector nu = sv.tail(m);
        ztilde = zs + (nu - ys).cwiseQuotient(rho);
        xs = cfg.relax * xtilde + (1.0 - cfg.relax) * xs;
        w = cfg.relax * ztilde + (1.0 - cfg.relax) * zs + ys.cwiseQuotient(rho);
        zs = w.cwiseMax(lo).cwiseMin(up);
        ys = rho.cwiseProduct(w - zs);
      } else {
        xs = cfg.relax * xtilde + (1.0 - cfg.relax) * xs;
      }

      if (k % cfg.check_every != 0 && k != cfg.max_iter) continue;

      Vector x, y;
      unscale(x, y);
      Residuals r = unscaled_residuals(x, y);

      if (r.primal <= polish_gate && r.dual <= polish_gate) {
        sol = extract(x, y, k);
        if (sol.kkt.max() <= cfg.tol) {
          sol.status = SolveStatus::optimal;
          return sol;
        }
        if (cfg.polish && polish(sol) && sol.kkt.max() <= cfg.tol) {
          sol.status = SolveStatus::optimal;
          sol.iterations = k;
          sol.objective = 0.5 * sol.x.dot(prob.Q * sol.x) + prob.c.dot(sol.x);
          return sol;
        }
        polish_gate = std::max(cfg.tol, std::min(polish_gate, std::max(r.primal, r.dual)) / 10.0);
      }

      Vector dy = (E.cwiseProduct(ys - ys_prev_check)) / gamma;
      std::string label;
      if (primal_infeasible(dy, &label)) {
        sol = extract(x, y, k);
        sol.status = SolveStatus::infeasible;
        sol.infeasible_row = label;
        return sol;
      }
      ys_prev_check = ys;

      if (k < cfg.max_iter) adapt_rho(x, y);
    }

    Vector x, y;
    unscale(x, y);
    sol = extract(x, y, cfg.max_iter);
    if (cfg.polish && polish(sol) && sol.kkt.max() <= cfg.tol) {
      sol.status = SolveStatus::optimal;
      sol.objective = 0.5 * sol.x.dot(prob.Q * sol.x) + prob.c.dot(sol.x);
    } else {
      sol.status = SolveStatus::iteration_limit;
    }
    return sol;
  }

  QpSolution extract(const Vector& x, const Vector& y, int iters) const {
    QpSolution sol;
    sol.x = x;
    sol.duals_eq = y.head(me);
    sol.duals_in = mi ? Vector(y.tail(mi).cwiseMax(0.0)) : Vector(0);
    sol.objective = 0.5 * x.dot(prob.Q * x) + prob.c.dot(x);
    sol.kkt = kkt_residuals(prob, sol.x, sol.duals_eq, sol.duals_in);
    sol.iterations = iters;
    return sol;
  }
};

QpSolver::QpSolver(QpProblem problem, QpSettings settings)
    : impl_(std::make_unique<Impl>(std::move(problem), settings)) {}

QpSolver::~QpSolver() = default;
QpSolver::QpSolver(QpSolver&&) noexcept = default;
QpSolver& QpSolver::operator=(QpSolver&&) noexcept = default;

void QpSolver::set_linear_cost(const Vector& c) {
  if (c.size() != impl_->n)
    throw std::invalid_argument("qp: linear cost has wrong length");
  impl_->prob.c = c;
  impl_->qs = impl_->gamma * impl_->D.cwiseProduct(c);
}

void QpSolver::set_tolerance(double tol) { impl_->cfg.tol = tol; }

QpSolution QpSolver::solve() { return impl_->run(); }

const QpProblem& QpSolver::problem() const { return impl_->prob; }

QpSolution solve_qp(const QpProblem& problem, double tol, int max_iter) {
  QpSettings s;
  s.tol = tol;
  s.max_iter = max_iter;
  QpSolver solver(problem, s);
  return solver.solve();
}

std::string dump_problem(const QpProblem& p) {
  std::ostringstream out;
  out.precision(17);
  out << "n " << p.n << " eq " << p.num_eq() << " in " << p.num_in() << "\n";
  auto triplets = [&](const SparseMat& M, const char* name) {
    out << name << " " << M.nonZeros() << "\n";
    for (int k = 0; k < M.outerSize(); ++k)
      for (SparseMat::InnerIterator it(M, k); it; ++it)
        out << it.row() << " " << it.col() << " " << it.value() << "\n";
  };
  auto vec = [&](const Vector& v, const char* name) {
    out << name;
    for (int i = 0; i < v.size(); ++i) out << " " << v[i];
    out << "\n";
  };
  triplets(p.Q, "Q");
  vec(p.c, "c");
  triplets(p.A_eq, "A_eq");
  vec(p.b_eq, "b_eq");
  triplets(p.A_in, "A_in");
  vec(p.b_in, "b_in");
  if (!p.var_names.empty()) {
    out << "vars";
    for (const auto& nm : p.var_names) out << " " << nm;
    out << "\n";
  }
  return out.str();
}

}  // namespace mmg::qp
