#include "biharm/recovery.hpp"

#include <Eigen/LU>

#include <random>

namespace biharm {

namespace {

thread_local int guard_depth = 0;

double matrix_norm_estimate(const Eigen::MatrixXd& a, int iters = 40) {
  std::mt19937_64 rng(41);
  std::normal_distribution<double> nd;
  Eigen::VectorXd x(a.cols());
  for (auto& v : x) v = nd(rng);
  x.normalize();
  double est = 0.0;
  for (int it = 0; it < iters; ++it) {
    const Eigen::VectorXd y = a.transpose() * (a * x);
    const double n = y.norm();
    if (n == 0.0) return 0.0;
    est = std::sqrt(n);
    x = y / n;
  }
  return est;
}

}  // namespace

OracleGuard::OracleGuard() { ++guard_depth; }
OracleGuard::~OracleGuard() { --guard_depth; }
bool OracleGuard::active() { return guard_depth > 0; }

void check_oracle_access(const char* what) {
  if (OracleGuard::active()) throw StageError("recover-trace", std::string("potential accessed during recovery: ") + what);
}

NeumannResult neumann_series_solve(const Eigen::MatrixXd& t, const Eigen::MatrixXcd& rhs, double tol, int max_terms) {
  if (t.rows() != t.cols() || t.cols() != rhs.rows()) throw DimensionError("Neumann series: size mismatch");
  NeumannResult out;
  out.x = rhs;
  const double scale = rhs.norm();
  if (scale == 0.0) {
    out.terms = 1;
    return out;
  }
  Eigen::MatrixXcd term = rhs;
  out.terms = 1;
  for (int k = 1; k < max_terms; ++k) {
    term = -(t * term);
    const double rel = term.norm() / scale;
    out.x += term;
    out.last_term = rel;
    if (rel < tol) return out;  // negligible terms are not counted
    out.terms = k + 1;
    if (!std::isfinite(rel) || rel > 1e6) throw ConvergenceError("Neumann series diverges: perturbation is not a contraction");
  }
  throw ConvergenceError("Neumann series did not converge in " + std::to_string(max_terms) + " terms");
}

TraceRecovery::TraceRecovery(const DtnMatrix& dlam, const Eigen::MatrixXd& s, double h) : h_(h) {
  if (s.rows() != dlam.size() || s.cols() != dlam.size()) throw DimensionError("single layer and DtN sizes differ");
  t_ = std::pow(h, 4) * (s * dlam.entries);
  t_norm_ = matrix_norm_estimate(t_);
  Eigen::MatrixXd k = t_;
  k.diagonal().array() += 1.0;
  lu_.compute(k);
}

Eigen::MatrixXcd TraceRecovery::solve(const Eigen::MatrixXcd& rhs, RecoveryMethod m) const {
  if (rhs.rows() != t_.rows()) throw DimensionError("trace has the wrong length for this boundary operator");
  OracleGuard guard;
  if (m == RecoveryMethod::neumann) {
    const NeumannResult r = neumann_series_solve(t_, rhs);
    last_terms_ = r.terms;
    return r.x;
  }
  // the real factorization applied to the real and imaginary parts
  Eigen::MatrixXd stacked(rhs.rows(), 2 * rhs.cols());
  stacked << rhs.real(), rhs.imag();
  Eigen::MatrixXd sol = lu_.solve(stacked);
  // one step of refinement
  Eigen::MatrixXd res = stacked - sol - t_ * sol;
  sol += lu_.solve(res);
  last_terms_ = 0;
  Eigen::MatrixXcd out(rhs.rows(), rhs.cols());
  out.real() = sol.leftCols(rhs.cols());
  out.imag() = sol.rightCols(rhs.cols());
  return out;
}

BoundaryJet TraceRecovery::recover(const BoundaryJet& u0_trace, RecoveryMethod m) const {
  return {solve(u0_trace.values, m).col(0)};
}

double TraceRecovery::residual(const Eigen::MatrixXcd& f, const Eigen::MatrixXcd& g) const {
  const Eigen::MatrixXcd kf = f + t_.cast<cplx>() * f;
  return (kf - g).norm() / g.norm();
}

BoundaryJet recover_trace(const DtnMatrix& dlam, const Eigen::MatrixXd& s, double h, const BoundaryJet& u0_trace,
                          RecoveryMethod m) {
  return TraceRecovery(dlam, s, h).recover(u0_trace, m);
}

}  // namespace biharm
