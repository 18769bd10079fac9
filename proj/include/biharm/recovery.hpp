#pragma once

#include "biharm/carleman.hpp"
#include "biharm/guard.hpp"

namespace biharm {

enum class RecoveryMethod { direct, neumann };

struct NeumannResult {
  Eigen::MatrixXcd x;
  int terms = 0;
  double last_term = 0.0;  // relative norm of the last term added
};

// x = sum_k (-T)^k rhs until the newest term is below tol * ||rhs||.
// Throws ConvergenceError when the terms blow up or max_terms is reached.
NeumannResult neumann_series_solve(const Eigen::MatrixXd& t, const Eigen::MatrixXcd& rhs, double tol = 1e-14,
                                   int max_terms = 200);

// Solves (1 + h^4 S dLambda) f = gamma u0 for band traces (one per column).
class TraceRecovery {
 public:
  TraceRecovery(const DtnMatrix& dlam, const Eigen::MatrixXd& s, double h);

  double h() const { return h_; }
  const Eigen::MatrixXd& perturbation() const { return t_; }
  double perturbation_norm() const { return t_norm_; }

  Eigen::MatrixXcd solve(const Eigen::MatrixXcd& rhs, RecoveryMethod m = RecoveryMethod::direct) const;
  BoundaryJet recover(const BoundaryJet& u0_trace, RecoveryMethod m = RecoveryMethod::direct) const;
  // relative residual ||K f - g|| / ||g||
  double residual(const Eigen::MatrixXcd& f, const Eigen::MatrixXcd& g) const;
  int last_terms() const { return last_terms_; }

 private:
  double h_;
  Eigen::MatrixXd t_;
  double t_norm_ = 0.0;
  Eigen::PartialPivLU<Eigen::MatrixXd> lu_;
  mutable int last_terms_ = 0;
};

BoundaryJet recover_trace(const DtnMatrix& dlam, const Eigen::MatrixXd& s, double h, const BoundaryJet& u0_trace,
                          RecoveryMethod m = RecoveryMethod::direct);

}  // namespace biharm
