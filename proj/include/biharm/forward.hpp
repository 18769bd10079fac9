#pragma once

#include <Eigen/Sparse>

#include <memory>
#include <string>

#include "biharm/mesh.hpp"

namespace biharm {

using SpMat = Eigen::SparseMatrix<double>;

// Sampled potential; zero outside M.
struct Potential {
  RealField values;

  static Potential zero(const Domain& d) { return {RealField::Zero(d.num_nodes())}; }
  static Potential constant(const Domain& d, double c) { return {RealField::Constant(d.num_nodes(), c)}; }
  template <class F>
  static Potential sampled(const Domain& d, const F& f) {
    return {d.sample(f).real()};
  }
};

// 7-point Laplacian rows on L, columns on N (|L| x |N|).
SpMat laplacian_matrix(const Domain& d);
// Laplacian evaluated on L, zero elsewhere.
Field apply_laplacian(const Domain& d, const Field& u);
// Delta_h^2 at the interior nodes I, zero elsewhere.
Field apply_bilaplacian(const Domain& d, const Field& u);

// Real symmetric sparse factorization with iterative refinement. Uses a
// supernodal Cholesky when the matrix is definite and the factor passes a
// residual self-check, otherwise a simplicial LDL^T.
class RefinedSolver {
 public:
  RefinedSolver(const SpMat& a, const std::string& what);
  ~RefinedSolver();
  RefinedSolver(const RefinedSolver&) = delete;
  RefinedSolver& operator=(const RefinedSolver&) = delete;

  Eigen::VectorXd solve(const Eigen::VectorXd& b) const;
  Eigen::VectorXcd solve(const Eigen::VectorXcd& b) const;
  Eigen::MatrixXd solve(const Eigen::MatrixXd& b) const;
  const SpMat& matrix() const { return a_; }
  int rows() const { return static_cast<int>(a_.rows()); }
  bool supernodal() const;

 private:
  Eigen::MatrixXd raw_solve(const Eigen::MatrixXd& b) const;

  struct Impl;
  SpMat a_;
  std::unique_ptr<Impl> impl_;
};

// Symmetric operator norm and smallest singular value by power/inverse
// iteration.
double sym_norm_estimate(const SpMat& a, int iters = 60);
double sym_sigma_min_estimate(const RefinedSolver& s, int iters = 60);

// Weak-form operator K_q = Lap^T W Lap + W q on N. Its rows on I equal
// w (Delta_h^2 + q); the DtN map is its Schur complement onto the band.
class ClampedSolver {
 public:
  ClampedSolver(const Domain& d, const Potential& q);

  const Domain& domain() const { return *d_; }
  const Potential& potential() const { return q_; }

  // (Delta_h^2 + q) u = rhs on I and u = f on the band.
  Field solve(const BoundaryJet& f, const Field& rhs) const;
  Field poisson(const BoundaryJet& g) const;

  // Lambda f = K_BB f - K_BI K_II^{-1} K_IB f
  Eigen::VectorXcd apply_dtn(const Eigen::VectorXcd& f) const;
  Eigen::MatrixXd assemble_dtn() const;

  double sigma_min() const { return sigma_min_; }
  double operator_norm() const { return norm_; }
  const SpMat& full_operator() const { return k_; }

 private:
  const Domain* d_;
  Potential q_;
  SpMat k_, kii_, kib_, kbb_;
  std::unique_ptr<RefinedSolver> solver_;
  double sigma_min_ = 0.0, norm_ = 0.0;
};

struct DtnMatrix {
  Eigen::MatrixXd entries;  // band x band, acts on band values
  Eigen::VectorXd weights;  // band weights (cell volume); the pairing is g^T entries f
  DomainConfig domain;
  double h = 0.0, lambda = 0.0;  // only set for single-layer dumps
  bool has_params = false;

  int size() const { return static_cast<int>(entries.rows()); }
};

DtnMatrix assemble_dtn(const ClampedSolver& solver);
DtnMatrix assemble_dtn(const Domain& d, const Potential& q);
DtnMatrix dtn_difference(const DtnMatrix& a, const DtnMatrix& b);

cplx dtn_pairing(const DtnMatrix& lam, const BoundaryJet& f, const BoundaryJet& g);

// |<(L_q - L_0) f, g> - sum w q u^f v^g| / (1 + |sum ...|)
double verify_integral_identity(const ClampedSolver& sq, const ClampedSolver& s0, const DtnMatrix& dlam,
                                const BoundaryJet& f, const BoundaryJet& g);

void write_dtn(const std::string& path, const DtnMatrix& m);
DtnMatrix read_dtn(const std::string& path);

// Dirichlet problem for the 7-point Laplacian: Delta_h v = rhs on L, v given
// on N \ L (the outer band layer). `outer` holds band values; only the outer
// layer is read.
class HarmonicSolver {
 public:
  explicit HarmonicSolver(const Domain& d);
  Field solve(const Field& rhs_on_nodes, const Field& boundary_values) const;
  Field extend(const Field& boundary_values) const;

 private:
  const Domain* d_;
  SpMat a_ll_, a_lo_;
  std::unique_ptr<RefinedSolver> solver_;
};

}  // namespace biharm
