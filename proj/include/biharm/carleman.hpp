#pragma once

#include <memory>
#include <vector>

#include "biharm/forward.hpp"

namespace biharm {

// phi = x1; sign = +1 conjugates with e^{-s x1}, -1 with e^{+s x1}.
struct CarlemanParams {
  double h = 0.1;
  double lambda = 0.0;
  int sign = 1;

  cplx s() const { return {1.0 / h, lambda}; }
  CarlemanParams flipped() const { return {h, lambda, -sign}; }
};

void validate(const CarlemanParams& p);

// e^{sign (x1 - x1_mid) / h} at every node (gauge-centred weight).
RealField carleman_weight(const Domain& d, double h, int sign);

// Discrete P_phi = e^{phi/h} (-h^2 Delta_h) e^{-phi/h} evaluated on L (zero
// elsewhere); phi = sign * x1.
Field conjugated_apply(const Domain& d, const CarlemanParams& p, const Field& u);

// Right inverse of P_phi: the Fourier multiplier 1/p_phi on a box around M
// that is periodic transversally and anti-periodic in x1, then restricted to
// the nodes of M. P_phi G = I on L, G^T = G_{-phi}, G P_phi = I on fields
// supported away from the box edge, ||G|| <= T1 / (2 pi h).
class GreenOperator {
 public:
  GreenOperator(const Domain& d, double h, int sign, int pad = 3);
  ~GreenOperator();
  GreenOperator(const GreenOperator&) = delete;
  GreenOperator& operator=(const GreenOperator&) = delete;

  const Domain& domain() const { return *d_; }
  double h() const { return h_; }
  int sign() const { return sign_; }
  std::array<int, 3> box_shape() const { return {n1_, np_, np_}; }
  double box_length() const { return n1_ * d_->dx1(); }

  // G^power v for power 1 or 2 (G^2 is the box square).
  Field apply(const Field& v, int power = 1) const;
  // e^{-phi/h} G^power e^{phi/h} v
  Field apply_conjugated_back(const Field& v, int power = 2) const;

  // response to a unit impulse at box index 0, laid out on the box
  std::vector<cplx> impulse_response(int power) const;

  // spectral norm (weighted L2 on M) by power iteration with G^T = G_{-phi}
  double norm_estimate(int power = 1, int iters = 40) const;
  // smallest |p_phi| on the box lattice: 1 / ||G_box||
  double symbol_min() const { return symbol_min_; }

 private:
  void forward(std::vector<cplx>& box) const;
  void backward(std::vector<cplx>& box) const;

  const Domain* d_;
  double h_;
  int sign_;
  int pad1_, padp_, n1_, np_;
  std::vector<cplx> inv_symbol_, twist_;
  double symbol_min_ = 0.0;
  struct Plans;
  std::unique_ptr<Plans> plans_;
};

Field green_apply(const GreenOperator& g, const Field& v);
Field green_squared_apply(const GreenOperator& g, const Field& v);

// S = (1/w) R_B e^{-phi/h} G^2 e^{phi/h} E_B as a dense band x band matrix
// (real; depends only on h and the sign).
Eigen::MatrixXd single_layer(const GreenOperator& g);

struct SingleLayer {
  Eigen::MatrixXd entries;
  double h = 0.0;
};

SingleLayer build_single_layer(const Domain& d, double h);

// || S (L_q - L_0) f - gamma e^{-phi/h} G^2 e^{phi/h} q P_q f || / ||rhs||,
// worst case over `batch` random band vectors.
double check_factorization(const ClampedSolver& sq, const DtnMatrix& dlam, const GreenOperator& g,
                           const Eigen::MatrixXd& s, int batch = 10, unsigned seed = 1);

struct BoundaryOperator {
  Eigen::MatrixXd k;          // I + h^4 S dLambda
  double perturbation_norm;   // ||h^4 S dLambda||_2
  double spectral_radius;     // of h^4 S dLambda
  double condition;           // 2-norm condition estimate of k
};

BoundaryOperator boundary_operator(const DtnMatrix& dlam, const Eigen::MatrixXd& s, double h);

// ||h^4 G_phi^2 q|| on M: the conjugated-frame contraction that governs the
// invertibility of the boundary operator and the u1 remainder equation.
double volume_contraction(const GreenOperator& g, const Potential& q, int iters = 30);

// Largest h in the dyadic ladder h_start / 2^k with contraction below
// `target`; returns 0 if none down to h_min.
double select_h0(const Domain& d, const DtnMatrix& dlam, double h_start, double h_min, double target = 0.5);

}  // namespace biharm
