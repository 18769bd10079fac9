#pragma once

#include <functional>
#include <memory>
#include <vector>

#include "biharm/forward.hpp"

namespace biharm {

// Point on the lateral face: x = (x1, r cos theta, r sin theta).
struct LateralPoint {
  double x1 = 0.5;
  double theta = 0.0;
};

// Boundary normal chart at a lateral point: x' = (x1 - x1_0, r (theta - theta_0))
// along the face, x_n = r - |x_perp| inward. The tangent covector tau' makes
// angle `direction` with the x1 axis; pi/2 points along the circle.
struct OscillatoryFamily {
  LateralPoint x0;
  double direction = 1.5707963267948966;
  double lambda = 0.1;
  static constexpr double alpha = 1.0 / 3.0;

  // half-widths of supp v along x1, along the circle and in depth
  std::array<double, 3> support() const;
  double support_radius() const;
};

// Tensor profile eta(y) = c g(y1 / 0.25) g(y2 / 0.5) chi(yn / 0.5) with
// g(t) = e^{-t^2} chi(t), chi the smooth cutoff, and c chosen so that
// int eta(y', 0)^2 dy' = 1. Flat in depth, so the normal decay is pure
// e^{-x_n / lambda} near the boundary; narrow along x1 where the caps are close.
inline constexpr std::array<double, 3> eta_widths{0.25, 0.5, 0.5};
double eta_profile(double y1, double y2, double yn);
// int_{R^2} eta(y', 0)^2 dy' by a tensor Gauss rule
double eta_normalization();

// v(x) = lambda^{-alpha - 1/2} eta(x / lambda^alpha) e^{(i/lambda)(tau'.x' + i x_n)}
cplx oscillatory_value(const OscillatoryFamily& fam, double radius, const std::array<double, 3>& x);

// Throws ConfigError if the support leaves the chart: it must stay 3 cells
// off the corner circles and within a quarter turn.
Field oscillatory_field(const Domain& d, const OscillatoryFamily& fam);

// r with Lap_h (v + r) = 0 on L and r = 0 on the outer layer
Field harmonic_correction(const HarmonicSolver& hs, const Field& v);

// Acts as Lambda_q - Lambda_0 on band vectors: either a stored matrix or two
// clamped solvers (one DtN application each, no assembly).
class DtnAction {
 public:
  explicit DtnAction(const DtnMatrix& dlam);
  DtnAction(const ClampedSolver& sq, const ClampedSolver& s0);

  Eigen::VectorXcd apply(const Eigen::VectorXcd& f) const;
  int size() const { return size_; }

 private:
  std::function<Eigen::VectorXcd(const Eigen::VectorXcd&)> op_;
  int size_ = 0;
};

struct BoundaryEstimate {
  LateralPoint x0;
  std::vector<double> lambdas;
  std::vector<double> values;      // 2 Re <dLambda f, conj f> per lambda
  std::vector<double> imag_ratio;  // |Im| / |Re| of the pairing
  std::vector<bool> resolved;      // >= 8 grid points per wavelength 2 pi lambda
  double extrapolated = 0.0;
  bool monotone = true;
};

// Linear extrapolation to lambda = 0 through the last two resolved values.
BoundaryEstimate boundary_value(const DtnAction& dlam, const Domain& d, const HarmonicSolver& hs, LateralPoint x0,
                                double direction, const std::vector<double>& lambdas);

// minimum grid points per oscillation wavelength along tau'
double points_per_wavelength(const Domain& d, double direction, double lambda);

// lateral sample points usable for the estimate at every lambda in the list
std::vector<LateralPoint> admissible_points(const Domain& d, double max_lambda, int n_x1, int n_theta);

std::vector<BoundaryEstimate> boundary_trace(const DtnAction& dlam, const Domain& d,
                                             const std::vector<LateralPoint>& points, double direction,
                                             const std::vector<double>& lambdas);

}  // namespace biharm
