#pragma once

#include <functional>
#include <vector>

#include "biharm/cgo.hpp"
#include "biharm/recovery.hpp"

namespace biharm {

using TransversalFn = std::function<cplx(double, double)>;
using Point2 = std::array<double, 2>;

// int_0^L f(gamma(t)) e^{-attenuation t} dt, composite Gauss-Legendre
cplx attenuated_xray(const TransversalFn& f, const Geodesic& g, double attenuation, int panels = 48);

// closed form of the transform of f = 1
double attenuated_xray_of_one(const Geodesic& g, double attenuation);

// equispaced on [0, 2 pi)
std::vector<double> chord_angles(int n);
// Chebyshev points cos((2j+1) pi / 2n), ascending
std::vector<double> chebyshev_offsets(int n);

// Attenuated ray data of q^(2 lambda, x') per lambda, laid out [angle][offset].
struct AttenuatedSinogram {
  std::vector<double> lambdas;
  std::vector<double> thetas;
  std::vector<double> offsets;
  std::vector<double> attenuation;  // per lambda; 2 lambda for the oracle
  std::vector<Eigen::MatrixXcd> values;

  int num_lambdas() const { return static_cast<int>(lambdas.size()); }
  Geodesic geodesic(int a, int p) const { return chord(thetas[a], offsets[p]); }
};

// q^(omega, x') = int_0^X1 e^{-i omega x1} q(x1, x') dx1 by Gauss-Legendre
cplx x1_fourier(const std::function<double(double, double, double)>& q, double x1_extent, double omega, double x2,
                double x3, int nodes = 48);

// oracle sinogram of a closed-form potential (zero outside M)
AttenuatedSinogram oracle_sinogram(const std::function<double(double, double, double)>& q, const DomainConfig& cfg,
                                   const std::vector<double>& lambdas, const std::vector<double>& thetas,
                                   const std::vector<double>& offsets);

// value(-lambda, gamma) from value(lambda, reversed gamma) for real q, where
// the lambda data carry attenuation a on both chords (a = 2 lambda for the oracle)
cplx hermitian_partner(cplx value_reversed, double attenuation, const Geodesic& g);

struct InversionOptions {
  int uniform_offsets = 257;  // resampling grid on [-1, 1] for the ramp filter
  bool hann = true;           // apodise the ramp
  double lambda_max = 3.0;    // conditioning cap: warn above
};

// Tretiak-Metz inversion of the exponential ray transform with constant
// attenuation a: data(theta, p) = int_0^L f(gamma(t)) e^{-a t} dt. Returns f
// at the given points. a = 0 is plain filtered backprojection.
std::vector<cplx> invert_attenuated(const Eigen::MatrixXcd& data, const std::vector<double>& thetas,
                                    const std::vector<double>& offsets, double attenuation,
                                    const std::vector<Point2>& points, const InversionOptions& opt = {});

// n x n cell centres of [-1, 1]^2 (row-major, x2 fastest)
std::vector<Point2> image_points(int n);

// Tukey taper over [-lambda_max - dl, lambda_max + dl] (dl = sample spacing),
// flat on the inner half
double tukey_window(double lambda, double lambda_max, double dl);

// q(x1, x') = (1/T) sum_k w_k q^(2 lambda_k, x') e^{2 i lambda_k x1}; the
// lambda grid must be symmetric and equispaced (T = pi / dl), or the single
// value 0 (T = X1, giving the x1 average). slices[k][j] is at point j.
Eigen::MatrixXcd fourier_x1_invert(const std::vector<double>& lambdas, const std::vector<Eigen::VectorXcd>& slices,
                                   const std::vector<double>& x1_values, double x1_extent, bool window = true);

// symmetric grid of n samples on [-lambda_max, lambda_max]
std::vector<double> lambda_grid(double lambda_max, int n);

// <(L_q - L_0) f1, f2> with the bilinear band pairing
cplx pairing_data(const DtnMatrix& dlam, const BoundaryJet& f1, const BoundaryJet& f2);

struct BeamDatum {
  cplx value;        // gauge removed: approximates int q^(2 lambda, gamma(t)) e^{-a t} dt
  cplx pairing;      // raw pairing in the grid gauge
  double attenuation = 0.0;  // a = 2 Im k of the grid beams
  double scale = 0.0;        // 1 / Re k: the beam width goes like its square root
  double recovery_residual = 0.0;
};

// Everything at one h: S, the factored boundary operator and both Green
// operators. beam_data only touches dLambda through TraceRecovery.
class BeamDataContext {
 public:
  BeamDataContext(const Domain& d, const DtnMatrix& dlam, double h);
  const Domain& domain() const { return *d_; }
  double h() const { return h_; }
  const TraceRecovery& recovery() const { return *rec_; }
  const GreenOperator& green_plus() const { return *gp_; }
  const GreenOperator& green_minus() const { return *gm_; }
  const DtnMatrix& dlam() const { return *dlam_; }

 private:
  const Domain* d_;
  const DtnMatrix* dlam_;
  double h_;
  std::unique_ptr<GreenOperator> gp_, gm_;
  std::unique_ptr<TraceRecovery> rec_;
};

BeamDatum beam_data(const BeamDataContext& ctx, double lambda, const Geodesic& g,
                    RecoveryMethod m = RecoveryMethod::direct);

// many chords at one lambda; recovery is batched
std::vector<BeamDatum> beam_data_batch(const BeamDataContext& ctx, double lambda, const std::vector<Geodesic>& gs);

// Richardson step for an error ~ C h^order, h_fine < h_coarse
cplx richardson(cplx coarse, cplx fine, double h_coarse, double h_fine, double order = 0.5);

}  // namespace biharm
