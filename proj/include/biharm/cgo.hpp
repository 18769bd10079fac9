#pragma once

#include <functional>

#include "biharm/carleman.hpp"
#include "biharm/jet.hpp"

namespace biharm {

enum class BeamKind { v, w };

// Gaussian beam on the transversal disk along a chord, in chord coordinates
// (t, y):
//   N chi(y / delta) (t - z0)^{-1/2} exp(i k (t + y^2 / (2 (t - z0))))
// with z0 = L/2 + i (exact flat Riccati solution). k is the carrier: s for
// the continuum beam, or the grid-matched wavenumber for which the discrete
// transversal symbol along the chord equals the discrete x1 symbol of
// e^{-s x1}. The kinds v and w coincide; they differ only in the conjugation
// they are paired with.
struct GaussianBeam {
  Geodesic geodesic;
  CarlemanParams params;
  BeamKind kind = BeamKind::v;
  double delta = 0.0;
  cplx carrier;
  cplx z0;
  double amplitude = 0.0;

  cplx operator()(double x2, double x3) const;
  Jet2 jet(double x2, double x3) const;
  // |v|^2 decays like e^{-2 attenuation t} along the chord
  double attenuation() const { return carrier.imag(); }
  double tube_radius() const { return 3.0 * delta; }
};

GaussianBeam gaussian_beam(const Geodesic& g, const CarlemanParams& p, BeamKind kind = BeamKind::v);
GaussianBeam grid_beam(const Domain& d, const Geodesic& g, const CarlemanParams& p,
                       BeamKind kind = BeamKind::v);

// x1-independent samples of the beam on the nodes of M
Field sample_beam(const Domain& d, const GaussianBeam& b);

// smooth cutoff: 1 on [-1, 1], 0 outside (-2, 2)
double cutoff(double y);

struct BeamNorms {
  double residual = 0.0;  // ||e^{s x1} (h^2 Lap)^2 e^{-s x1} v||_{L2(M)}
  double h1_scl = 0.0;    // ||v||_{H1_scl(M)}
  double l2 = 0.0;
};

// Exact (jet) derivatives on a polar Gauss quadrature of D_r.
BeamNorms beam_norms(const GaussianBeam& b, const DomainConfig& cfg, int n_radial = 160, int n_angle = 480);

struct Concentration {
  cplx slice;  // int_{M0} v conj(w) psi
  cplx line;   // int_0^L e^{-2 attenuation t} psi(gamma(t)) dt
  double gap = 0.0;
};

Concentration concentration_check(const GaussianBeam& v, const GaussianBeam& w,
                                  const std::function<double(double, double)>& psi, double x1 = 0.0,
                                  int n_radial = 240, int n_angle = 960);

// CGO fields, stored in the physical frame (gauge x1 - x1_mid):
//   u0 = e^{-s x1} (v + r0~),  u2 = e^{s x1} (w + r2~),  u1 = u0 + e^{-s x1} r1~
struct CgoField {
  Field u;
  Field remainder;  // r~ on the nodes
  double remainder_norm = 0.0;
  double pde_residual = 0.0;  // conjugated-frame ||h^4 (Lap^2 + q) u|| on I over ||e^{+-phi/h} u||
  int iterations = 0;
  CarlemanParams params;
};

// g must have sign +1 for u0/u1 and -1 for u2; its h must match the beam.
CgoField build_u0(const GreenOperator& g, const GaussianBeam& v);
CgoField build_u2(const GreenOperator& g, const GaussianBeam& w);
// fixed point (1 + h^4 e^{-phi/h} G^2 e^{phi/h} q) u1 = u0
CgoField build_u1(const GreenOperator& g, const Potential& q, const CgoField& u0, double tol = 1e-14,
                  int max_iter = 60);

// residual of the fixed-point form, relative to ||u0|| in the conjugated frame
double fixed_point_residual(const GreenOperator& g, const Potential& q, const CgoField& u1, const CgoField& u0);

}  // namespace biharm
