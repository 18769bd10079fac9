#include "biharm/cgo.hpp"
#include "biharm/guard.hpp"

#include <cmath>
#include <numbers>

#include "biharm/numerics.hpp"

namespace biharm {

namespace {

constexpr cplx I1{0.0, 1.0};

double flat(double x) { return x > 0.0 ? std::exp(-1.0 / x) : 0.0; }

Jet2 flat(const Jet2& x) {
  if (x.value().real() <= 0.0) return Jet2(0.0);
  return exp(-pow(x, -1.0));
}

// chi as a function of u = (y / delta)^2
double cutoff_sq(double u) {
  const double a = flat(4.0 - u), b = flat(u - 1.0);
  return a / (a + b);
}

Jet2 cutoff_sq(const Jet2& u) {
  const double u0 = u.value().real();
  if (u0 <= 1.0) return Jet2(1.0);  // flat at 1 up to the jet order
  if (u0 >= 4.0) return Jet2(0.0);
  const Jet2 a = flat(Jet2(4.0) - u), b = flat(u - Jet2(1.0));
  return a * pow(a + b, -1.0);
}

void require_beam_grid(const GreenOperator& g, const GaussianBeam& b, int sign) {
  if (g.sign() != sign) throw ConfigError("Green operator has the wrong conjugation sign for this CGO field");
  if (std::abs(g.h() - b.params.h) > 1e-14 * b.params.h)
    throw ConfigError("Green operator and beam use different h");
}

// multiply by e^{sign (x1 - mid) / h}
Field conjugate_frame(const Domain& d, const Field& u, double h, int sign) {
  Field out(u.size());
  for (int n = 0; n < d.num_nodes(); ++n) out[n] = std::exp(sign * (d.coord(n)[0] - d.x1_mid()) / h) * u[n];
  return out;
}

// multiply by e^{i sign lambda (x1 - mid)}
Field phase_frame(const Domain& d, const Field& u, double lambda, int sign) {
  Field out(u.size());
  for (int n = 0; n < d.num_nodes(); ++n)
    out[n] = std::exp(I1 * (sign * lambda * (d.coord(n)[0] - d.x1_mid()))) * u[n];
  return out;
}

double interior_norm(const Domain& d, const Field& u) {
  double s = 0.0;
  for (int n : d.interior_nodes()) s += std::norm(u[n]);
  return std::sqrt(s * d.cell_volume());
}

Field restrict_interior(const Domain& d, const Field& u) {
  Field out = Field::Zero(u.size());
  for (int n : d.interior_nodes()) out[n] = u[n];
  return out;
}

CgoField build_cgo(const GreenOperator& g, const GaussianBeam& b, int sign) {
  require_beam_grid(g, b, sign);
  const Domain& d = g.domain();
  const CarlemanParams p{b.params.h, b.params.lambda, sign};
  const double h = p.h, lam = p.lambda;

  // conjugated beam e^{-i sign lambda (x1 - mid)} v
  const Field vt = phase_frame(d, sample_beam(d, b), lam, -sign);
  const Field r0 = -restrict_interior(d, conjugated_apply(d, p, conjugated_apply(d, p, vt)));
  const Field r = g.apply(r0, 2);
  const Field y = vt + r;

  CgoField out;
  out.params = p;
  out.u = conjugate_frame(d, y, h, -sign);
  out.remainder = phase_frame(d, r, lam, sign);
  out.remainder_norm = d.l2_norm(out.remainder);
  const Field py = conjugated_apply(d, p, conjugated_apply(d, p, y));
  out.pde_residual = interior_norm(d, py) / d.l2_norm(y);
  return out;
}

}  // namespace

double cutoff(double y) { return cutoff_sq(y * y); }

cplx GaussianBeam::operator()(double x2, double x3) const {
  const auto [t, y] = geodesic.chord_coords(x2, x3);
  const double chi = cutoff(y / delta);
  if (chi == 0.0) return 0.0;
  const cplx zeta = t - z0;
  return amplitude * chi / std::sqrt(zeta) * std::exp(I1 * carrier * (t + y * y / (2.0 * zeta)));
}

Jet2 GaussianBeam::jet(double x2, double x3) const {
  const auto n = geodesic.normal();
  const auto tau = geodesic.direction();
  const Jet2 X = Jet2::var_x(x2), Y = Jet2::var_y(x3);
  const Jet2 t = X * tau[0] + Y * tau[1] + Jet2(0.5 * geodesic.length);
  const Jet2 y = -(X * n[0] + Y * n[1] - Jet2(geodesic.offset));
  const Jet2 chi = cutoff_sq(y * y * (1.0 / (delta * delta)));
  const Jet2 zeta = t - Jet2(z0);
  const Jet2 phase = (t + y * y * pow(zeta, -1.0) * 0.5) * (I1 * carrier);
  return chi * pow(zeta, -0.5) * exp(phase) * amplitude;
}

GaussianBeam gaussian_beam(const Geodesic& g, const CarlemanParams& p, BeamKind kind) {
  validate(p);
  if (!g.non_tangential) throw ConfigError("Gaussian beams need a non-tangential chord");
  GaussianBeam b;
  b.geodesic = g;
  b.params = p;
  b.kind = kind;
  b.delta = 6.0 * std::sqrt(p.h);
  b.carrier = p.s();
  b.z0 = cplx(0.5 * g.length, 1.0);
  // int |v|^2 dy -> e^{-2 Im(k) t} with this normalisation
  b.amplitude = std::pow(b.carrier.real() * b.z0.imag() / std::numbers::pi, 0.25);
  return b;
}

GaussianBeam grid_beam(const Domain& d, const Geodesic& g, const CarlemanParams& p, BeamKind kind) {
  GaussianBeam b = gaussian_beam(g, p, kind);
  const cplx s = p.s();
  const double dx = d.dx1(), dp = d.dp();
  const cplx sig2 = (2.0 * std::cosh(s * dx) - 2.0) / (dx * dx);
  const auto tau = g.direction();
  cplx k = s;
  bool ok = false;
  for (int it = 0; it < 100 && !ok; ++it) {
    const cplx a = std::sin(0.5 * k * tau[0] * dp), c = std::sin(0.5 * k * tau[1] * dp);
    const cplx f = 4.0 / (dp * dp) * (a * a + c * c) - sig2;
    const cplx df = 2.0 / dp *
                    (std::sin(k * tau[0] * dp) * tau[0] + std::sin(k * tau[1] * dp) * tau[1]);
    const cplx step = f / df;
    k -= step;
    ok = std::abs(step) < 1e-14 * std::abs(k);
  }
  if (!ok || !std::isfinite(k.real()) || k.real() <= 0.0)
    throw ConvergenceError("no grid-matched beam carrier; the transversal grid does not resolve 1/h");
  b.carrier = k;
  b.amplitude = std::pow(k.real() * b.z0.imag() / std::numbers::pi, 0.25);
  return b;
}

Field sample_beam(const Domain& d, const GaussianBeam& b) {
  Field v(d.num_nodes());
  for (int n = 0; n < d.num_nodes(); ++n) v[n] = b(d.coord(n)[1], d.coord(n)[2]);
  return v;
}

BeamNorms beam_norms(const GaussianBeam& b, const DomainConfig& cfg, int n_radial, int n_angle) {
  const auto rq = gauss_legendre(n_radial, 0.0, cfg.transversal_radius);
  const double h = b.params.h;
  const cplx s = b.params.s(), s2 = s * s;
  const double h4 = h * h * h * h;
  std::vector<double> res(n_radial), l2(n_radial), grad(n_radial);
  parallel_for(n_radial, [&](int i) {
    const double rho = rq.x[i];
    double a = 0, c = 0, e = 0;
    for (int k = 0; k < n_angle; ++k) {
      const double th = 2.0 * std::numbers::pi * k / n_angle;
      const Jet2 j = b.jet(rho * std::cos(th), rho * std::sin(th));
      const cplx r = h4 * (j.bilaplacian() + 2.0 * s2 * j.laplacian() + s2 * s2 * j.value());
      a += std::norm(r);
      c += std::norm(j.value());
      e += std::norm(j.deriv(1, 0)) + std::norm(j.deriv(0, 1));
    }
    const double w = rq.w[i] * rho * 2.0 * std::numbers::pi / n_angle;
    res[i] = a * w;
    l2[i] = c * w;
    grad[i] = e * w;
  });
  double a = 0, c = 0, e = 0;
  for (int i = 0; i < n_radial; ++i) {
    a += res[i];
    c += l2[i];
    e += grad[i];
  }
  const double x1 = cfg.x1_extent;
  return {std::sqrt(x1 * a), std::sqrt(x1 * (c + h * h * e)), std::sqrt(x1 * c)};
}

Concentration concentration_check(const GaussianBeam& v, const GaussianBeam& w,
                                  const std::function<double(double, double)>& psi, double /*x1*/,
                                  int n_radial, int n_angle) {
  // both beams are x1-independent, so every slice gives the same integral
  const auto rq = gauss_legendre(n_radial, 0.0, 1.0);
  std::vector<cplx> part(n_radial);
  parallel_for(n_radial, [&](int i) {
    const double rho = rq.x[i];
    cplx acc = 0.0;
    for (int k = 0; k < n_angle; ++k) {
      const double th = 2.0 * std::numbers::pi * k / n_angle;
      const double x2 = rho * std::cos(th), x3 = rho * std::sin(th);
      const double f = psi(x2, x3);
      if (f != 0.0) acc += v(x2, x3) * std::conj(w(x2, x3)) * f;
    }
    part[i] = acc * rq.w[i] * rho * 2.0 * std::numbers::pi / double(n_angle);
  });
  Concentration c;
  c.slice = 0.0;
  for (const auto& p : part) c.slice += p;

  const Geodesic& g = v.geodesic;
  const auto tq = gauss_legendre(400, 0.0, g.length);
  const double mu = v.attenuation() + w.attenuation();
  c.line = 0.0;
  for (std::size_t i = 0; i < tq.x.size(); ++i) {
    const auto x = g.point(tq.x[i]);
    c.line += tq.w[i] * std::exp(-mu * tq.x[i]) * psi(x[0], x[1]);
  }
  const double scale = std::abs(c.line);
  c.gap = scale > 0.0 ? std::abs(c.slice - c.line) / scale : std::abs(c.slice);
  return c;
}

CgoField build_u0(const GreenOperator& g, const GaussianBeam& v) { return build_cgo(g, v, 1); }
CgoField build_u2(const GreenOperator& g, const GaussianBeam& w) { return build_cgo(g, w, -1); }

CgoField build_u1(const GreenOperator& g, const Potential& q, const CgoField& u0, double tol, int max_iter) {
  check_oracle_access("u1 construction");
  if (g.sign() != 1 || u0.params.sign != 1) throw ConfigError("u1 is built with the +phi Green operator");
  const Domain& d = g.domain();
  const CarlemanParams p = u0.params;
  const double h = p.h, h4 = h * h * h * h;
  const Field y0 = conjugate_frame(d, u0.u, h, 1);
  const Eigen::ArrayXd qv = q.values.array();
  Field y = y0;
  CgoField out;
  out.params = p;
  double prev = INFINITY;
  for (int it = 1; it <= max_iter; ++it) {
    const Field qy = (qv * y.array()).matrix();
    const Field next = y0 - h4 * g.apply(qy, 2);
    const double step = (next - y).norm();
    y = next;
    out.iterations = it;
    if (step <= tol * y.norm()) break;
    if (step > prev) throw ConvergenceError("u1 fixed point does not contract; h too large for this potential");
    prev = step;
    if (it == max_iter) throw ConvergenceError("u1 fixed point did not converge");
  }
  // u0 plus the correction, so q = 0 reproduces u0 exactly
  out.u = u0.u + conjugate_frame(d, y - y0, h, -1);
  out.remainder = phase_frame(d, y - y0, p.lambda, 1);
  out.remainder_norm = d.l2_norm(out.remainder);
  Field py = conjugated_apply(d, p, conjugated_apply(d, p, y));
  py += h4 * (qv * y.array()).matrix();
  out.pde_residual = interior_norm(d, py) / d.l2_norm(y);
  return out;
}

double fixed_point_residual(const GreenOperator& g, const Potential& q, const CgoField& u1, const CgoField& u0) {
  const Domain& d = g.domain();
  const double h = u0.params.h, h4 = h * h * h * h;
  const Field y0 = conjugate_frame(d, u0.u, h, 1);
  const Field y1 = conjugate_frame(d, u1.u, h, 1);
  const Field qy = (q.values.array() * y1.array()).matrix();
  return (y1 + h4 * g.apply(qy, 2) - y0).norm() / y0.norm();
}

}  // namespace biharm
