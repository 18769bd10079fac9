#include <doctest.h>

#include <cmath>

#include "biharm/cgo.hpp"
#include "biharm/numerics.hpp"

using namespace biharm;

namespace {

double bump(double x1, double x2, double x3) {
  const double r2 = (x1 - 0.5) * (x1 - 0.5) + (x2 - 0.2) * (x2 - 0.2) + (x3 - 0.1) * (x3 - 0.1);
  return r2 < 0.2 ? 0.05 * std::exp(-r2 / 0.045) * std::exp(1.0 - 1.0 / (1.0 - r2 / 0.2)) : 0.0;
}

}  // namespace

TEST_CASE("jets differentiate closed forms exactly") {
  const double x0 = 0.3, y0 = -0.7;
  const cplx a(0.4, 1.1), b(-0.2, 0.5);
  const Jet2 X = Jet2::var_x(x0), Y = Jet2::var_y(y0);
  const Jet2 f = exp(X * a + Y * b) * X * X;
  const cplx e = std::exp(a * x0 + b * y0);
  // d^4/dx^4 (x^2 e^{ax}) = e (a^4 x^2 + 8 a^3 x + 12 a^2)
  CHECK(std::abs(f.deriv(4, 0) - e * (std::pow(a, 4) * x0 * x0 + 8.0 * std::pow(a, 3) * x0 + 12.0 * a * a)) < 1e-12);
  CHECK(std::abs(f.deriv(2, 2) - e * b * b * (a * a * x0 * x0 + 4.0 * a * x0 + 2.0)) < 1e-12);
  CHECK(std::abs(f.deriv(0, 4) - e * std::pow(b, 4) * x0 * x0) < 1e-12);

  const Jet2 g = pow(X + Y * 2.0 + Jet2(cplx(0, -1)), -0.5);
  const cplx z = x0 + 2 * y0 - cplx(0, 1);
  // d^3/dy^3 z^{-1/2} = 8 (-1/2)(-3/2)(-5/2) z^{-7/2}
  CHECK(std::abs(g.deriv(0, 3) - 8.0 * (-0.5) * (-1.5) * (-2.5) * std::pow(z, -3.5)) < 1e-12);
}

TEST_CASE("Gauss-Legendre rule") {
  const auto q = gauss_legendre(7, 0.0, 2.0);
  double s = 0, s12 = 0;
  for (std::size_t i = 0; i < q.x.size(); ++i) {
    s += q.w[i];
    s12 += q.w[i] * std::pow(q.x[i], 13);
  }
  CHECK(s == doctest::Approx(2.0).epsilon(1e-14));
  CHECK(s12 == doctest::Approx(std::pow(2.0, 14) / 14).epsilon(1e-13));
}

TEST_CASE("beam shape") {
  CHECK(cutoff(0.0) == 1.0);
  CHECK(cutoff(1.0) == 1.0);
  CHECK(cutoff(2.0) == 0.0);
  CHECK(cutoff(1.5) > 0.0);
  CHECK_THROWS_AS(gaussian_beam(chord(0.0, 1.0), {0.1, 0.0, 1}), ConfigError);

  const GaussianBeam b = gaussian_beam(chord(0.4, 0.2), {0.05, 0.3, 1});
  // vanishes outside the 3 delta tube (the cutoff already stops at 2 delta)
  for (double y : {-1.0, 1.0})
    for (double t = -1.0; t <= 3.0; t += 0.25) {
      const auto p = b.geodesic.point(t);
      const auto n = b.geodesic.normal();
      const double off = y * 1.01 * b.tube_radius();
      CHECK(b(p[0] - off * n[0], p[1] - off * n[1]) == 0.0);
    }
  // jet value agrees with the pointwise formula
  CHECK(std::abs(b.jet(0.1, -0.2).value() - b(0.1, -0.2)) < 1e-13);
}

TEST_CASE("quasimode residual and H1 bounds") {
  const DomainConfig cfg{1.0, 0.8, 12, 25};
  for (double lam : {0.0, 0.3}) {
    std::vector<double> hs{0.1, 0.05, 0.025}, res;
    for (double h : hs) {
      const BeamNorms nm = beam_norms(gaussian_beam(chord(0.3, 0.1), {h, lam, 1}), cfg);
      res.push_back(nm.residual);
      CHECK(nm.h1_scl >= 0.2);
      CHECK(nm.h1_scl <= 5.0);
    }
    const double slope = loglog_slope(hs, res);
    MESSAGE("residual slope " << slope);
    CHECK(slope >= 2.0);
  }
}

TEST_CASE("concentration on the chord") {
  const Geodesic diam = chord(0.0, 0.0);
  const GaussianBeam b0 = gaussian_beam(diam, {0.01, 0.0, 1});
  const auto zero = concentration_check(b0, b0, [](double, double) { return 0.0; });
  CHECK(zero.slice == cplx(0.0));
  CHECK(zero.line == cplx(0.0));
  const auto one = concentration_check(b0, b0, [](double, double) { return 1.0; });
  CHECK(one.line.real() == doctest::Approx(2.0).epsilon(1e-12));
  CHECK(one.gap <= 0.1);

  const auto psi = [](double x, double y) { return std::exp(-((x - 0.2) * (x - 0.2) + y * y) / 0.1); };
  for (const auto& [g, lam] : {std::pair{chord(0.0, 0.0), 0.3}, std::pair{chord(0.7, 0.3), 0.0},
                               std::pair{chord(2.0, -0.4), 0.3}}) {
    double prev = INFINITY;
    for (double h : {0.08, 0.04, 0.02, 0.01}) {
      const GaussianBeam v = gaussian_beam(g, {h, lam, 1}), w = gaussian_beam(g, {h, lam, -1}, BeamKind::w);
      const auto c = concentration_check(v, w, psi);
      CHECK(c.gap < prev);
      prev = c.gap;
    }
    MESSAGE("gap at h = 0.01: " << prev);
    CHECK(prev <= 0.1);
  }
}

TEST_CASE("grid-matched carrier") {
  const Domain coarse(DomainConfig{1.0, 0.8, 12, 25}), fine(DomainConfig{1.0, 0.8, 24, 49});
  const CarlemanParams p{0.1, 0.0, 1};
  const GaussianBeam a = grid_beam(coarse, chord(0.3, 0.1), p), b = grid_beam(fine, chord(0.3, 0.1), p);
  CHECK(std::abs(a.carrier.imag()) < 1e-12);
  CHECK(std::abs(b.carrier - p.s()) < 0.3 * std::abs(a.carrier - p.s()));
}

TEST_CASE("CGO fields solve their equations") {
  const Domain d(DomainConfig{1.0, 0.8, 12, 25});
  const Potential q = Potential::sampled(d, bump);
  const Potential q0 = Potential::zero(d);
  for (double h : {0.1, 0.05}) {
    const GreenOperator gp(d, h, 1), gm(d, h, -1);
    for (double lam : {0.0, 0.3})
      for (const Geodesic& g : {chord(0.0, 0.0), chord(0.9, 0.3), chord(2.5, -0.5)}) {
        const CarlemanParams p{h, lam, 1};
        const CgoField u0 = build_u0(gp, grid_beam(d, g, p));
        const CgoField u2 = build_u2(gm, grid_beam(d, g, p, BeamKind::w));
        const CgoField u1 = build_u1(gp, q, u0);
        CHECK(u0.pde_residual <= 1e-7);
        CHECK(u2.pde_residual <= 1e-7);
        CHECK(u1.pde_residual <= 1e-7);
        CHECK(fixed_point_residual(gp, q, u1, u0) <= 1e-7);
        CHECK(u1.remainder_norm < u0.remainder_norm + 1e-3);

        const CgoField same = build_u1(gp, q0, u0);
        CHECK((same.u - u0.u).norm() == 0.0);
        CHECK(same.remainder_norm == 0.0);
      }
  }
  CHECK_THROWS_AS(build_u0(GreenOperator(d, 0.1, -1), grid_beam(d, chord(0, 0), {0.1, 0.0, 1})), ConfigError);
}

TEST_CASE("CGO remainder decay on the largest desk grid") {
  const Domain d(DomainConfig{1.0, 0.8, 16, 49});
  const Potential q = Potential::sampled(d, bump);
  std::vector<double> hs{0.2, 0.1, 0.05}, r0, r1, r2;
  for (double h : hs) {
    const GreenOperator gp(d, h, 1), gm(d, h, -1);
    const CarlemanParams p{h, 0.3, 1};
    const Geodesic g = chord(0.3, 0.1);
    const CgoField u0 = build_u0(gp, grid_beam(d, g, p));
    r0.push_back(u0.remainder_norm);
    r2.push_back(build_u2(gm, grid_beam(d, g, p, BeamKind::w)).remainder_norm);
    r1.push_back(build_u1(gp, q, u0).remainder_norm);
  }
  const double s0 = loglog_slope(hs, r0), s1 = loglog_slope(hs, r1), s2 = loglog_slope(hs, r2);
  MESSAGE("remainder slopes " << s0 << " " << s2 << " " << s1);
  CHECK(s0 >= 0.4);
  CHECK(s2 >= 0.4);
  CHECK(s1 >= 1.6);
}
