#include <doctest.h>

#include <cmath>
#include <numbers>

#include "biharm/boundary.hpp"

using namespace biharm;

namespace {

constexpr double pi = std::numbers::pi;
constexpr double half_pi = 0.5 * pi;

// fine grid of the boundary-determination criterion
const Domain& fine_domain() {
  static const Domain d(DomainConfig{1.0, 0.8, 16, 49});
  return d;
}

}  // namespace

TEST_CASE("eta normalization") {
  CHECK(std::abs(eta_normalization() - 1.0) <= 1e-6);
  CHECK(eta_profile(0.0, 0.0, 3.0) == 0.0);
  CHECK(eta_profile(0.6, 0.0, 0.0) == 0.0);
  CHECK(eta_profile(0.0, 0.0, 0.4) == eta_profile(0.0, 0.0, 0.0));
}

TEST_CASE("oscillatory family") {
  const Domain& d = fine_domain();
  const LateralPoint x0{0.5, 0.3};
  for (double lam : {0.2, 0.1, 0.05}) {
    const OscillatoryFamily fam{x0, half_pi, lam};
    const Field v = oscillatory_field(d, fam);
    const double nrm = d.l2_norm(v);
    MESSAGE("lambda " << lam << ": ||v|| = " << nrm);
    CHECK(nrm >= 0.3);
    CHECK(nrm <= 3.0);

    const std::array<double, 3> c{x0.x1, d.radius() * std::cos(x0.theta), d.radius() * std::sin(x0.theta)};
    double reach = 0.0;
    for (int n = 0; n < d.num_nodes(); ++n) {
      if (v[n] == cplx(0.0)) continue;
      const auto& x = d.coord(n);
      reach = std::max(reach, std::hypot(x[0] - c[0], x[1] - c[1], x[2] - c[2]));
    }
    CHECK(reach <= 4.0 * std::cbrt(lam));
  }

  // boundary slice along tau': the spectral peak sits at 1 / lambda
  for (double lam : {0.1, 0.05}) {
    const OscillatoryFamily fam{x0, half_pi, lam};
    const int m = 2000;
    const double half = 0.9 * fam.support()[1];
    std::vector<cplx> slice(m);
    std::vector<double> s(m);
    for (int j = 0; j < m; ++j) {
      s[j] = -half + 2.0 * half * j / (m - 1);
      const double th = x0.theta + s[j] / d.radius();
      slice[j] = oscillatory_value(fam, d.radius(), {x0.x1, d.radius() * std::cos(th), d.radius() * std::sin(th)});
    }
    double best = 0.0, arg = 0.0;
    for (int k = 1; k <= 4000; ++k) {
      const double w = 2.0 * k / (4000.0 * lam);
      cplx acc = 0.0;
      for (int j = 0; j < m; ++j) acc += slice[j] * std::exp(cplx(0.0, -w * s[j]));
      if (std::abs(acc) > best) {
        best = std::abs(acc);
        arg = w;
      }
    }
    const double period = 2.0 * pi / arg;
    CHECK(std::abs(period - 2.0 * pi * lam) <= 0.05 * 2.0 * pi * lam);
  }

  // too wide for the 12 x 25 x1 spacing at lambda = 0.2
  const Domain coarse(DomainConfig{1.0, 0.8, 12, 25});
  CHECK_THROWS_AS(oscillatory_field(coarse, {x0, half_pi, 0.2}), ConfigError);
  CHECK_THROWS_AS(oscillatory_field(d, {{0.15, 0.3}, half_pi, 0.05}), ConfigError);
}

TEST_CASE("harmonic correction") {
  const Domain& d = fine_domain();
  const HarmonicSolver hs(d);

  // a discrete harmonic function needs no correction
  const Field lin = d.sample([](double x1, double x2, double x3) { return 0.3 + x1 - 2.0 * x2 + 0.5 * x3; });
  CHECK(d.l2_norm(harmonic_correction(hs, lin)) <= 1e-10 * d.l2_norm(lin));

  std::vector<double> norms;
  for (double lam : {0.2, 0.1, 0.05}) {
    const Field v = oscillatory_field(d, {{0.5, 1.0}, half_pi, lam});
    const Field r = harmonic_correction(hs, v);
    const Field res = apply_laplacian(d, v + r);
    CHECK(res.norm() <= 1e-8 * apply_laplacian(d, v).norm());
    // zero on the outer layer
    double outer = 0.0;
    for (int b = 0; b < d.band_outer_size(); ++b) outer = std::max(outer, std::abs(r[d.band_nodes()[b]]));
    CHECK(outer == 0.0);
    norms.push_back(d.l2_norm(r));
    MESSAGE("lambda " << lam << ": ||r1|| = " << norms.back());
  }
  CHECK(norms[1] < norms[0]);
  CHECK(norms[2] < norms[1]);
}

TEST_CASE("dense and matrix-free DtN actions agree") {
  const Domain d(DomainConfig{1.0, 0.8, 8, 13});
  const Potential q = Potential::constant(d, 0.05);
  const ClampedSolver sq(d, q), s0(d, Potential::zero(d));
  const DtnMatrix dl = dtn_difference(assemble_dtn(sq), assemble_dtn(s0));
  const DtnAction dense(dl), free(sq, s0);
  const Eigen::VectorXcd f = Eigen::VectorXcd::Random(d.band_size());
  CHECK((dense.apply(f) - free.apply(f)).norm() <= 1e-8 * dense.apply(f).norm());
  CHECK_THROWS_AS(dense.apply(Eigen::VectorXcd::Zero(3)), DimensionError);
}

TEST_CASE("boundary values from the DtN map") {
  const Domain& d = fine_domain();
  const HarmonicSolver hs(d);
  const std::vector<double> lams{0.2, 0.1, 0.05};
  const ClampedSolver s0(d, Potential::zero(d));

  SUBCASE("q = 0") {
    const DtnAction zero(s0, s0);
    const auto e = boundary_value(zero, d, hs, {0.5, 0.3}, half_pi, lams);
    for (double v : e.values) CHECK(v == 0.0);
  }

  SUBCASE("constant potential") {
    const double c0 = 0.05;
    const ClampedSolver sq(d, Potential::constant(d, c0));
    const DtnAction dl(sq, s0);
    for (double th : {0.3, 2.0}) {
      const auto e = boundary_value(dl, d, hs, {0.5, th}, half_pi, lams);
      const double err_small = std::abs(e.values.back() - c0) / c0;
      const double err_large = std::abs(e.values.front() - c0) / c0;
      MESSAGE("theta " << th << ": " << e.values[0] << " " << e.values[1] << " " << e.values[2] << " -> "
                       << e.extrapolated);
      CHECK(err_small <= 0.25);
      CHECK(err_small <= err_large);
      CHECK(std::abs(e.extrapolated - c0) <= std::abs(e.values.back() - c0));
      for (bool r : e.resolved) CHECK(r);
      for (double r : e.imag_ratio) CHECK(r <= 0.05);
    }
  }

  SUBCASE("locality") {
    // differ only on the far side of the cylinder
    const auto base = [](double x1, double x2, double x3) {
      return 0.03 + 0.02 * std::exp(-((x1 - 0.5) * (x1 - 0.5) + x2 * x2 + x3 * x3) / 0.1);
    };
    const auto far = [&](double x1, double x2, double x3) {
      const double r2 = (x1 - 0.5) * (x1 - 0.5) + (x2 + 0.6) * (x2 + 0.6) + x3 * x3;
      return base(x1, x2, x3) + (r2 < 0.04 ? 0.04 * std::exp(1.0 - 1.0 / (1.0 - r2 / 0.04)) : 0.0);
    };
    const ClampedSolver sa(d, Potential::sampled(d, base)), sb(d, Potential::sampled(d, far));
    const DtnAction da(sa, s0), db(sb, s0);
    const auto ea = boundary_value(da, d, hs, {0.5, 0.0}, half_pi, lams);
    const auto eb = boundary_value(db, d, hs, {0.5, 0.0}, half_pi, lams);
    MESSAGE("near " << ea.values[0] << " " << ea.values[1] << " " << ea.values[2] << ", with far bump "
                    << eb.values.back());
    // q(x0) is 0.03 up to e^{-6.4}
    const double qx0 = base(0.5, 0.8, 0.0);
    CHECK(std::abs(ea.values.back() - qx0) <= std::abs(ea.values.front() - qx0));
    CHECK(std::abs(ea.values.back() - eb.values.back()) <= 1e-3 * std::abs(ea.values.back()));
  }

  SUBCASE("guards") {
    const DtnAction zero(s0, s0);
    CHECK_THROWS_AS(boundary_value(zero, d, hs, {0.5, 0.3}, half_pi, {0.05, 0.1}), ConfigError);
    const Domain coarse(DomainConfig{1.0, 0.8, 12, 25});
    CHECK(points_per_wavelength(coarse, half_pi, 0.05) < 8.0);
    CHECK(points_per_wavelength(d, half_pi, 0.05) >= 8.0);
    // along x1 the fine grid under-resolves lambda = 0.05
    CHECK(points_per_wavelength(d, 0.0, 0.05) < 8.0);
  }
}
