#include "biharm/boundary.hpp"

#include <cmath>
#include <iostream>
#include <numbers>

#include "biharm/cgo.hpp"
#include "biharm/numerics.hpp"

namespace biharm {

namespace {

constexpr double pi = std::numbers::pi;

double g(double t) { return std::exp(-t * t) * cutoff(t); }

double eta_constant() {
  static const double c = [] {
    // int g^2 over (-2, 2), panelled because the cutoff is steep near the ends
    const auto q = gauss_legendre(16, 0.0, 1.0);
    const int panels = 64;
    double s = 0.0;
    for (int p = 0; p < panels; ++p)
      for (std::size_t i = 0; i < q.x.size(); ++i) {
        const double t = -2.0 + 4.0 * (p + q.x[i]) / panels;
        s += 4.0 / panels * q.w[i] * g(t) * g(t);
      }
    return 1.0 / std::sqrt(eta_widths[0] * eta_widths[1] * s * s);
  }();
  return c;
}

double wrap(double a) { return std::remainder(a, 2.0 * pi); }

}  // namespace

std::array<double, 3> OscillatoryFamily::support() const {
  const double sc = 2.0 * std::pow(lambda, alpha);
  return {sc * eta_widths[0], sc * eta_widths[1], sc * eta_widths[2]};
}

double OscillatoryFamily::support_radius() const {
  const auto s = support();
  return std::sqrt(s[0] * s[0] + s[1] * s[1] + s[2] * s[2]);
}

double eta_profile(double y1, double y2, double yn) {
  const double c = cutoff(yn / eta_widths[2]);
  if (c == 0.0) return 0.0;
  return eta_constant() * g(y1 / eta_widths[0]) * g(y2 / eta_widths[1]) * c;
}

double eta_normalization() {
  // plain 2D product rule on the support box, independent of the constant's 1D rule
  const auto q = gauss_legendre(24, 0.0, 1.0);
  const int panels = 40;
  std::vector<double> x1, w1, x2, w2;
  for (int p = 0; p < panels; ++p)
    for (std::size_t i = 0; i < q.x.size(); ++i) {
      const double u = (p + q.x[i]) / panels, w = q.w[i] / panels;
      x1.push_back(-2.0 * eta_widths[0] + 4.0 * eta_widths[0] * u);
      w1.push_back(4.0 * eta_widths[0] * w);
      x2.push_back(-2.0 * eta_widths[1] + 4.0 * eta_widths[1] * u);
      w2.push_back(4.0 * eta_widths[1] * w);
    }
  double s = 0.0;
  for (std::size_t i = 0; i < x1.size(); ++i)
    for (std::size_t j = 0; j < x2.size(); ++j) s += w1[i] * w2[j] * std::pow(eta_profile(x1[i], x2[j], 0.0), 2);
  return s;
}

cplx oscillatory_value(const OscillatoryFamily& fam, double radius, const std::array<double, 3>& x) {
  const double rho = std::hypot(x[1], x[2]);
  const double xn = radius - rho;
  const double s = radius * wrap(std::atan2(x[2], x[1]) - fam.x0.theta);
  const double t = x[0] - fam.x0.x1;
  const double sc = std::pow(fam.lambda, fam.alpha);
  const double e = eta_profile(t / sc, s / sc, xn / sc);
  if (e == 0.0) return 0.0;
  const double phase = (std::cos(fam.direction) * t + std::sin(fam.direction) * s) / fam.lambda;
  return std::pow(fam.lambda, -fam.alpha - 0.5) * e * std::exp(cplx(-xn / fam.lambda, phase));
}

Field oscillatory_field(const Domain& d, const OscillatoryFamily& fam) {
  if (!(fam.lambda > 0.0)) throw ConfigError("oscillation scale must be positive");
  const auto sup = fam.support();
  const double margin = 3.0 * d.dx1();
  if (fam.x0.x1 - sup[0] < margin || fam.x0.x1 + sup[0] > d.x1_extent() - margin)
    throw ConfigError("oscillatory family leaves the chart: support reaches the corner circles");
  if (sup[1] / d.radius() > 0.5 * pi) throw ConfigError("oscillatory family leaves the chart: support wraps the circle");
  if (sup[2] >= d.radius()) throw ConfigError("oscillatory family leaves the chart: support reaches the axis");
  Field v(d.num_nodes());
  for (int n = 0; n < d.num_nodes(); ++n) v[n] = oscillatory_value(fam, d.radius(), d.coord(n));
  return v;
}

Field harmonic_correction(const HarmonicSolver& hs, const Field& v) { return hs.extend(v) - v; }

DtnAction::DtnAction(const DtnMatrix& dlam) : size_(dlam.size()) {
  const Eigen::MatrixXd* m = &dlam.entries;
  op_ = [m](const Eigen::VectorXcd& f) -> Eigen::VectorXcd { return *m * f; };
}

DtnAction::DtnAction(const ClampedSolver& sq, const ClampedSolver& s0) : size_(sq.domain().band_size()) {
  if (&sq.domain() != &s0.domain()) throw DimensionError("the two solvers live on different domains");
  op_ = [&sq, &s0](const Eigen::VectorXcd& f) -> Eigen::VectorXcd { return sq.apply_dtn(f) - s0.apply_dtn(f); };
}

Eigen::VectorXcd DtnAction::apply(const Eigen::VectorXcd& f) const {
  if (f.size() != size_) throw DimensionError("trace length does not match the DtN operator");
  return op_(f);
}

double points_per_wavelength(const Domain& d, double direction, double lambda) {
  const double step = std::max(std::abs(std::cos(direction)) * d.dx1(), std::abs(std::sin(direction)) * d.dp());
  return 2.0 * pi * lambda / step;
}

BoundaryEstimate boundary_value(const DtnAction& dlam, const Domain& d, const HarmonicSolver& hs, LateralPoint x0,
                                double direction, const std::vector<double>& lambdas) {
  if (lambdas.empty()) throw ConfigError("no oscillation scales given");
  for (std::size_t k = 1; k < lambdas.size(); ++k)
    if (!(lambdas[k] < lambdas[k - 1])) throw ConfigError("oscillation scales must decrease");
  if (dlam.size() != d.band_size()) throw DimensionError("DtN operator does not belong to this domain");

  BoundaryEstimate est;
  est.x0 = x0;
  est.lambdas = lambdas;
  for (double lam : lambdas) {
    const OscillatoryFamily fam{x0, direction, lam};
    const Field w = hs.extend(oscillatory_field(d, fam));
    const BoundaryJet f = trace(d, w);
    // bilinear pairing with the conjugate trace
    const cplx p = (f.values.conjugate().transpose() * dlam.apply(f.values))(0);
    est.values.push_back(2.0 * p.real());
    est.imag_ratio.push_back(std::abs(p.imag()) / std::max(std::abs(p.real()), 1e-300));
    est.resolved.push_back(points_per_wavelength(d, direction, lam) >= 8.0);
  }

  const int n = static_cast<int>(lambdas.size());
  for (int k = 2; k < n; ++k)
    if ((est.values[k] - est.values[k - 1]) * (est.values[k - 1] - est.values[k - 2]) < 0.0) est.monotone = false;
  if (!est.monotone)
    std::cerr << "warning: boundary estimate at (" << x0.x1 << ", " << x0.theta
              << ") is not monotone in lambda; the grid may under-resolve the oscillation\n";

  std::vector<int> ok;
  for (int k = 0; k < n; ++k)
    if (est.resolved[k]) ok.push_back(k);
  if (ok.size() >= 2) {
    const int a = ok[ok.size() - 2], b = ok.back();
    const double la = lambdas[a], lb = lambdas[b];
    est.extrapolated = (la * est.values[b] - lb * est.values[a]) / (la - lb);
  } else if (ok.size() == 1) {
    est.extrapolated = est.values[ok[0]];
  } else {
    est.extrapolated = std::nan("");
  }
  return est;
}

std::vector<LateralPoint> admissible_points(const Domain& d, double max_lambda, int n_x1, int n_theta) {
  const double rs = OscillatoryFamily{{}, 0.0, max_lambda}.support()[0];
  const double lo = rs + 3.0 * d.dx1() + 1e-9, hi = d.x1_extent() - lo;  // slack: the guard compares strictly
  std::vector<LateralPoint> pts;
  if (lo > hi) return pts;
  for (int i = 0; i < n_x1; ++i) {
    const double x1 = n_x1 == 1 ? 0.5 * (lo + hi) : lo + (hi - lo) * i / (n_x1 - 1);
    for (int j = 0; j < n_theta; ++j) pts.push_back({x1, 2.0 * pi * j / n_theta});
  }
  return pts;
}

std::vector<BoundaryEstimate> boundary_trace(const DtnAction& dlam, const Domain& d,
                                             const std::vector<LateralPoint>& points, double direction,
                                             const std::vector<double>& lambdas) {
  const HarmonicSolver hs(d);
  std::vector<BoundaryEstimate> out(points.size());
  parallel_for(static_cast<int>(points.size()),
               [&](int i) { out[i] = boundary_value(dlam, d, hs, points[i], direction, lambdas); });
  return out;
}

}  // namespace biharm
