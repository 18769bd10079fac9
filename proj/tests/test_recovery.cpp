#include <doctest.h>

#include <cmath>

#include "biharm/cgo.hpp"
#include "biharm/recovery.hpp"

using namespace biharm;

namespace {

double bump(double x1, double x2, double x3) {
  const double r2 = (x1 - 0.5) * (x1 - 0.5) + (x2 - 0.2) * (x2 - 0.2) + (x3 - 0.1) * (x3 - 0.1);
  return r2 < 0.2 ? 0.05 * std::exp(-r2 / 0.045) * std::exp(1.0 - 1.0 / (1.0 - r2 / 0.2)) : 0.0;
}

}  // namespace

TEST_CASE("Neumann series") {
  const int n = 40;
  Eigen::MatrixXcd rhs = Eigen::MatrixXcd::Random(n, 2);
  const auto zero = neumann_series_solve(Eigen::MatrixXd::Zero(n, n), rhs);
  CHECK(zero.terms == 1);
  CHECK((zero.x - rhs).norm() == 0.0);

  // norm 0.5: geometric bound 0.5^k < 1e-8 well inside 30 terms
  Eigen::MatrixXd t = Eigen::MatrixXd::Random(n, n);
  t *= 0.5 / t.jacobiSvd().singularValues()(0);
  const auto r = neumann_series_solve(t, rhs, 1e-8, 30);
  CHECK(r.terms <= 30);
  Eigen::MatrixXd k = t;
  k.diagonal().array() += 1.0;
  const Eigen::MatrixXcd exact = k.cast<cplx>().partialPivLu().solve(rhs);
  CHECK((r.x - exact).norm() / exact.norm() < 1e-8);

  CHECK_THROWS_AS(neumann_series_solve(1.2 * Eigen::MatrixXd::Identity(n, n), rhs), ConvergenceError);
}

TEST_CASE("oracle guard blocks potential access") {
  const Domain d(DomainConfig{1.0, 0.8, 8, 12});
  {
    OracleGuard g;
    CHECK_THROWS_AS(ClampedSolver(d, Potential::zero(d)), StageError);
  }
  CHECK_NOTHROW(ClampedSolver(d, Potential::zero(d)));
}

TEST_CASE("trace recovery reproduces the CGO trace") {
  const Domain d(DomainConfig{1.0, 0.8, 12, 25});
  const Potential q = Potential::sampled(d, bump);
  const DtnMatrix dl = dtn_difference(assemble_dtn(d, q), assemble_dtn(d, Potential::zero(d)));
  const double h = 0.05;
  const GreenOperator gp(d, h, 1);
  const Eigen::MatrixXd s = single_layer(gp);
  const TraceRecovery rec(dl, s, h);
  MESSAGE("||h^4 S dLambda|| = " << rec.perturbation_norm());

  // q = 0: K = I
  const DtnMatrix zero = dtn_difference(dl, dl);
  const TraceRecovery id(zero, s, h);

  Eigen::MatrixXcd g0(d.band_size(), 3), oracle(d.band_size(), 3);
  int c = 0;
  for (const auto& [g, lam] : {std::pair{chord(0.0, 0.0), 0.0}, std::pair{chord(1.1, 0.3), 0.3},
                               std::pair{chord(2.4, -0.5), 0.5}}) {
    const CgoField u0 = build_u0(gp, grid_beam(d, g, {h, lam, 1}));
    const CgoField u1 = build_u1(gp, q, u0);
    g0.col(c) = trace(d, u0.u).values;
    oracle.col(c) = trace(d, u1.u).values;
    ++c;
  }
  CHECK((id.solve(g0) - g0).norm() == 0.0);

  const Eigen::MatrixXcd f = rec.solve(g0);
  for (int j = 0; j < 3; ++j) {
    const double err = (f.col(j) - oracle.col(j)).norm() / oracle.col(j).norm();
    MESSAGE("recovery error " << err << ", u1-u0 gap " << (oracle.col(j) - g0.col(j)).norm() / oracle.col(j).norm());
    CHECK(err <= 1e-6);
    // the data must actually move: returning gamma u0 would be far worse
    CHECK(err < 1e-3 * (oracle.col(j) - g0.col(j)).norm() / oracle.col(j).norm());
  }
  const Eigen::MatrixXcd fn = rec.solve(g0, RecoveryMethod::neumann);
  CHECK((fn - f).norm() / f.norm() <= 1e-8);
  CHECK(rec.residual(f, g0) < 1e-12);

  // linear in the data
  const Eigen::MatrixXcd lin = rec.solve(g0.col(0) * cplx(2, -1) + g0.col(1));
  CHECK((lin - (f.col(0) * cplx(2, -1) + f.col(1))).norm() / lin.norm() < 1e-12);
}
