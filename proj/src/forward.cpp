#include "biharm/forward.hpp"
#include "biharm/guard.hpp"

#include <Eigen/CholmodSupport>
#include <Eigen/SparseCholesky>

#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <mutex>
#include <random>
#include <sstream>

#include "biharm/numerics.hpp"

namespace biharm {

namespace {

template <class Fn>
void for_each_neighbour(const Domain& d, int n, Fn&& fn) {
  const auto [i, j, k] = d.index(n);
  const double i1 = 1.0 / (d.dx1() * d.dx1()), ip = 1.0 / (d.dp() * d.dp());
  fn(d.node_at(i - 1, j, k), i1);
  fn(d.node_at(i + 1, j, k), i1);
  fn(d.node_at(i, j - 1, k), ip);
  fn(d.node_at(i, j + 1, k), ip);
  fn(d.node_at(i, j, k - 1), ip);
  fn(d.node_at(i, j, k + 1), ip);
}

SpMat select(const SpMat& a, const std::vector<int>& row_map, int nrows, const std::vector<int>& col_map,
             int ncols) {
  std::vector<Eigen::Triplet<double>> t;
  for (int c = 0; c < a.outerSize(); ++c)
    for (SpMat::InnerIterator it(a, c); it; ++it) {
      const int r = row_map[it.row()], cc = col_map[it.col()];
      if (r >= 0 && cc >= 0) t.emplace_back(r, cc, it.value());
    }
  SpMat out(nrows, ncols);
  out.setFromTriplets(t.begin(), t.end());
  return out;
}

}  // namespace

SpMat laplacian_matrix(const Domain& d) {
  std::vector<Eigen::Triplet<double>> t;
  const double diag = -2.0 / (d.dx1() * d.dx1()) - 4.0 / (d.dp() * d.dp());
  for (int n : d.laplacian_nodes()) {
    const int r = d.laplacian_row(n);
    t.emplace_back(r, n, diag);
    for_each_neighbour(d, n, [&](int m, double c) { t.emplace_back(r, m, c); });
  }
  SpMat a(static_cast<int>(d.laplacian_nodes().size()), d.num_nodes());
  a.setFromTriplets(t.begin(), t.end());
  return a;
}

Field apply_laplacian(const Domain& d, const Field& u) {
  Field out = Field::Zero(d.num_nodes());
  const double diag = -2.0 / (d.dx1() * d.dx1()) - 4.0 / (d.dp() * d.dp());
  for (int n : d.laplacian_nodes()) {
    cplx acc = diag * u[n];
    for_each_neighbour(d, n, [&](int m, double c) { acc += c * u[m]; });
    out[n] = acc;
  }
  return out;
}

Field apply_bilaplacian(const Domain& d, const Field& u) {
  const Field lap = apply_laplacian(d, u);
  const Field l2 = apply_laplacian(d, lap);
  Field out = Field::Zero(d.num_nodes());
  for (int n : d.interior_nodes()) out[n] = l2[n];
  return out;
}

struct RefinedSolver::Impl {
  Eigen::CholmodSupernodalLLT<SpMat> llt;
  Eigen::SimplicialLDLT<SpMat> ldlt;
  bool use_llt = false;
  std::mutex mu;  // cholmod keeps workspace in its common block
};

RefinedSolver::RefinedSolver(const SpMat& a, const std::string& what) : a_(a), impl_(std::make_unique<Impl>()) {
  a_.makeCompressed();
  impl_->llt.compute(a_);
  if (impl_->llt.info() == Eigen::Success) {
    // some BLAS builds pick broken kernels; trust the factor only if it solves
    std::mt19937_64 rng(5);
    std::normal_distribution<double> nd;
    Eigen::VectorXd b(a_.rows());
    for (auto& v : b) v = nd(rng);
    const Eigen::VectorXd x = impl_->llt.solve(b);
    impl_->use_llt = x.allFinite() && (b - a_ * x).norm() <= 1e-8 * b.norm();
  }
  if (!impl_->use_llt) {
    impl_->ldlt.compute(a_);
    if (impl_->ldlt.info() != Eigen::Success)
      throw SingularOperatorError(what + ": factorization failed", 0.0);
  }
}

RefinedSolver::~RefinedSolver() = default;

bool RefinedSolver::supernodal() const { return impl_->use_llt; }

Eigen::MatrixXd RefinedSolver::raw_solve(const Eigen::MatrixXd& b) const {
  if (impl_->use_llt) {
    std::lock_guard lk(impl_->mu);
    return impl_->llt.solve(b);
  }
  return impl_->ldlt.solve(b);
}

Eigen::VectorXd RefinedSolver::solve(const Eigen::VectorXd& b) const {
  Eigen::VectorXd x = raw_solve(b);
  const double bn = b.norm();
  if (bn == 0.0) return x;
  double prev = std::numeric_limits<double>::infinity();
  for (int it = 0; it < 6; ++it) {
    const Eigen::VectorXd r = b - a_ * x;
    const double rn = r.norm();
    if (rn <= 1e-14 * bn || rn >= 0.5 * prev) break;
    prev = rn;
    x += raw_solve(r);
  }
  return x;
}

Eigen::VectorXcd RefinedSolver::solve(const Eigen::VectorXcd& b) const {
  Eigen::MatrixXd bb(b.size(), 2);
  bb.col(0) = b.real();
  bb.col(1) = b.imag();
  const Eigen::MatrixXd x = solve(bb);
  Eigen::VectorXcd out(b.size());
  out.real() = x.col(0);
  out.imag() = x.col(1);
  return out;
}

Eigen::MatrixXd RefinedSolver::solve(const Eigen::MatrixXd& b) const {
  Eigen::MatrixXd x = raw_solve(b);
  for (int it = 0; it < 2; ++it) {
    const Eigen::MatrixXd r = b - a_ * x;
    if (r.norm() <= 1e-14 * b.norm()) break;
    x += raw_solve(r);
  }
  return x;
}

double sym_norm_estimate(const SpMat& a, int iters) {
  std::mt19937_64 rng(7);
  std::normal_distribution<double> nd;
  Eigen::VectorXd x(a.cols());
  for (auto& v : x) v = nd(rng);
  x.normalize();
  double est = 0.0;
  for (int it = 0; it < iters; ++it) {
    Eigen::VectorXd y = a * x;
    est = y.norm();
    if (est == 0.0) return 0.0;
    x = y / est;
  }
  return est;
}

double sym_sigma_min_estimate(const RefinedSolver& s, int iters) {
  std::mt19937_64 rng(11);
  std::normal_distribution<double> nd;
  Eigen::VectorXd x(s.rows());
  for (auto& v : x) v = nd(rng);
  x.normalize();
  double est = 0.0;
  for (int it = 0; it < iters; ++it) {
    Eigen::VectorXd y = s.solve(x);
    est = y.norm();
    if (!std::isfinite(est)) return 0.0;
    x = y / est;
  }
  return 1.0 / est;
}

ClampedSolver::ClampedSolver(const Domain& d, const Potential& q) : d_(&d), q_(q) {
  check_oracle_access("clamped solver");
  if (q.values.size() != d.num_nodes()) throw DimensionError("potential size does not match domain");
  if (!q.values.allFinite()) throw Error("potential has non-finite values");
  const double w = d.cell_volume();
  const SpMat lap = laplacian_matrix(d);
  k_ = w * SpMat(lap.transpose() * lap);
  for (int n = 0; n < d.num_nodes(); ++n) k_.coeffRef(n, n) += w * q.values[n];
  k_.makeCompressed();

  std::vector<int> imap(d.num_nodes()), bmap(d.num_nodes());
  for (int n = 0; n < d.num_nodes(); ++n) {
    imap[n] = d.interior_pos(n);
    bmap[n] = d.band_pos(n);
  }
  const int ni = static_cast<int>(d.interior_nodes().size()), nb = d.band_size();
  kii_ = select(k_, imap, ni, imap, ni);
  kib_ = select(k_, imap, ni, bmap, nb);
  kbb_ = select(k_, bmap, nb, bmap, nb);

  solver_ = std::make_unique<RefinedSolver>(kii_, "clamped operator");
  norm_ = sym_norm_estimate(kii_);
  sigma_min_ = sym_sigma_min_estimate(*solver_);
  if (!(sigma_min_ > 1e-10 * norm_)) {
    std::ostringstream os;
    os << "clamped operator numerically singular: smallest singular value " << sigma_min_ << " vs norm "
       << norm_;
    throw SingularOperatorError(os.str(), sigma_min_);
  }
}

Field ClampedSolver::solve(const BoundaryJet& f, const Field& rhs) const {
  const Domain& d = *d_;
  if (f.values.size() != d.band_size()) throw DimensionError("band data size does not match domain");
  if (rhs.size() != d.num_nodes()) throw DimensionError("rhs size does not match domain");
  const auto& inodes = d.interior_nodes();
  const double w = d.cell_volume();
  Eigen::VectorXcd b(inodes.size());
  for (std::size_t p = 0; p < inodes.size(); ++p) b[p] = w * rhs[inodes[p]];
  b -= kib_ * f.values;
  const Eigen::VectorXcd ui = solver_->solve(b);
  Field u = extend_by_zero(d, f);
  for (std::size_t p = 0; p < inodes.size(); ++p) u[inodes[p]] = ui[p];
  return u;
}

Field ClampedSolver::poisson(const BoundaryJet& g) const { return solve(g, Field::Zero(d_->num_nodes())); }

Eigen::VectorXcd ClampedSolver::apply_dtn(const Eigen::VectorXcd& f) const {
  const Eigen::VectorXcd x = solver_->solve(Eigen::VectorXcd(kib_ * f));
  return kbb_ * f - kib_.transpose() * x;
}

Eigen::MatrixXd ClampedSolver::assemble_dtn() const {
  const int nb = d_->band_size();
  Eigen::MatrixXd lam = Eigen::MatrixXd(kbb_);
  const SpMat kbi = kib_.transpose();
  constexpr int block = 128;
  const int nblocks = (nb + block - 1) / block;
  parallel_for(nblocks, [&](int bi) {
    const int c0 = bi * block, nc = std::min(block, nb - c0);
    const Eigen::MatrixXd rhs = Eigen::MatrixXd(kib_.middleCols(c0, nc));
    const Eigen::MatrixXd x = solver_->solve(rhs);
    lam.middleCols(c0, nc) -= kbi * x;
  });
  return lam;
}

DtnMatrix assemble_dtn(const ClampedSolver& solver) {
  const Domain& d = solver.domain();
  DtnMatrix m;
  m.entries = solver.assemble_dtn();
  m.weights = Eigen::VectorXd::Constant(d.band_size(), d.cell_volume());
  m.domain = d.config();
  return m;
}

DtnMatrix assemble_dtn(const Domain& d, const Potential& q) { return assemble_dtn(ClampedSolver(d, q)); }

DtnMatrix dtn_difference(const DtnMatrix& a, const DtnMatrix& b) {
  if (a.size() != b.size()) throw DimensionError("DtN matrices have different sizes");
  DtnMatrix m = a;
  m.entries = a.entries - b.entries;
  return m;
}

cplx dtn_pairing(const DtnMatrix& lam, const BoundaryJet& f, const BoundaryJet& g) {
  if (f.values.size() != lam.size() || g.values.size() != lam.size())
    throw DimensionError("jet size does not match DtN matrix");
  return g.values.transpose() * (lam.entries * f.values);
}

double verify_integral_identity(const ClampedSolver& sq, const ClampedSolver& s0, const DtnMatrix& dlam,
                                const BoundaryJet& f, const BoundaryJet& g) {
  check_oracle_access("integral identity");
  const Domain& d = sq.domain();
  const Field u = sq.poisson(f);
  const Field v = s0.poisson(g);
  const cplx vol = d.cell_volume() * (sq.potential().values.cast<cplx>().array() * u.array() * v.array()).sum();
  const cplx lhs = dtn_pairing(dlam, f, g);
  return std::abs(lhs - vol) / (1.0 + std::abs(vol));
}

void write_dtn(const std::string& path, const DtnMatrix& m) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path);
  out << "biharm-dtn v1 " << m.entries.rows() << ' ' << m.entries.cols() << ' ' << m.domain.n1 << ' '
      << m.domain.n_perp << ' ';
  out.precision(17);
  out << m.domain.x1_extent << ' ' << m.domain.transversal_radius;
  if (m.has_params) out << " h " << m.h << " lambda " << m.lambda;
  out << '\n';
  std::vector<double> buf;
  buf.reserve(2 * m.entries.size());
  for (int r = 0; r < m.entries.rows(); ++r)
    for (int c = 0; c < m.entries.cols(); ++c) {
      buf.push_back(m.entries(r, c));
      buf.push_back(0.0);
    }
  out.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size() * sizeof(double)));
  out.write(reinterpret_cast<const char*>(m.weights.data()),
            static_cast<std::streamsize>(m.weights.size() * sizeof(double)));
  if (!out) throw Error("write failed: " + path);
}

DtnMatrix read_dtn(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path);
  std::string header;
  std::getline(in, header);
  std::istringstream hs(header);
  std::string magic, version;
  long rows = 0, cols = 0;
  DtnMatrix m;
  hs >> magic >> version >> rows >> cols >> m.domain.n1 >> m.domain.n_perp >> m.domain.x1_extent >>
      m.domain.transversal_radius;
  if (magic != "biharm-dtn" || version != "v1" || !hs) throw Error("not a biharm-dtn v1 file: " + path);
  std::string key;
  while (hs >> key) {
    if (key == "h") hs >> m.h, m.has_params = true;
    else if (key == "lambda") hs >> m.lambda;
  }
  std::vector<double> buf(2 * rows * cols);
  in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size() * sizeof(double)));
  m.entries.resize(rows, cols);
  for (long r = 0; r < rows; ++r)
    for (long c = 0; c < cols; ++c) m.entries(r, c) = buf[2 * (r * cols + c)];
  m.weights.resize(rows);
  in.read(reinterpret_cast<char*>(m.weights.data()), static_cast<std::streamsize>(rows * sizeof(double)));
  if (!in) throw Error("truncated biharm-dtn file: " + path);
  return m;
}

HarmonicSolver::HarmonicSolver(const Domain& d) : d_(&d) {
  const SpMat lap = laplacian_matrix(d);
  std::vector<int> rows(lap.rows()), lmap(d.num_nodes(), -1), omap(d.num_nodes(), -1);
  for (int r = 0; r < lap.rows(); ++r) rows[r] = r;
  int no = 0;
  for (int n = 0; n < d.num_nodes(); ++n) {
    if (d.in_laplacian_rows(n)) lmap[n] = d.laplacian_row(n);
    else omap[n] = no++;
  }
  a_ll_ = select(lap, rows, static_cast<int>(lap.rows()), lmap, static_cast<int>(lap.rows()));
  a_lo_ = select(lap, rows, static_cast<int>(lap.rows()), omap, no);
  solver_ = std::make_unique<RefinedSolver>(SpMat(-a_ll_), "Dirichlet Laplacian");
}

Field HarmonicSolver::solve(const Field& rhs, const Field& bv) const {
  const Domain& d = *d_;
  Eigen::VectorXcd outer(d.band_outer_size());
  for (int b = 0; b < d.band_outer_size(); ++b) outer[b] = bv[d.band_nodes()[b]];
  // outer band nodes are numbered first and in node order, matching omap
  Eigen::VectorXcd r(a_ll_.rows());
  for (int n : d.laplacian_nodes()) r[d.laplacian_row(n)] = rhs[n];
  r -= a_lo_ * outer;
  const Eigen::VectorXcd vl = solver_->solve(Eigen::VectorXcd(-r));
  Field v = Field::Zero(d.num_nodes());
  for (int b = 0; b < d.band_outer_size(); ++b) v[d.band_nodes()[b]] = outer[b];
  for (int n : d.laplacian_nodes()) v[n] = vl[d.laplacian_row(n)];
  return v;
}

Field HarmonicSolver::extend(const Field& bv) const { return solve(Field::Zero(d_->num_nodes()), bv); }

}  // namespace biharm
