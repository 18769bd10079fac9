#include "biharm/carleman.hpp"
#include "biharm/guard.hpp"
#include "biharm/numerics.hpp"

#include <fftw3.h>

#include <Eigen/LU>

#include <cmath>
#include <mutex>
#include <numbers>
#include <random>

namespace biharm {

namespace {

int fft_friendly(int n) {
  for (;; ++n) {
    int m = n;
    for (int f : {2, 3, 5, 7})
      while (m % f == 0) m /= f;
    if (m == 1) return n;
  }
}

}  // namespace

void validate(const CarlemanParams& p) {
  if (!(p.h > 0.0 && p.h < 1.0)) throw ConfigError("semiclassical parameter h must lie in (0, 1)");
  if (p.sign != 1 && p.sign != -1) throw ConfigError("conjugation sign must be +1 or -1");
  if (!std::isfinite(p.lambda)) throw ConfigError("lambda must be finite");
}

RealField carleman_weight(const Domain& d, double h, int sign) {
  RealField w(d.num_nodes());
  for (int n = 0; n < d.num_nodes(); ++n) w[n] = std::exp(sign * (d.coord(n)[0] - d.x1_mid()) / h);
  return w;
}

Field conjugated_apply(const Domain& d, const CarlemanParams& p, const Field& u) {
  validate(p);
  const double a = p.sign * d.dx1() / p.h;
  const double i1 = 1.0 / (d.dx1() * d.dx1()), ip = 1.0 / (d.dp() * d.dp());
  const double em = std::exp(-a), ep = std::exp(a);
  const double h2 = p.h * p.h;
  Field out = Field::Zero(d.num_nodes());
  for (int n : d.laplacian_nodes()) {
    const auto [i, j, k] = d.index(n);
    const cplx x1part = (em * u[d.node_at(i + 1, j, k)] + ep * u[d.node_at(i - 1, j, k)] - 2.0 * u[n]) * i1;
    const cplx tpart = (u[d.node_at(i, j - 1, k)] + u[d.node_at(i, j + 1, k)] + u[d.node_at(i, j, k - 1)] +
                        u[d.node_at(i, j, k + 1)] - 4.0 * u[n]) *
                       ip;
    out[n] = -h2 * (x1part + tpart);
  }
  return out;
}

struct GreenOperator::Plans {
  fftw_plan fwd = nullptr, bwd = nullptr;
  ~Plans() {
    std::lock_guard lk(fftw_planner_mutex());
    if (fwd) fftw_destroy_plan(fwd);
    if (bwd) fftw_destroy_plan(bwd);
  }
};

GreenOperator::GreenOperator(const Domain& d, double h, int sign, int pad)
    : d_(&d), h_(h), sign_(sign), plans_(std::make_unique<Plans>()) {
  validate(CarlemanParams{h, 0.0, sign});
  if (pad < 2) throw ConfigError("Green operator box padding must be at least 2");
  // a long box in x1 puts the smallest symbol value 2 pi h / T1 well below
  // the h-independent part of the spectrum, so the norm scales like 1/h
  n1_ = fft_friendly(d.n1() + 2 * std::max(pad, d.n1()));
  while (n1_ % 2) n1_ = fft_friendly(n1_ + 1);
  np_ = fft_friendly(d.n_perp() + 2 * pad);
  pad1_ = (n1_ - d.n1()) / 2;
  padp_ = (np_ - d.n_perp()) / 2;

  const double dx1 = d.dx1(), dp = d.dp();
  const double a = sign * dx1 / h;
  inv_symbol_.resize(static_cast<std::size_t>(n1_) * np_ * np_);
  symbol_min_ = std::numeric_limits<double>::infinity();
  for (int k1 = 0; k1 < n1_; ++k1) {
    // anti-periodic lattice: theta1 = (2 k1 + 1) pi / N1
    const double t1 = std::numbers::pi * (2 * k1 + 1) / n1_;
    const cplx c1 = (2.0 * std::cosh(cplx(a, -t1)) - 2.0) / (dx1 * dx1);
    for (int k2 = 0; k2 < np_; ++k2) {
      const double s2 = std::sin(std::numbers::pi * k2 / np_);
      for (int k3 = 0; k3 < np_; ++k3) {
        const double s3 = std::sin(std::numbers::pi * k3 / np_);
        const cplx p = -h * h * (c1 - 4.0 * (s2 * s2 + s3 * s3) / (dp * dp));
        symbol_min_ = std::min(symbol_min_, std::abs(p));
        inv_symbol_[(static_cast<std::size_t>(k1) * np_ + k2) * np_ + k3] = 1.0 / p;
      }
    }
  }
  twist_.resize(n1_);
  for (int i = 0; i < n1_; ++i) twist_[i] = std::polar(1.0, -std::numbers::pi * i / n1_);

  std::vector<cplx> buf(inv_symbol_.size());
  auto* ptr = reinterpret_cast<fftw_complex*>(buf.data());
  std::lock_guard lk(fftw_planner_mutex());
  plans_->fwd = fftw_plan_dft_3d(n1_, np_, np_, ptr, ptr, FFTW_FORWARD, FFTW_ESTIMATE | FFTW_UNALIGNED);
  plans_->bwd = fftw_plan_dft_3d(n1_, np_, np_, ptr, ptr, FFTW_BACKWARD, FFTW_ESTIMATE | FFTW_UNALIGNED);
  if (!plans_->fwd || !plans_->bwd) throw Error("FFTW planning failed");
}

GreenOperator::~GreenOperator() = default;

void GreenOperator::forward(std::vector<cplx>& box) const {
  const std::size_t slab = static_cast<std::size_t>(np_) * np_;
  for (int i = 0; i < n1_; ++i)
    for (std::size_t m = 0; m < slab; ++m) box[i * slab + m] *= twist_[i];
  auto* ptr = reinterpret_cast<fftw_complex*>(box.data());
  fftw_execute_dft(plans_->fwd, ptr, ptr);
}

void GreenOperator::backward(std::vector<cplx>& box) const {
  auto* ptr = reinterpret_cast<fftw_complex*>(box.data());
  fftw_execute_dft(plans_->bwd, ptr, ptr);
  const std::size_t slab = static_cast<std::size_t>(np_) * np_;
  const double scale = 1.0 / static_cast<double>(box.size());
  for (int i = 0; i < n1_; ++i)
    for (std::size_t m = 0; m < slab; ++m) box[i * slab + m] *= std::conj(twist_[i]) * scale;
}

Field GreenOperator::apply(const Field& v, int power) const {
  const Domain& d = *d_;
  if (v.size() != d.num_nodes()) throw DimensionError("Green operator: field size does not match domain");
  if (power != 1 && power != 2) throw ConfigError("Green operator power must be 1 or 2");
  std::vector<cplx> box(inv_symbol_.size(), cplx(0.0));
  auto at = [&](int n) {
    const auto [i, j, k] = d.index(n);
    return (static_cast<std::size_t>(i + pad1_) * np_ + (j + padp_)) * np_ + (k + padp_);
  };
  for (int n = 0; n < d.num_nodes(); ++n) box[at(n)] = v[n];
  forward(box);
  if (power == 1)
    for (std::size_t m = 0; m < box.size(); ++m) box[m] *= inv_symbol_[m];
  else
    for (std::size_t m = 0; m < box.size(); ++m) box[m] *= inv_symbol_[m] * inv_symbol_[m];
  backward(box);
  Field out(d.num_nodes());
  for (int n = 0; n < d.num_nodes(); ++n) out[n] = box[at(n)];
  return out;
}

std::vector<cplx> GreenOperator::impulse_response(int power) const {
  std::vector<cplx> box(inv_symbol_.size(), cplx(0.0));
  box[0] = 1.0;
  forward(box);
  for (std::size_t m = 0; m < box.size(); ++m) box[m] *= power == 1 ? inv_symbol_[m] : inv_symbol_[m] * inv_symbol_[m];
  backward(box);
  return box;
}

Field GreenOperator::apply_conjugated_back(const Field& v, int power) const {
  const RealField wp = carleman_weight(*d_, h_, sign_);
  Field x = v.array() * wp.array().cast<cplx>();
  x = apply(x, power);
  return x.array() / wp.array().cast<cplx>();
}

double GreenOperator::norm_estimate(int power, int iters) const {
  const GreenOperator adj(*d_, h_, -sign_, pad1_ < padp_ ? pad1_ : padp_);
  std::mt19937_64 rng(17);
  std::normal_distribution<double> nd;
  Field x(d_->num_nodes());
  for (auto& c : x) c = cplx(nd(rng), nd(rng));
  x.normalize();
  double est = 0.0;
  for (int it = 0; it < iters; ++it) {
    // G^H = G^T = G_{-phi} since G is real
    Field y = adj.apply(apply(x, power), power);
    est = std::sqrt(y.norm());
    x = y / y.norm();
  }
  return est;
}

Field green_apply(const GreenOperator& g, const Field& v) { return g.apply(v, 1); }
Field green_squared_apply(const GreenOperator& g, const Field& v) { return g.apply(v, 2); }

Eigen::MatrixXd single_layer(const GreenOperator& g) {
  const Domain& d = g.domain();
  const auto [n1b, npb, _] = g.box_shape();
  // G^2 is a box convolution, so one impulse response gives every column
  const std::vector<cplx> box = g.impulse_response(2);
  auto kernel = [&](int di, int dj, int dk) -> double {
    double sgn = 1.0;
    if (di < 0) {
      di += n1b;
      sgn = -1.0;
    }
    dj = (dj % npb + npb) % npb;
    dk = (dk % npb + npb) % npb;
    return sgn * box[(static_cast<std::size_t>(di) * npb + dj) * npb + dk].real();
  };

  const auto& band = d.band_nodes();
  const int nb = d.band_size();
  const double inv_w = 1.0 / d.cell_volume();
  Eigen::MatrixXd s(nb, nb);
  for (int c = 0; c < nb; ++c) {
    const auto [ic, jc, kc] = d.index(band[c]);
    const double xc = d.x1_at(ic);
    for (int r = 0; r < nb; ++r) {
      const auto [ir, jr, kr] = d.index(band[r]);
      const double decay = std::exp(-g.sign() * (d.x1_at(ir) - xc) / g.h());
      s(r, c) = inv_w * decay * kernel(ir - ic, jr - jc, kr - kc);
    }
  }
  return s;
}

SingleLayer build_single_layer(const Domain& d, double h) {
  const GreenOperator g(d, h, 1);
  return {single_layer(g), h};
}

double check_factorization(const ClampedSolver& sq, const DtnMatrix& dlam, const GreenOperator& g,
                           const Eigen::MatrixXd& s, int batch, unsigned seed) {
  check_oracle_access("factorization check");
  const Domain& d = sq.domain();
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> nd;
  const RealField& q = sq.potential().values;
  double worst = 0.0;
  for (int b = 0; b < batch; ++b) {
    BoundaryJet f = BoundaryJet::zeros(d);
    for (auto& v : f.values) v = cplx(nd(rng), nd(rng));
    const Eigen::VectorXcd lhs = s * (dlam.entries * f.values);
    const Field u = sq.poisson(f);
    const Field qu = q.cast<cplx>().array() * u.array();
    const BoundaryJet rhs = trace(d, g.apply_conjugated_back(qu, 2));
    const double den = rhs.values.norm();
    if (den == 0.0) {
      worst = std::max(worst, lhs.norm());
      continue;
    }
    worst = std::max(worst, (lhs - rhs.values).norm() / den);
  }
  return worst;
}

namespace {

double dense_norm(const Eigen::MatrixXd& a, int iters = 50) {
  std::mt19937_64 rng(23);
  std::normal_distribution<double> nd;
  Eigen::VectorXd x(a.cols());
  for (auto& v : x) v = nd(rng);
  x.normalize();
  double est = 0.0;
  for (int it = 0; it < iters; ++it) {
    Eigen::VectorXd y = a.transpose() * (a * x);
    const double n = y.norm();
    if (n == 0.0) return 0.0;
    est = std::sqrt(n);
    x = y / n;
  }
  return est;
}

double dense_spectral_radius(const Eigen::MatrixXd& a, int iters = 120) {
  std::mt19937_64 rng(29);
  std::normal_distribution<double> nd;
  Eigen::VectorXd x(a.cols());
  for (auto& v : x) v = nd(rng);
  x.normalize();
  // geometric mean of the growth over the tail of the iteration
  double log_growth = 0.0;
  int counted = 0;
  for (int it = 0; it < iters; ++it) {
    Eigen::VectorXd y = a * x;
    const double n = y.norm();
    if (n == 0.0) return 0.0;
    if (it >= iters / 2) {
      log_growth += std::log(n);
      ++counted;
    }
    x = y / n;
  }
  return std::exp(log_growth / counted);
}

}  // namespace

BoundaryOperator boundary_operator(const DtnMatrix& dlam, const Eigen::MatrixXd& s, double h) {
  if (s.rows() != dlam.size()) throw DimensionError("single layer and DtN sizes differ");
  const double h4 = h * h * h * h;
  const Eigen::MatrixXd pert = h4 * (s * dlam.entries);
  BoundaryOperator out;
  out.perturbation_norm = dense_norm(pert);
  out.spectral_radius = dense_spectral_radius(pert);
  out.k = pert;
  out.k.diagonal().array() += 1.0;
  const Eigen::PartialPivLU<Eigen::MatrixXd> lu(out.k);
  // ||K^{-1}|| by power iteration on K^{-T} K^{-1}
  std::mt19937_64 rng(31);
  std::normal_distribution<double> nd;
  Eigen::VectorXd x(out.k.cols());
  for (auto& v : x) v = nd(rng);
  x.normalize();
  double inv_norm = 0.0;
  for (int it = 0; it < 30; ++it) {
    const Eigen::VectorXd y = lu.solve(x);
    const Eigen::VectorXd z = lu.transpose().solve(y);
    inv_norm = std::sqrt(z.norm());
    x = z / z.norm();
  }
  out.condition = dense_norm(out.k) * inv_norm;
  return out;
}

double volume_contraction(const GreenOperator& g, const Potential& q, int iters) {
  check_oracle_access("volume contraction");
  const Domain& d = g.domain();
  const GreenOperator adj(d, g.h(), -g.sign());
  const double h4 = std::pow(g.h(), 4);
  const Eigen::ArrayXcd qa = q.values.cast<cplx>().array();
  std::mt19937_64 rng(37);
  std::normal_distribution<double> nd;
  Field x(d.num_nodes());
  for (auto& c : x) c = cplx(nd(rng), nd(rng));
  x.normalize();
  double est = 0.0;
  for (int it = 0; it < iters; ++it) {
    const Field y = h4 * g.apply(Field(qa * x.array()), 2);
    const Field z = h4 * Field(qa * adj.apply(y, 2).array());
    const double n = z.norm();
    if (n == 0.0) return 0.0;
    est = std::sqrt(n);
    x = z / n;
  }
  return est;
}

double select_h0(const Domain& d, const DtnMatrix& dlam, double h_start, double h_min, double target) {
  for (double h = h_start; h >= h_min * (1.0 - 1e-12); h *= 0.5) {
    const Eigen::MatrixXd s = build_single_layer(d, h).entries;
    const double h4 = h * h * h * h;
    const double c = dense_norm(h4 * (s * dlam.entries));
    if (c < target) return h;
  }
  return 0.0;
}

}  // namespace biharm
