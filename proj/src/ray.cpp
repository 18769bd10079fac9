#include "biharm/ray.hpp"

#include <fftw3.h>

#include <cmath>
#include <iostream>
#include <numbers>

#include "biharm/numerics.hpp"

namespace biharm {

namespace {

constexpr double pi = std::numbers::pi;

bool is_chebyshev(const std::vector<double>& x) {
  const auto ref = chebyshev_offsets(static_cast<int>(x.size()));
  for (std::size_t i = 0; i < x.size(); ++i)
    if (std::abs(ref[i] - x[i]) > 1e-12) return false;
  return true;
}

// resamples one projection onto the uniform grid
class Resampler {
 public:
  Resampler(const std::vector<double>& nodes, const std::vector<double>& targets) : x_(nodes), t_(targets) {
    cheb_ = is_chebyshev(nodes);
    if (cheb_) {
      const int n = static_cast<int>(nodes.size());
      w_.resize(n);
      // ascending order reverses the usual index j -> n - 1 - j
      for (int i = 0; i < n; ++i) {
        const int j = n - 1 - i;
        w_[i] = (j % 2 ? -1.0 : 1.0) * std::sin((2 * j + 1) * pi / (2 * n));
      }
    }
  }

  void apply(const cplx* in, cplx* out) const {
    const int n = static_cast<int>(x_.size());
    for (std::size_t k = 0; k < t_.size(); ++k) {
      const double t = t_[k];
      if (std::abs(t) >= 1.0) {
        out[k] = 0.0;
        continue;
      }
      if (cheb_) {
        cplx num = 0.0;
        double den = 0.0;
        bool hit = false;
        for (int i = 0; i < n; ++i) {
          const double dt = t - x_[i];
          if (dt == 0.0) {
            out[k] = in[i];
            hit = true;
            break;
          }
          const double c = w_[i] / dt;
          num += c * in[i];
          den += c;
        }
        if (!hit) out[k] = num / den;
      } else {
        auto it = std::upper_bound(x_.begin(), x_.end(), t);
        if (it == x_.begin() || it == x_.end()) {
          out[k] = 0.0;
          continue;
        }
        const int j = static_cast<int>(it - x_.begin());
        const double f = (t - x_[j - 1]) / (x_[j] - x_[j - 1]);
        out[k] = (1.0 - f) * in[j - 1] + f * in[j];
      }
    }
  }

 private:
  std::vector<double> x_, t_, w_;
  bool cheb_ = false;
};

int next_pow2(int n) {
  int m = 1;
  while (m < n) m <<= 1;
  return m;
}

}  // namespace

cplx attenuated_xray(const TransversalFn& f, const Geodesic& g, double attenuation, int panels) {
  if (!g.non_tangential) throw ConfigError("attenuated transform needs a non-tangential chord");
  const auto q = gauss_legendre(8, 0.0, 1.0);
  const double dt = g.length / panels;
  cplx acc = 0.0;
  for (int p = 0; p < panels; ++p)
    for (std::size_t i = 0; i < q.x.size(); ++i) {
      const double t = (p + q.x[i]) * dt;
      const auto x = g.point(t);
      acc += q.w[i] * dt * std::exp(-attenuation * t) * f(x[0], x[1]);
    }
  return acc;
}

double attenuated_xray_of_one(const Geodesic& g, double a) {
  if (a == 0.0) return g.length;
  return -std::expm1(-a * g.length) / a;
}

std::vector<double> chord_angles(int n) {
  std::vector<double> t(n);
  for (int i = 0; i < n; ++i) t[i] = 2.0 * pi * i / n;
  return t;
}

std::vector<double> chebyshev_offsets(int n) {
  std::vector<double> p(n);
  for (int j = 0; j < n; ++j) p[n - 1 - j] = std::cos((2 * j + 1) * pi / (2 * n));
  return p;
}

cplx x1_fourier(const std::function<double(double, double, double)>& q, double x1_extent, double omega, double x2,
                double x3, int nodes) {
  const int panels = std::max(1, nodes / 16);
  const auto gq = gauss_legendre(16, 0.0, 1.0);
  const double dx = x1_extent / panels;
  cplx acc = 0.0;
  for (int p = 0; p < panels; ++p)
    for (std::size_t i = 0; i < gq.x.size(); ++i) {
      const double x1 = (p + gq.x[i]) * dx;
      const double v = q(x1, x2, x3);
      if (v != 0.0) acc += gq.w[i] * dx * std::exp(cplx(0.0, -omega * x1)) * v;
    }
  return acc;
}

AttenuatedSinogram oracle_sinogram(const std::function<double(double, double, double)>& q, const DomainConfig& cfg,
                                   const std::vector<double>& lambdas, const std::vector<double>& thetas,
                                   const std::vector<double>& offsets) {
  AttenuatedSinogram s;
  s.lambdas = lambdas;
  s.thetas = thetas;
  s.offsets = offsets;
  const double r2 = cfg.transversal_radius * cfg.transversal_radius;
  for (double lam : lambdas) {
    s.attenuation.push_back(2.0 * lam);
    Eigen::MatrixXcd v(thetas.size(), offsets.size());
    const TransversalFn f = [&](double x2, double x3) -> cplx {
      if (x2 * x2 + x3 * x3 >= r2) return 0.0;
      return x1_fourier(q, cfg.x1_extent, 2.0 * lam, x2, x3, 32);
    };
    parallel_for(static_cast<int>(thetas.size()), [&](int a) {
      for (std::size_t p = 0; p < offsets.size(); ++p)
        v(a, p) = attenuated_xray(f, chord(thetas[a], offsets[p]), 2.0 * lam, 24);
    });
    s.values.push_back(std::move(v));
  }
  return s;
}

cplx hermitian_partner(cplx value_reversed, double attenuation, const Geodesic& g) {
  return std::exp(attenuation * g.length) * std::conj(value_reversed);
}

std::vector<cplx> invert_attenuated(const Eigen::MatrixXcd& data, const std::vector<double>& thetas,
                                    const std::vector<double>& offsets, double a, const std::vector<Point2>& points,
                                    const InversionOptions& opt) {
  const int na = static_cast<int>(thetas.size()), np = static_cast<int>(offsets.size());
  if (data.rows() != na || data.cols() != np) throw DimensionError("sinogram shape does not match the sampling");
  if (std::abs(a) > 2.0 * opt.lambda_max)
    std::cerr << "warning: attenuation " << a << " is above the conditioning cap; inversion is unreliable\n";

  const int m = opt.uniform_offsets;
  const double dp = 2.0 / (m - 1);
  std::vector<double> pu(m);
  for (int k = 0; k < m; ++k) pu[k] = -1.0 + k * dp;
  const Resampler rs(offsets, pu);

  // ramp filter: DFT of the band-limited spatial kernel, cut below |a|
  const int nf = next_pow2(2 * m);
  std::vector<cplx> kern(nf, 0.0);
  for (int k = -(m - 1); k <= m - 1; ++k) {
    double v = 0.0;
    if (k == 0)
      v = 1.0 / (4.0 * dp * dp);
    else if (k % 2)
      v = -1.0 / (pi * pi * k * k * dp * dp);
    kern[(k + nf) % nf] = v;
  }
  std::vector<cplx> buf(nf);
  fftw_plan fwd, bwd;
  {
    std::lock_guard lk(fftw_planner_mutex());
    fwd = fftw_plan_dft_1d(nf, reinterpret_cast<fftw_complex*>(buf.data()), reinterpret_cast<fftw_complex*>(buf.data()),
                           FFTW_FORWARD, FFTW_ESTIMATE);
    bwd = fftw_plan_dft_1d(nf, reinterpret_cast<fftw_complex*>(buf.data()), reinterpret_cast<fftw_complex*>(buf.data()),
                           FFTW_BACKWARD, FFTW_ESTIMATE);
  }
  buf = kern;
  fftw_execute(fwd);
  std::vector<cplx> filt(buf);
  const double sig_max = pi / dp;
  for (int k = 0; k < nf; ++k) {
    const int kk = k <= nf / 2 ? k : k - nf;
    const double sig = 2.0 * pi * kk / (nf * dp);
    double w = 1.0;
    if (std::abs(sig) < std::abs(a)) w = 0.0;
    if (opt.hann) w *= 0.5 * (1.0 + std::cos(pi * sig / sig_max));
    filt[k] *= w * dp / nf;
  }

  // filtered projections on the uniform grid
  std::vector<std::vector<cplx>> qf(na, std::vector<cplx>(m));
  std::vector<cplx> proj(np), uni(m);
  for (int t = 0; t < na; ++t) {
    for (int p = 0; p < np; ++p) {
      const double len = 2.0 * std::sqrt(std::max(0.0, 1.0 - offsets[p] * offsets[p]));
      proj[p] = std::exp(0.5 * a * len) * data(t, p);
    }
    rs.apply(proj.data(), uni.data());
    std::fill(buf.begin(), buf.end(), cplx(0.0));
    std::copy(uni.begin(), uni.end(), buf.begin());
    fftw_execute(fwd);
    for (int k = 0; k < nf; ++k) buf[k] *= filt[k];
    fftw_execute(bwd);
    for (int k = 0; k < m; ++k) qf[t][k] = buf[k];
  }
  {
    std::lock_guard lk(fftw_planner_mutex());
    fftw_destroy_plan(fwd);
    fftw_destroy_plan(bwd);
  }

  // weighted backprojection
  std::vector<cplx> out(points.size(), 0.0);
  const double dth = 2.0 * pi / na;
  parallel_for(static_cast<int>(points.size()), [&](int i) {
    const auto [x2, x3] = points[i];
    cplx acc = 0.0;
    for (int t = 0; t < na; ++t) {
      const double c = std::cos(thetas[t]), s = std::sin(thetas[t]);
      const double p = x2 * c + x3 * s;
      const double tx = -x2 * s + x3 * c;  // x . tau
      const double u = (p + 1.0) / dp;
      const int k = static_cast<int>(std::floor(u));
      if (k < 0 || k >= m - 1) continue;
      const double f = u - k;
      acc += std::exp(a * tx) * ((1.0 - f) * qf[t][k] + f * qf[t][k + 1]);
    }
    out[i] = 0.5 * dth * acc;
  });
  return out;
}

std::vector<Point2> image_points(int n) {
  std::vector<Point2> pts;
  pts.reserve(static_cast<std::size_t>(n) * n);
  for (int j = 0; j < n; ++j)
    for (int i = 0; i < n; ++i) pts.push_back({-1.0 + (i + 0.5) * 2.0 / n, -1.0 + (j + 0.5) * 2.0 / n});
  return pts;
}

double tukey_window(double lambda, double lambda_max, double dl) {
  const double edge = lambda_max + dl;
  const double flat_part = 0.5 * edge;
  const double x = std::abs(lambda);
  if (x <= flat_part) return 1.0;
  if (x >= edge) return 0.0;
  return 0.5 * (1.0 + std::cos(pi * (x - flat_part) / (edge - flat_part)));
}

std::vector<double> lambda_grid(double lambda_max, int n) {
  if (n < 1 || n % 2 == 0) throw ConfigError("lambda grid needs an odd number of samples");
  std::vector<double> l(n);
  if (n == 1) return {0.0};
  for (int k = 0; k < n; ++k) l[k] = -lambda_max + 2.0 * lambda_max * k / (n - 1);
  l[n / 2] = 0.0;
  return l;
}

Eigen::MatrixXcd fourier_x1_invert(const std::vector<double>& lambdas, const std::vector<Eigen::VectorXcd>& slices,
                                   const std::vector<double>& x1_values, double x1_extent, bool window) {
  const int n = static_cast<int>(lambdas.size());
  if (n == 0 || static_cast<int>(slices.size()) != n) throw DimensionError("one slice per lambda sample is needed");
  double period = x1_extent, dl = 0.0;
  if (n == 1) {
    if (lambdas[0] != 0.0) throw ConfigError("a single lambda sample must be 0");
  } else {
    dl = lambdas[1] - lambdas[0];
    for (int k = 0; k < n; ++k) {
      if (std::abs(lambdas[k] + lambdas[n - 1 - k]) > 1e-12 * (1.0 + std::abs(lambdas[k])))
        throw ConfigError("lambda grid is not symmetric");
      if (k > 0 && std::abs(lambdas[k] - lambdas[k - 1] - dl) > 1e-9 * dl)
        throw ConfigError("lambda grid is not equispaced");
    }
    period = pi / dl;
    if (period < x1_extent) throw ConfigError("lambda spacing aliases the x1 extent");
  }
  const double lmax = std::abs(lambdas.back());
  const int npts = static_cast<int>(slices[0].size());
  Eigen::MatrixXcd out = Eigen::MatrixXcd::Zero(x1_values.size(), npts);
  for (int k = 0; k < n; ++k) {
    const double w = (window && n > 1) ? tukey_window(lambdas[k], lmax, dl) : 1.0;
    if (w == 0.0) continue;
    for (std::size_t i = 0; i < x1_values.size(); ++i) {
      const cplx e = w / period * std::exp(cplx(0.0, 2.0 * lambdas[k] * x1_values[i]));
      out.row(i) += e * slices[k].transpose();
    }
  }
  return out;
}

cplx pairing_data(const DtnMatrix& dlam, const BoundaryJet& f1, const BoundaryJet& f2) {
  if (f1.values.size() != dlam.size() || f2.values.size() != dlam.size())
    throw DimensionError("trace length does not match the DtN matrix");
  return dtn_pairing(dlam, f1, f2);
}

BeamDataContext::BeamDataContext(const Domain& d, const DtnMatrix& dlam, double h)
    : d_(&d), dlam_(&dlam), h_(h) {
  if (dlam.size() != d.band_size()) throw DimensionError("DtN matrix does not belong to this domain");
  gp_ = std::make_unique<GreenOperator>(d, h, 1);
  gm_ = std::make_unique<GreenOperator>(d, h, -1);
  rec_ = std::make_unique<TraceRecovery>(dlam, single_layer(*gp_), h);
}

namespace {

struct BeamTraces {
  Eigen::VectorXcd u0, u2bar;
  double attenuation;
  double scale;
};

BeamTraces beam_traces(const BeamDataContext& ctx, double lambda, const Geodesic& g) {
  const Domain& d = ctx.domain();
  const CarlemanParams p{ctx.h(), lambda, 1};
  const GaussianBeam v = grid_beam(d, g, p), w = grid_beam(d, g, p.flipped(), BeamKind::w);
  const CgoField u0 = build_u0(ctx.green_plus(), v);
  const CgoField u2 = build_u2(ctx.green_minus(), w);
  return {trace(d, u0.u).values, trace(d, u2.u).values.conjugate(), v.attenuation() + w.attenuation(),
          0.5 * (1.0 / v.carrier.real() + 1.0 / w.carrier.real())};
}

cplx remove_gauge(const Domain& d, cplx pairing, double lambda) {
  return pairing * std::exp(cplx(0.0, -2.0 * lambda * d.x1_mid()));
}

}  // namespace

BeamDatum beam_data(const BeamDataContext& ctx, double lambda, const Geodesic& g, RecoveryMethod m) {
  const BeamTraces bt = beam_traces(ctx, lambda, g);
  const Eigen::VectorXcd f1 = ctx.recovery().solve(bt.u0, m).col(0);
  BeamDatum out;
  out.pairing = pairing_data(ctx.dlam(), {f1}, {bt.u2bar});
  out.value = remove_gauge(ctx.domain(), out.pairing, lambda);
  out.attenuation = bt.attenuation;
  out.scale = bt.scale;
  out.recovery_residual = ctx.recovery().residual(f1, bt.u0);
  return out;
}

std::vector<BeamDatum> beam_data_batch(const BeamDataContext& ctx, double lambda, const std::vector<Geodesic>& gs) {
  const int n = static_cast<int>(gs.size()), nb = ctx.domain().band_size();
  Eigen::MatrixXcd g0(nb, n), g2(nb, n);
  std::vector<double> att(n), scale(n);
  for (int j = 0; j < n; ++j) {
    const BeamTraces bt = beam_traces(ctx, lambda, gs[j]);
    g0.col(j) = bt.u0;
    g2.col(j) = bt.u2bar;
    att[j] = bt.attenuation;
    scale[j] = bt.scale;
  }
  const Eigen::MatrixXcd f1 = ctx.recovery().solve(g0);
  const Eigen::MatrixXcd lf = ctx.dlam().entries * f1;
  std::vector<BeamDatum> out(n);
  for (int j = 0; j < n; ++j) {
    out[j].pairing = (g2.col(j).transpose() * lf.col(j))(0);
    out[j].value = remove_gauge(ctx.domain(), out[j].pairing, lambda);
    out[j].attenuation = att[j];
    out[j].scale = scale[j];
  }
  return out;
}

cplx richardson(cplx coarse, cplx fine, double h_coarse, double h_fine, double order) {
  if (!(h_fine < h_coarse)) throw ConfigError("Richardson step needs h_fine < h_coarse");
  const double r = std::pow(h_fine / h_coarse, order);
  return (fine - r * coarse) / (1.0 - r);
}

}  // namespace biharm
