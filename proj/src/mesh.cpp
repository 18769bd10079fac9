#include "biharm/mesh.hpp"

#include <Eigen/QR>
#include <Eigen/SVD>

#include <cmath>
#include <algorithm>
#include <limits>
#include <numbers>
#include <optional>
#include <sstream>

#include "biharm/numerics.hpp"

namespace biharm {

namespace {

// Cubic least-squares fit around a lateral boundary point, expressed as rows
// of weights acting on the nodal values of one transversal slice.
struct LateralFit {
  std::vector<int> columns;
  // rows: value, d_nu, d_nu^2, d_nu^3, d_eta^2
  Eigen::Matrix<double, 5, Eigen::Dynamic> w;
};

LateralFit make_lateral_fit(const Domain& d, double theta, bool laplacian_rows_only) {
  const double r = d.radius();
  const double h = d.dp();
  const double px = r * std::cos(theta), py = r * std::sin(theta);
  const double nx = std::cos(theta), ny = std::sin(theta);
  // grow the stencil until the cubic fit is well conditioned; some angles hit
  // node layouts that are degenerate for a fixed radius
  Eigen::MatrixXd a;
  LateralFit fit;
  for (double radius = (laplacian_rows_only ? 4.8 : 3.6) * h;; radius += 0.3 * h) {
    fit.columns.clear();
    std::vector<std::array<double, 2>> local;
    const int ref_slice = std::min(1, d.n1() - 1);  // slices 1..n1-2 share L membership
    for (int c = 0; c < d.num_columns(); ++c) {
      const auto [j, k] = d.columns()[c];
      const double dx = d.xp_at(j) - px, dy = d.xp_at(k) - py;
      if (dx * dx + dy * dy > radius * radius) continue;
      if (laplacian_rows_only) {
        const int n = d.node_at(ref_slice, j, k);
        if (n < 0 || !d.in_laplacian_rows(n)) continue;
      }
      fit.columns.push_back(c);
      local.push_back({(dx * nx + dy * ny) / h, (-dx * ny + dy * nx) / h});
    }
    const int m = static_cast<int>(local.size());
    if (m >= 12) {
      a.resize(m, 10);
      for (int i = 0; i < m; ++i) {
        const double xi = local[i][0], et = local[i][1];
        a.row(i) << 1, xi, et, xi * xi, xi * et, et * et, xi * xi * xi, xi * xi * et, xi * et * et,
            et * et * et;
      }
      const Eigen::JacobiSVD<Eigen::MatrixXd> svd(a);
      const auto& sv = svd.singularValues();
      if (sv(9) > 1e-4 * sv(0)) break;
    }
    if (radius > 8.0 * h) throw Error("lateral boundary fit: degenerate node layout");
  }
  const int m = static_cast<int>(fit.columns.size());
  const Eigen::MatrixXd pinv = a.completeOrthogonalDecomposition().pseudoInverse();
  fit.w.resize(5, m);
  fit.w.row(0) = pinv.row(0);
  fit.w.row(1) = pinv.row(1) / h;
  fit.w.row(2) = 2.0 * pinv.row(3) / (h * h);
  fit.w.row(3) = 6.0 * pinv.row(6) / (h * h * h);
  fit.w.row(4) = 2.0 * pinv.row(5) / (h * h);
  return fit;
}

struct CapStencil {
  // weights for derivative orders 0..3 at the cap, over nodes i = 0..4 from it
  std::array<std::array<double, 5>, 4> w5;
  std::array<std::array<double, 3>, 2> w3;
};

CapStencil make_cap_stencil(double dx1) {
  CapStencil s{};
  std::vector<double> x5, x3;
  for (int m = 0; m < 5; ++m) x5.push_back((m + 0.5) * dx1);
  for (int m = 0; m < 3; ++m) x3.push_back((m + 0.5) * dx1);
  const auto f5 = fornberg_weights(0.0, x5, 3);
  const auto f3 = fornberg_weights(0.0, x3, 1);
  for (int o = 0; o < 4; ++o)
    for (int m = 0; m < 5; ++m) s.w5[o][m] = f5[o][m];
  for (int o = 0; o < 2; ++o)
    for (int m = 0; m < 3; ++m) s.w3[o][m] = f3[o][m];
  return s;
}

}  // namespace

Domain::Domain(const DomainConfig& cfg) : cfg_(cfg) {
  if (!(cfg.transversal_radius < 1.0))
    throw ConfigError("domain not compactly contained: transversal radius must be < 1");
  if (!(cfg.transversal_radius > 0.0)) throw ConfigError("transversal radius must be positive");
  if (!(cfg.x1_extent > 0.0)) throw ConfigError("x1 extent must be positive");
  if (cfg.n1 < 8 || cfg.n_perp < 8)
    throw ConfigError("grid too coarse for the biharmonic stencil (need n1, n_perp >= 8)");

  const int n1 = cfg.n1, np = cfg.n_perp;
  const double r = cfg.transversal_radius;
  dx1_ = cfg.x1_extent / n1;
  dp_ = 2.0 * r / (np - 1);

  jk_to_column_.assign(static_cast<std::size_t>(np) * np, -1);
  for (int j = 0; j < np; ++j)
    for (int k = 0; k < np; ++k) {
      const double x = xp_at(j), y = xp_at(k);
      if (x * x + y * y <= r * r * (1.0 + 1e-12)) {
        jk_to_column_[static_cast<std::size_t>(j) * np + k] = static_cast<int>(column_jk_.size());
        column_jk_.push_back({j, k});
      }
    }

  grid_to_node_.assign(static_cast<std::size_t>(n1) * np * np, -1);
  for (int i = 0; i < n1; ++i)
    for (const auto& [j, k] : column_jk_) {
      grid_to_node_[(static_cast<std::size_t>(i) * np + j) * np + k] = static_cast<int>(coords_.size());
      coords_.push_back({x1_at(i), xp_at(j), xp_at(k)});
      ijk_.push_back({i, j, k});
    }

  const int nn = num_nodes();
  auto all_neighbours = [&](int n, auto&& pred) {
    const auto [i, j, k] = ijk_[n];
    const std::array<std::array<int, 3>, 6> nb{{{i - 1, j, k}, {i + 1, j, k}, {i, j - 1, k},
                                                 {i, j + 1, k}, {i, j, k - 1}, {i, j, k + 1}}};
    for (const auto& q : nb) {
      const int m = node_at(q[0], q[1], q[2]);
      if (m < 0 || !pred(m)) return false;
    }
    return true;
  };

  lap_row_.assign(nn, -1);
  for (int n = 0; n < nn; ++n)
    if (all_neighbours(n, [](int) { return true; })) {
      lap_row_[n] = static_cast<int>(lap_nodes_.size());
      lap_nodes_.push_back(n);
    }
  interior_pos_.assign(nn, -1);
  for (int n : lap_nodes_)
    if (all_neighbours(n, [&](int m) { return lap_row_[m] >= 0; })) {
      interior_pos_[n] = static_cast<int>(interior_nodes_.size());
      interior_nodes_.push_back(n);
    }
  band_pos_.assign(nn, -1);
  for (int n = 0; n < nn; ++n)
    if (lap_row_[n] < 0) {
      band_pos_[n] = static_cast<int>(band_nodes_.size());
      band_nodes_.push_back(n);
    }
  band_outer_ = static_cast<int>(band_nodes_.size());
  for (int n = 0; n < nn; ++n)
    if (lap_row_[n] >= 0 && interior_pos_[n] < 0) {
      band_pos_[n] = static_cast<int>(band_nodes_.size());
      band_nodes_.push_back(n);
    }
  if (interior_nodes_.empty()) throw ConfigError("grid has no interior biharmonic rows");

  build_samples();
}

int Domain::node_at(int i, int j, int k) const {
  const int np = cfg_.n_perp;
  if (i < 0 || i >= cfg_.n1 || j < 0 || j >= np || k < 0 || k >= np) return -1;
  return grid_to_node_[(static_cast<std::size_t>(i) * np + j) * np + k];
}

int Domain::column_of(int j, int k) const {
  const int np = cfg_.n_perp;
  if (j < 0 || j >= np || k < 0 || k >= np) return -1;
  return jk_to_column_[static_cast<std::size_t>(j) * np + k];
}

void Domain::build_samples() {
  const double r = radius();
  const double cap_w = dp_ * dp_;
  std::vector<double> w, wp;
  for (int side = 0; side < 2; ++side) {
    const double x1 = side == 0 ? 0.0 : cfg_.x1_extent;
    const double nx = side == 0 ? -1.0 : 1.0;
    for (int c = 0; c < num_columns(); ++c) {
      const auto [j, k] = column_jk_[c];
      const double x = xp_at(j), y = xp_at(k);
      samples_.push_back({{x1, x, y}, {nx, 0.0, 0.0},
                          side == 0 ? BoundaryFace::cap_low : BoundaryFace::cap_high, c, -1});
      w.push_back(cap_w);
      wp.push_back(std::hypot(x, y) > r - dp_ ? 0.0 : cap_w);
    }
  }
  n_theta_ = std::max(8, static_cast<int>(std::lround(2.0 * std::numbers::pi * r / dp_)));
  const double lat_w = 2.0 * std::numbers::pi * r / n_theta_ * dx1_;
  for (int i = 0; i < cfg_.n1; ++i)
    for (int a = 0; a < n_theta_; ++a) {
      const double th = 2.0 * std::numbers::pi * a / n_theta_;
      samples_.push_back({{x1_at(i), r * std::cos(th), r * std::sin(th)},
                          {0.0, std::cos(th), std::sin(th)},
                          BoundaryFace::lateral,
                          i,
                          a});
      w.push_back(lat_w);
      wp.push_back((i == 0 || i == cfg_.n1 - 1) ? 0.0 : lat_w);
    }
  wb_ = Eigen::Map<Eigen::VectorXd>(w.data(), static_cast<Eigen::Index>(w.size()));
  wb_pair_ = Eigen::Map<Eigen::VectorXd>(wp.data(), static_cast<Eigen::Index>(wp.size()));
}

double Domain::l2_norm(const Field& u) const {
  return std::sqrt(cell_volume() * u.squaredNorm());
}

cplx Domain::integrate(const Field& u) const { return cell_volume() * u.sum(); }

Domain build_domain(const DomainConfig& cfg) { return Domain(cfg); }

BoundaryJet trace(const Domain& d, const Field& u) {
  if (u.size() != d.num_nodes()) throw DimensionError("trace: field size does not match domain");
  BoundaryJet g{Eigen::VectorXcd(d.band_size())};
  const auto& band = d.band_nodes();
  for (int b = 0; b < d.band_size(); ++b) g.values[b] = u[band[b]];
  return g;
}

Field extend_by_zero(const Domain& d, const BoundaryJet& g) {
  if (g.values.size() != d.band_size()) throw DimensionError("band data size does not match domain");
  Field u = Field::Zero(d.num_nodes());
  const auto& band = d.band_nodes();
  for (int b = 0; b < d.band_size(); ++b) u[band[b]] = g.values[b];
  return u;
}

namespace {

struct Readout {
  Eigen::VectorXcd v, d1, d2, d3, tan2;
};

// Value and normal derivatives (orders 0..3) at every boundary sample, plus
// the second tangential derivative along the lateral circle direction.
Readout readout(const Domain& d, const Field& u, bool high_order, bool laplacian_rows_only) {
  if (u.size() != d.num_nodes()) throw DimensionError("readout: field size does not match domain");
  const auto& samples = d.boundary_samples();
  const int ns = static_cast<int>(samples.size());
  Readout out{Eigen::VectorXcd::Zero(ns), Eigen::VectorXcd::Zero(ns), Eigen::VectorXcd::Zero(ns),
              Eigen::VectorXcd::Zero(ns), Eigen::VectorXcd::Zero(ns)};
  const CapStencil cs = make_cap_stencil(d.dx1());
  std::vector<LateralFit> fits;
  fits.reserve(d.n_theta());
  for (int a = 0; a < d.n_theta(); ++a)
    fits.push_back(make_lateral_fit(d, 2.0 * std::numbers::pi * a / d.n_theta(), laplacian_rows_only));

  for (int s = 0; s < ns; ++s) {
    const auto& smp = samples[s];
    if (smp.face != BoundaryFace::lateral) {
      const auto [j, k] = d.columns()[smp.slice];
      const bool low = smp.face == BoundaryFace::cap_low;
      const double sgn = low ? -1.0 : 1.0;  // d_nu = sgn * d_x1 measured outward
      auto node = [&](int m) {
        // m-th node inward from the cap; for the high cap the inward axis is
        // reversed, which flips odd derivative signs once more
        const int i = low ? m : d.n1() - 1 - m;
        return d.node_at(i, j, k);
      };
      // distances are measured inward from the cap: derivative along the
      // inward axis is -d_nu
      if (high_order) {
        std::array<cplx, 4> der{};
        for (int o = 0; o < 4; ++o)
          for (int m = 0; m < 5; ++m) der[o] += cs.w5[o][m] * u[node(m)];
        out.v[s] = der[0];
        out.d1[s] = -der[1];
        out.d2[s] = der[2];
        out.d3[s] = -der[3];
      } else {
        std::array<cplx, 2> der{};
        for (int o = 0; o < 2; ++o)
          for (int m = 0; m < 3; ++m) der[o] += cs.w3[o][m] * u[node(m)];
        out.v[s] = der[0];
        out.d1[s] = -der[1];
      }
      (void)sgn;
    } else {
      const LateralFit& f = fits[smp.angle_index];
      for (std::size_t m = 0; m < f.columns.size(); ++m) {
        const auto [j, k] = d.columns()[f.columns[m]];
        const cplx val = u[d.node_at(smp.slice, j, k)];
        out.v[s] += f.w(0, m) * val;
        out.d1[s] += f.w(1, m) * val;
        out.d2[s] += f.w(2, m) * val;
        out.d3[s] += f.w(3, m) * val;
        out.tan2[s] += f.w(4, m) * val;
      }
    }
  }
  return out;
}

}  // namespace

CauchyData cauchy_data(const Domain& d, const Field& u) {
  const Readout r = readout(d, u, false, false);
  return {r.v, r.d1};
}

HigherTraces higher_normal_traces(const Domain& d, const Field& u) {
  const Readout r = readout(d, u, true, false);
  return {r.d2, r.d3};
}

Eigen::VectorXcd boundary_laplacian(const Domain& d, const Field& u) {
  const Readout r = readout(d, u, true, false);
  const auto& samples = d.boundary_samples();
  const int ns = static_cast<int>(samples.size());
  Eigen::VectorXcd lap(ns);
  // sample index of the lateral sample (i, a)
  const int lateral0 = 2 * d.num_columns();
  auto lat = [&](int i, int a) { return lateral0 + i * d.n_theta() + a; };
  const double inv_r = 1.0 / d.radius();
  const double h1 = d.dx1();
  for (int s = 0; s < ns; ++s) {
    const auto& smp = samples[s];
    if (smp.face == BoundaryFace::lateral) {
      const int i = smp.slice, a = smp.angle_index;
      cplx d11;
      if (i == 0)
        d11 = (2.0 * r.v[lat(0, a)] - 5.0 * r.v[lat(1, a)] + 4.0 * r.v[lat(2, a)] - r.v[lat(3, a)]) / (h1 * h1);
      else if (i == d.n1() - 1)
        d11 = (2.0 * r.v[lat(i, a)] - 5.0 * r.v[lat(i - 1, a)] + 4.0 * r.v[lat(i - 2, a)] -
               r.v[lat(i - 3, a)]) /
              (h1 * h1);
      else
        d11 = (r.v[lat(i + 1, a)] - 2.0 * r.v[lat(i, a)] + r.v[lat(i - 1, a)]) / (h1 * h1);
      // tangential Laplacian: d_11 + second arc-length derivative on the circle
      const cplx arc2 = r.tan2[s] - inv_r * r.d1[s];
      lap[s] = r.d2[s] + inv_r * r.d1[s] + d11 + arc2;
    } else {
      // flat cap: H = 0, Lap_t is the transversal Laplacian of the trace
      const auto [j, k] = d.columns()[smp.slice];
      const double h = d.dp();
      auto val = [&](int jj, int kk) -> std::optional<cplx> {
        const int c = d.column_of(jj, kk);
        if (c < 0) return std::nullopt;
        const int off = smp.face == BoundaryFace::cap_low ? 0 : d.num_columns();
        return r.v[off + c];
      };
      const auto c0 = val(j, k);
      const auto e = val(j + 1, k), w = val(j - 1, k), n = val(j, k + 1), so = val(j, k - 1);
      if (e && w && n && so)
        lap[s] = r.d2[s] + (*e + *w + *n + *so - 4.0 * *c0) / (h * h);
      else
        lap[s] = std::numeric_limits<double>::quiet_NaN();
    }
  }
  return lap;
}

Eigen::VectorXcd boundary_laplacian_from_volume(const Domain& d, const Field& u) {
  Field lap = Field::Zero(d.num_nodes());
  const double i1 = 1.0 / (d.dx1() * d.dx1()), ip = 1.0 / (d.dp() * d.dp());
  for (int n : d.laplacian_nodes()) {
    const auto [i, j, k] = d.index(n);
    lap[n] = i1 * (u[d.node_at(i - 1, j, k)] + u[d.node_at(i + 1, j, k)] - 2.0 * u[n]) +
             ip * (u[d.node_at(i, j - 1, k)] + u[d.node_at(i, j + 1, k)] + u[d.node_at(i, j, k - 1)] +
                   u[d.node_at(i, j, k + 1)] - 4.0 * u[n]);
  }
  // extrapolate using L nodes only; caps via 5-point extrapolation from L slices
  const auto& samples = d.boundary_samples();
  const int ns = static_cast<int>(samples.size());
  Eigen::VectorXcd out(ns);
  std::vector<LateralFit> fits;
  for (int a = 0; a < d.n_theta(); ++a)
    fits.push_back(make_lateral_fit(d, 2.0 * std::numbers::pi * a / d.n_theta(), true));
  std::vector<double> xs;
  for (int m = 1; m <= 4; ++m) xs.push_back((m + 0.5) * d.dx1());
  const auto wcap = fornberg_weights(0.0, xs, 0);
  for (int s = 0; s < ns; ++s) {
    const auto& smp = samples[s];
    if (smp.face == BoundaryFace::lateral) {
      const int i = std::clamp(smp.slice, 1, d.n1() - 2);
      const LateralFit& f = fits[smp.angle_index];
      cplx acc = 0.0;
      for (std::size_t m = 0; m < f.columns.size(); ++m) {
        const auto [j, k] = d.columns()[f.columns[m]];
        acc += f.w(0, m) * lap[d.node_at(i, j, k)];
      }
      out[s] = acc;
    } else {
      const auto [j, k] = d.columns()[smp.slice];
      const bool low = smp.face == BoundaryFace::cap_low;
      cplx acc = 0.0;
      bool ok = true;
      for (int m = 1; m <= 4; ++m) {
        const int n = d.node_at(low ? m : d.n1() - 1 - m, j, k);
        if (!d.in_laplacian_rows(n)) ok = false;
        else acc += wcap[0][m - 1] * lap[n];
      }
      out[s] = ok ? acc : cplx(std::numeric_limits<double>::quiet_NaN());
    }
  }
  return out;
}

cplx boundary_pairing(const Domain& d, const CauchyData& a, const CauchyData& b) {
  const auto& w = d.pairing_weights_boundary();
  cplx acc = 0.0;
  for (Eigen::Index s = 0; s < w.size(); ++s) acc += w[s] * (a.g0[s] * b.g0[s] + a.g1[s] * b.g1[s]);
  return acc;
}

std::array<double, 2> Geodesic::normal() const { return {std::cos(theta), std::sin(theta)}; }
std::array<double, 2> Geodesic::direction() const { return {-std::sin(theta), std::cos(theta)}; }

std::array<double, 2> Geodesic::point(double t) const {
  const auto n = normal();
  const auto tau = direction();
  const double s = t - 0.5 * length;
  return {offset * n[0] + s * tau[0], offset * n[1] + s * tau[1]};
}

std::array<double, 2> Geodesic::chord_coords(double x2, double x3) const {
  const auto n = normal();
  const auto tau = direction();
  const double t = x2 * tau[0] + x3 * tau[1] + 0.5 * length;
  // y along tau rotated by +90 degrees, i.e. along -n
  const double y = -(x2 * n[0] + x3 * n[1] - offset);
  return {t, y};
}

Geodesic chord(double theta, double offset) {
  Geodesic g;
  g.theta = theta;
  g.offset = offset;
  const double p2 = offset * offset;
  g.length = p2 < 1.0 ? 2.0 * std::sqrt(1.0 - p2) : 0.0;
  g.non_tangential = std::abs(offset) < 1.0;
  return g;
}

}  // namespace biharm
