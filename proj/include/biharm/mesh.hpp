#pragma once

#include <Eigen/Dense>

#include <array>
#include <complex>
#include <cstdint>
#include <string>
#include <vector>

#include "biharm/error.hpp"

namespace biharm {

using cplx = std::complex<double>;
using Field = Eigen::VectorXcd;     // complex grid function on the nodes of M
using RealField = Eigen::VectorXd;  // real grid function on the nodes of M

struct DomainConfig {
  double x1_extent = 1.0;
  double transversal_radius = 0.8;
  int n1 = 16;
  int n_perp = 33;
};

DomainConfig read_domain_config(const std::string& path);

enum class BoundaryFace : std::uint8_t { cap_low, cap_high, lateral };

struct BoundarySample {
  std::array<double, 3> x;
  std::array<double, 3> normal;
  BoundaryFace face;
  int slice;       // x1 index (lateral) or transversal column id (caps)
  int angle_index; // lateral only
};

// Cylinder M = [0, X1] x D_r sampled on a Cartesian grid. x1 nodes are cell
// centred, the transversal disk is an embedded-boundary grid. Node sets:
//   N  all grid nodes inside M
//   L  nodes whose 7-point Laplacian stays in N
//   I  nodes of L whose 7-point neighbours are all in L (biharmonic rows)
//   B  N \ I, the two-layer boundary band carrying the discrete trace
class Domain {
 public:
  explicit Domain(const DomainConfig& cfg);

  const DomainConfig& config() const { return cfg_; }
  double x1_extent() const { return cfg_.x1_extent; }
  double radius() const { return cfg_.transversal_radius; }
  int n1() const { return cfg_.n1; }
  int n_perp() const { return cfg_.n_perp; }
  double dx1() const { return dx1_; }
  double dp() const { return dp_; }
  double cell_volume() const { return dx1_ * dp_ * dp_; }
  double x1_mid() const { return 0.5 * cfg_.x1_extent; }

  int num_nodes() const { return static_cast<int>(coords_.size()); }
  int num_columns() const { return static_cast<int>(column_jk_.size()); }

  const std::array<double, 3>& coord(int n) const { return coords_[n]; }
  const std::array<int, 3>& index(int n) const { return ijk_[n]; }
  // -1 when (i, j, k) is outside M or outside the grid.
  int node_at(int i, int j, int k) const;
  double x1_at(int i) const { return (i + 0.5) * dx1_; }
  double xp_at(int j) const { return -cfg_.transversal_radius + j * dp_; }

  // transversal columns: (j, k) pairs inside the disk, shared by all slices
  const std::vector<std::array<int, 2>>& columns() const { return column_jk_; }
  int column_of(int j, int k) const;

  bool in_laplacian_rows(int n) const { return lap_row_[n] >= 0; }
  bool in_interior(int n) const { return interior_pos_[n] >= 0; }
  int laplacian_row(int n) const { return lap_row_[n]; }
  int interior_pos(int n) const { return interior_pos_[n]; }
  int band_pos(int n) const { return band_pos_[n]; }

  const std::vector<int>& laplacian_nodes() const { return lap_nodes_; }
  const std::vector<int>& interior_nodes() const { return interior_nodes_; }
  // band ordering: outer layer (N \ L) first, then inner layer (L \ I)
  const std::vector<int>& band_nodes() const { return band_nodes_; }
  int band_size() const { return static_cast<int>(band_nodes_.size()); }
  int band_outer_size() const { return band_outer_; }

  const std::vector<BoundarySample>& boundary_samples() const { return samples_; }
  const Eigen::VectorXd& quad_weights_boundary() const { return wb_; }
  // boundary weights with corner-adjacent samples zeroed
  const Eigen::VectorXd& pairing_weights_boundary() const { return wb_pair_; }
  int n_theta() const { return n_theta_; }

  double volume() const { return cell_volume() * num_nodes(); }

  Field sample(const auto& f) const {
    Field out(num_nodes());
    for (int n = 0; n < num_nodes(); ++n) {
      const auto& x = coords_[n];
      out[n] = cplx(f(x[0], x[1], x[2]));
    }
    return out;
  }

  double l2_norm(const Field& u) const;
  cplx integrate(const Field& u) const;

 private:
  void build_samples();

  DomainConfig cfg_;
  double dx1_ = 0.0;
  double dp_ = 0.0;
  std::vector<int> grid_to_node_;
  std::vector<std::array<double, 3>> coords_;
  std::vector<std::array<int, 3>> ijk_;
  std::vector<std::array<int, 2>> column_jk_;
  std::vector<int> jk_to_column_;
  std::vector<int> lap_row_, interior_pos_, band_pos_;
  std::vector<int> lap_nodes_, interior_nodes_, band_nodes_;
  int band_outer_ = 0;
  std::vector<BoundarySample> samples_;
  Eigen::VectorXd wb_, wb_pair_;
  int n_theta_ = 0;
};

Domain build_domain(const DomainConfig& cfg);

// Discrete trace of a field: its values on the boundary band.
struct BoundaryJet {
  Eigen::VectorXcd values;

  static BoundaryJet zeros(const Domain& d) { return {Eigen::VectorXcd::Zero(d.band_size())}; }
  BoundaryJet conj() const { return {values.conjugate()}; }
};

BoundaryJet trace(const Domain& d, const Field& u);
// zero extension of band data to a field on M
Field extend_by_zero(const Domain& d, const BoundaryJet& g);

// Physical Cauchy data (u, d_nu u) on the boundary samples.
struct CauchyData {
  Eigen::VectorXcd g0;
  Eigen::VectorXcd g1;
};

CauchyData cauchy_data(const Domain& d, const Field& u);

struct HigherTraces {
  Eigen::VectorXcd d2;  // d_nu^2 u
  Eigen::VectorXcd d3;  // d_nu^3 u
};

HigherTraces higher_normal_traces(const Domain& d, const Field& u);

// Lap u on the boundary through d_nu^2 u + H d_nu u + Lap_t u, H = 1/r on the
// lateral face and 0 on the caps.
Eigen::VectorXcd boundary_laplacian(const Domain& d, const Field& u);

// Volume 7-point Laplacian, evaluated on L and extrapolated to the samples.
Eigen::VectorXcd boundary_laplacian_from_volume(const Domain& d, const Field& u);

cplx boundary_pairing(const Domain& d, const CauchyData& a, const CauchyData& b);

// Chords of the unit disk M0.
struct Geodesic {
  double theta = 0.0;  // normal angle: n = (cos theta, sin theta)
  double offset = 0.0; // signed distance p of the chord from the origin
  double length = 0.0;
  bool non_tangential = false;

  std::array<double, 2> normal() const;
  std::array<double, 2> direction() const;  // tau = n rotated by +90 degrees
  std::array<double, 2> point(double t) const;
  // chord coordinates (t, y) of x': t along tau from gamma(0), y along -n
  // (tau rotated by +90 degrees)
  std::array<double, 2> chord_coords(double x2, double x3) const;
};

Geodesic chord(double theta, double offset);

}  // namespace biharm
