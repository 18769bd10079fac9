#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "biharm/io.hpp"
#include "biharm/mesh.hpp"

namespace biharm {

// Stages run in this order; a run stops after `stage`.
enum class Stage { simulate, boundary, recover, sinogram, invert, reconstruct };
Stage parse_stage(const std::string& s);
std::string stage_name(Stage s);

struct PipelineConfig {
  DomainConfig domain{1.0, 0.8, 12, 25};
  std::string phantom = "gauss-bump";
  double constant = 0.01;  // value of the "constant" phantom

  std::vector<double> h_ladder{0.1, 0.05};  // strictly decreasing
  double richardson_order = 1.0;            // in the beam scale 1 / Re k
  double lambda_max = 3.0;
  int lambda_samples = 13;  // odd; symmetric grid
  bool window = true;
  double attenuation_cap = 4.0;  // slices with larger grid attenuation are not inverted
  int angles = 90;
  int offsets = 64;

  std::vector<double> boundary_lambdas{0.12, 0.1, 0.09};
  int boundary_x1_points = 3;
  int boundary_theta_points = 8;
  double boundary_tolerance = 2e-3;  // |q| on the lateral face treated as zero below this

  int recover_checks = 3;  // (lambda, chord) pairs checked against the direct CGO trace

  double noise = 0.0;  // Gaussian perturbation of dLambda, relative to max |dLambda|
  std::uint64_t seed = 1;
  std::string out = "out";
  Stage stage = Stage::reconstruct;
  bool dump_dtn = false, dump_single_layer = false, dump_cgo = false;

  void validate() const;
};

// keys: x1_extent transversal_radius n1 n_perp phantom constant h_ladder
// richardson_order lambda_max lambda_samples window attenuation_cap angles offsets
// boundary_lambdas boundary_x1_points boundary_theta_points boundary_tolerance
// recover_checks noise seed out stage
PipelineConfig config_from_kv(const KeyValues& kv, PipelineConfig base = {});
std::string config_text(const PipelineConfig& cfg);

// plain-text "key: value" lines in insertion order
class Report {
 public:
  static constexpr const char* schema = "biharm-report v1";
  Report();
  void set(const std::string& key, double v);
  void set(const std::string& key, const std::string& v);
  bool has(const std::string& key) const;
  double number(const std::string& key) const;
  std::string text() const;
  void write(const std::string& path) const;
  const std::vector<std::pair<std::string, std::string>>& entries() const { return kv_; }

 private:
  std::vector<std::pair<std::string, std::string>> kv_;
};

// simulate dLambda -> boundary trace -> recovery checks -> sinogram ->
// inversion -> x1 synthesis. Every stage after simulate runs under the
// oracle guard; phantom comparisons happen outside it. Artifacts go to
// cfg.out, the report to cfg.out/report.txt. Failures are rethrown as
// StageError after the partial report is written.
Report run(const PipelineConfig& cfg);

}  // namespace biharm
