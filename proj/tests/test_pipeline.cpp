#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "biharm/error.hpp"
#include "biharm/io.hpp"
#include "biharm/phantom.hpp"
#include "biharm/pipeline.hpp"

using namespace biharm;

namespace {

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

PipelineConfig tiny(const std::string& out) {
  PipelineConfig c;
  c.domain = {1.0, 0.8, 8, 17};
  c.h_ladder = {0.1};
  c.lambda_max = 1.0;
  c.lambda_samples = 3;
  c.angles = 16;
  c.offsets = 12;
  c.boundary_lambdas = {};
  c.recover_checks = 1;
  c.out = (std::filesystem::temp_directory_path() / out).string();
  std::filesystem::remove_all(c.out);
  return c;
}

}  // namespace

TEST_CASE("config parsing") {
  const auto kv = parse_key_values("# comment\nn1 = 10\nh_ladder=0.2, 0.1\nphantom=zero\nstage=sinogram\nwindow=0\n");
  const PipelineConfig c = config_from_kv(kv);
  CHECK(c.domain.n1 == 10);
  REQUIRE(c.h_ladder.size() == 2);
  CHECK(c.h_ladder[1] == doctest::Approx(0.1));
  CHECK(c.phantom == "zero");
  CHECK(c.stage == Stage::sinogram);
  CHECK_FALSE(c.window);
  // round trip through the text form
  const PipelineConfig d = config_from_kv(parse_key_values(config_text(c)));
  CHECK(config_text(d) == config_text(c));

  CHECK_THROWS_AS(config_from_kv(parse_key_values("bogus=1\n")), ConfigError);
  CHECK_THROWS_AS(config_from_kv(parse_key_values("n1=ten\n")), ConfigError);
  CHECK_THROWS_AS(parse_key_values("no equals sign\n"), ConfigError);
  CHECK_THROWS_AS(parse_stage("nowhere"), ConfigError);
}

TEST_CASE("config validation") {
  PipelineConfig c;
  CHECK_NOTHROW(c.validate());
  c.h_ladder = {0.05, 0.1};
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = {};
  c.lambda_samples = 4;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = {};
  c.angles = 45;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = {};
  c.noise = -1.0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
}

TEST_CASE("phantom library") {
  CHECK(make_phantom("zero")(0.3, 0.1, 0.2) == 0.0);
  CHECK(make_phantom("constant", 1e-2)(0.3, 0.1, 0.2) == doctest::Approx(0.01));
  CHECK_THROWS_AS(make_phantom("no-such"), ConfigError);
  for (const auto& n : phantom_names()) CHECK_NOTHROW(make_phantom(n));

  const Phantom g = make_phantom("gauss-bump");
  CHECK(g(0.5, 0.2, 0.1) == doctest::Approx(0.05));
  // zero on the whole boundary of M = [0, 1] x D_0.8
  const Domain d({1.0, 0.8, 16, 49});
  double worst = 0.0;
  for (int n = 0; n < d.num_nodes(); ++n) {
    const auto& x = d.coord(n);
    worst = std::max(worst, std::abs(g(x[0], 0.8 * std::cos(std::atan2(x[2], x[1])), 0.8 * std::sin(std::atan2(x[2], x[1])))));
  }
  for (double a = 0.0; a < 6.3; a += 0.05)
    for (double r = 0.0; r <= 0.8; r += 0.05) {
      worst = std::max(worst, std::abs(g(0.0, r * std::cos(a), r * std::sin(a))));
      worst = std::max(worst, std::abs(g(1.0, r * std::cos(a), r * std::sin(a))));
    }
  CHECK(worst <= 1e-9);
}

TEST_CASE("field file round trip") {
  const Domain d({1.0, 0.8, 8, 13});
  Field u(d.num_nodes());
  for (int n = 0; n < d.num_nodes(); ++n) u[n] = {std::sin(1.0 + n), std::cos(0.5 * n)};
  const auto p = std::filesystem::temp_directory_path() / "biharm_rt.field";
  write_field(p.string(), d, u, {{"h", 0.1}, {"lambda", 0.25}});
  const FieldFile f = read_field(p.string());
  CHECK(f.n1 == 8);
  CHECK(f.n_perp == 13);
  REQUIRE(f.params.size() == 2);
  CHECK(f.params[1].second == 0.25);
  CHECK((from_box(d, f) - u).norm() == 0.0);
  CHECK(slurp(p).rfind("biharm-field v1 8 13 13", 0) == 0);
  CHECK_THROWS_AS(from_box(Domain({1.0, 0.8, 8, 11}), f), DimensionError);
}

TEST_CASE("pipeline stops at the sinogram stage") {
  PipelineConfig c = tiny("biharm_stage");
  c.stage = Stage::sinogram;
  const Report r = run(c);
  CHECK(r.has("sinogram.h=0.1.hermitian_gap"));
  CHECK_FALSE(r.has("invert.slice_error"));
  CHECK(r.number("sinogram.h=0.1.hermitian_gap") < 1e-8);
  const auto csv = std::filesystem::path(c.out) / "sinogram_h=0.1.csv";
  REQUIRE(std::filesystem::exists(csv));
  std::ifstream in(csv);
  std::string line;
  int rows = 0;
  bool header = false;
  while (std::getline(in, line)) {
    if (line.rfind("#", 0) == 0) continue;
    if (!header) {
      CHECK(line == "lambda,theta,offset,re,im");
      header = true;
      continue;
    }
    ++rows;
  }
  CHECK(rows == 3 * 16 * 12);
  CHECK_FALSE(std::filesystem::exists(std::filesystem::path(c.out) / "slices.csv"));
  CHECK(slurp(std::filesystem::path(c.out) / "report.txt").rfind("report.schema: biharm-report v1", 0) == 0);
}

TEST_CASE("zero phantom stays at the noise floor") {
  PipelineConfig c = tiny("biharm_zero");
  c.phantom = "zero";
  const Report r = run(c);
  CHECK(r.number("simulate.integral_identity") < 1e-10);
  CHECK(r.number("reconstruct.linf") < 1e-12);
  CHECK(r.number("sinogram.h=0.1.oracle_gap") < 1e-12);
  REQUIRE(std::filesystem::exists(std::filesystem::path(c.out) / "q_rec.field"));
}

TEST_CASE("identical config and seed give identical artifacts") {
  PipelineConfig a = tiny("biharm_det_a"), b = tiny("biharm_det_b");
  a.noise = b.noise = 1e-4;
  a.stage = b.stage = Stage::invert;
  run(a);
  run(b);
  for (const char* f : {"dlambda.dtn", "sinogram_h=0.1.csv", "slices.csv"})
    CHECK(slurp(std::filesystem::path(a.out) / f) == slurp(std::filesystem::path(b.out) / f));
  PipelineConfig c = tiny("biharm_det_c");
  c.noise = 1e-4;
  c.seed = 2;
  c.stage = Stage::simulate;
  run(c);
  CHECK(slurp(std::filesystem::path(a.out) / "dlambda.dtn") != slurp(std::filesystem::path(c.out) / "dlambda.dtn"));
}

TEST_CASE("failures name the stage and keep the partial report") {
  PipelineConfig c = tiny("biharm_fail");
  c.boundary_lambdas = {2.0};  // nothing on this grid admits it
  CHECK_THROWS_AS(run(c), StageError);
  const std::string rep = slurp(std::filesystem::path(c.out) / "report.txt");
  CHECK(rep.find("status: failed in boundary") != std::string::npos);
  CHECK(std::filesystem::exists(std::filesystem::path(c.out) / "dlambda.dtn"));
}
