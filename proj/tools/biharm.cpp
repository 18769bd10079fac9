// biharm: command-line front end for the reconstruction pipeline
#include <CLI11.hpp>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <iostream>

#include "biharm/error.hpp"
#include "biharm/io.hpp"
#include "biharm/pipeline.hpp"

using namespace biharm;

namespace {

struct Options {
  std::string config;
  std::string phantom;
  std::string h_ladder;
  std::string stage;
  std::string out;
  double lambda_max = -1.0;
  double noise = -1.0;
  int angles = -1, offsets = -1;
  long long seed = -1;
  bool dump_dtn = false, dump_single_layer = false, dump_cgo = false;
};

void add_common(CLI::App* app, Options& o) {
  app->add_option("-c,--config", o.config, "key=value config file")->check(CLI::ExistingFile);
  app->add_option("--phantom", o.phantom, "zero, constant, gauss-bump, two-bumps, boundary-nonzero, smooth-blob");
  app->add_option("--h-ladder", o.h_ladder, "comma-separated, decreasing, e.g. 0.1,0.05");
  app->add_option("--lambda-max", o.lambda_max, "largest x1 frequency parameter");
  app->add_option("--angles", o.angles, "number of chord angles (even)");
  app->add_option("--offsets", o.offsets, "number of Chebyshev chord offsets");
  app->add_option("--noise", o.noise, "relative Gaussian noise on the DtN difference");
  app->add_option("--seed", o.seed, "RNG seed");
  app->add_option("--out", o.out, "output directory");
  app->add_flag("--dump-dtn", o.dump_dtn, "also write Lambda_q and Lambda_0");
  app->add_flag("--dump-single-layer", o.dump_single_layer, "write the single-layer matrix S per h");
  app->add_flag("--dump-cgo", o.dump_cgo, "write one u0/u1/u2 triple per h");
}

PipelineConfig build_config(const Options& o, Stage verb_stage, bool verb_given) {
  PipelineConfig c;
  if (!o.config.empty()) c = config_from_kv(read_key_values(o.config), c);
  if (verb_given) c.stage = verb_stage;
  if (!o.stage.empty()) c.stage = parse_stage(o.stage);
  if (!o.phantom.empty()) c.phantom = o.phantom;
  if (!o.h_ladder.empty()) c.h_ladder = parse_list(o.h_ladder);
  if (o.lambda_max >= 0.0) c.lambda_max = o.lambda_max;
  if (o.angles > 0) c.angles = o.angles;
  if (o.offsets > 0) c.offsets = o.offsets;
  if (o.noise >= 0.0) c.noise = o.noise;
  if (o.seed >= 0) c.seed = static_cast<std::uint64_t>(o.seed);
  if (!o.out.empty()) c.out = o.out;
  c.dump_dtn = o.dump_dtn;
  c.dump_single_layer = o.dump_single_layer;
  c.dump_cgo = o.dump_cgo;
  return c;
}

// small end-to-end runs with loose checks; a few tens of seconds
std::string sci(double v) {
  char b[32];
  std::snprintf(b, sizeof b, "%.3g", v);
  return b;
}

int selftest(const std::string& out) {
  int failures = 0;
  auto check = [&](const std::string& name, bool ok, const std::string& detail) {
    std::cout << (ok ? "PASS " : "FAIL ") << name << "  " << detail << '\n';
    failures += !ok;
  };
  PipelineConfig c;
  c.domain = {1.0, 0.8, 8, 17};
  c.h_ladder = {0.1};
  c.lambda_max = 1.0;
  c.lambda_samples = 3;
  c.angles = 24;
  c.offsets = 16;
  c.boundary_lambdas = {};
  c.recover_checks = 1;
  c.out = (std::filesystem::path(out) / "selftest").string();

  c.phantom = "zero";
  Report z = run(c);
  check("zero phantom gives zero", z.number("reconstruct.linf") < 1e-10,
        "linf=" + sci(z.number("reconstruct.linf")));

  c.phantom = "gauss-bump";
  c.stage = Stage::sinogram;
  Report g = run(c);
  check("integral identity", g.number("simulate.integral_identity") < 1e-8,
        sci(g.number("simulate.integral_identity")));
  check("dtn symmetric", g.number("simulate.dtn_asymmetry") < 1e-8,
        sci(g.number("simulate.dtn_asymmetry")));
  check("trace recovery", g.number("recover.h=0.1.oracle_error") < 1e-6,
        sci(g.number("recover.h=0.1.oracle_error")));
  check("sinogram written", std::filesystem::exists(std::filesystem::path(c.out) / "sinogram_h=0.1.csv"), c.out);
  return failures ? 1 : 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"biharm: boundary data to potential for the perturbed biharmonic operator"};
  app.require_subcommand(1);
  Options o;
  struct Verb {
    const char* name;
    Stage stage;
    const char* help;
  };
  const Verb verbs[] = {
      {"simulate-dtn", Stage::simulate, "assemble the DtN difference for a phantom"},
      {"boundary-trace", Stage::boundary, "recover q on the lateral boundary"},
      {"recover-trace", Stage::recover, "check CGO trace recovery against the direct construction"},
      {"sinogram", Stage::sinogram, "attenuated ray data from boundary measurements"},
      {"invert", Stage::invert, "invert each x1 frequency slice"},
      {"reconstruct", Stage::reconstruct, "full pipeline down to q on the grid"},
  };
  std::vector<std::pair<CLI::App*, Stage>> subs;
  for (const auto& v : verbs) {
    CLI::App* s = app.add_subcommand(v.name, v.help);
    add_common(s, o);
    s->add_option("--stage", o.stage, "stop after this stage instead");
    subs.emplace_back(s, v.stage);
  }
  CLI::App* st = app.add_subcommand("selftest", "quick end-to-end checks on a tiny grid");
  std::string st_out = "out";
  st->add_option("--out", st_out, "output directory");

  CLI11_PARSE(app, argc, argv);
  try {
    if (st->parsed()) return selftest(st_out);
    for (const auto& [s, stage] : subs) {
      if (!s->parsed()) continue;
      const PipelineConfig cfg = build_config(o, stage, true);
      const Report r = run(cfg);
      std::cout << r.text();
      return 0;
    }
  } catch (const StageError& e) {
    std::cerr << "stage failed: " << e.what() << '\n';
    return 3;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
