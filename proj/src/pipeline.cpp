#include "biharm/pipeline.hpp"

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <numbers>
#include <random>
#include <sstream>

#include "biharm/boundary.hpp"
#include "biharm/cgo.hpp"
#include "biharm/numerics.hpp"
#include "biharm/phantom.hpp"
#include "biharm/ray.hpp"

namespace biharm {

namespace {

constexpr double pi = std::numbers::pi;

std::string fmt(double v) {
  std::ostringstream s;
  s << std::setprecision(10) << v;
  return s.str();
}

std::string list_text(const std::vector<double>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + fmt(v[i]);
  return s;
}

std::string h_tag(double h) { return "h=" + fmt(h); }

class Timer {
 public:
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0_).count();
  }

 private:
  std::chrono::steady_clock::time_point t0_ = std::chrono::steady_clock::now();
};

// one h of the sinogram, lambda >= 0 only
struct HSinogram {
  double h = 0.0;
  AttenuatedSinogram s;
  std::vector<Eigen::MatrixXd> attenuation;  // per lambda, per chord
  std::vector<double> scale;                 // mean 1 / Re k per lambda
};

struct Slices {
  std::vector<Eigen::VectorXcd> per_lambda;  // at the column points
};

std::vector<Point2> column_points(const Domain& d) {
  std::vector<Point2> pts;
  for (const auto& [j, k] : d.columns()) pts.push_back({d.xp_at(j), d.xp_at(k)});
  return pts;
}

double rel_l2(const Eigen::VectorXd& a, const Eigen::VectorXd& ref) {
  const double den = ref.norm();
  return den > 0.0 ? (a - ref).norm() / den : (a - ref).norm();
}

// x1 Fourier transform of the constant c on [0, X1] at frequency w
cplx constant_fourier(double c, double x1_extent, double w) {
  if (w == 0.0) return c * x1_extent;
  return c * (1.0 - std::exp(cplx(0.0, -w * x1_extent))) / cplx(0.0, w);
}

}  // namespace

Stage parse_stage(const std::string& s) {
  if (s == "simulate" || s == "simulate-dtn") return Stage::simulate;
  if (s == "boundary" || s == "boundary-trace") return Stage::boundary;
  if (s == "recover" || s == "recover-trace") return Stage::recover;
  if (s == "sinogram") return Stage::sinogram;
  if (s == "invert") return Stage::invert;
  if (s == "reconstruct" || s == "all") return Stage::reconstruct;
  throw ConfigError("unknown stage '" + s + "'");
}

std::string stage_name(Stage s) {
  switch (s) {
    case Stage::simulate: return "simulate";
    case Stage::boundary: return "boundary";
    case Stage::recover: return "recover";
    case Stage::sinogram: return "sinogram";
    case Stage::invert: return "invert";
    case Stage::reconstruct: return "reconstruct";
  }
  return "?";
}

void PipelineConfig::validate() const {
  if (h_ladder.empty()) throw ConfigError("h ladder is empty");
  for (std::size_t i = 0; i < h_ladder.size(); ++i) {
    if (!(h_ladder[i] > 0.0)) throw ConfigError("h ladder entries must be positive");
    if (i && !(h_ladder[i] < h_ladder[i - 1])) throw ConfigError("h ladder must be strictly decreasing");
  }
  if (lambda_samples < 1 || lambda_samples % 2 == 0)
    throw ConfigError("lambda_samples must be odd (Hermitian-symmetric grid)");
  if (!(lambda_max > 0.0) && lambda_samples > 1) throw ConfigError("lambda_max must be positive");
  if (angles < 2 || angles % 2) throw ConfigError("angles must be even so reversed chords are sampled");
  if (offsets < 2) throw ConfigError("need at least two offsets");
  for (std::size_t i = 1; i < boundary_lambdas.size(); ++i)
    if (!(boundary_lambdas[i] < boundary_lambdas[i - 1])) throw ConfigError("boundary lambdas must decrease");
  if (noise < 0.0) throw ConfigError("noise level must be non-negative");
  if (!(richardson_order > 0.0)) throw ConfigError("Richardson order must be positive");
  if (!(attenuation_cap >= 0.0)) throw ConfigError("attenuation cap must be non-negative");
}

PipelineConfig config_from_kv(const KeyValues& kv, PipelineConfig c) {
  for (const auto& [k, v] : kv) {
    static const char* known[] = {"x1_extent",  "transversal_radius", "n1",
                                  "n_perp",     "phantom",            "constant",
                                  "h_ladder",   "richardson_order",   "lambda_max",
                                  "lambda_samples", "window",         "angles",
                                  "offsets",    "boundary_lambdas",   "boundary_x1_points",
                                  "boundary_theta_points", "boundary_tolerance", "recover_checks",
                                  "noise",      "seed",               "out",
                                  "stage",      "attenuation_cap"};
    bool ok = false;
    for (const char* n : known) ok = ok || k == n;
    if (!ok) throw ConfigError("unknown config key '" + k + "'");
  }
  c.domain.x1_extent = kv_double(kv, "x1_extent", c.domain.x1_extent);
  c.domain.transversal_radius = kv_double(kv, "transversal_radius", c.domain.transversal_radius);
  c.domain.n1 = kv_int(kv, "n1", c.domain.n1);
  c.domain.n_perp = kv_int(kv, "n_perp", c.domain.n_perp);
  c.phantom = kv_string(kv, "phantom", c.phantom);
  c.constant = kv_double(kv, "constant", c.constant);
  c.h_ladder = kv_list(kv, "h_ladder", c.h_ladder);
  c.richardson_order = kv_double(kv, "richardson_order", c.richardson_order);
  c.lambda_max = kv_double(kv, "lambda_max", c.lambda_max);
  c.lambda_samples = kv_int(kv, "lambda_samples", c.lambda_samples);
  c.window = kv_int(kv, "window", c.window ? 1 : 0) != 0;
  c.attenuation_cap = kv_double(kv, "attenuation_cap", c.attenuation_cap);
  c.angles = kv_int(kv, "angles", c.angles);
  c.offsets = kv_int(kv, "offsets", c.offsets);
  c.boundary_lambdas = kv_list(kv, "boundary_lambdas", c.boundary_lambdas);
  c.boundary_x1_points = kv_int(kv, "boundary_x1_points", c.boundary_x1_points);
  c.boundary_theta_points = kv_int(kv, "boundary_theta_points", c.boundary_theta_points);
  c.boundary_tolerance = kv_double(kv, "boundary_tolerance", c.boundary_tolerance);
  c.recover_checks = kv_int(kv, "recover_checks", c.recover_checks);
  c.noise = kv_double(kv, "noise", c.noise);
  c.seed = static_cast<std::uint64_t>(kv_int(kv, "seed", static_cast<int>(c.seed)));
  c.out = kv_string(kv, "out", c.out);
  if (kv.count("stage")) c.stage = parse_stage(kv.at("stage"));
  return c;
}

std::string config_text(const PipelineConfig& c) {
  std::ostringstream s;
  s << "x1_extent=" << fmt(c.domain.x1_extent) << "\ntransversal_radius=" << fmt(c.domain.transversal_radius)
    << "\nn1=" << c.domain.n1 << "\nn_perp=" << c.domain.n_perp << "\nphantom=" << c.phantom
    << "\nconstant=" << fmt(c.constant) << "\nh_ladder=" << list_text(c.h_ladder)
    << "\nrichardson_order=" << fmt(c.richardson_order) << "\nlambda_max=" << fmt(c.lambda_max)
    << "\nlambda_samples=" << c.lambda_samples << "\nwindow=" << (c.window ? 1 : 0) << "\nattenuation_cap=" << fmt(c.attenuation_cap) << "\nangles=" << c.angles
    << "\noffsets=" << c.offsets << "\nboundary_lambdas=" << list_text(c.boundary_lambdas)
    << "\nboundary_x1_points=" << c.boundary_x1_points << "\nboundary_theta_points=" << c.boundary_theta_points
    << "\nboundary_tolerance=" << fmt(c.boundary_tolerance) << "\nrecover_checks=" << c.recover_checks
    << "\nnoise=" << fmt(c.noise) << "\nseed=" << c.seed << "\nout=" << c.out << "\nstage=" << stage_name(c.stage)
    << '\n';
  return s.str();
}

Report::Report() { set("report.schema", std::string(schema)); }

void Report::set(const std::string& key, double v) { set(key, fmt(v)); }

void Report::set(const std::string& key, const std::string& v) {
  for (auto& [k, old] : kv_)
    if (k == key) {
      old = v;
      return;
    }
  kv_.emplace_back(key, v);
}

bool Report::has(const std::string& key) const {
  for (const auto& e : kv_)
    if (e.first == key) return true;
  return false;
}

double Report::number(const std::string& key) const {
  for (const auto& [k, v] : kv_)
    if (k == key) return std::stod(v);
  throw ConfigError("report has no key " + key);
}

std::string Report::text() const {
  std::string s;
  for (const auto& [k, v] : kv_) s += k + ": " + v + "\n";
  return s;
}

void Report::write(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path);
  out << text();
}

namespace {

class Pipeline {
 public:
  Pipeline(const PipelineConfig& cfg, Report& rep)
      : cfg_(cfg), rep_(rep), d_(cfg.domain), phantom_(make_phantom(cfg.phantom, cfg.constant)) {}

  void run() {
    std::filesystem::create_directories(cfg_.out);
    {
      std::ofstream c(path("config.txt"));
      c << config_text(cfg_);
    }
    stage("simulate", [&] { simulate(); });
    if (cfg_.stage == Stage::simulate) return;
    stage("boundary", [&] { boundary(); });
    if (cfg_.stage == Stage::boundary) return;
    stage("recover", [&] { recover(); });
    if (cfg_.stage == Stage::recover) return;
    stage("sinogram", [&] { sinogram(); });
    if (cfg_.stage == Stage::sinogram) return;
    stage("invert", [&] { invert(); });
    if (cfg_.stage == Stage::invert) return;
    stage("reconstruct", [&] { reconstruct(); });
  }

 private:
  std::string path(const std::string& f) const { return (std::filesystem::path(cfg_.out) / f).string(); }

  template <class F>
  void stage(const std::string& name, F f) {
    const Timer t;
    try {
      f();
    } catch (const StageError&) {
      throw;
    } catch (const std::exception& e) {
      rep_.set("status", "failed in " + name);
      throw StageError(name, e.what());
    }
    rep_.set("timing." + name + "_seconds", t.seconds());
  }

  // ---- simulate: the only stage that touches q -------------------------------
  void simulate() {
    const Potential q = Potential::sampled(d_, phantom_);
    const ClampedSolver sq(d_, q), s0(d_, Potential::zero(d_));
    const DtnMatrix lq = assemble_dtn(sq), l0 = assemble_dtn(s0);
    dl_ = dtn_difference(lq, l0);
    rep_.set("simulate.band_size", d_.band_size());
    rep_.set("simulate.sigma_min", sq.sigma_min());
    rep_.set("simulate.dtn_asymmetry", (lq.entries - lq.entries.transpose()).norm() / lq.entries.norm());

    std::mt19937_64 rng(cfg_.seed);
    std::normal_distribution<double> nd;
    double worst = 0.0;
    for (int t = 0; t < 3; ++t) {
      Eigen::VectorXcd f(d_.band_size()), g(d_.band_size());
      for (int i = 0; i < f.size(); ++i) f[i] = {nd(rng), nd(rng)};
      for (int i = 0; i < g.size(); ++i) g[i] = {nd(rng), nd(rng)};
      worst = std::max(worst, verify_integral_identity(sq, s0, dl_, BoundaryJet{f}, BoundaryJet{g}));
    }
    rep_.set("simulate.integral_identity", worst);

    if (cfg_.noise > 0.0) {
      const double amp = cfg_.noise * dl_.entries.cwiseAbs().maxCoeff();
      const int n = dl_.size();
      for (int i = 0; i < n; ++i)
        for (int j = i; j < n; ++j) {
          const double e = amp * nd(rng);
          dl_.entries(i, j) += e;
          if (j != i) dl_.entries(j, i) += e;
        }
      rep_.set("simulate.noise_amplitude", amp);
    }
    write_dtn(path("dlambda.dtn"), dl_);
    if (cfg_.dump_dtn) {
      write_dtn(path("lambda_q.dtn"), lq);
      write_dtn(path("lambda_0.dtn"), l0);
    }
  }

  // ---- boundary values ----------------------------------------------------------
  void boundary() {
    if (cfg_.boundary_lambdas.empty()) return;
    std::vector<BoundaryEstimate> est;
    {
      const OracleGuard guard;
      const DtnAction act(dl_);
      const auto pts =
          admissible_points(d_, cfg_.boundary_lambdas.front(), cfg_.boundary_x1_points, cfg_.boundary_theta_points);
      if (pts.empty()) throw ConfigError("no lateral point admits the largest boundary lambda on this grid");
      est = boundary_trace(act, d_, pts, 0.5 * pi, cfg_.boundary_lambdas);
    }
    std::ofstream out(path("boundary_trace.csv"));
    out << std::setprecision(10) << "index,x1,theta";
    for (double l : cfg_.boundary_lambdas) out << ",est_" << fmt(l);
    out << ",extrapolated,resolved\n";
    double mx = 0.0, mean = 0.0, err = 0.0;
    int unresolved = 0, nonmono = 0, used = 0;
    for (std::size_t i = 0; i < est.size(); ++i) {
      const auto& e = est[i];
      out << i << ',' << e.x0.x1 << ',' << e.x0.theta;
      for (double v : e.values) out << ',' << v;
      int res = 0;
      for (bool r : e.resolved) res += r;
      unresolved += static_cast<int>(e.resolved.size()) - res;
      nonmono += !e.monotone;
      out << ',' << e.extrapolated << ',' << res << '\n';
      const double v = std::isnan(e.extrapolated) ? e.values.back() : e.extrapolated;
      mx = std::max(mx, std::abs(v));
      mean += v;
      ++used;
      const double r = d_.radius();
      const double truth = phantom_(e.x0.x1, r * std::cos(e.x0.theta), r * std::sin(e.x0.theta));
      err = std::max(err, std::abs(v - truth));
    }
    mean /= std::max(used, 1);
    rep_.set("boundary.points", used);
    rep_.set("boundary.max_abs", mx);
    rep_.set("boundary.mean", mean);
    rep_.set("boundary.max_error", err);
    rep_.set("boundary.unresolved_estimates", unresolved);
    rep_.set("boundary.non_monotone_points", nonmono);
    // q must vanish on the lateral face for the zero extension; otherwise
    // subtract the constant extension with the reconstructed mean value
    boundary_shift_ = std::abs(mean) > cfg_.boundary_tolerance ? mean : 0.0;
    rep_.set("boundary.extension_shift", boundary_shift_);
  }

  // ---- recovery checks against the direct CGO trace ---------------------------
  void recover() {
    std::mt19937_64 rng(cfg_.seed + 17);
    std::uniform_real_distribution<double> ang(0.0, 2.0 * pi), off(-0.6, 0.6), lam(0.0, cfg_.lambda_max);
    const Potential q = Potential::sampled(d_, phantom_);
    for (double h : cfg_.h_ladder) {
      const std::string tag = h_tag(h);
      const BeamDataContext& ctx = context(h);
      rep_.set("recover." + tag + ".perturbation_norm", ctx.recovery().perturbation_norm());
      double worst = 0.0, worst_res = 0.0;
      for (int c = 0; c < cfg_.recover_checks; ++c) {
        const Geodesic g = chord(ang(rng), off(rng));
        const double l = c == 0 ? 0.0 : lam(rng);
        const GaussianBeam v = grid_beam(d_, g, {h, l, 1});
        const CgoField u0 = build_u0(ctx.green_plus(), v);
        const BoundaryJet g0 = trace(d_, u0.u);
        BoundaryJet f;
        {
          const OracleGuard guard;
          f = ctx.recovery().recover(g0);
          worst_res = std::max(worst_res, ctx.recovery().residual(f.values, g0.values));
        }
        const CgoField u1 = build_u1(ctx.green_plus(), q, u0);
        const BoundaryJet t1 = trace(d_, u1.u);
        worst = std::max(worst, (f.values - t1.values).norm() / t1.values.norm());
        if (cfg_.dump_cgo && c == 0) {
          const CgoField u2 = build_u2(ctx.green_minus(), grid_beam(d_, g, {h, -l, -1}, BeamKind::w));
          const std::vector<std::pair<std::string, double>> prm{
              {"h", h}, {"lambda", l}, {"theta", g.theta}, {"offset", g.offset}};
          write_field(path("cgo_u0_" + tag + ".field"), d_, u0.u, prm);
          write_field(path("cgo_u1_" + tag + ".field"), d_, u1.u, prm);
          write_field(path("cgo_u2_" + tag + ".field"), d_, u2.u, prm);
        }
      }
      rep_.set("recover." + tag + ".oracle_error", worst);
      rep_.set("recover." + tag + ".residual", worst_res);
      if (cfg_.dump_single_layer) {
        DtnMatrix s;
        s.entries = single_layer(ctx.green_plus());
        s.weights = dl_.weights;
        s.domain = d_.config();
        s.h = h;
        s.lambda = 0.0;
        s.has_params = true;
        write_dtn(path("single_layer_" + tag + ".dtn"), s);
      }
    }
  }

  const BeamDataContext& context(double h) {
    for (auto& [hh, c] : ctx_)
      if (hh == h) return *c;
    ctx_.emplace_back(h, std::make_unique<BeamDataContext>(d_, dl_, h));
    return *ctx_.back().second;
  }

  // ---- sinogram ------------------------------------------------------------------
  void sinogram() {
    const auto all = lambda_grid(cfg_.lambda_max, cfg_.lambda_samples);
    lambdas_.assign(all.begin() + cfg_.lambda_samples / 2, all.end());  // 0 .. lambda_max
    thetas_ = chord_angles(cfg_.angles);
    offsets_ = chebyshev_offsets(cfg_.offsets);
    const double r = d_.radius();
    std::vector<std::pair<int, int>> inside;
    std::vector<Geodesic> gs;
    for (int a = 0; a < cfg_.angles; ++a)
      for (int p = 0; p < cfg_.offsets; ++p)
        if (std::abs(offsets_[p]) < r) {
          inside.emplace_back(a, p);
          gs.push_back(chord(thetas_[a], offsets_[p]));
        }
    rep_.set("sinogram.chords_total", cfg_.angles * cfg_.offsets);
    rep_.set("sinogram.chords_computed", static_cast<double>(gs.size()));

    for (double h : cfg_.h_ladder) {
      HSinogram hs;
      hs.h = h;
      hs.s.lambdas = lambdas_;
      hs.s.thetas = thetas_;
      hs.s.offsets = offsets_;
      {
        const OracleGuard guard;
        const BeamDataContext& ctx = context(h);
        for (double l : lambdas_) {
          const auto data = beam_data_batch(ctx, l, gs);
          Eigen::MatrixXcd v = Eigen::MatrixXcd::Zero(cfg_.angles, cfg_.offsets);
          Eigen::MatrixXd att = Eigen::MatrixXd::Zero(cfg_.angles, cfg_.offsets);
          double am = 0.0, sm = 0.0;
          for (std::size_t j = 0; j < inside.size(); ++j) {
            v(inside[j].first, inside[j].second) = data[j].value;
            att(inside[j].first, inside[j].second) = data[j].attenuation;
            am += data[j].attenuation;
            sm += data[j].scale;
          }
          // chords outside D_r keep the known zero data; give them the mean attenuation
          am /= static_cast<double>(inside.size());
          for (int a = 0; a < cfg_.angles; ++a)
            for (int p = 0; p < cfg_.offsets; ++p)
              if (std::abs(offsets_[p]) >= r) att(a, p) = am;
          hs.s.values.push_back(v);
          hs.s.attenuation.push_back(am);
          hs.attenuation.push_back(att);
          hs.scale.push_back(sm / static_cast<double>(inside.size()));
        }
        hermitian_check(ctx, hs);
      }
      write_sinogram(hs);
      oracle_check(hs);
      sino_.push_back(std::move(hs));
    }
  }

  // beam data at -lambda against the partner of the +lambda data
  void hermitian_check(const BeamDataContext& ctx, const HSinogram& hs) {
    if (lambdas_.size() < 2) return;
    const int k = static_cast<int>(lambdas_.size()) / 2;
    const double l = lambdas_[k];
    double worst = 0.0;
    for (int a : {0, cfg_.angles / 3}) {
      const int p = cfg_.offsets / 2;
      const int ar = (a + cfg_.angles / 2) % cfg_.angles, pr = cfg_.offsets - 1 - p;
      const Geodesic g = chord(thetas_[a], offsets_[p]);
      const BeamDatum minus = beam_data(ctx, -l, g);
      const cplx partner = hermitian_partner(hs.s.values[k](ar, pr), hs.attenuation[k](ar, pr), g);
      worst = std::max(worst, std::abs(minus.value - partner) / std::abs(partner));
    }
    rep_.set("sinogram." + h_tag(hs.h) + ".hermitian_gap", worst);
  }

  void write_sinogram(const HSinogram& hs) {
    std::ofstream out(path("sinogram_" + h_tag(hs.h) + ".csv"));
    out << std::setprecision(12);
    for (std::size_t k = 0; k < lambdas_.size(); ++k)
      out << "# lambda " << lambdas_[k] << " attenuation " << hs.s.attenuation[k] << " scale " << hs.scale[k] << '\n';
    out << "lambda,theta,offset,re,im\n";
    const int na = cfg_.angles, np = cfg_.offsets;
    // negative lambda from the reversed chord (theta + pi, -p)
    for (int k = static_cast<int>(lambdas_.size()) - 1; k >= 1; --k)
      for (int a = 0; a < na; ++a)
        for (int p = 0; p < np; ++p) {
          const int ar = (a + na / 2) % na, pr = np - 1 - p;
          const cplx v = hermitian_partner(hs.s.values[k](ar, pr), hs.attenuation[k](ar, pr), hs.s.geodesic(a, p));
          out << -lambdas_[k] << ',' << thetas_[a] << ',' << offsets_[p] << ',' << v.real() << ',' << v.imag()
              << '\n';
        }
    for (std::size_t k = 0; k < lambdas_.size(); ++k)
      for (int a = 0; a < na; ++a)
        for (int p = 0; p < np; ++p) {
          const cplx v = hs.s.values[k](a, p);
          out << lambdas_[k] << ',' << thetas_[a] << ',' << offsets_[p] << ',' << v.real() << ',' << v.imag() << '\n';
        }
  }

  // direct transform of the phantom at the attenuation each beam carries
  void oracle_check(const HSinogram& hs) {
    const double r2 = d_.radius() * d_.radius();
    double num = 0.0, den = 0.0;
    for (std::size_t k = 0; k < lambdas_.size(); ++k) {
      const double l = lambdas_[k];
      const TransversalFn f = [&](double x2, double x3) -> cplx {
        if (x2 * x2 + x3 * x3 >= r2) return 0.0;
        return x1_fourier(phantom_.q, d_.x1_extent(), 2.0 * l, x2, x3, 32);
      };
      std::vector<double> nk(cfg_.angles, 0.0), dk(cfg_.angles, 0.0);
      parallel_for(cfg_.angles, [&](int a) {
        for (int p = 0; p < cfg_.offsets; ++p) {
          if (std::abs(offsets_[p]) >= d_.radius()) continue;
          const cplx o = attenuated_xray(f, hs.s.geodesic(a, p), hs.attenuation[k](a, p), 24);
          nk[a] += std::norm(hs.s.values[k](a, p) - o);
          dk[a] += std::norm(o);
        }
      });
      for (int a = 0; a < cfg_.angles; ++a) {
        num += nk[a];
        den += dk[a];
      }
    }
    rep_.set("sinogram." + h_tag(hs.h) + ".oracle_gap", den > 0.0 ? std::sqrt(num / den) : std::sqrt(num));
  }

  // ---- inversion per lambda, Richardson across the last two h --------------------
  void invert() {
    const auto pts = column_points(d_);
    InversionOptions opt;
    opt.lambda_max = std::max(cfg_.lambda_max, 3.0);
    const std::size_t nk = lambdas_.size();
    // slices whose attenuation exceeds the cap are dropped at that h: the
    // e^{aL/2} re-centring turns the beam-blur gap into noise there
    auto usable = [&](const HSinogram& hs, std::size_t k) { return hs.s.attenuation[k] <= cfg_.attenuation_cap; };
    std::vector<Slices> per_h;
    {
      const OracleGuard guard;
      for (const auto& hs : sino_) {
        Slices s;
        for (std::size_t k = 0; k < nk; ++k) {
          if (!usable(hs, k)) {
            s.per_lambda.push_back(Eigen::VectorXcd::Zero(static_cast<Eigen::Index>(pts.size())));
            continue;
          }
          const Eigen::MatrixXcd data = shifted_data(hs, k);
          const auto v = invert_attenuated(data, thetas_, offsets_, hs.s.attenuation[k], pts, opt);
          s.per_lambda.push_back(Eigen::Map<const Eigen::VectorXcd>(v.data(), static_cast<Eigen::Index>(v.size())));
        }
        per_h.push_back(std::move(s));
      }
    }
    slices_h_ = per_h;
    slices_.per_lambda.clear();
    kept_.assign(nk, true);
    int dropped = 0, extrapolated = 0;
    double kept_max = 0.0;
    for (std::size_t k = 0; k < nk; ++k) {
      const std::size_t nh = sino_.size();
      if (nh >= 2 && usable(sino_[nh - 2], k) && usable(sino_[nh - 1], k)) {
        const double ratio = std::pow(sino_[nh - 1].scale[k] / sino_[nh - 2].scale[k], cfg_.richardson_order);
        slices_.per_lambda.push_back((per_h[nh - 1].per_lambda[k] - ratio * per_h[nh - 2].per_lambda[k]) /
                                     (1.0 - ratio));
        ++extrapolated;
      } else {
        // finest h that is usable, else nothing
        int use = -1;
        for (int i = static_cast<int>(nh) - 1; i >= 0 && use < 0; --i)
          if (usable(sino_[i], k)) use = i;
        if (use < 0) {
          kept_[k] = false;
          ++dropped;
          slices_.per_lambda.push_back(Eigen::VectorXcd::Zero(static_cast<Eigen::Index>(pts.size())));
          continue;
        }
        slices_.per_lambda.push_back(per_h[use].per_lambda[k]);
      }
      kept_max = lambdas_[k];
    }
    if (sino_.size() >= 2)
      rep_.set("invert.richardson_scale_ratio", sino_.back().scale[0] / sino_[sino_.size() - 2].scale[0]);
    rep_.set("invert.lambdas_extrapolated", extrapolated);
    rep_.set("invert.lambdas_dropped", dropped);
    rep_.set("invert.lambda_kept_max", kept_max);
    for (std::size_t k = 0; k < lambdas_.size(); ++k)
      rep_.set("invert.attenuation.lambda=" + fmt(lambdas_[k]), sino_.back().s.attenuation[k]);

    std::ofstream out(path("slices.csv"));
    out << std::setprecision(12) << "lambda,x2,x3,re,im\n";
    for (std::size_t k = 0; k < lambdas_.size(); ++k)
      for (std::size_t j = 0; j < pts.size(); ++j)
        out << lambdas_[k] << ',' << pts[j][0] << ',' << pts[j][1] << ',' << slices_.per_lambda[k][j].real() << ','
            << slices_.per_lambda[k][j].imag() << '\n';

    // slice errors against the x1 transform of the phantom
    double num = 0.0, den = 0.0;
    for (std::size_t k = 0; k < lambdas_.size(); ++k)
      for (std::size_t j = 0; j < pts.size() && kept_[k]; ++j) {
        const cplx o = x1_fourier(phantom_.q, d_.x1_extent(), 2.0 * lambdas_[k], pts[j][0], pts[j][1], 32) -
                       constant_fourier(boundary_shift_, d_.x1_extent(), 2.0 * lambdas_[k]);
        num += std::norm(slices_.per_lambda[k][j] - o);
        den += std::norm(o);
      }
    rep_.set("invert.slice_error", den > 0.0 ? std::sqrt(num / den) : std::sqrt(num));
  }

  // data of q minus the constant extension (zero unless the boundary stage asked for it)
  Eigen::MatrixXcd shifted_data(const HSinogram& hs, std::size_t k) const {
    Eigen::MatrixXcd data = hs.s.values[k];
    if (boundary_shift_ == 0.0) return data;
    const double r2 = d_.radius() * d_.radius();
    const cplx fx = constant_fourier(boundary_shift_, d_.x1_extent(), 2.0 * lambdas_[k]);
    const TransversalFn f = [&](double x2, double x3) -> cplx { return x2 * x2 + x3 * x3 < r2 ? fx : 0.0; };
    for (int a = 0; a < cfg_.angles; ++a)
      for (int p = 0; p < cfg_.offsets; ++p)
        if (std::abs(offsets_[p]) < d_.radius()) data(a, p) -= attenuated_xray(f, hs.s.geodesic(a, p), hs.attenuation[k](a, p), 48);
    return data;
  }

  // ---- x1 synthesis ----------------------------------------------------------------
  Field synthesize(const Slices& s) const {
    std::vector<double> lam;
    std::vector<Eigen::VectorXcd> sl;
    for (int k = static_cast<int>(lambdas_.size()) - 1; k >= 1; --k) {
      lam.push_back(-lambdas_[k]);
      sl.push_back(s.per_lambda[k].conjugate());
    }
    for (std::size_t k = 0; k < lambdas_.size(); ++k) {
      lam.push_back(lambdas_[k]);
      sl.push_back(s.per_lambda[k]);
    }
    std::vector<double> x1(d_.n1());
    for (int i = 0; i < d_.n1(); ++i) x1[i] = d_.x1_at(i);
    const Eigen::MatrixXcd q = fourier_x1_invert(lam, sl, x1, d_.x1_extent(), cfg_.window);
    Field out(d_.num_nodes());
    for (int n = 0; n < d_.num_nodes(); ++n) {
      const auto [i, j, k] = d_.index(n);
      out[n] = q(i, d_.column_of(j, k)) + boundary_shift_;
    }
    return out;
  }

  void reconstruct() {
    Field q;
    {
      const OracleGuard guard;
      q = synthesize(slices_);
    }
    const Eigen::VectorXd rec = q.real();
    const Potential truth = Potential::sampled(d_, phantom_);
    write_field(path("q_rec.field"), d_, Field(rec.cast<cplx>()));
    write_slice_csv(path("q_rec_mid_slice.csv"), d_, Field(rec.cast<cplx>()), d_.n1() / 2);
    rep_.set("reconstruct.l2_error", rel_l2(rec, truth.values));
    rep_.set("reconstruct.linf", rec.cwiseAbs().maxCoeff());
    rep_.set("reconstruct.imag_linf", q.imag().cwiseAbs().maxCoeff());
    for (std::size_t i = 0; i < sino_.size(); ++i)
      rep_.set("reconstruct.l2_error." + h_tag(sino_[i].h), rel_l2(synthesize(slices_h_[i]).real(), truth.values));

    // floor from the lambda grid alone: exact slices through the same synthesis
    const auto pts = column_points(d_);
    Slices exact;
    for (std::size_t k = 0; k < lambdas_.size(); ++k) {
      const double l = lambdas_[k];
      Eigen::VectorXcd v = Eigen::VectorXcd::Zero(static_cast<Eigen::Index>(pts.size()));
      if (!kept_[k]) {
        exact.per_lambda.push_back(v);
        continue;
      }
      for (std::size_t j = 0; j < pts.size(); ++j)
        v[j] = x1_fourier(phantom_.q, d_.x1_extent(), 2.0 * l, pts[j][0], pts[j][1], 32) -
               constant_fourier(boundary_shift_, d_.x1_extent(), 2.0 * l);
      exact.per_lambda.push_back(v);
    }
    rep_.set("reconstruct.truncation_floor", rel_l2(synthesize(exact).real(), truth.values));
  }

  const PipelineConfig& cfg_;
  Report& rep_;
  Domain d_;
  Phantom phantom_;
  DtnMatrix dl_;
  double boundary_shift_ = 0.0;
  std::vector<std::pair<double, std::unique_ptr<BeamDataContext>>> ctx_;
  std::vector<double> lambdas_, thetas_, offsets_;
  std::vector<HSinogram> sino_;
  std::vector<Slices> slices_h_;
  std::vector<bool> kept_;
  Slices slices_;
};

}  // namespace

Report run(const PipelineConfig& cfg) {
  cfg.validate();
  Report rep;
  rep.set("config.phantom", cfg.phantom);
  rep.set("config.grid", std::to_string(cfg.domain.n1) + "x" + std::to_string(cfg.domain.n_perp));
  rep.set("config.h_ladder", list_text(cfg.h_ladder));
  rep.set("config.lambda_max", cfg.lambda_max);
  rep.set("config.lambda_samples", cfg.lambda_samples);
  rep.set("config.attenuation_cap", cfg.attenuation_cap);
  rep.set("config.stage", stage_name(cfg.stage));
  rep.set("config.seed", static_cast<double>(cfg.seed));
  const Timer t;
  try {
    Pipeline p(cfg, rep);
    p.run();
  } catch (...) {
    rep.set("timing.total_seconds", t.seconds());
    std::filesystem::create_directories(cfg.out);
    rep.write((std::filesystem::path(cfg.out) / "report.txt").string());
    throw;
  }
  rep.set("status", "ok");
  rep.set("timing.total_seconds", t.seconds());
  rep.write((std::filesystem::path(cfg.out) / "report.txt").string());
  return rep;
}

}  // namespace biharm
