#include <pybind11/complex.h>
#include <pybind11/eigen.h>
#include <pybind11/functional.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "biharm/error.hpp"
#include "biharm/io.hpp"
#include "biharm/phantom.hpp"
#include "biharm/pipeline.hpp"
#include "biharm/ray.hpp"

namespace py = pybind11;
using namespace biharm;

namespace {

py::dict report_dict(const Report& r) {
  py::dict out;
  for (const auto& [k, v] : r.entries()) {
    try {
      std::size_t pos = 0;
      const double x = std::stod(v, &pos);
      if (pos == v.size()) {
        out[py::str(k)] = x;
        continue;
      }
    } catch (const std::exception&) {
    }
    out[py::str(k)] = v;
  }
  return out;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "biharm core: DtN simulation, ray data and reconstruction";

  // translators are tried newest first: the base class goes in first
  py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<DimensionError>(m, "DimensionError", PyExc_ValueError);
  py::register_exception<StageError>(m, "StageError", PyExc_RuntimeError);

  py::class_<DomainConfig>(m, "DomainConfig")
      .def(py::init([](double x1, double r, int n1, int np) { return DomainConfig{x1, r, n1, np}; }),
           py::arg("x1_extent") = 1.0, py::arg("transversal_radius") = 0.8, py::arg("n1") = 12,
           py::arg("n_perp") = 25)
      .def_readwrite("x1_extent", &DomainConfig::x1_extent)
      .def_readwrite("transversal_radius", &DomainConfig::transversal_radius)
      .def_readwrite("n1", &DomainConfig::n1)
      .def_readwrite("n_perp", &DomainConfig::n_perp);

  py::class_<PipelineConfig>(m, "PipelineConfig")
      .def(py::init<>())
      .def_readwrite("domain", &PipelineConfig::domain)
      .def_readwrite("phantom", &PipelineConfig::phantom)
      .def_readwrite("constant", &PipelineConfig::constant)
      .def_readwrite("h_ladder", &PipelineConfig::h_ladder)
      .def_readwrite("richardson_order", &PipelineConfig::richardson_order)
      .def_readwrite("lambda_max", &PipelineConfig::lambda_max)
      .def_readwrite("lambda_samples", &PipelineConfig::lambda_samples)
      .def_readwrite("window", &PipelineConfig::window)
      .def_readwrite("attenuation_cap", &PipelineConfig::attenuation_cap)
      .def_readwrite("angles", &PipelineConfig::angles)
      .def_readwrite("offsets", &PipelineConfig::offsets)
      .def_readwrite("boundary_lambdas", &PipelineConfig::boundary_lambdas)
      .def_readwrite("recover_checks", &PipelineConfig::recover_checks)
      .def_readwrite("noise", &PipelineConfig::noise)
      .def_readwrite("seed", &PipelineConfig::seed)
      .def_readwrite("out", &PipelineConfig::out)
      .def_property(
          "stage", [](const PipelineConfig& c) { return stage_name(c.stage); },
          [](PipelineConfig& c, const std::string& s) { c.stage = parse_stage(s); })
      .def("validate", &PipelineConfig::validate)
      .def("text", [](const PipelineConfig& c) { return config_text(c); });

  m.def(
      "config_from_text", [](const std::string& text) { return config_from_kv(parse_key_values(text)); },
      py::arg("text"), "parse key=value text into a PipelineConfig");

  m.def(
      "run",
      [](const PipelineConfig& c) {
        Report r;
        {
          py::gil_scoped_release nogil;
          r = run(c);
        }
        return report_dict(r);
      },
      py::arg("config"), "run the pipeline up to config.stage; returns the report as a dict");

  m.def("phantom_names", &phantom_names);
  m.def(
      "phantom_value",
      [](const std::string& name, py::array_t<double> x1, py::array_t<double> x2, py::array_t<double> x3,
         double c0) {
        const Phantom p = make_phantom(name, c0);
        return py::vectorize([&p](double a, double b, double c) { return p(a, b, c); })(x1, x2, x3);
      },
      py::arg("name"), py::arg("x1"), py::arg("x2"), py::arg("x3"), py::arg("c0") = 0.01);

  m.def("chord_angles", &chord_angles, py::arg("n"));
  m.def("chebyshev_offsets", &chebyshev_offsets, py::arg("n"));
  m.def("lambda_grid", &lambda_grid, py::arg("lambda_max"), py::arg("n"));
  m.def(
      "attenuated_xray_of_one", [](double theta, double p, double a) { return attenuated_xray_of_one(chord(theta, p), a); },
      py::arg("theta"), py::arg("offset"), py::arg("attenuation"));
  m.def(
      "attenuated_xray",
      [](const std::function<cplx(double, double)>& f, double theta, double p, double a, int panels) {
        return attenuated_xray(f, chord(theta, p), a, panels);
      },
      py::arg("f"), py::arg("theta"), py::arg("offset"), py::arg("attenuation"), py::arg("panels") = 48);
  m.def(
      "invert_attenuated",
      [](const Eigen::MatrixXcd& data, const std::vector<double>& thetas, const std::vector<double>& offsets,
         double a, const Eigen::MatrixX2d& points) {
        std::vector<Point2> pts(points.rows());
        for (Eigen::Index i = 0; i < points.rows(); ++i) pts[i] = {points(i, 0), points(i, 1)};
        const auto v = invert_attenuated(data, thetas, offsets, a, pts);
        return Eigen::VectorXcd(Eigen::Map<const Eigen::VectorXcd>(v.data(), static_cast<Eigen::Index>(v.size())));
      },
      py::arg("data"), py::arg("thetas"), py::arg("offsets"), py::arg("attenuation"), py::arg("points"),
      "exponential filtered backprojection; data is [angle, offset], points is (n, 2)");

  m.def(
      "read_field",
      [](const std::string& path) {
        const FieldFile f = read_field(path);
        py::array_t<cplx> a({f.n1, f.n_perp, f.n_perp});
        std::copy(f.box.begin(), f.box.end(), a.mutable_data());
        py::dict params;
        for (const auto& [k, v] : f.params) params[py::str(k)] = v;
        return py::make_tuple(a, params);
      },
      py::arg("path"), "(box array [n1, n_perp, n_perp], header params)");
  m.def(
      "read_dtn", [](const std::string& path) { return read_dtn(path).entries; }, py::arg("path"));
}
