#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "epsrecon/adaptive.hpp"
#include "epsrecon/config.hpp"
#include "epsrecon/data_pipeline.hpp"
#include "epsrecon/errors.hpp"
#include "epsrecon/io.hpp"
#include "epsrecon/postprocess.hpp"

namespace py = pybind11;
using namespace epsrecon;

namespace {

using PyMesh = std::shared_ptr<Mesh>;

PyMesh to_py(const MeshPtr& m) { return std::const_pointer_cast<Mesh>(m); }

py::array_t<double> as_array(const std::vector<double>& v, std::vector<py::ssize_t> shape) {
  py::array_t<double> a(shape);
  std::copy(v.begin(), v.end(), a.mutable_data());
  return a;
}

std::vector<double> from_array(const py::array_t<double, py::array::c_style | py::array::forcecast>& a,
                               std::size_t expected) {
  if (static_cast<std::size_t>(a.size()) != expected) throw ShapeError("array has the wrong number of entries");
  return std::vector<double>(a.data(), a.data() + a.size());
}

Vec3 vec3(const std::array<double, 3>& a) { return {a[0], a[1], a[2]}; }
std::array<double, 3> arr3(const Vec3& v) { return {v[0], v[1], v[2]}; }

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Adaptive finite element reconstruction of dielectric constants";
  m.attr("__version__") = kVersion;

  static py::exception<Error> base(m, "Error", PyExc_RuntimeError);
  static py::exception<Error> io_error(m, "IoError", base.ptr());
  static py::exception<Error> numerical_error(m, "NumericalError", base.ptr());
  static py::exception<Error> config_error(m, "ConfigError", base.ptr());
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const Error& e) {
      switch (e.error_class()) {
        case ErrorClass::io: py::set_error(io_error, e.what()); break;
        case ErrorClass::numerical: py::set_error(numerical_error, e.what()); break;
        case ErrorClass::config: py::set_error(config_error, e.what()); break;
      }
    }
  });

  py::class_<Box>(m, "Box")
      .def(py::init([](std::array<double, 3> lo, std::array<double, 3> hi) { return Box{vec3(lo), vec3(hi)}; }),
           py::arg("lo"), py::arg("hi"))
      .def_property_readonly("lo", [](const Box& b) { return arr3(b.lo); })
      .def_property_readonly("hi", [](const Box& b) { return arr3(b.hi); })
      .def("extent", &Box::extent)
      .def("__repr__", [](const Box& b) {
        return py::str("Box(lo={}, hi={})").format(arr3(b.lo), arr3(b.hi)).cast<std::string>();
      });

  py::class_<DomainSpec>(m, "DomainSpec")
      .def(py::init<>())
      .def_readwrite("g_bounds", &DomainSpec::g_bounds)
      .def_readwrite("omega_bounds", &DomainSpec::omega_bounds)
      .def_readwrite("gamma_z", &DomainSpec::gamma_z)
      .def_readwrite("source_z", &DomainSpec::source_z)
      .def("validate", &DomainSpec::validate)
      .def("gb_bounds", &DomainSpec::gb_bounds)
      .def_static("standard", &DomainSpec::standard);

  py::class_<TimeGrid>(m, "TimeGrid")
      .def_static("make", &TimeGrid::make, py::arg("t_final"), py::arg("dt"), py::arg("t1"))
      .def_readonly("t_final", &TimeGrid::t_final)
      .def_readonly("dt", &TimeGrid::dt)
      .def_readonly("n_steps", &TimeGrid::n_steps)
      .def_readonly("t1", &TimeGrid::t1);

  py::class_<Mesh, PyMesh>(m, "Mesh")
      .def_property_readonly("n_cells", &Mesh::n_cells)
      .def_property_readonly("n_nodes", &Mesh::n_nodes)
      .def_property_readonly("base_h", &Mesh::base_h)
      .def_property_readonly("max_level", &Mesh::max_level)
      .def("cell_center", [](const Mesh& me, int c) { return arr3(me.cell_center(c)); })
      .def("cell_h", &Mesh::cell_h)
      .def("cell_in_omega", &Mesh::cell_in_omega)
      .def("centers", [](const Mesh& me) {
        py::array_t<double> a({static_cast<py::ssize_t>(me.n_cells()), py::ssize_t{3}});
        auto r = a.mutable_unchecked<2>();
        for (int c = 0; c < me.n_cells(); ++c)
          for (int k = 0; k < 3; ++k) r(c, k) = me.cell_center(c)[k];
        return a;
      });
  m.def("build_base_mesh", [](const DomainSpec& s, double h) { return to_py(build_base_mesh(s, h)); },
        py::arg("spec"), py::arg("h"));
  m.def("refine_cells", [](const PyMesh& mesh, const std::vector<int>& cells) {
    return to_py(refine_cells(mesh, cells));
  });

  py::class_<CoefficientField>(m, "CoefficientField")
      .def_static("background", [](const PyMesh& mesh, double v) { return CoefficientField::background(mesh, v); })
      .def_static("from_values", [](const PyMesh& mesh, py::array_t<double> v) {
        CoefficientField f{mesh, from_array(v, mesh->n_cells())};
        check_coefficient_invariants(f);
        return f;
      })
      .def_property_readonly("mesh", [](const CoefficientField& f) { return to_py(f.mesh); })
      .def_property_readonly("values", [](const CoefficientField& f) {
        return as_array(f.values, {static_cast<py::ssize_t>(f.values.size())});
      })
      .def("max_in_omega", &CoefficientField::max_in_omega)
      .def("l2_norm_omega", &CoefficientField::l2_norm_omega);
  m.def("interpolate_coefficient", [](const CoefficientField& f, const PyMesh& mesh) {
    return interpolate_coefficient(f, mesh);
  });

  py::class_<SourceWaveform>(m, "SourceWaveform")
      .def(py::init([](double omega) { return SourceWaveform{omega}; }), py::arg("omega") = 30.0)
      .def_readwrite("omega", &SourceWaveform::omega)
      .def("t1", &SourceWaveform::t1)
      .def("eval", &SourceWaveform::eval);

  py::class_<ForwardConfig>(m, "ForwardConfig")
      .def(py::init([](double t_final, double dt, double omega, double s) {
             ForwardConfig c;
             c.s = s;
             c.time_grid = TimeGrid::make(t_final, dt, SourceWaveform{omega}.t1());
             return c;
           }),
           py::arg("t_final") = 1.2, py::arg("dt") = 0.003, py::arg("omega") = 30.0, py::arg("s") = 1.0)
      .def_readwrite("s", &ForwardConfig::s)
      .def_readwrite("time_grid", &ForwardConfig::time_grid);

  py::class_<BoundaryRecord>(m, "BoundaryRecord")
      .def_property_readonly("n_nodes", &BoundaryRecord::n_nodes)
      .def_property_readonly("n_samples", &BoundaryRecord::n_samples)
      .def_property_readonly("time_grid", &BoundaryRecord::time_grid)
      .def("dirichlet", [](const BoundaryRecord& r) {
        return as_array(r.dirichlet_data(), {r.n_nodes(), r.n_samples(), 3});
      })
      .def("neumann", [](const BoundaryRecord& r) {
        return as_array(r.neumann_data(), {r.n_nodes(), r.n_samples(), 3});
      })
      .def("node_positions", [](const BoundaryRecord& r) {
        py::array_t<double> a({static_cast<py::ssize_t>(r.n_nodes()), py::ssize_t{3}});
        auto w = a.mutable_unchecked<2>();
        for (int i = 0; i < r.n_nodes(); ++i)
          for (int k = 0; k < 3; ++k) w(i, k) = r.node_position(i)[k];
        return a;
      });

  m.def(
      "solve_forward",
      [](const DomainSpec& s, const CoefficientField& eps, const ForwardConfig& cfg, const SourceWaveform& w) {
        py::gil_scoped_release release;
        return solve_forward_G(s, eps, cfg, w).record;
      },
      py::arg("spec"), py::arg("eps"), py::arg("config"), py::arg("waveform") = SourceWaveform{});
  m.def("cfl_max_dt", [](const CoefficientField& eps, double s) { return cfl_max_dt(*eps.mesh, eps, s); },
        py::arg("eps"), py::arg("s") = 1.0);

  py::class_<MeasurementPlaneData>(m, "MeasurementPlaneData")
      .def_readonly("nx", &MeasurementPlaneData::nx)
      .def_readonly("ny", &MeasurementPlaneData::ny)
      .def_readonly("nt", &MeasurementPlaneData::nt)
      .def_readonly("x0", &MeasurementPlaneData::x0)
      .def_readonly("y0", &MeasurementPlaneData::y0)
      .def_readonly("pitch", &MeasurementPlaneData::pitch)
      .def_readonly("dt", &MeasurementPlaneData::dt)
      .def_readonly("plane_z", &MeasurementPlaneData::plane_z)
      .def_property(
          "samples", [](const MeasurementPlaneData& d) { return as_array(d.samples, {d.nx, d.ny, d.nt}); },
          [](MeasurementPlaneData& d, py::array_t<double> a) { d.samples = from_array(a, d.samples.size()); })
      .def("max_value", &MeasurementPlaneData::max_value);

  m.def("gamma_plane", &gamma_plane);
  m.def("gamma1_plane", &gamma1_plane);
  m.def("synthesize_twin_data", &synthesize_twin_data, py::arg("spec"), py::arg("eps_true"), py::arg("config"),
        py::arg("waveform"), py::arg("noise_level") = 0.0, py::arg("seed") = 0);
  m.def("gaussian_smooth", &gaussian_smooth, py::arg("eps"), py::arg("sigma"));
  m.def("propagate_data", &propagate_data, py::arg("data"), py::arg("target_z"), py::arg("pad_time") = true);
  m.def("calibration_factor", &calibration_factor);
  m.def("calibrate", &calibrate, py::arg("data"), py::arg("simulated"));
  m.def(
      "immerse",
      [](const MeasurementPlaneData& g, const MeasurementPlaneData& sim, double beta) {
        return immerse(g, sim, ImmersingConfig{beta});
      },
      py::arg("g_incl"), py::arg("simulated_gamma1"), py::arg("beta") = 0.5);
  m.def("complement_boundary_data",
        py::overload_cast<const BoundaryRecord&, const MeasurementPlaneData&>(&complement_boundary_data));

  py::class_<AdaptiveConfig>(m, "AdaptiveConfig")
      .def(py::init<>())
      .def_readwrite("beta1", &AdaptiveConfig::beta1)
      .def_readwrite("max_refinements", &AdaptiveConfig::max_refinements)
      .def_property(
          "theta", [](const AdaptiveConfig& a) { return a.cg.theta; }, [](AdaptiveConfig& a, double v) { a.cg.theta = v; })
      .def_property(
          "max_iters", [](const AdaptiveConfig& a) { return a.cg.max_iters; },
          [](AdaptiveConfig& a, int v) { a.cg.max_iters = v; });

  py::class_<AdaptiveResult>(m, "AdaptiveResult")
      .def_readonly("eps", &AdaptiveResult::eps)
      .def_readonly("per_mesh", &AdaptiveResult::per_mesh)
      .def_property_readonly("stop", [](const AdaptiveResult& r) { return to_string(r.record.stop); })
      .def_property_readonly("record_json", [](const AdaptiveResult& r) { return r.record.to_json_lines(); })
      .def_property_readonly("summary", [](const AdaptiveResult& r) { return r.record.summary_table(); });

  m.def(
      "run_adaptive",
      [](const BoundaryRecord& data, const CoefficientField& eps_glob, const ForwardConfig& cfg, double gamma,
         const AdaptiveConfig& acfg, double delta) {
        AdaptiveProblem p{cfg, data, CutoffZdelta::make(cfg.time_grid.t_final, delta), TikhonovConfig{gamma, eps_glob}};
        py::gil_scoped_release release;
        return run_adaptive(p, acfg);
      },
      py::arg("data"), py::arg("eps_glob"), py::arg("config"), py::arg("gamma") = 0.01,
      py::arg("adaptive") = AdaptiveConfig{}, py::arg("delta") = 0.1);

  m.def(
      "make_report",
      [](const CoefficientField& eps, const CoefficientField* truth) {
        const auto r = make_report(eps, truth);
        py::dict d;
        d["eps_max"] = r.eps_max;
        d["n_target"] = r.n_target;
        d["classification"] = to_string(r.classification);
        d["support"] = r.support;
        d["box"] = r.box ? py::cast(*r.box) : py::none();
        d["n_error"] = r.n_error ? py::cast(*r.n_error) : py::none();
        return d;
      },
      py::arg("eps"), py::arg("truth") = nullptr);
  m.def(
      "threshold_image",
      [](const CoefficientField& eps, const std::string& mode) {
        if (mode != "dielectric" && mode != "metallic") throw ConfigError("mode must be dielectric or metallic");
        return threshold_image(eps, mode == "dielectric" ? TargetKind::dielectric : TargetKind::metallic);
      },
      py::arg("eps"), py::arg("mode") = "dielectric");

  m.def("write_coefficient", &write_coefficient);
  m.def("read_coefficient", &read_coefficient);
  m.def("write_record", &write_record);
  m.def("read_record", &read_record);
  m.def("write_plane_text", &write_plane_text);
  m.def("read_plane_text", &read_plane_text);

  m.def("default_config_json", [] { return RunConfig{}.to_json(); });
  m.def("normalize_config_json", [](const std::string& text) {
    const auto c = RunConfig::from_json(text);
    c.validate();
    return c.to_json();
  });
}
