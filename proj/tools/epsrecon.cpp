// Batch front end: forward, synthesize, preprocess, invert, report.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include <CLI11.hpp>
#ifdef _OPENMP
#include <omp.h>
#endif

#include "epsrecon/adaptive.hpp"
#include "epsrecon/config.hpp"
#include "epsrecon/data_pipeline.hpp"
#include "epsrecon/errors.hpp"
#include "epsrecon/io.hpp"
#include "epsrecon/postprocess.hpp"

namespace fs = std::filesystem;
using namespace epsrecon;

namespace {

struct Options {
  std::string config;
  int threads = 0;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::vector<std::string> eps_files;
};

struct Run {
  RunConfig cfg;
  std::string config_text;
  fs::path out;
  Manifest manifest;

  fs::path output(const std::string& name) {
    manifest.outputs.push_back(name);
    return out / name;
  }

  void finish() {
    manifest.config_hash = fnv1a_hex(config_text);
    std::ofstream(out / "config.json") << config_text;
    std::ofstream m(out / "manifest.json");
    m << manifest.to_json();
    if (!m) throw IoError("cannot write manifest in " + out.string());
  }
};

Run start(const std::string& command, const Options& opt) {
  Run run;
  run.cfg = opt.config.empty() ? RunConfig{} : RunConfig::load(opt.config);
  if (opt.seed) run.cfg.rng_seed = *opt.seed;
  if (!opt.out.empty()) run.cfg.paths.out = opt.out;
  run.cfg.validate();
  run.config_text = run.cfg.to_json();
  run.out = run.cfg.paths.out;
  std::error_code ec;
  fs::create_directories(run.out, ec);
  if (ec) throw IoError("cannot create " + run.out.string() + ": " + ec.message());
  run.manifest.command = command;
#ifdef _OPENMP
  if (opt.threads > 0) omp_set_num_threads(opt.threads);
  run.manifest.threads = omp_get_max_threads();
#endif
  return run;
}

const std::string& required(const std::string& path, const char* key) {
  if (path.empty()) throw ConfigError(std::string("paths.") + key + " is not set");
  return path;
}

CoefficientField load_eps(const std::string& path, const RunConfig& cfg) {
  CoefficientField eps = read_coefficient(path);
  const Mesh& m = *eps.mesh;
  if (!(m.box() == cfg.domain.gb_bounds()) || !(m.omega() == cfg.domain.omega_bounds) || m.base_h() != cfg.base_h)
    throw ConfigError(path + " was written for a different domain or base_h");
  return eps;
}

void write_eps_vtk(const fs::path& path, const CoefficientField& eps, const GradientField* grad = nullptr) {
  std::map<std::string, std::span<const double>> fields{{"eps", eps.values}};
  if (grad) fields.emplace("gradient", grad->values);
  write_vtk_cells(path, *eps.mesh, fields);
}

CoefficientField twin_truth(const RunConfig& cfg) {
  const auto mesh = build_base_mesh(cfg.domain, cfg.base_h);
  auto eps = CoefficientField::background(mesh, 1.0);
  for (int c = 0; c < mesh->n_cells(); ++c)
    if (mesh->cell_in_omega(c) && cfg.twin.inclusion.contains_open(mesh->cell_center(c)))
      eps.values[c] = cfg.twin.inclusion_eps;
  return eps;
}

int cmd_forward(const Options& opt) {
  Run run = start("forward", opt);
  const RunConfig& cfg = run.cfg;
  const CoefficientField eps = cfg.paths.eps.empty()
                                   ? CoefficientField::background(build_base_mesh(cfg.domain, cfg.base_h), 1.0)
                                   : load_eps(cfg.paths.eps, cfg);
  const auto result = solve_forward_G(cfg.domain, eps, cfg.forward(), cfg.waveform(), false, cfg.snapshots);
  write_record(run.output("record.wsbnd"), result.record);
  for (const auto& [n, field] : result.snapshots) {
    char name[64];
    std::snprintf(name, sizeof name, "field_%05d.vtk", n);
    write_vtk_vectors(run.output(name), *result.g_mesh, "E", field);
  }
  write_eps_vtk(run.output("eps.vtk"), eps);
  run.finish();
  std::cout << "forward: " << result.record.n_nodes() << " boundary nodes, " << result.record.n_samples()
            << " samples\n";
  return 0;
}

int cmd_synthesize(const Options& opt) {
  Run run = start("synthesize", opt);
  const RunConfig& cfg = run.cfg;
  const CoefficientField truth = twin_truth(cfg);
  const CoefficientField glob = gaussian_smooth(truth, cfg.twin.glob_sigma);
  const auto data =
      synthesize_twin_data(cfg.domain, truth, cfg.forward(), cfg.waveform(), cfg.pipeline.noise_level, cfg.rng_seed);
  write_coefficient(run.output("eps_true.wsmesh"), truth);
  write_coefficient(run.output("eps_glob.wsmesh"), glob);
  write_plane_text(run.output("data.txt"), data);
  write_vtk_cells(run.output("eps_true.vtk"), *truth.mesh, {{"eps", truth.values}, {"eps_glob", glob.values}});
  run.finish();
  std::cout << "synthesize: " << data.nx << " x " << data.ny << " detectors, " << data.nt
            << " samples, glob max " << glob.max_in_omega() << "\n";
  return 0;
}

int cmd_preprocess(const Options& opt) {
  Run run = start("preprocess", opt);
  const RunConfig& cfg = run.cfg;
  MeasurementPlaneData data = read_plane_text(required(cfg.paths.data, "data"));
  const CoefficientField glob = load_eps(required(cfg.paths.eps_glob, "eps_glob"), cfg);
  const auto glob_run = solve_forward_G(cfg.domain, glob, cfg.forward(), cfg.waveform());
  if (cfg.pipeline.data_plane_z) {
    data.plane_z = *cfg.pipeline.data_plane_z;
    data = propagate_data(data, cfg.domain.gamma_z);
  }
  const auto g_incl = calibrate(data, gamma_plane(cfg.domain, glob_run.record));
  const auto immersed = immerse(g_incl, gamma1_plane(cfg.domain, glob_run.record), ImmersingConfig{cfg.pipeline.beta});
  const auto record = complement_boundary_data(glob_run.record, immersed);
  write_plane_text(run.output("calibrated.txt"), g_incl);
  write_plane_text(run.output("immersed.txt"), immersed);
  write_record(run.output("inversion.wsbnd"), record);
  run.finish();
  std::cout << "preprocess: calibration factor " << calibration_factor(data, gamma_plane(cfg.domain, glob_run.record))
            << "\n";
  return 0;
}

int cmd_invert(const Options& opt) {
  Run run = start("invert", opt);
  const RunConfig& cfg = run.cfg;
  AdaptiveProblem problem;
  problem.forward = cfg.forward();
  problem.data = read_record(required(cfg.paths.record, "record"));
  problem.cutoff = cfg.cutoff();
  problem.tikhonov = TikhonovConfig{cfg.gamma, load_eps(required(cfg.paths.eps_glob, "eps_glob"), cfg)};
  IterateObserver log = [](const InversionState& st) {
    if (!st.history.empty()) std::cerr << format_iteration(st.history.back()) << "\n";
  };
  const AdaptiveResult result = run_adaptive(problem, cfg.adaptive, log);
  for (std::size_t k = 0; k < result.per_mesh.size(); ++k)
    write_coefficient(run.output("eps_mesh_" + std::to_string(k) + ".wsmesh"), result.per_mesh[k]);
  write_coefficient(run.output("eps_final.wsmesh"), result.eps);
  write_eps_vtk(run.output("eps_final.vtk"), result.eps, &result.gradients.back());
  std::ofstream(run.output("run_record.jsonl")) << result.record.to_json_lines();
  std::ofstream(run.output("summary.tsv")) << result.record.summary_table();
  run.manifest.stop_reason = to_string(result.record.stop);
  run.finish();
  std::cout << result.record.summary_table() << "stop: " << to_string(result.record.stop) << "\n";
  return 0;
}

std::string mesh_label(std::size_t k) { return k == 0 ? "coarse" : std::to_string(k) + "x"; }

int cmd_report(const Options& opt) {
  Run run = start("report", opt);
  const RunConfig& cfg = run.cfg;
  std::vector<std::string> files = opt.eps_files;
  if (files.empty()) files.push_back(required(cfg.paths.eps, "eps"));
  std::optional<CoefficientField> truth;
  if (!cfg.paths.eps_true.empty()) truth = load_eps(cfg.paths.eps_true, cfg);
  std::vector<std::pair<std::string, TargetReport>> rows;
  for (std::size_t k = 0; k < files.size(); ++k) {
    const CoefficientField eps = load_eps(files[k], cfg);
    rows.emplace_back(files.size() == 1 ? "final" : mesh_label(k), make_report(eps, truth ? &*truth : nullptr));
    if (k + 1 == files.size()) {
      const auto image = threshold_image(eps, rows.back().second.classification);
      write_vtk_cells(run.output("image.vtk"), *eps.mesh, {{"eps", eps.values}, {"image", image.values}});
    }
  }
  const std::string table = report_table(rows);
  std::ofstream(run.output("report.tsv")) << table;
  run.finish();
  std::cout << table;
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Coefficient reconstruction for the time-domain vector wave equation"};
  app.require_subcommand(1);
  Options opt;
  app.add_option("--config", opt.config, "JSON run configuration");
  app.add_option("--threads", opt.threads, "worker threads (0 = runtime default)")->check(CLI::NonNegativeNumber);
  app.add_option("--seed", opt.seed, "noise seed, overrides rng_seed");
  app.add_option("--out", opt.out, "output directory, overrides paths.out");

  std::map<std::string, int (*)(const Options&)> commands{{"forward", cmd_forward},
                                                          {"synthesize", cmd_synthesize},
                                                          {"preprocess", cmd_preprocess},
                                                          {"invert", cmd_invert},
                                                          {"report", cmd_report}};
  app.add_subcommand("forward", "simulate the incident pulse on G and record boundary data");
  app.add_subcommand("synthesize", "twin data from a known inclusion");
  app.add_subcommand("preprocess", "propagate, calibrate, immerse and complement measured data");
  app.add_subcommand("invert", "adaptive reconstruction");
  app.add_subcommand("report", "target metrics and thresholded image")
      ->add_option("--eps", opt.eps_files, "reconstructions to tabulate, coarse first");
  app.add_subcommand("dump-config", "print the effective configuration");
  // Global options may come after the subcommand name.
  for (auto* sub : app.get_subcommands({})) sub->fallthrough();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : static_cast<int>(ErrorClass::config);
  }

  try {
    if (app.got_subcommand("dump-config")) {
      RunConfig cfg = opt.config.empty() ? RunConfig{} : RunConfig::load(opt.config);
      cfg.validate();
      std::cout << cfg.to_json();
      return 0;
    }
    for (auto& [name, fn] : commands)
      if (app.got_subcommand(name)) return fn(opt);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return static_cast<int>(e.error_class());
  } catch (const fs::filesystem_error& e) {
    std::cerr << "error: IoError: " << e.what() << "\n";
    return static_cast<int>(ErrorClass::io);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 4;
  }
  return 0;
}
