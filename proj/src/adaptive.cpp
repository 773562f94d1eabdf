#include "epsrecon/adaptive.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <nlohmann/json.hpp>

#include "epsrecon/errors.hpp"

namespace epsrecon {

void AdaptiveConfig::validate() const {
  if (!(beta1 > 0.0 && beta1 < 1.0)) throw ConfigError("beta1 must lie in (0, 1)");
  if (max_refinements < 0) throw ConfigError("max_refinements must be non-negative");
  cg.validate();
}

std::string to_string(StopReason reason) {
  switch (reason) {
    case StopReason::Step3Tolerance: return "Step3Tolerance";
    case StopReason::Step6: return "Step6";
    case StopReason::ConvergedFlat: return "ConvergedFlat";
    case StopReason::MaxRefinements: return "MaxRefinements";
    case StopReason::LineSearchStall: return "LineSearchStall";
  }
  return "?";
}

std::string AdaptiveRunRecord::to_json_lines() const {
  std::string out;
  for (const auto& m : meshes) {
    nlohmann::ordered_json j;
    j["mesh"] = m.index;
    j["cells"] = m.cells;
    j["max_level"] = m.max_level;
    j["dt"] = m.dt;
    j["iterations"] = m.iterations;
    j["cg_stop"] = to_string(m.cg_stop);
    j["grad_norm"] = m.grad_norm;
    j["value"] = m.value;
    j["eps_max"] = m.eps_max;
    j["marked"] = m.marked;
    out += j.dump() + "\n";
  }
  nlohmann::ordered_json j;
  j["stop"] = to_string(stop);
  out += j.dump() + "\n";
  return out;
}

std::string AdaptiveRunRecord::summary_table() const {
  std::string out = "mesh\tcells\tM\tgrad_norm\tF\teps_max\tn\n";
  char buf[256];
  for (const auto& m : meshes) {
    const std::string name = m.index == 0 ? "coarse" : std::to_string(m.index) + "x";
    std::snprintf(buf, sizeof buf, "%s\t%d\t%d\t%.6e\t%.6e\t%.4f\t%.4f\n", name.c_str(), m.cells, m.iterations,
                  m.grad_norm, m.value, m.eps_max, std::sqrt(m.eps_max));
    out += buf;
  }
  return out;
}

std::vector<int> mark_cells(const GradientField& grad, double beta1) {
  if (!(beta1 > 0.0 && beta1 < 1.0)) throw ConfigError("beta1 must lie in (0, 1)");
  const Mesh& mesh = *grad.mesh;
  double gmax = 0.0;
  for (int c = 0; c < mesh.n_cells(); ++c)
    if (mesh.cell_in_omega(c)) gmax = std::max(gmax, std::abs(grad.values[c]));
  std::vector<int> marked;
  if (gmax == 0.0) return marked;
  for (int c = 0; c < mesh.n_cells(); ++c)
    if (mesh.cell_in_omega(c) && std::abs(grad.values[c]) >= beta1 * gmax) marked.push_back(c);
  return marked;
}

MeshProblem prepare_mesh_problem(const AdaptiveProblem& problem, const MeshPtr& mesh, double dt) {
  MeshProblem mp;
  mp.tikhonov = problem.tikhonov;
  mp.tikhonov.eps_glob = interpolate_coefficient(problem.tikhonov.eps_glob, mesh);
  const TimeGrid& base = problem.forward.time_grid;
  const double limit = cfl_max_dt(*mesh, mp.tikhonov.eps_glob, problem.forward.s);
  while (dt > limit) dt *= 0.5;
  mp.forward = problem.forward;
  mp.forward.time_grid = dt == base.dt ? base : TimeGrid::make(base.t_final, dt, base.t1);
  mp.data = problem.data.matches(*mesh) && mp.forward.time_grid.same_as(base)
                ? problem.data
                : problem.data.resample(*mesh, mp.forward.time_grid);
  return mp;
}

AdaptiveResult run_adaptive(const AdaptiveProblem& problem, const AdaptiveConfig& cfg,
                            const IterateObserver& observer, const MeshSolver& solver) {
  cfg.validate();
  problem.forward.validate();
  problem.tikhonov.validate();
  const MeshSolver solve = solver ? solver : [&](Objective& obj, const CoefficientField& init, const CgConfig& c) {
    return minimize_on_mesh(obj, init, c, observer);
  };

  AdaptiveResult result;
  MeshPtr mesh = problem.tikhonov.eps_glob.mesh;
  double dt = problem.forward.time_grid.dt;
  for (int k = 0;; ++k) {
    MeshProblem mp = prepare_mesh_problem(problem, mesh, dt);
    dt = mp.forward.time_grid.dt;
    MeshObjective objective(mp.forward, std::move(mp.data), problem.cutoff, mp.tikhonov);
    CgResult cg = solve(objective, mp.tikhonov.eps_glob, cfg.cg);

    MeshRecord rec;
    rec.index = k;
    rec.mesh_id = mesh->id();
    rec.cells = mesh->n_cells();
    rec.max_level = mesh->max_level();
    rec.dt = dt;
    rec.iterations = cg.iterations;
    rec.cg_stop = cg.stop;
    rec.grad_norm = cg.gradient.norm_l2();
    rec.value = cg.value;
    rec.eps_max = cg.eps.max_in_omega();
    result.record.meshes.push_back(rec);
    result.per_mesh.push_back(cg.eps);
    result.gradients.push_back(cg.gradient);
    result.eps = std::move(cg.eps);

    auto& meshes = result.record.meshes;
    if (k > 0 && step6_stop(rec.grad_norm, meshes[k - 1].grad_norm)) {
      result.record.stop = StopReason::Step6;
      break;
    }
    if (cg.stop == CgStop::Tolerance) {
      result.record.stop = StopReason::Step3Tolerance;
      break;
    }
    if (cg.stop == CgStop::LineSearchStall && cg.iterations == 0) {
      result.record.stop = StopReason::LineSearchStall;
      break;
    }
    if (k >= cfg.max_refinements) {
      result.record.stop = StopReason::MaxRefinements;
      break;
    }
    const auto marked = mark_cells(cg.gradient, cfg.beta1);
    if (marked.empty()) {
      result.record.stop = StopReason::ConvergedFlat;
      break;
    }
    MeshPtr next = refine_cells(mesh, marked);
    if (next->n_cells() <= mesh->n_cells()) {
      // Every mark was dropped by the Omega restriction.
      result.record.stop = StopReason::ConvergedFlat;
      break;
    }
    meshes.back().marked = static_cast<int>(marked.size());
    mesh = std::move(next);
  }
  return result;
}

}  // namespace epsrecon
