#pragma once

#include <functional>
#include <string>
#include <vector>

#include "epsrecon/cg_optimizer.hpp"

namespace epsrecon {

struct AdaptiveConfig {
  double beta1 = 0.7;
  int max_refinements = 5;
  CgConfig cg;

  void validate() const;
  bool operator==(const AdaptiveConfig&) const = default;
};

enum class StopReason { Step3Tolerance, Step6, ConvergedFlat, MaxRefinements, LineSearchStall };
std::string to_string(StopReason reason);

struct MeshRecord {
  int index = 0;
  /// Process-local mesh identity, not written to the run record.
  std::uint64_t mesh_id = 0;
  int cells = 0;
  int max_level = 0;
  double dt = 0.0;
  int iterations = 0;
  CgStop cg_stop = CgStop::MaxIterations;
  double grad_norm = 0.0;
  double value = 0.0;
  double eps_max = 0.0;
  /// Cells marked for the next mesh, 0 on the last one.
  int marked = 0;
};

struct AdaptiveRunRecord {
  std::vector<MeshRecord> meshes;
  StopReason stop = StopReason::MaxRefinements;

  /// One JSON object per mesh, then one with the stop reason.
  std::string to_json_lines() const;
  /// Rows coarse, 1x, 2x, ... with cells, M, ||L'||, F, eps_max, n.
  std::string summary_table() const;
};

/// Everything that stays fixed across meshes. `data` and
/// `tikhonov.eps_glob` live on the base mesh and base time grid.
struct AdaptiveProblem {
  ForwardConfig forward;
  BoundaryRecord data;
  CutoffZdelta cutoff;
  TikhonovConfig tikhonov;
};

struct AdaptiveResult {
  CoefficientField eps;
  AdaptiveRunRecord record;
  /// Final iterate and gradient on every mesh visited.
  std::vector<CoefficientField> per_mesh;
  std::vector<GradientField> gradients;
};

/// Cells of Omega with |g| >= beta1 max_Omega |g|; empty when g vanishes.
std::vector<int> mark_cells(const GradientField& grad, double beta1);

/// Step 6: stop refining once the gradient norm no longer decreases.
inline bool step6_stop(double grad_norm_current, double grad_norm_previous) {
  return grad_norm_current >= grad_norm_previous;
}

using MeshSolver = std::function<CgResult(Objective&, const CoefficientField& initial, const CgConfig& cfg)>;

/// Per-mesh inputs after refinement: time step halved until the CFL bound
/// holds, data resampled, eps_glob interpolated.
struct MeshProblem {
  ForwardConfig forward;
  BoundaryRecord data;
  TikhonovConfig tikhonov;
};
MeshProblem prepare_mesh_problem(const AdaptiveProblem& problem, const MeshPtr& mesh, double dt);

/// Steps 0-6: minimize on the current mesh starting from eps_glob, mark
/// and refine, repeat until a stop rule fires. `solver` defaults to
/// minimize_on_mesh with `observer`.
AdaptiveResult run_adaptive(const AdaptiveProblem& problem, const AdaptiveConfig& cfg,
                            const IterateObserver& observer = {}, const MeshSolver& solver = {});

}  // namespace epsrecon
