#pragma once

#include <functional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "epsrecon/gradient.hpp"

namespace epsrecon {

/// Armijo backtracking on the truncated trial point. The first trial
/// step is alpha0 / max|d|, so it moves no cell by more than alpha0.
struct LineSearchConfig {
  double alpha0 = 1.0;
  double backtrack = 0.5;
  double c = 1e-4;
  int max_trials = 20;

  bool operator==(const LineSearchConfig&) const = default;
};

struct CgConfig {
  double theta = 1e-9;
  int max_iters = 30;
  LineSearchConfig line_search;
  double eps_min = kEpsMin;
  double eps_max = kEpsMax;
  /// ||eps||_{L2(Omega)} counts as stabilized after `stable_window`
  /// consecutive relative changes below `stable_tol`.
  double stable_tol = 1e-4;
  int stable_window = 3;

  void validate() const;
  bool operator==(const CgConfig&) const = default;
};

struct IterationLog {
  int m = 0;
  double value = 0.0;
  double grad_norm = 0.0;
  double eps_norm = 0.0;
  double alpha = 0.0;
  double beta = 0.0;
};

struct InversionState {
  CoefficientField eps;
  GradientField grad;
  std::vector<double> direction;
  double beta = 0.0;
  double value = 0.0;
  int m = 0;
  std::vector<IterationLog> history;
};

enum class CgStop { Tolerance, Stabilized, LineSearchStall, MaxIterations };
std::string to_string(CgStop stop);

struct CgResult {
  CoefficientField eps;
  GradientField gradient;
  double value = 0.0;
  /// Number of accepted updates M.
  int iterations = 0;
  CgStop stop = CgStop::MaxIterations;
  std::vector<IterationLog> history;
};

/// Called after the initial evaluation and after every accepted update.
using IterateObserver = std::function<void(const InversionState&)>;

/// Clamp to [lo, hi] inside Omega, exactly 1 outside.
CoefficientField truncate_bounds(const CoefficientField& eps, double lo = kEpsMin, double hi = kEpsMax);

/// Fletcher-Reeves direction d = -g + beta d_prev with
/// beta = ||g||^2 / ||g_prev||^2 (L2 over Omega), where `state` still holds
/// the previous gradient and direction. Without a previous direction, or
/// when the previous gradient vanishes, d = -g and beta = 0.
std::pair<std::vector<double>, double> cg_direction(const InversionState& state, const GradientField& grad_new);

struct LineSearchResult {
  double alpha = 0.0;
  CoefficientField eps;
  double value = 0.0;
  int trials = 0;
};

/// Throws LineSearchStall when no trial satisfies the Armijo condition.
LineSearchResult line_search_step(Objective& objective, const CoefficientField& eps, double value,
                                  const GradientField& grad, std::span<const double> direction, const CgConfig& cfg);

CgResult minimize_on_mesh(Objective& objective, const CoefficientField& initial, const CgConfig& cfg,
                          const IterateObserver& observer = {});

/// `iter m F grad_norm eps_norm alpha beta`, tab separated.
std::string format_iteration(const IterationLog& log);

}  // namespace epsrecon
