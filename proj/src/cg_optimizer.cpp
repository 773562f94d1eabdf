#include "epsrecon/cg_optimizer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "epsrecon/errors.hpp"

namespace epsrecon {

void CgConfig::validate() const {
  if (!(theta > 0.0)) throw ConfigError("theta must be positive");
  if (max_iters < 0) throw ConfigError("max_iters must be non-negative");
  if (!(line_search.alpha0 > 0.0)) throw ConfigError("alpha0 must be positive");
  if (!(line_search.backtrack > 0.0 && line_search.backtrack < 1.0))
    throw ConfigError("backtrack factor must lie in (0, 1)");
  if (!(line_search.c > 0.0 && line_search.c < 1.0)) throw ConfigError("Armijo constant must lie in (0, 1)");
  if (line_search.max_trials < 1) throw ConfigError("max_trials must be at least 1");
  if (!(eps_min >= kEpsMin && eps_max <= kEpsMax && eps_min < eps_max))
    throw ConfigError("bounds must lie inside [1, 25]");
  if (!(stable_tol > 0.0) || stable_window < 1) throw ConfigError("invalid stabilization rule");
}

std::string to_string(CgStop stop) {
  switch (stop) {
    case CgStop::Tolerance: return "Tolerance";
    case CgStop::Stabilized: return "Stabilized";
    case CgStop::LineSearchStall: return "LineSearchStall";
    case CgStop::MaxIterations: return "MaxIterations";
  }
  return "?";
}

CoefficientField truncate_bounds(const CoefficientField& eps, double lo, double hi) {
  CoefficientField out = eps;
  const Mesh& mesh = *eps.mesh;
  for (int c = 0; c < mesh.n_cells(); ++c)
    out.values[c] = mesh.cell_in_omega(c) ? std::clamp(eps.values[c], lo, hi) : 1.0;
  return out;
}

std::pair<std::vector<double>, double> cg_direction(const InversionState& state, const GradientField& grad_new) {
  const Mesh& mesh = *grad_new.mesh;
  std::vector<double> d(grad_new.values.size());
  double beta = 0.0;
  if (!state.direction.empty()) {
    const double prev = inner_omega(mesh, state.grad.values, state.grad.values);
    if (prev > 0.0) beta = inner_omega(mesh, grad_new.values, grad_new.values) / prev;
  }
  for (std::size_t c = 0; c < d.size(); ++c) {
    d[c] = -grad_new.values[c];
    if (beta != 0.0) d[c] += beta * state.direction[c];
  }
  return {std::move(d), beta};
}

namespace {

CoefficientField step(const CoefficientField& eps, std::span<const double> d, double alpha, const CgConfig& cfg) {
  CoefficientField trial = eps;
  for (std::size_t c = 0; c < trial.values.size(); ++c) trial.values[c] += alpha * d[c];
  return truncate_bounds(trial, cfg.eps_min, cfg.eps_max);
}

}  // namespace

LineSearchResult line_search_step(Objective& objective, const CoefficientField& eps, double value,
                                  const GradientField& grad, std::span<const double> direction,
                                  const CgConfig& cfg) {
  const Mesh& mesh = *eps.mesh;
  double dmax = 0.0;
  for (double v : direction) dmax = std::max(dmax, std::abs(v));
  if (dmax == 0.0) throw LineSearchStall("zero search direction");
  const double slope = inner_omega(mesh, grad.values, direction);
  if (!(slope < 0.0)) throw LineSearchStall("not a descent direction");

  const auto& ls = cfg.line_search;
  double alpha = ls.alpha0 / dmax;
  for (int trial = 1; trial <= ls.max_trials; ++trial, alpha *= ls.backtrack) {
    CoefficientField candidate = step(eps, direction, alpha, cfg);
    const double f = objective.value(candidate);
    if (f <= value + ls.c * alpha * slope) return {alpha, std::move(candidate), f, trial};
  }
  throw LineSearchStall("no sufficient decrease after " + std::to_string(ls.max_trials) + " trials");
}

namespace {

void check_iterate(const CoefficientField& eps, const CgConfig& cfg) {
  const Mesh& mesh = *eps.mesh;
  for (int c = 0; c < mesh.n_cells(); ++c) {
    const double v = eps.values[c];
    const bool ok = mesh.cell_in_omega(c) ? (v >= cfg.eps_min && v <= cfg.eps_max) : v == 1.0;
    if (!ok) throw DomainError("iterate violates the coefficient bounds in cell " + std::to_string(c));
  }
}

IterationLog log_entry(const InversionState& s, double alpha) {
  return {s.m, s.value, s.grad.norm_l2(), s.eps.l2_norm_omega(), alpha, s.beta};
}

}  // namespace

GradientField projected_gradient(const CoefficientField& eps, const GradientField& grad, const CgConfig& cfg) {
  GradientField pg = grad;
  for (std::size_t c = 0; c < pg.values.size(); ++c) {
    const double g = grad.values[c];
    if ((eps.values[c] <= cfg.eps_min && g > 0.0) || (eps.values[c] >= cfg.eps_max && g < 0.0)) pg.values[c] = 0.0;
  }
  return pg;
}

CgResult minimize_on_mesh(Objective& objective, const CoefficientField& initial, const CgConfig& cfg,
                          const IterateObserver& observer) {
  cfg.validate();
  if (initial.mesh_id() != objective.mesh()->id()) throw ShapeError("initial guess lives on another mesh");

  InversionState state;
  state.eps = truncate_bounds(initial, cfg.eps_min, cfg.eps_max);
  check_iterate(state.eps, cfg);
  state.value = objective.value_and_gradient(state.eps, state.grad);
  state.history.push_back(log_entry(state, 0.0));
  if (observer) observer(state);

  // The search runs on the projected gradient so that cells held at a
  // bound neither steer the direction nor shrink the trial step.
  InversionState search;
  search.grad = projected_gradient(state.eps, state.grad, cfg);
  search.direction = cg_direction(search, search.grad).first;

  CgResult result;
  int stable_run = 0;
  while (true) {
    if (state.grad.norm_l2() <= cfg.theta || search.grad.norm_l2() <= cfg.theta) {
      result.stop = CgStop::Tolerance;
      break;
    }
    if (state.m >= cfg.max_iters) {
      result.stop = CgStop::MaxIterations;
      break;
    }
    // Projection can turn the conjugate direction uphill; restart then.
    if (!(inner_omega(*state.eps.mesh, search.grad.values, search.direction) < 0.0)) {
      for (std::size_t c = 0; c < search.direction.size(); ++c) search.direction[c] = -search.grad.values[c];
      state.beta = 0.0;
    }
    LineSearchResult ls;
    try {
      ls = line_search_step(objective, state.eps, state.value, search.grad, search.direction, cfg);
    } catch (const LineSearchStall&) {
      result.stop = CgStop::LineSearchStall;
      break;
    }
    check_iterate(ls.eps, cfg);
    const double old_norm = state.eps.l2_norm_omega();
    state.value = objective.value_and_gradient(ls.eps, state.grad);
    state.eps = std::move(ls.eps);
    GradientField pg = projected_gradient(state.eps, state.grad, cfg);
    auto [direction, beta] = cg_direction(search, pg);
    search.grad = std::move(pg);
    search.direction = direction;
    state.direction = std::move(direction);
    state.beta = beta;
    ++state.m;
    state.history.push_back(log_entry(state, ls.alpha));
    if (observer) observer(state);

    const double new_norm = state.eps.l2_norm_omega();
    const double rel = std::abs(new_norm - old_norm) / std::max(old_norm, 1e-300);
    stable_run = rel < cfg.stable_tol ? stable_run + 1 : 0;
    if (stable_run >= cfg.stable_window) {
      result.stop = CgStop::Stabilized;
      break;
    }
  }
  result.eps = std::move(state.eps);
  result.gradient = std::move(state.grad);
  result.value = state.value;
  result.iterations = state.m;
  result.history = std::move(state.history);
  return result;
}

std::string format_iteration(const IterationLog& log) {
  char buf[256];
  std::snprintf(buf, sizeof buf, "iter\t%d\t%.10e\t%.10e\t%.10e\t%.6e\t%.6e", log.m, log.value, log.grad_norm,
                log.eps_norm, log.alpha, log.beta);
  return buf;
}

}  // namespace epsrecon
