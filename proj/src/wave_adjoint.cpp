#include "epsrecon/wave_adjoint.hpp"

#include <algorithm>
#include <cmath>

#include "epsrecon/errors.hpp"

namespace epsrecon {

CutoffZdelta CutoffZdelta::make(double t_final, double fraction) {
  CutoffZdelta z{t_final, fraction * t_final};
  z.validate();
  return z;
}

void CutoffZdelta::validate() const {
  if (!(t_final > 0.0)) throw ConfigError("final time must be positive");
  if (!(delta > 0.0 && delta < t_final)) throw ConfigError("cut-off width must lie in (0, T)");
}

double zdelta_eval(const CutoffZdelta& z, double t) {
  const double slack = 1e-12 * z.t_final;
  if (!(t >= -slack && t <= z.t_final + slack)) throw DomainError("time outside [0, T]");
  const double start = z.t_final - z.delta;
  const double stop = z.t_final - 0.5 * z.delta;
  if (t <= start) return 1.0;
  if (t >= stop) return 0.0;
  const double u = (t - start) / (stop - start);
  return 1.0 - u * u * (3.0 - 2.0 * u);
}

BoundaryRecord make_adjoint_source(const BoundaryRecord& state_trace, const BoundaryRecord& data,
                                   const CutoffZdelta& cutoff) {
  if (!state_trace.has_dirichlet() || !data.has_dirichlet()) throw ShapeError("traces carry no boundary values");
  if (state_trace.nodes() != data.nodes() || !state_trace.time_grid().same_as(data.time_grid()))
    throw ShapeError("state trace and data are laid out differently");
  const TimeGrid& grid = state_trace.time_grid();
  BoundaryRecord src(state_trace.box(), state_trace.base_h(), grid, state_trace.nodes(), false, true);
  for (int n = 0; n < grid.n_samples(); ++n) {
    const double w = (n == 0 || n == grid.n_steps) ? 0.5 : 1.0;
    const double z = w * zdelta_eval(cutoff, grid.time(n));
    for (int i = 0; i < src.n_nodes(); ++i) {
      auto q = src.neumann(i, n);
      const auto e = state_trace.dirichlet(i, n);
      const auto g = data.dirichlet(i, n);
      for (int c = 0; c < 3; ++c) q[c] = z * (g[c] - e[c]);
    }
  }
  return src;
}

WaveHistory solve_adjoint(const CoefficientField& coefficient, const ForwardConfig& config,
                          const BoundaryRecord& source) {
  config.validate();
  if (!coefficient.mesh || static_cast<int>(coefficient.values.size()) != coefficient.mesh->n_cells())
    throw ShapeError("coefficient does not match its mesh");
  const Mesh& mesh = *coefficient.mesh;
  if (!source.has_neumann()) throw ShapeError("adjoint source carries no data");
  source.check_compatible(mesh, config.time_grid);
  check_stability(mesh, coefficient, config.s, config.time_grid.dt);

  // Reversed index j = N + 1 - k turns the backward sweep into the forward
  // leapfrog with zero start values.
  const TimeGrid& grid = config.time_grid;
  const int N = grid.n_steps;
  WaveOperator op(coefficient.mesh, coefficient.values, config.s);
  WaveHistory hist(coefficient.mesh, grid);
  const auto bn = mesh.boundary_nodes();
  const auto bw = mesh.boundary_weights();
  // Samples j = 0..N map to k = N+1..1; lambda^0 never enters the gradient
  // and stays zero.
  leapfrog(
      op, grid,
      [&](int j, std::span<double> fa) {
        const int k = N + 1 - j;
        for (std::size_t i = 0; i < bn.size(); ++i) {
          const auto q = source.neumann(static_cast<int>(i), k);
          for (int c = 0; c < 3; ++c) fa[3 * bn[i] + c] = bw[bn[i]] * q[c];
        }
      },
      [&](int j, std::span<const double> u) {
        const int k = N + 1 - j;
        if (k >= 1 && k <= N) std::copy(u.begin(), u.end(), hist.at(k).begin());
      });
  return hist;
}

}  // namespace epsrecon
