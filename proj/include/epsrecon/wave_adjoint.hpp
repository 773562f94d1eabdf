#pragma once

#include "epsrecon/mesh.hpp"
#include "epsrecon/wave_forward.hpp"

namespace epsrecon {

/// Smooth data cut-off z_delta: 1 on [0, T - delta], 0 on [T - delta/2, T],
/// C^1 cubic blend in between.
struct CutoffZdelta {
  double t_final = 1.2;
  double delta = 0.12;

  /// delta = fraction * T.
  static CutoffZdelta make(double t_final, double fraction = 0.1);
  void validate() const;
};

/// Throws DomainError for t outside [0, T].
double zdelta_eval(const CutoffZdelta& z, double t);

/// Boundary source of the adjoint problem, z_delta(t) (g - E) per boundary
/// node and sample, with the end-point trapezoid weights folded in.
/// Stored as the Neumann part of a record.
BoundaryRecord make_adjoint_source(const BoundaryRecord& state_trace, const BoundaryRecord& data,
                                   const CutoffZdelta& cutoff);

/// Backward leapfrog with lambda(T) = lambda_t(T) = 0:
///   lambda^{k-1} = 2 lambda^k - lambda^{k+1} + dt^2 M^{-1}(S^k - K lambda^k),
/// k = N..2, with S^k = P^T (b o q^k) built from the Neumann part of the
/// source. This is the exact transpose of the discrete state map.
WaveHistory solve_adjoint(const CoefficientField& coefficient, const ForwardConfig& config,
                          const BoundaryRecord& source);

}  // namespace epsrecon
