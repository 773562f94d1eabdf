#pragma once

#include <span>
#include <vector>

#include "epsrecon/mesh.hpp"
#include "epsrecon/wave_adjoint.hpp"
#include "epsrecon/wave_forward.hpp"

namespace epsrecon {

/// Regularization gamma/2 ||eps - eps_glob||^2 over Omega.
struct TikhonovConfig {
  double gamma = 0.01;
  CoefficientField eps_glob;

  void validate() const;
};

/// Cell-wise gradient density of the Lagrangian with respect to eps, zero
/// outside Omega. Its pairing with a perturbation d is sum |K| g_K d_K.
struct GradientField {
  MeshPtr mesh;
  std::vector<double> values;
  std::vector<double> data_part;
  std::vector<double> regularization_part;

  double norm_l2() const;
};

struct MisfitValue {
  double data = 0.0;
  double regularization = 0.0;
  double total() const { return data + regularization; }
};

/// L2 inner product over Omega of two cell-wise fields.
double inner_omega(const Mesh& mesh, std::span<const double> a, std::span<const double> b);
double norm_omega(const Mesh& mesh, std::span<const double> a);

/// 1/2 sum_v b_v sum_k w_k z(t_k) |E - g|^2 (trapezoid in time, lumped
/// boundary weights) plus the regularization term.
MisfitValue evaluate_misfit(const BoundaryRecord& state_trace, const BoundaryRecord& data, const CutoffZdelta& cutoff,
                            const CoefficientField& eps, const TikhonovConfig& tikhonov);

/// Gradient density from the state and adjoint histories:
///   gamma (eps - eps_glob)
///   - 1/|K| sum_n (lambda^{n+1} - lambda^n)^T dM/deps_K (E^{n+1} - E^n) / dt
///   + 1/|K| sum_n dt lambda^n^T dK/deps_K E^n.
GradientField assemble_gradient(const WaveHistory& state, const WaveHistory& adjoint, const CoefficientField& eps,
                                const TikhonovConfig& tikhonov, double s);

/// Objective evaluation for one mesh: Neumann data p drives the state,
/// the misfit compares its boundary trace with g.
class Objective {
 public:
  virtual ~Objective() = default;
  virtual const MeshPtr& mesh() const = 0;
  virtual double value(const CoefficientField& eps) = 0;
  virtual double value_and_gradient(const CoefficientField& eps, GradientField& gradient) = 0;
};

class MeshObjective : public Objective {
 public:
  /// `data` carries p (Neumann) and g (Dirichlet) on the boundary of the
  /// mesh of `tikhonov.eps_glob`.
  MeshObjective(ForwardConfig config, BoundaryRecord data, CutoffZdelta cutoff, TikhonovConfig tikhonov);

  const MeshPtr& mesh() const override { return tikhonov_.eps_glob.mesh; }
  double value(const CoefficientField& eps) override;
  double value_and_gradient(const CoefficientField& eps, GradientField& gradient) override;
  MisfitValue misfit(const CoefficientField& eps);

  const ForwardConfig& config() const { return config_; }
  const BoundaryRecord& data() const { return data_; }
  const TikhonovConfig& tikhonov() const { return tikhonov_; }
  int state_solves() const { return state_solves_; }

 private:
  ForwardConfig config_;
  BoundaryRecord data_;
  CutoffZdelta cutoff_;
  TikhonovConfig tikhonov_;
  int state_solves_ = 0;
};

}  // namespace epsrecon
