#pragma once

#include <span>
#include <vector>

#include <Eigen/Core>

#include "epsrecon/mesh.hpp"

namespace epsrecon {

/// Reference element integrals on the unit cube for trilinear shape
/// functions, exact (2x2x2 Gauss).
struct ReferenceElement {
  /// grad-grad block, identical for each field component.
  Eigen::Matrix<double, 8, 8> grad_grad;
  /// div-div coupling, index 3*vertex + component.
  Eigen::Matrix<double, 24, 24> div_div;

  static const ReferenceElement& get();
};

/// Spatial operator of the stabilized vector wave system on one mesh.
///
/// Per cell of size h and permittivity eps the bilinear form is
///   h * [grad_grad (x) I3 + (s*eps - 1) * div_div]
/// which is the cellwise form of
///   int grad E : grad v - int div E div v + s int div(eps E) div v
/// with a piecewise-constant eps. The mass is lumped (|K|/8 per vertex,
/// weighted by eps) and then reduced onto the free nodes.
///
/// Vectors indexed by "all" nodes hold 3 interleaved components per mesh
/// node; "dof" vectors hold 3 components per free node.
class WaveOperator {
 public:
  WaveOperator(MeshPtr mesh, std::span<const double> eps, double s);

  const Mesh& mesh() const { return *mesh_; }
  const MeshPtr& mesh_ptr() const { return mesh_; }
  double s() const { return s_; }
  std::span<const double> eps() const { return eps_; }

  /// Lumped mass per free node.
  std::span<const double> mass_dof() const { return mass_dof_; }
  /// Lumped mass per mesh node before reduction.
  std::span<const double> mass_all() const { return mass_all_; }

  /// y_all = K x_all, summed over all cells.
  void apply_all(std::span<const double> x_all, std::span<double> y_all) const;
  /// y_all = K x_all restricted to the listed cells.
  void apply_cells(std::span<const int> cells, std::span<const double> x_all, std::span<double> y_all) const;
  /// y_dof = P^T K P x_dof.
  void apply_dof(std::span<const double> x_dof, std::span<double> y_dof) const;

  /// x_all = P x_dof.
  void expand(std::span<const double> x_dof, std::span<double> x_all) const;
  /// y_dof = P^T y_all.
  void reduce(std::span<const double> y_all, std::span<double> y_dof) const;

  /// Discrete energy 0.5 v^T M v + 0.5 u^T K u for dof vectors.
  double energy(std::span<const double> u_dof, std::span<const double> v_dof) const;

 private:
  void apply_impl(std::span<const int> cells, bool all_cells, std::span<const double> x_all,
                  std::span<double> y_all) const;

  MeshPtr mesh_;
  std::vector<double> eps_;
  double s_;
  std::vector<double> cell_h_;
  std::vector<double> cell_div_;  ///< h * (s*eps - 1)
  std::vector<double> mass_all_;
  std::vector<double> mass_dof_;
  // node -> incident (cell * 8 + local vertex), for a fixed-order gather.
  std::vector<int> incidence_offsets_;
  std::vector<int> incidence_;
  mutable std::vector<double> scratch_;
};

/// Largest stable leapfrog step for the mesh: 0.9 * h_min / (sqrt(3) * c_max)
/// where c_max^2 = max(s, 1/eps_min) covers the transverse speed 1/sqrt(eps)
/// and the longitudinal speed sqrt(s) of the stabilized system.
double cfl_max_dt(const Mesh& mesh, const CoefficientField& coefficient, double s);

}  // namespace epsrecon
