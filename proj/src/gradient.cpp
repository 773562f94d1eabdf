#include "epsrecon/gradient.hpp"

#include <cmath>

#include <Eigen/Core>

#include "epsrecon/errors.hpp"
#include "epsrecon/wave_operator.hpp"

namespace epsrecon {

void TikhonovConfig::validate() const {
  if (!(gamma >= 0.0)) throw ConfigError("regularization parameter must be non-negative");
  if (!eps_glob.mesh) throw ConfigError("regularization needs a reference coefficient");
}

double GradientField::norm_l2() const { return norm_omega(*mesh, values); }

double inner_omega(const Mesh& mesh, std::span<const double> a, std::span<const double> b) {
  if (static_cast<int>(a.size()) != mesh.n_cells() || static_cast<int>(b.size()) != mesh.n_cells())
    throw ShapeError("cell field size does not match the mesh");
  double s = 0.0;
  for (int c = 0; c < mesh.n_cells(); ++c)
    if (mesh.cell_in_omega(c)) s += mesh.cell_volume(c) * a[c] * b[c];
  return s;
}

double norm_omega(const Mesh& mesh, std::span<const double> a) { return std::sqrt(inner_omega(mesh, a, a)); }

namespace {

void check_same_mesh(const CoefficientField& eps, const TikhonovConfig& tik) {
  if (tik.eps_glob.mesh_id() != eps.mesh_id())
    throw ShapeError("reference coefficient lives on a different mesh");
}

}  // namespace

MisfitValue evaluate_misfit(const BoundaryRecord& state_trace, const BoundaryRecord& data, const CutoffZdelta& cutoff,
                            const CoefficientField& eps, const TikhonovConfig& tikhonov) {
  tikhonov.validate();
  check_same_mesh(eps, tikhonov);
  const Mesh& mesh = *eps.mesh;
  if (!state_trace.has_dirichlet() || !data.has_dirichlet()) throw ShapeError("traces carry no boundary values");
  if (!state_trace.matches(mesh) || !data.matches(mesh)) throw ShapeError("traces do not match the mesh boundary");
  const TimeGrid& grid = state_trace.time_grid();
  if (!grid.same_as(data.time_grid())) throw ShapeError("traces use different time grids");

  MisfitValue out;
  const auto bn = mesh.boundary_nodes();
  const auto bw = mesh.boundary_weights();
  for (int n = 0; n < grid.n_samples(); ++n) {
    const double w = ((n == 0 || n == grid.n_steps) ? 0.5 : 1.0) * grid.dt * zdelta_eval(cutoff, grid.time(n));
    if (w == 0.0) continue;
    double acc = 0.0;
    for (int i = 0; i < state_trace.n_nodes(); ++i) {
      const auto e = state_trace.dirichlet(i, n);
      const auto g = data.dirichlet(i, n);
      double d2 = 0.0;
      for (int c = 0; c < 3; ++c) d2 += (e[c] - g[c]) * (e[c] - g[c]);
      acc += bw[bn[i]] * d2;
    }
    out.data += 0.5 * w * acc;
  }
  for (int c = 0; c < mesh.n_cells(); ++c) {
    if (!mesh.cell_in_omega(c)) continue;
    const double d = eps.values[c] - tikhonov.eps_glob.values[c];
    out.regularization += 0.5 * tikhonov.gamma * mesh.cell_volume(c) * d * d;
  }
  return out;
}

GradientField assemble_gradient(const WaveHistory& state, const WaveHistory& adjoint, const CoefficientField& eps,
                                const TikhonovConfig& tikhonov, double s) {
  tikhonov.validate();
  check_same_mesh(eps, tikhonov);
  const Mesh& mesh = *eps.mesh;
  if (state.mesh().get() != &mesh || adjoint.mesh().get() != &mesh)
    throw ShapeError("histories do not live on the coefficient mesh");
  const TimeGrid& grid = state.time_grid();
  if (!grid.same_as(adjoint.time_grid())) throw ShapeError("state and adjoint use different time grids");
  const int N = grid.n_steps;
  const double dt = grid.dt;
  const int nv = mesh.n_nodes();
  const int nc = mesh.n_cells();

  // Time-summed products of the discrete time derivatives, per free node.
  std::vector<double> dot_dt(nv, 0.0);
  for (int n = 0; n < N; ++n) {
    const auto e0 = state.at(n), e1 = state.at(n + 1);
    const auto l0 = adjoint.at(n), l1 = adjoint.at(n + 1);
    for (int v = 0; v < nv; ++v) {
      if (mesh.is_hanging(v)) continue;
      double acc = 0.0;
      for (int c = 0; c < 3; ++c) acc += (l1[3 * v + c] - l0[3 * v + c]) * (e1[3 * v + c] - e0[3 * v + c]);
      dot_dt[v] += acc;
    }
  }

  std::vector<int> omega_cells;
  for (int c = 0; c < nc; ++c)
    if (mesh.cell_in_omega(c)) omega_cells.push_back(c);

  // Element div-div pairing summed in time.
  const auto& ref = ReferenceElement::get();
  std::vector<double> divdiv(nc, 0.0);
  const int nw = static_cast<int>(omega_cells.size());
#pragma omp parallel for schedule(static)
  for (int i = 0; i < nw; ++i) {
    const int c = omega_cells[i];
    const auto& cn = mesh.cell_nodes(c);
    double acc = 0.0;
    Eigen::Matrix<double, 24, 1> e, l;
    for (int n = 1; n < N; ++n) {
      const auto en = state.at(n), ln = adjoint.at(n);
      for (int b = 0; b < 8; ++b)
        for (int k = 0; k < 3; ++k) {
          e(3 * b + k) = en[3 * cn[b] + k];
          l(3 * b + k) = ln[3 * cn[b] + k];
        }
      acc += l.dot(ref.div_div * e);
    }
    divdiv[c] = acc;
  }

  GradientField g;
  g.mesh = eps.mesh;
  g.values.assign(nc, 0.0);
  g.data_part.assign(nc, 0.0);
  g.regularization_part.assign(nc, 0.0);
  for (int c : omega_cells) {
    const double h = mesh.cell_h(c);
    double mass_term = 0.0;
    for (int v : mesh.cell_nodes(c))
      for (const auto& [d, w] : mesh.prolongation_row(v)) mass_term += w * dot_dt[mesh.dof_node(d)];
    const double data = -mass_term / (8.0 * dt) + s / (h * h) * dt * divdiv[c];
    const double reg = tikhonov.gamma * (eps.values[c] - tikhonov.eps_glob.values[c]);
    g.data_part[c] = data;
    g.regularization_part[c] = reg;
    g.values[c] = data + reg;
  }
  return g;
}

MeshObjective::MeshObjective(ForwardConfig config, BoundaryRecord data, CutoffZdelta cutoff, TikhonovConfig tikhonov)
    : config_(std::move(config)), data_(std::move(data)), cutoff_(cutoff), tikhonov_(std::move(tikhonov)) {
  config_.validate();
  cutoff_.validate();
  tikhonov_.validate();
  if (!data_.has_dirichlet() || !data_.has_neumann()) throw ShapeError("objective needs both p and g");
  data_.check_compatible(*tikhonov_.eps_glob.mesh, config_.time_grid);
}

MisfitValue MeshObjective::misfit(const CoefficientField& eps) {
  ++state_solves_;
  const auto trace = state_boundary_trace(eps, config_, data_);
  return evaluate_misfit(trace, data_, cutoff_, eps, tikhonov_);
}

double MeshObjective::value(const CoefficientField& eps) { return misfit(eps).total(); }

double MeshObjective::value_and_gradient(const CoefficientField& eps, GradientField& gradient) {
  ++state_solves_;
  const auto state = solve_state_Gb(eps, config_, data_);
  const auto trace = boundary_trace(state);
  const double value = evaluate_misfit(trace, data_, cutoff_, eps, tikhonov_).total();
  const auto source = make_adjoint_source(trace, data_, cutoff_);
  const auto adjoint = solve_adjoint(eps, config_, source);
  gradient = assemble_gradient(state, adjoint, eps, tikhonov_, config_.s);
  return value;
}

}  // namespace epsrecon
