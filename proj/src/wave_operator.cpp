#include "epsrecon/wave_operator.hpp"

#include <algorithm>
#include <cmath>

#include "epsrecon/errors.hpp"

namespace epsrecon {

namespace {

ReferenceElement build_reference() {
  ReferenceElement r;
  r.grad_grad.setZero();
  r.div_div.setZero();
  const double g = 0.5 / std::sqrt(3.0);
  const double pts[2] = {0.5 - g, 0.5 + g};
  for (int q = 0; q < 8; ++q) {
    const double xi[3] = {pts[q & 1], pts[(q >> 1) & 1], pts[(q >> 2) & 1]};
    double grad[8][3];
    for (int b = 0; b < 8; ++b) {
      double f[3], df[3];
      for (int a = 0; a < 3; ++a) {
        const bool hi = (b >> a) & 1;
        f[a] = hi ? xi[a] : 1.0 - xi[a];
        df[a] = hi ? 1.0 : -1.0;
      }
      grad[b][0] = df[0] * f[1] * f[2];
      grad[b][1] = f[0] * df[1] * f[2];
      grad[b][2] = f[0] * f[1] * df[2];
    }
    const double w = 0.125;
    for (int a = 0; a < 8; ++a)
      for (int b = 0; b < 8; ++b) {
        r.grad_grad(a, b) += w * (grad[a][0] * grad[b][0] + grad[a][1] * grad[b][1] + grad[a][2] * grad[b][2]);
        for (int i = 0; i < 3; ++i)
          for (int j = 0; j < 3; ++j) r.div_div(3 * a + i, 3 * b + j) += w * grad[a][i] * grad[b][j];
      }
  }
  return r;
}

}  // namespace

const ReferenceElement& ReferenceElement::get() {
  static const ReferenceElement r = build_reference();
  return r;
}

WaveOperator::WaveOperator(MeshPtr mesh, std::span<const double> eps, double s)
    : mesh_(std::move(mesh)), eps_(eps.begin(), eps.end()), s_(s) {
  const Mesh& m = *mesh_;
  if (static_cast<int>(eps_.size()) != m.n_cells()) throw ShapeError("coefficient size does not match the mesh");
  if (!(s_ > 0.0)) throw ConfigError("stabilization parameter must be positive");
  const int nc = m.n_cells();
  cell_h_.resize(nc);
  cell_div_.resize(nc);
  mass_all_.assign(m.n_nodes(), 0.0);
  std::vector<int> counts(m.n_nodes() + 1, 0);
  for (int c = 0; c < nc; ++c) {
    const double h = m.cell_h(c);
    cell_h_[c] = h;
    cell_div_[c] = h * (s_ * eps_[c] - 1.0);
    for (int v : m.cell_nodes(c)) {
      mass_all_[v] += eps_[c] * h * h * h / 8.0;
      ++counts[v + 1];
    }
  }
  mass_dof_.assign(m.n_dofs(), 0.0);
  for (int v = 0; v < m.n_nodes(); ++v)
    for (const auto& [d, w] : m.prolongation_row(v)) mass_dof_[d] += w * mass_all_[v];

  incidence_offsets_.assign(m.n_nodes() + 1, 0);
  for (int v = 0; v < m.n_nodes(); ++v) incidence_offsets_[v + 1] = incidence_offsets_[v] + counts[v + 1];
  incidence_.assign(incidence_offsets_.back(), 0);
  std::vector<int> fill(incidence_offsets_.begin(), incidence_offsets_.end() - 1);
  for (int c = 0; c < nc; ++c)
    for (int b = 0; b < 8; ++b) incidence_[fill[m.cell_nodes(c)[b]]++] = 8 * c + b;
  scratch_.assign(static_cast<std::size_t>(nc) * 24, 0.0);
}

void WaveOperator::apply_all(std::span<const double> x_all, std::span<double> y_all) const {
  apply_impl({}, true, x_all, y_all);
}

void WaveOperator::apply_cells(std::span<const int> cells, std::span<const double> x_all,
                               std::span<double> y_all) const {
  apply_impl(cells, false, x_all, y_all);
}

void WaveOperator::apply_impl(std::span<const int> cells, bool all_cells, std::span<const double> x_all,
                              std::span<double> y_all) const {
  const Mesh& m = *mesh_;
  const auto& ref = ReferenceElement::get();
  const int nv = m.n_nodes();
  if (static_cast<int>(x_all.size()) != 3 * nv || static_cast<int>(y_all.size()) != 3 * nv)
    throw ShapeError("field size does not match the mesh");

  auto local = [&](int c, double* out) {
    Eigen::Matrix<double, 8, 3> x;
    const auto& cn = m.cell_nodes(c);
    for (int b = 0; b < 8; ++b)
      for (int i = 0; i < 3; ++i) x(b, i) = x_all[3 * cn[b] + i];
    Eigen::Map<Eigen::Matrix<double, 8, 3>> y(out);
    y.noalias() = cell_h_[c] * (ref.grad_grad * x);
    if (cell_div_[c] != 0.0) {
      Eigen::Matrix<double, 24, 1> xv;
      for (int b = 0; b < 8; ++b)
        for (int i = 0; i < 3; ++i) xv(3 * b + i) = x(b, i);
      const Eigen::Matrix<double, 24, 1> dv = cell_div_[c] * (ref.div_div * xv);
      for (int b = 0; b < 8; ++b)
        for (int i = 0; i < 3; ++i) y(b, i) += dv(3 * b + i);
    }
  };

  if (!all_cells) {
    std::fill(y_all.begin(), y_all.end(), 0.0);
    double buf[24];
    for (int c : cells) {
      local(c, buf);
      const auto& cn = m.cell_nodes(c);
      for (int b = 0; b < 8; ++b)
        for (int i = 0; i < 3; ++i) y_all[3 * cn[b] + i] += buf[b + 8 * i];
    }
    return;
  }

  const int nc = m.n_cells();
  double* scratch = scratch_.data();
#pragma omp parallel for schedule(static)
  for (int c = 0; c < nc; ++c) local(c, scratch + 24 * static_cast<std::size_t>(c));

  // Fixed summation order per node keeps results independent of threading.
#pragma omp parallel for schedule(static)
  for (int v = 0; v < nv; ++v) {
    double acc[3] = {0.0, 0.0, 0.0};
    for (int k = incidence_offsets_[v]; k < incidence_offsets_[v + 1]; ++k) {
      const int c = incidence_[k] / 8, b = incidence_[k] % 8;
      const double* y = scratch + 24 * static_cast<std::size_t>(c);
      for (int i = 0; i < 3; ++i) acc[i] += y[b + 8 * i];
    }
    for (int i = 0; i < 3; ++i) y_all[3 * v + i] = acc[i];
  }
}

void WaveOperator::expand(std::span<const double> x_dof, std::span<double> x_all) const {
  const Mesh& m = *mesh_;
  for (int v = 0; v < m.n_nodes(); ++v) {
    double acc[3] = {0.0, 0.0, 0.0};
    for (const auto& [d, w] : m.prolongation_row(v))
      for (int i = 0; i < 3; ++i) acc[i] += w * x_dof[3 * d + i];
    for (int i = 0; i < 3; ++i) x_all[3 * v + i] = acc[i];
  }
}

void WaveOperator::reduce(std::span<const double> y_all, std::span<double> y_dof) const {
  const Mesh& m = *mesh_;
  std::fill(y_dof.begin(), y_dof.end(), 0.0);
  for (int v = 0; v < m.n_nodes(); ++v)
    for (const auto& [d, w] : m.prolongation_row(v))
      for (int i = 0; i < 3; ++i) y_dof[3 * d + i] += w * y_all[3 * v + i];
}

void WaveOperator::apply_dof(std::span<const double> x_dof, std::span<double> y_dof) const {
  const int nv = mesh_->n_nodes();
  std::vector<double> xa(3 * static_cast<std::size_t>(nv)), ya(3 * static_cast<std::size_t>(nv));
  expand(x_dof, xa);
  apply_all(xa, ya);
  reduce(ya, y_dof);
}

double WaveOperator::energy(std::span<const double> u_dof, std::span<const double> v_dof) const {
  std::vector<double> ku(u_dof.size());
  apply_dof(u_dof, ku);
  double e = 0.0;
  for (std::size_t k = 0; k < u_dof.size(); ++k) e += 0.5 * mass_dof_[k / 3] * v_dof[k] * v_dof[k] + 0.5 * u_dof[k] * ku[k];
  return e;
}

double cfl_max_dt(const Mesh& mesh, const CoefficientField& coefficient, double s) {
  if (!(s > 0.0)) throw ConfigError("stabilization parameter must be positive");
  const double eps_min = coefficient.min_value();
  if (!(eps_min > 0.0)) throw GeometryError("coefficient must be positive");
  const double c2 = std::max(s, 1.0 / eps_min);
  return 0.9 * mesh.h_min() / (std::sqrt(3.0) * std::sqrt(c2));
}

}  // namespace epsrecon
