#include "epsrecon/wave_forward.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "epsrecon/errors.hpp"

namespace epsrecon {

double SourceWaveform::t1() const { return 2.0 * std::numbers::pi / omega; }

double SourceWaveform::eval(double t) const {
  if (t <= 0.0 || t > t1() * (1.0 + 1e-12)) return 0.0;
  return std::sin(omega * t);
}

// ---------------------------------------------------------------------------

BoundaryRecord::BoundaryRecord(Box box, double base_h, TimeGrid grid, std::vector<LatticeKey> nodes,
                               bool with_dirichlet, bool with_neumann)
    : box_(box), base_h_(base_h), grid_(grid), nodes_(std::move(nodes)) {
  const std::size_t n = nodes_.size() * static_cast<std::size_t>(grid_.n_samples()) * 3;
  if (with_dirichlet) dirichlet_.assign(n, 0.0);
  if (with_neumann) neumann_.assign(n, 0.0);
}

BoundaryRecord BoundaryRecord::for_mesh(const Mesh& mesh, const TimeGrid& grid, bool with_dirichlet,
                                        bool with_neumann) {
  std::vector<LatticeKey> keys;
  keys.reserve(mesh.boundary_nodes().size());
  for (int v : mesh.boundary_nodes()) keys.push_back(mesh.node_key(v));
  return BoundaryRecord(mesh.box(), mesh.base_h(), grid, std::move(keys), with_dirichlet, with_neumann);
}

std::span<double> BoundaryRecord::dirichlet(int node, int sample) {
  return {dirichlet_.data() + index(node, sample), 3};
}
std::span<const double> BoundaryRecord::dirichlet(int node, int sample) const {
  return {dirichlet_.data() + index(node, sample), 3};
}
std::span<double> BoundaryRecord::neumann(int node, int sample) { return {neumann_.data() + index(node, sample), 3}; }
std::span<const double> BoundaryRecord::neumann(int node, int sample) const {
  return {neumann_.data() + index(node, sample), 3};
}

Vec3 BoundaryRecord::node_position(int node) const {
  const double u = base_h_ / kLatticePerBase;
  const LatticeKey& k = nodes_[node];
  return {box_.lo[0] + k[0] * u, box_.lo[1] + k[1] * u, box_.lo[2] + k[2] * u};
}

bool BoundaryRecord::matches(const Mesh& mesh) const {
  if (!(box_ == mesh.box()) || std::abs(base_h_ - mesh.base_h()) > 1e-12 * base_h_) return false;
  const auto bn = mesh.boundary_nodes();
  if (bn.size() != nodes_.size()) return false;
  for (std::size_t i = 0; i < bn.size(); ++i)
    if (mesh.node_key(bn[i]) != nodes_[i]) return false;
  return true;
}

void BoundaryRecord::check_compatible(const Mesh& mesh, const TimeGrid& grid) const {
  if (!matches(mesh)) throw ShapeError("boundary record does not match the mesh boundary");
  if (!grid_.same_as(grid)) throw ShapeError("boundary record uses a different time grid");
}

BoundaryRecord BoundaryRecord::resample(const Mesh& mesh, const TimeGrid& grid) const {
  if (!(box_ == mesh.box()) || std::abs(base_h_ - mesh.base_h()) > 1e-12 * base_h_)
    throw ShapeError("boundary record belongs to a different domain");
  if (std::abs(grid.t_final - grid_.t_final) > 1e-9 * grid_.t_final)
    throw ShapeError("boundary record covers a different time interval");

  std::unordered_map<std::uint64_t, int> lookup;
  lookup.reserve(nodes_.size() * 2);
  for (int i = 0; i < n_nodes(); ++i) lookup.emplace(pack_key(nodes_[i]), i);
  const auto& dims = mesh.base_dims();

  // Spatial stencil: exact node, or bilinear over the base-level face
  // containing the key.
  struct Stencil {
    int src[4];
    double w[4];
    int n;
  };
  BoundaryRecord out = for_mesh(mesh, grid, has_dirichlet(), has_neumann());
  std::vector<Stencil> stencils(out.n_nodes());
  for (int i = 0; i < out.n_nodes(); ++i) {
    const LatticeKey& k = out.nodes_[i];
    Stencil& st = stencils[i];
    if (auto it = lookup.find(pack_key(k)); it != lookup.end()) {
      st = {{it->second, 0, 0, 0}, {1.0, 0, 0, 0}, 1};
      continue;
    }
    int a = 0;
    while (a < 3 && k[a] != 0 && k[a] != dims[a] * kLatticePerBase) ++a;
    if (a == 3) throw ShapeError("record node is not on the boundary");
    const int b1 = (a + 1) % 3, b2 = (a + 2) % 3;
    std::int32_t lo1 = std::min(k[b1] / kLatticePerBase, dims[b1] - 1) * kLatticePerBase;
    std::int32_t lo2 = std::min(k[b2] / kLatticePerBase, dims[b2] - 1) * kLatticePerBase;
    const double x1 = static_cast<double>(k[b1] - lo1) / kLatticePerBase;
    const double x2 = static_cast<double>(k[b2] - lo2) / kLatticePerBase;
    st.n = 4;
    for (int c = 0; c < 4; ++c) {
      LatticeKey q = k;
      q[b1] = lo1 + ((c & 1) ? kLatticePerBase : 0);
      q[b2] = lo2 + ((c & 2) ? kLatticePerBase : 0);
      auto it = lookup.find(pack_key(q));
      if (it == lookup.end()) throw ShapeError("record lacks base-level boundary nodes");
      st.src[c] = it->second;
      st.w[c] = ((c & 1) ? x1 : 1.0 - x1) * ((c & 2) ? x2 : 1.0 - x2);
    }
  }

  const int ns_src = n_samples();
  for (int n = 0; n < out.n_samples(); ++n) {
    const double pos = std::clamp(grid.time(n) / grid_.dt, 0.0, static_cast<double>(ns_src - 1));
    const int n0 = std::min(static_cast<int>(pos), ns_src - 2);
    const double tw = pos - n0;
    for (int i = 0; i < out.n_nodes(); ++i) {
      const Stencil& st = stencils[i];
      for (int which = 0; which < 2; ++which) {
        if (which == 0 && !has_dirichlet()) continue;
        if (which == 1 && !has_neumann()) continue;
        const std::vector<double>& src = which == 0 ? dirichlet_ : neumann_;
        std::span<double> dst = which == 0 ? out.dirichlet(i, n) : out.neumann(i, n);
        for (int comp = 0; comp < 3; ++comp) {
          double acc = 0.0;
          for (int c = 0; c < st.n; ++c) {
            const double v0 = src[index(st.src[c], n0) + comp];
            const double v1 = src[index(st.src[c], n0 + 1) + comp];
            acc += st.w[c] * ((1.0 - tw) * v0 + tw * v1);
          }
          dst[comp] = acc;
        }
      }
    }
  }
  return out;
}

// ---------------------------------------------------------------------------

WaveHistory::WaveHistory(MeshPtr mesh, TimeGrid grid) : mesh_(std::move(mesh)), grid_(grid) {
  data_.assign(static_cast<std::size_t>(grid_.n_samples()) * mesh_->n_nodes() * 3, 0.0);
}

std::span<double> WaveHistory::at(int sample) {
  const std::size_t stride = static_cast<std::size_t>(mesh_->n_nodes()) * 3;
  return {data_.data() + sample * stride, stride};
}

std::span<const double> WaveHistory::at(int sample) const {
  const std::size_t stride = static_cast<std::size_t>(mesh_->n_nodes()) * 3;
  return {data_.data() + sample * stride, stride};
}

void ForwardConfig::validate() const {
  if (!(s >= 1.0)) throw ConfigError("stabilization parameter s must be >= 1");
  time_grid.validate();
}

void check_stability(const Mesh& mesh, const CoefficientField& eps, double s, double dt) {
  const double limit = cfl_max_dt(mesh, eps, s);
  if (dt > limit * (1.0 + 1e-12))
    throw StabilityError("time step " + std::to_string(dt) + " exceeds the stable limit " + std::to_string(limit));
}

void leapfrog(const WaveOperator& op, const TimeGrid& grid, const BoundaryForcing& force, const SampleSink& sink) {
  const Mesh& m = op.mesh();
  const std::size_t nd = 3 * static_cast<std::size_t>(m.n_dofs());
  const std::size_t na = 3 * static_cast<std::size_t>(m.n_nodes());
  std::vector<double> prev(nd, 0.0), cur(nd, 0.0), next(nd, 0.0);
  std::vector<double> ua(na, 0.0), ra(na, 0.0), fa(na, 0.0), rd(nd, 0.0);
  const auto mass = op.mass_dof();
  const double dt2 = grid.dt * grid.dt;

  if (sink) {
    sink(0, ua);
    sink(1, ua);
  }
  for (int n = 1; n < grid.n_steps; ++n) {
    std::fill(fa.begin(), fa.end(), 0.0);
    if (force) force(n, fa);
    op.apply_all(ua, ra);
    for (std::size_t k = 0; k < na; ++k) ra[k] = fa[k] - ra[k];
    op.reduce(ra, rd);
    double check = 0.0;
    for (std::size_t k = 0; k < nd; ++k) {
      next[k] = 2.0 * cur[k] - prev[k] + dt2 * rd[k] / mass[k / 3];
      check += next[k] * next[k];
    }
    if (!std::isfinite(check)) throw DivergenceError(n + 1, "non-finite field value");
    std::swap(prev, cur);
    std::swap(cur, next);
    op.expand(cur, ua);
    if (sink) sink(n + 1, ua);
  }
}

namespace {

void check_gb_coefficient(const CoefficientField& coefficient) {
  if (!coefficient.mesh) throw ShapeError("coefficient has no mesh");
  if (static_cast<int>(coefficient.values.size()) != coefficient.mesh->n_cells())
    throw ShapeError("coefficient size does not match the mesh");
}

BoundaryForcing neumann_forcing(const Mesh& mesh, const BoundaryRecord& record) {
  return [&mesh, &record](int n, std::span<double> fa) {
    const auto bn = mesh.boundary_nodes();
    const auto bw = mesh.boundary_weights();
    for (std::size_t i = 0; i < bn.size(); ++i) {
      const int v = bn[i];
      const auto p = record.neumann(static_cast<int>(i), n);
      for (int c = 0; c < 3; ++c) fa[3 * v + c] = bw[v] * p[c];
    }
  };
}

}  // namespace

WaveHistory solve_state_Gb(const CoefficientField& coefficient, const ForwardConfig& config,
                           const BoundaryRecord& neumann) {
  config.validate();
  check_gb_coefficient(coefficient);
  const Mesh& mesh = *coefficient.mesh;
  if (!neumann.has_neumann()) throw ShapeError("boundary record carries no Neumann data");
  neumann.check_compatible(mesh, config.time_grid);
  check_stability(mesh, coefficient, config.s, config.time_grid.dt);
  WaveOperator op(coefficient.mesh, coefficient.values, config.s);
  WaveHistory hist(coefficient.mesh, config.time_grid);
  leapfrog(op, config.time_grid, neumann_forcing(mesh, neumann), [&](int n, std::span<const double> u) {
    std::copy(u.begin(), u.end(), hist.at(n).begin());
  });
  return hist;
}

BoundaryRecord state_boundary_trace(const CoefficientField& coefficient, const ForwardConfig& config,
                                    const BoundaryRecord& neumann) {
  config.validate();
  check_gb_coefficient(coefficient);
  const Mesh& mesh = *coefficient.mesh;
  if (!neumann.has_neumann()) throw ShapeError("boundary record carries no Neumann data");
  neumann.check_compatible(mesh, config.time_grid);
  check_stability(mesh, coefficient, config.s, config.time_grid.dt);
  WaveOperator op(coefficient.mesh, coefficient.values, config.s);
  BoundaryRecord trace = BoundaryRecord::for_mesh(mesh, config.time_grid, true, false);
  const auto bn = mesh.boundary_nodes();
  leapfrog(op, config.time_grid, neumann_forcing(mesh, neumann), [&](int n, std::span<const double> u) {
    for (std::size_t i = 0; i < bn.size(); ++i) {
      auto d = trace.dirichlet(static_cast<int>(i), n);
      for (int c = 0; c < 3; ++c) d[c] = u[3 * bn[i] + c];
    }
  });
  return trace;
}

BoundaryRecord boundary_trace(const WaveHistory& history) {
  const Mesh& mesh = *history.mesh();
  BoundaryRecord trace = BoundaryRecord::for_mesh(mesh, history.time_grid(), true, false);
  const auto bn = mesh.boundary_nodes();
  for (int n = 0; n < history.n_samples(); ++n)
    for (std::size_t i = 0; i < bn.size(); ++i) {
      auto d = trace.dirichlet(static_cast<int>(i), n);
      const auto u = history.node(n, bn[i]);
      std::copy(u.begin(), u.end(), d.begin());
    }
  return trace;
}

ForwardResult solve_forward_G(const DomainSpec& spec, const CoefficientField& coefficient, const ForwardConfig& config,
                              const SourceWaveform& waveform, bool keep_history,
                              std::span<const int> snapshot_samples) {
  spec.validate();
  config.validate();
  check_gb_coefficient(coefficient);
  if (!(waveform.omega > 0.0)) throw ConfigError("frequency must be positive");
  const Box gb = spec.gb_bounds();
  const Mesh& gb_mesh = *coefficient.mesh;
  if (!(gb_mesh.box() == gb)) throw ShapeError("coefficient must live on a mesh of G_b");
  check_coefficient_invariants(coefficient);

  ForwardResult result;
  result.g_mesh = embed_mesh(gb_mesh, spec.g_bounds);
  const Mesh& gm = *result.g_mesh;
  result.g_coefficient = extend_coefficient(coefficient, result.g_mesh);
  const TimeGrid& grid = config.time_grid;
  check_stability(gm, result.g_coefficient, config.s, grid.dt);

  WaveOperator op(result.g_mesh, result.g_coefficient.values, config.s);
  const int nv = gm.n_nodes();
  const std::size_t na = 3 * static_cast<std::size_t>(nv);
  const std::int32_t ztop = gm.base_dims()[2] * kLatticePerBase;
  const std::int32_t kc1 = gb_mesh.base_dims()[2] * kLatticePerBase;

  // Damping weights of the absorbing faces (all-node, top and bottom).
  std::vector<double> c_top(nv, 0.0), c_bot(nv, 0.0);
  for (const auto& bf : gm.boundary_faces()) {
    if (bf.face != 4 && bf.face != 5) continue;
    const int side = bf.face % 2;
    const auto& cn = gm.cell_nodes(bf.cell);
    for (int b = 0; b < 8; ++b)
      if (((b >> 2) & 1) == side) (side ? c_top : c_bot)[cn[b]] += 0.25 * bf.area;
  }
  std::vector<std::uint8_t> top(nv, 0);
  for (int v = 0; v < nv; ++v) top[v] = gm.node_key(v)[2] == ztop;
  for (int v = 0; v < nv; ++v)
    if ((top[v] || gm.node_key(v)[2] == 0) && gm.is_hanging(v))
      throw GeometryError("absorbing faces must not carry hanging nodes");

  // Cells above the backscattering plane, and their lumped mass.
  std::vector<int> up_cells;
  std::vector<double> m_up(nv, 0.0);
  for (int c = 0; c < gm.n_cells(); ++c) {
    if (gm.cell(c).origin[2] < kc1) continue;
    up_cells.push_back(c);
    const double h = gm.cell_h(c);
    for (int v : gm.cell_nodes(c)) m_up[v] += result.g_coefficient.values[c] * h * h * h / 8.0;
  }

  // Boundary nodes of G_b inside G (same lattice origin).
  result.record = BoundaryRecord::for_mesh(gb_mesh, grid, true, true);
  BoundaryRecord& rec = result.record;
  std::vector<int> rec_node(rec.n_nodes());
  std::vector<double> rec_weight(rec.n_nodes());
  for (int i = 0; i < rec.n_nodes(); ++i) {
    rec_node[i] = gm.find_node(rec.nodes()[i]);
    if (rec_node[i] < 0) throw GeometryError("G_b boundary node missing from G");
    rec_weight[i] = gb_mesh.boundary_weights()[gb_mesh.boundary_nodes()[i]];
  }

  if (keep_history) result.history.emplace(result.g_mesh, grid);

  const std::size_t nd = 3 * static_cast<std::size_t>(gm.n_dofs());
  const auto mass = op.mass_dof();
  const double dt = grid.dt, dt2 = dt * dt;
  std::vector<double> prev(nd, 0.0), cur(nd, 0.0), next(nd, 0.0);
  std::vector<double> a_prev(na, 0.0), a_cur(na, 0.0), a_next(na, 0.0);
  std::vector<double> ka(na), kd(nd), kup(na);
  auto record_flux = [&](int n) {
    op.apply_cells(up_cells, a_cur, kup);
    for (int i = 0; i < rec.n_nodes(); ++i) {
      const int v = rec_node[i];
      auto p = rec.neumann(i, n);
      auto d = rec.dirichlet(i, n);
      for (int c = 0; c < 3; ++c) {
        const std::size_t k = 3 * static_cast<std::size_t>(v) + c;
        const double acc = (a_next[k] - 2.0 * a_cur[k] + a_prev[k]) / dt2;
        const double vel = (a_next[k] - a_prev[k]) / (2.0 * dt);
        p[c] = (-m_up[v] * acc - kup[k] - c_bot[v] * vel) / rec_weight[i];
        d[c] = a_cur[k];
      }
    }
  };

  for (int n = 0; n <= grid.n_steps; ++n) {
    // Incoming pulse through the top face, centered like the damping term.
    const double fdot = (waveform.eval(grid.time(n + 1)) - waveform.eval(grid.time(n) - dt)) / (2.0 * dt);
    op.apply_all(a_cur, ka);
    op.reduce(ka, kd);
    double check = 0.0;
    for (int d = 0; d < gm.n_dofs(); ++d) {
      const int v = gm.dof_node(d);
      const double cdamp = c_bot[v] + c_top[v];
      const double lhs = mass[d] / dt2 + cdamp / (2.0 * dt);
      for (int c = 0; c < 3; ++c) {
        const std::size_t k = 3 * static_cast<std::size_t>(d) + c;
        double rhs = mass[d] / dt2 * (2.0 * cur[k] - prev[k]) + cdamp / (2.0 * dt) * prev[k] - kd[k];
        if (c == 1) rhs += 2.0 * c_top[v] * fdot;
        next[k] = rhs / lhs;
        check += next[k] * next[k];
      }
    }
    if (!std::isfinite(check)) throw DivergenceError(n + 1, "non-finite field value");
    op.expand(next, a_next);
    record_flux(n);
    if (result.history) std::copy(a_cur.begin(), a_cur.end(), result.history->at(n).begin());
    if (std::find(snapshot_samples.begin(), snapshot_samples.end(), n) != snapshot_samples.end())
      result.snapshots.emplace_back(n, a_cur);
    std::swap(prev, cur);
    std::swap(cur, next);
    std::swap(a_prev, a_cur);
    std::swap(a_cur, a_next);
  }
  return result;
}

}  // namespace epsrecon
