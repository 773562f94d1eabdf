#include "epsrecon/mesh.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <map>
#include <numeric>
#include <sstream>

#include "epsrecon/errors.hpp"

namespace epsrecon {

namespace {

std::atomic<std::uint64_t> g_next_mesh_id{1};

std::uint64_t pack_cell(const LatticeKey& origin, int level) {
  return (static_cast<std::uint64_t>(level) << 60) | pack_key(origin);
}

int divisions(double extent, double h, const char* what) {
  const double ratio = extent / h;
  const double rounded = std::round(ratio);
  if (rounded < 1.0 || std::abs(ratio - rounded) > 1e-9 * std::max(1.0, ratio)) {
    std::ostringstream os;
    os << what << " extent " << extent << " is not a multiple of cell size " << h;
    throw GeometryError(os.str());
  }
  return static_cast<int>(rounded);
}

}  // namespace

std::uint64_t pack_key(const LatticeKey& k) {
  constexpr std::uint64_t mask = (1u << 20) - 1;
  return (static_cast<std::uint64_t>(k[0]) & mask) | ((static_cast<std::uint64_t>(k[1]) & mask) << 20) |
         ((static_cast<std::uint64_t>(k[2]) & mask) << 40);
}

bool Box::contains_open(const Vec3& p) const {
  for (int a = 0; a < 3; ++a)
    if (!(p[a] > lo[a] && p[a] < hi[a])) return false;
  return true;
}

bool Box::contains_closed(const Vec3& p, double slack) const {
  for (int a = 0; a < 3; ++a)
    if (p[a] < lo[a] - slack || p[a] > hi[a] + slack) return false;
  return true;
}

void DomainSpec::validate() const {
  for (int a = 0; a < 3; ++a) {
    if (!(g_bounds.hi[a] > g_bounds.lo[a])) throw GeometryError("G is degenerate");
    if (!(omega_bounds.hi[a] > omega_bounds.lo[a])) throw GeometryError("Omega is degenerate");
  }
  for (int a = 0; a < 2; ++a) {
    if (!(omega_bounds.lo[a] > g_bounds.lo[a] && omega_bounds.hi[a] < g_bounds.hi[a]))
      throw GeometryError("Omega must lie strictly inside G laterally");
  }
  const double mz = g_bounds.lo[2];
  if (!(mz < omega_bounds.lo[2] && omega_bounds.lo[2] < gamma_z && gamma_z < source_z))
    throw GeometryError("ordering -Z < -c < c1 < z0 violated");
  if (std::abs(omega_bounds.hi[2] - gamma_z) > 1e-12)
    throw GeometryError("the top face of Omega must lie on the backscattering plane z = c1");
  if (std::abs(g_bounds.hi[2] - source_z) > 1e-12)
    throw GeometryError("the incident plane must be the top face of G");
}

Box DomainSpec::gb_bounds() const {
  Box b = g_bounds;
  b.hi[2] = gamma_z;
  return b;
}

DomainSpec DomainSpec::standard() {
  DomainSpec s;
  s.g_bounds = {{-0.56, -0.56, -0.16}, {0.56, 0.56, 0.1}};
  s.omega_bounds = {{-0.5, -0.5, -0.1}, {0.5, 0.5, 0.04}};
  s.gamma_z = 0.04;
  s.source_z = 0.1;
  return s;
}

TimeGrid TimeGrid::make(double t_final, double dt, double t1) {
  TimeGrid g;
  g.t_final = t_final;
  g.dt = dt;
  g.t1 = t1;
  if (!(dt > 0.0)) throw ConfigError("time step must be positive");
  const double ratio = t_final / dt;
  g.n_steps = static_cast<int>(std::llround(ratio));
  if (g.n_steps < 1 || std::abs(ratio - g.n_steps) > 1e-6 * ratio)
    throw ConfigError("final time must be an integer multiple of the time step");
  g.dt = t_final / g.n_steps;
  g.validate();
  return g;
}

void TimeGrid::validate() const {
  if (!(dt > 0.0)) throw ConfigError("time step must be positive");
  if (!(t1 > 0.0 && t1 < t_final)) throw ConfigError("source shutoff time must lie in (0, T)");
  if (std::abs(n_steps * dt - t_final) > 1e-9 * t_final) throw ConfigError("n_steps * dt != T");
}

bool TimeGrid::same_as(const TimeGrid& o) const {
  return n_steps == o.n_steps && std::abs(dt - o.dt) <= 1e-12 * dt && std::abs(t_final - o.t_final) <= 1e-12 * t_final;
}

// ---------------------------------------------------------------------------

Mesh::Mesh(Box box, Box omega, double base_h, std::vector<Cell> cells)
    : id_(g_next_mesh_id++), box_(box), omega_(omega), base_h_(base_h), cells_(std::move(cells)) {
  for (int a = 0; a < 3; ++a) base_dims_[a] = divisions(box_.extent(a), base_h_, "box");

  std::int64_t covered = 0;
  const std::int64_t total = static_cast<std::int64_t>(base_dims_[0]) * base_dims_[1] * base_dims_[2] *
                             kLatticePerBase * kLatticePerBase * kLatticePerBase;
  cell_lookup_.reserve(cells_.size() * 2);
  for (int c = 0; c < n_cells(); ++c) {
    const Cell& cl = cells_[c];
    if (cl.level < 0 || cl.level > kMaxLevel) throw GeometryError("cell level out of range");
    const std::int32_t s = cl.size();
    for (int a = 0; a < 3; ++a) {
      if (cl.origin[a] < 0 || cl.origin[a] % s != 0 || cl.origin[a] + s > base_dims_[a] * kLatticePerBase)
        throw GeometryError("cell not aligned with the refinement lattice");
    }
    if (!cell_lookup_.emplace(pack_cell(cl.origin, cl.level), c).second) throw GeometryError("duplicate cell");
    covered += static_cast<std::int64_t>(s) * s * s;
    max_level_ = std::max(max_level_, cl.level);
  }
  if (covered != total) throw GeometryError("cells do not tile the box");
  // Dyadic cells are nested or disjoint; with matching volume, the absence
  // of nesting implies an exact tiling.
  for (const Cell& cl : cells_) {
    for (int l = cl.level - 1; l >= 0; --l) {
      const std::int32_t s = kLatticePerBase >> l;
      LatticeKey o{cl.origin[0] / s * s, cl.origin[1] / s * s, cl.origin[2] / s * s};
      if (cell_lookup_.count(pack_cell(o, l))) throw GeometryError("overlapping cells");
    }
  }

  in_omega_.resize(cells_.size());
  for (int c = 0; c < n_cells(); ++c) {
    const Cell& cl = cells_[c];
    Vec3 center;
    for (int a = 0; a < 3; ++a) {
      const std::int32_t base_origin = cl.origin[a] / kLatticePerBase * kLatticePerBase;
      center[a] = box_.lo[a] + (base_origin + 0.5 * kLatticePerBase) * lattice_unit();
    }
    in_omega_[c] = omega_.contains_open(center) ? 1 : 0;
    if (cl.level > 0 && !in_omega_[c]) throw GeometryError("refined cell outside Omega");
  }

  build_nodes();
  build_constraints();
  build_adjacency();
  build_boundary();
}

double Mesh::cell_volume(int c) const {
  const double h = cell_h(c);
  return h * h * h;
}

Vec3 Mesh::cell_center(int c) const {
  const Cell& cl = cells_[c];
  const double u = lattice_unit();
  return {box_.lo[0] + (cl.origin[0] + 0.5 * cl.size()) * u, box_.lo[1] + (cl.origin[1] + 0.5 * cl.size()) * u,
          box_.lo[2] + (cl.origin[2] + 0.5 * cl.size()) * u};
}

double Mesh::h_min() const { return (kLatticePerBase >> max_level_) * lattice_unit(); }

Vec3 Mesh::node_position(int v) const {
  const LatticeKey& k = node_keys_[v];
  const double u = lattice_unit();
  return {box_.lo[0] + k[0] * u, box_.lo[1] + k[1] * u, box_.lo[2] + k[2] * u};
}

int Mesh::find_node(const LatticeKey& key) const {
  auto it = node_lookup_.find(pack_key(key));
  return it == node_lookup_.end() ? -1 : it->second;
}

int Mesh::find_cell(const LatticeKey& origin, int level) const {
  auto it = cell_lookup_.find(pack_cell(origin, level));
  return it == cell_lookup_.end() ? -1 : it->second;
}

int Mesh::locate(const LatticeKey& p) const {
  for (int a = 0; a < 3; ++a)
    if (p[a] < 0 || p[a] >= base_dims_[a] * kLatticePerBase) return -1;
  for (int l = 0; l <= max_level_; ++l) {
    const std::int32_t s = kLatticePerBase >> l;
    const int c = find_cell({p[0] / s * s, p[1] / s * s, p[2] / s * s}, l);
    if (c >= 0) return c;
  }
  return -1;
}

bool Mesh::key_on_boundary(const LatticeKey& k) const {
  for (int a = 0; a < 3; ++a)
    if (k[a] == 0 || k[a] == base_dims_[a] * kLatticePerBase) return true;
  return false;
}

double Mesh::omega_volume() const {
  double v = 0.0;
  for (int c = 0; c < n_cells(); ++c)
    if (in_omega_[c]) v += cell_volume(c);
  return v;
}

void Mesh::build_nodes() {
  std::vector<LatticeKey> keys;
  keys.reserve(cells_.size() * 8);
  for (const Cell& cl : cells_) {
    const std::int32_t s = cl.size();
    for (int b = 0; b < 8; ++b)
      keys.push_back({cl.origin[0] + ((b & 1) ? s : 0), cl.origin[1] + ((b & 2) ? s : 0),
                      cl.origin[2] + ((b & 4) ? s : 0)});
  }
  auto zyx_less = [](const LatticeKey& a, const LatticeKey& b) {
    return std::tie(a[2], a[1], a[0]) < std::tie(b[2], b[1], b[0]);
  };
  std::sort(keys.begin(), keys.end(), zyx_less);
  keys.erase(std::unique(keys.begin(), keys.end()), keys.end());
  node_keys_ = std::move(keys);
  node_lookup_.reserve(node_keys_.size() * 2);
  for (int v = 0; v < n_nodes(); ++v) node_lookup_.emplace(pack_key(node_keys_[v]), v);

  cell_nodes_.resize(cells_.size());
  for (int c = 0; c < n_cells(); ++c) {
    const Cell& cl = cells_[c];
    const std::int32_t s = cl.size();
    for (int b = 0; b < 8; ++b)
      cell_nodes_[c][b] = find_node({cl.origin[0] + ((b & 1) ? s : 0), cl.origin[1] + ((b & 2) ? s : 0),
                                     cl.origin[2] + ((b & 4) ? s : 0)});
  }
}

void Mesh::build_constraints() {
  // Direct parents of each hanging node, claimed by the coarsest cell that
  // has the node in the interior of one of its edges or faces.
  std::vector<std::vector<int>> parents(node_keys_.size());
  std::vector<int> order(cells_.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return cells_[a].level < cells_[b].level; });

  for (int c : order) {
    const Cell& cl = cells_[c];
    if (cl.size() < 2) continue;
    const std::int32_t s = cl.size();
    const std::int32_t hs = s / 2;
    const auto& cn = cell_nodes_[c];
    // Edges: along axis a, the two other axes at offset 0 or s.
    for (int a = 0; a < 3; ++a) {
      const int b1 = (a + 1) % 3, b2 = (a + 2) % 3;
      for (int o1 = 0; o1 < 2; ++o1)
        for (int o2 = 0; o2 < 2; ++o2) {
          LatticeKey mid = cl.origin;
          mid[a] += hs;
          mid[b1] += o1 * s;
          mid[b2] += o2 * s;
          const int v = find_node(mid);
          if (v < 0 || !parents[v].empty()) continue;
          int lo_bits = (o1 << b1) | (o2 << b2);
          parents[v] = {cn[lo_bits], cn[lo_bits | (1 << a)]};
        }
    }
    // Faces: normal axis a, side 0 or 1.
    for (int a = 0; a < 3; ++a) {
      const int b1 = (a + 1) % 3, b2 = (a + 2) % 3;
      for (int side = 0; side < 2; ++side) {
        LatticeKey mid = cl.origin;
        mid[a] += side * s;
        mid[b1] += hs;
        mid[b2] += hs;
        const int v = find_node(mid);
        if (v < 0 || !parents[v].empty()) continue;
        const int base = side << a;
        parents[v] = {cn[base], cn[base | (1 << b1)], cn[base | (1 << b2)], cn[base | (1 << b1) | (1 << b2)]};
      }
    }
  }

  node_dof_.assign(node_keys_.size(), -1);
  dof_node_.clear();
  for (int v = 0; v < n_nodes(); ++v) {
    if (parents[v].empty()) {
      node_dof_[v] = static_cast<int>(dof_node_.size());
      dof_node_.push_back(v);
    }
  }
  n_dofs_ = static_cast<int>(dof_node_.size());

  // Resolve constraint chains; parents are always strictly coarser points.
  std::vector<std::vector<std::pair<int, double>>> rows(node_keys_.size());
  std::vector<std::uint8_t> done(node_keys_.size(), 0);
  auto resolve = [&](auto&& self, int v) -> const std::vector<std::pair<int, double>>& {
    if (done[v]) return rows[v];
    if (parents[v].empty()) {
      rows[v] = {{node_dof_[v], 1.0}};
    } else {
      std::map<int, double> acc;
      const double w = 1.0 / static_cast<double>(parents[v].size());
      for (int p : parents[v])
        for (const auto& [d, pw] : self(self, p)) acc[d] += w * pw;
      rows[v].assign(acc.begin(), acc.end());
    }
    done[v] = 1;
    return rows[v];
  };
  prolong_offsets_.assign(node_keys_.size() + 1, 0);
  prolong_.clear();
  for (int v = 0; v < n_nodes(); ++v) {
    const auto& r = resolve(resolve, v);
    prolong_.insert(prolong_.end(), r.begin(), r.end());
    prolong_offsets_[v + 1] = static_cast<int>(prolong_.size());
  }
}

void Mesh::build_adjacency() {
  adjacency_.resize(cells_.size());
  for (int c = 0; c < n_cells(); ++c) {
    const Cell& cl = cells_[c];
    const std::int32_t s = cl.size();
    for (int f = 0; f < 6; ++f) {
      auto& slot = adjacency_[c][f];
      slot.fill(-1);
      const int a = f / 2, side = f % 2;
      const int b1 = (a + 1) % 3, b2 = (a + 2) % 3;
      const std::int32_t across = side ? cl.origin[a] + s : cl.origin[a] - 1;
      if (across < 0 || across >= base_dims_[a] * kLatticePerBase) continue;
      const std::int32_t step = s >= 2 ? s / 2 : s;
      int count = 0;
      for (std::int32_t d1 = 0; d1 < s; d1 += step)
        for (std::int32_t d2 = 0; d2 < s; d2 += step) {
          LatticeKey p = cl.origin;
          p[a] = across;
          p[b1] += d1;
          p[b2] += d2;
          const int n = locate(p);
          if (n < 0) continue;
          if (std::find(slot.begin(), slot.begin() + count, n) == slot.begin() + count && count < 4)
            slot[count++] = n;
        }
    }
  }
}

void Mesh::build_boundary() {
  boundary_weight_.assign(node_keys_.size(), 0.0);
  boundary_slot_.assign(node_keys_.size(), -1);
  boundary_faces_.clear();
  const double u = lattice_unit();
  for (int c = 0; c < n_cells(); ++c) {
    const Cell& cl = cells_[c];
    const std::int32_t s = cl.size();
    for (int f = 0; f < 6; ++f) {
      const int a = f / 2, side = f % 2;
      const std::int32_t coord = cl.origin[a] + side * s;
      if (coord != 0 && coord != base_dims_[a] * kLatticePerBase) continue;
      const double area = (s * u) * (s * u);
      boundary_faces_.push_back({c, f, area});
      const int b1 = (a + 1) % 3, b2 = (a + 2) % 3;
      const int base = side << a;
      const auto& cn = cell_nodes_[c];
      for (int bits : {base, base | (1 << b1), base | (1 << b2), base | (1 << b1) | (1 << b2)})
        boundary_weight_[cn[bits]] += 0.25 * area;
    }
  }
  boundary_nodes_.clear();
  for (int v = 0; v < n_nodes(); ++v) {
    if (key_on_boundary(node_keys_[v])) {
      boundary_slot_[v] = static_cast<int>(boundary_nodes_.size());
      boundary_nodes_.push_back(v);
    }
  }
}

// ---------------------------------------------------------------------------

CoefficientField CoefficientField::constant(MeshPtr mesh, double value) {
  CoefficientField f;
  f.values.assign(mesh->n_cells(), value);
  f.mesh = std::move(mesh);
  return f;
}

CoefficientField CoefficientField::background(MeshPtr mesh, double inside) {
  CoefficientField f;
  f.values.resize(mesh->n_cells());
  for (int c = 0; c < mesh->n_cells(); ++c) f.values[c] = mesh->cell_in_omega(c) ? inside : 1.0;
  f.mesh = std::move(mesh);
  return f;
}

double CoefficientField::min_value() const { return *std::min_element(values.begin(), values.end()); }

double CoefficientField::max_in_omega() const {
  double m = 1.0;
  bool any = false;
  for (int c = 0; c < mesh->n_cells(); ++c)
    if (mesh->cell_in_omega(c)) {
      m = any ? std::max(m, values[c]) : values[c];
      any = true;
    }
  return m;
}

double CoefficientField::integral() const {
  double s = 0.0;
  for (int c = 0; c < mesh->n_cells(); ++c) s += values[c] * mesh->cell_volume(c);
  return s;
}

double CoefficientField::l2_norm_omega() const {
  double s = 0.0;
  for (int c = 0; c < mesh->n_cells(); ++c)
    if (mesh->cell_in_omega(c)) s += values[c] * values[c] * mesh->cell_volume(c);
  return std::sqrt(s);
}

void check_coefficient_invariants(const CoefficientField& eps) {
  if (!eps.mesh || static_cast<int>(eps.values.size()) != eps.mesh->n_cells())
    throw GeometryError("coefficient does not match its mesh");
  for (int c = 0; c < eps.mesh->n_cells(); ++c) {
    const double v = eps.values[c];
    if (!(v >= kEpsMin && v <= kEpsMax)) throw GeometryError("coefficient outside [1, 25]");
    if (!eps.mesh->cell_in_omega(c) && v != 1.0) throw GeometryError("coefficient differs from 1 outside Omega");
  }
}

MeshPtr build_box_mesh(const Box& box, const Box& omega, double h) {
  if (!(h > 0.0)) throw GeometryError("cell size must be positive");
  std::array<int, 3> n{};
  for (int a = 0; a < 3; ++a) n[a] = divisions(box.extent(a), h, "box");
  std::vector<Cell> cells;
  cells.reserve(static_cast<std::size_t>(n[0]) * n[1] * n[2]);
  for (int k = 0; k < n[2]; ++k)
    for (int j = 0; j < n[1]; ++j)
      for (int i = 0; i < n[0]; ++i)
        cells.push_back({{i * kLatticePerBase, j * kLatticePerBase, k * kLatticePerBase}, 0});
  return std::make_shared<const Mesh>(box, omega, h, std::move(cells));
}

MeshPtr build_base_mesh(const DomainSpec& spec, double h) {
  spec.validate();
  return build_box_mesh(spec.gb_bounds(), spec.omega_bounds, h);
}

MeshPtr embed_mesh(const Mesh& src, const Box& box) {
  const double h = src.base_h();
  std::array<int, 3> n{};
  LatticeKey offset{};
  for (int a = 0; a < 3; ++a) {
    n[a] = divisions(box.extent(a), h, "box");
    if (src.box().lo[a] < box.lo[a] - 1e-12 || src.box().hi[a] > box.hi[a] + 1e-12)
      throw GeometryError("embedding box does not contain the mesh box");
    const double shift = (src.box().lo[a] - box.lo[a]) / h;
    if (std::abs(shift - std::round(shift)) > 1e-9) throw GeometryError("boxes are not lattice aligned");
    offset[a] = static_cast<std::int32_t>(std::lround(shift)) * kLatticePerBase;
  }
  const auto& sd = src.base_dims();
  std::vector<Cell> cells;
  cells.reserve(static_cast<std::size_t>(n[0]) * n[1] * n[2] + src.n_cells());
  for (int k = 0; k < n[2]; ++k)
    for (int j = 0; j < n[1]; ++j)
      for (int i = 0; i < n[0]; ++i) {
        const int si = i - offset[0] / kLatticePerBase, sj = j - offset[1] / kLatticePerBase,
                  sk = k - offset[2] / kLatticePerBase;
        if (si >= 0 && si < sd[0] && sj >= 0 && sj < sd[1] && sk >= 0 && sk < sd[2]) continue;
        cells.push_back({{i * kLatticePerBase, j * kLatticePerBase, k * kLatticePerBase}, 0});
      }
  for (const Cell& cl : src.cells())
    cells.push_back({{cl.origin[0] + offset[0], cl.origin[1] + offset[1], cl.origin[2] + offset[2]}, cl.level});
  return std::make_shared<const Mesh>(box, src.omega(), h, std::move(cells));
}

MeshPtr refine_cells(const MeshPtr& mesh, std::span<const int> marked) {
  const int nc = mesh->n_cells();
  std::vector<std::uint8_t> refine(nc, 0), forbidden(nc, 0);
  for (int c : marked) {
    if (c < 0 || c >= nc) throw RefinementError("marked cell id out of range");
    if (!mesh->cell_in_omega(c)) throw RefinementError("marked cell lies outside Omega");
    if (mesh->cell(c).level >= kMaxLevel) throw RefinementError("maximum refinement level reached");
    refine[c] = 1;
  }
  if (marked.empty()) return mesh;

  bool changed = true;
  while (changed) {
    changed = false;
    for (int c = 0; c < nc; ++c) {
      if (!refine[c]) continue;
      const int lc = mesh->cell(c).level;
      bool drop = false;
      for (int f = 0; f < 6 && !drop; ++f)
        for (int n : mesh->neighbors(c, f)) {
          if (n < 0 || mesh->cell(n).level >= lc || refine[n]) continue;
          if (!mesh->cell_in_omega(n) || forbidden[n]) {
            drop = true;
            break;
          }
          refine[n] = 1;
          changed = true;
        }
      if (drop) {
        refine[c] = 0;
        forbidden[c] = 1;
        changed = true;
      }
    }
  }

  std::vector<Cell> cells;
  cells.reserve(nc + 7 * static_cast<std::size_t>(std::count(refine.begin(), refine.end(), 1)));
  for (int c = 0; c < nc; ++c) {
    const Cell& cl = mesh->cell(c);
    if (!refine[c]) {
      cells.push_back(cl);
      continue;
    }
    const std::int32_t hs = cl.size() / 2;
    for (int b = 0; b < 8; ++b)
      cells.push_back({{cl.origin[0] + ((b & 1) ? hs : 0), cl.origin[1] + ((b & 2) ? hs : 0),
                        cl.origin[2] + ((b & 4) ? hs : 0)},
                       cl.level + 1});
  }
  return std::make_shared<const Mesh>(mesh->box(), mesh->omega(), mesh->base_h(), std::move(cells));
}

namespace {

/// Volume-weighted transfer where dst lattice = src lattice + offset.
CoefficientField transfer(const CoefficientField& src, const MeshPtr& dst, const LatticeKey& offset) {
  const Mesh& sm = *src.mesh;
  const Mesh& dm = *dst;
  CoefficientField out;
  out.mesh = dst;
  out.values.assign(dm.n_cells(), 0.0);
  std::vector<double> covered(dm.n_cells(), 0.0);

  // Pass 1: source cells at least as fine as the destination cell holding
  // their centre.
  for (int c = 0; c < sm.n_cells(); ++c) {
    const Cell& cl = sm.cell(c);
    const std::int32_t hs = cl.size() / 2;
    LatticeKey p{cl.origin[0] + hs + offset[0], cl.origin[1] + hs + offset[1], cl.origin[2] + hs + offset[2]};
    const int d = dm.locate(p);
    if (d < 0 || dm.cell(d).level > cl.level) continue;
    const double vol = sm.cell_volume(c);
    out.values[d] += vol * src.values[c];
    covered[d] += vol;
  }
  // Pass 2: destination cells contained in a coarser source cell, or not
  // covered by the source at all.
  for (int d = 0; d < dm.n_cells(); ++d) {
    if (covered[d] > 0.0) {
      out.values[d] /= covered[d];
      continue;
    }
    const Cell& cl = dm.cell(d);
    const std::int32_t hs = cl.size() / 2;
    LatticeKey p{cl.origin[0] + hs - offset[0], cl.origin[1] + hs - offset[1], cl.origin[2] + hs - offset[2]};
    const int s = sm.locate(p);
    out.values[d] = s < 0 ? 1.0 : src.values[s];
  }
  for (int d = 0; d < dm.n_cells(); ++d)
    if (!dm.cell_in_omega(d)) out.values[d] = 1.0;
  return out;
}

}  // namespace

CoefficientField interpolate_coefficient(const CoefficientField& src, const MeshPtr& dst) {
  const Mesh& sm = *src.mesh;
  if (!(sm.box() == dst->box()) || !(sm.omega() == dst->omega()) ||
      std::abs(sm.base_h() - dst->base_h()) > 1e-12 * sm.base_h())
    throw GeometryError("meshes do not tile the same domain");
  if (static_cast<int>(src.values.size()) != sm.n_cells()) throw GeometryError("coefficient size mismatch");
  return transfer(src, dst, {0, 0, 0});
}

CoefficientField extend_coefficient(const CoefficientField& src, const MeshPtr& dst) {
  const Mesh& sm = *src.mesh;
  if (std::abs(sm.base_h() - dst->base_h()) > 1e-12 * sm.base_h())
    throw GeometryError("meshes use different base cell sizes");
  LatticeKey offset{};
  for (int a = 0; a < 3; ++a) {
    if (sm.box().lo[a] < dst->box().lo[a] - 1e-12 || sm.box().hi[a] > dst->box().hi[a] + 1e-12)
      throw GeometryError("destination box does not contain the source box");
    const double shift = (sm.box().lo[a] - dst->box().lo[a]) / sm.base_h();
    if (std::abs(shift - std::round(shift)) > 1e-9) throw GeometryError("boxes are not lattice aligned");
    offset[a] = static_cast<std::int32_t>(std::lround(shift)) * kLatticePerBase;
  }
  return transfer(src, dst, offset);
}

}  // namespace epsrecon
