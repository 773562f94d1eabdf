#pragma once

#include <array>
#include <cstdint>
#include <memory>
#include <span>
#include <unordered_map>
#include <utility>
#include <vector>

namespace epsrecon {

using Vec3 = std::array<double, 3>;

/// Axis-aligned box [lo, hi].
struct Box {
  Vec3 lo{};
  Vec3 hi{};

  double extent(int axis) const { return hi[axis] - lo[axis]; }
  double volume() const { return extent(0) * extent(1) * extent(2); }
  /// Open-box membership.
  bool contains_open(const Vec3& p) const;
  /// Closed-box membership with an absolute slack.
  bool contains_closed(const Vec3& p, double slack = 1e-12) const;
  bool operator==(const Box&) const = default;
};

/// Geometry of the computational domain G, the target region Omega, the
/// backscattering plane z = c1 and the incident plane z = z0.
///
/// G_b is the part of G below the backscattering plane. Gamma is the top
/// face of Omega, Gamma_1 its extension to the lateral boundary of G.
struct DomainSpec {
  Box g_bounds;
  Box omega_bounds;
  double gamma_z = 0.0;   ///< c1
  double source_z = 0.0;  ///< z0

  /// Throws GeometryError when the ordering or nesting invariants fail.
  void validate() const;
  Box gb_bounds() const;

  /// Default G, Omega and planes of the reference setup.
  static DomainSpec standard();
  bool operator==(const DomainSpec&) const = default;
};

/// Uniform time partition of (0, T).
struct TimeGrid {
  double t_final = 1.2;
  double dt = 0.003;
  int n_steps = 400;
  double t1 = 0.0;  ///< source shutoff time

  static TimeGrid make(double t_final, double dt, double t1);
  double time(int n) const { return n * dt; }
  int n_samples() const { return n_steps + 1; }
  void validate() const;
  bool same_as(const TimeGrid& o) const;
};

/// Refinement lattice: each base cell is split into 2^kMaxLevel lattice
/// units per axis, so every node of every admissible mesh has integer
/// coordinates.
inline constexpr int kMaxLevel = 8;
inline constexpr std::int32_t kLatticePerBase = 1 << kMaxLevel;

using LatticeKey = std::array<std::int32_t, 3>;

struct Cell {
  LatticeKey origin{};
  int level = 0;

  std::int32_t size() const { return kLatticePerBase >> level; }
};

/// Hexahedral cell mesh with dyadic refinement and hanging nodes.
///
/// Vertex order within a cell: bit 0 = +x, bit 1 = +y, bit 2 = +z.
/// Face order: 0 = -x, 1 = +x, 2 = -y, 3 = +y, 4 = -z, 5 = +z.
///
/// A mesh is immutable once built. Nodes that sit in the interior of an
/// edge or face of a coarser neighbour are hanging: their value is a
/// convex combination of free nodes, stored as one row of the
/// prolongation table.
class Mesh {
 public:
  struct BoundaryFace {
    int cell;
    int face;
    double area;
  };

  /// Build a mesh from an explicit cell list. Validates the tiling.
  Mesh(Box box, Box omega, double base_h, std::vector<Cell> cells);

  std::uint64_t id() const { return id_; }
  const Box& box() const { return box_; }
  const Box& omega() const { return omega_; }
  double base_h() const { return base_h_; }
  double lattice_unit() const { return base_h_ / kLatticePerBase; }
  const std::array<int, 3>& base_dims() const { return base_dims_; }

  int n_cells() const { return static_cast<int>(cells_.size()); }
  const Cell& cell(int c) const { return cells_[c]; }
  std::span<const Cell> cells() const { return cells_; }
  double cell_h(int c) const { return cells_[c].size() * lattice_unit(); }
  double cell_volume(int c) const;
  Vec3 cell_center(int c) const;
  /// Omega membership is inherited from the level-0 ancestor, whose centre
  /// decides it.
  bool cell_in_omega(int c) const { return in_omega_[c] != 0; }
  int max_level() const { return max_level_; }
  double h_min() const;

  int n_nodes() const { return static_cast<int>(node_keys_.size()); }
  const LatticeKey& node_key(int v) const { return node_keys_[v]; }
  Vec3 node_position(int v) const;
  /// -1 when absent.
  int find_node(const LatticeKey& key) const;
  const std::array<int, 8>& cell_nodes(int c) const { return cell_nodes_[c]; }

  int n_dofs() const { return n_dofs_; }
  bool has_hanging_nodes() const { return n_dofs_ != n_nodes(); }
  bool is_hanging(int v) const { return node_dof_[v] < 0; }
  /// Free-node index, -1 for hanging nodes.
  int node_dof(int v) const { return node_dof_[v]; }
  int dof_node(int d) const { return dof_node_[d]; }
  /// Row v of the prolongation: pairs (dof, weight) summing to one.
  std::span<const std::pair<int, double>> prolongation_row(int v) const {
    return {prolong_.data() + prolong_offsets_[v], prolong_.data() + prolong_offsets_[v + 1]};
  }

  /// Face neighbours of a cell across face f (up to 4, -1 padded).
  const std::array<int, 4>& neighbors(int c, int f) const { return adjacency_[c][f]; }
  /// Index of the cell containing the lattice point, -1 outside. A point on
  /// a shared face resolves to the cell on its upper side.
  int locate(const LatticeKey& point) const;
  int find_cell(const LatticeKey& origin, int level) const;

  std::span<const BoundaryFace> boundary_faces() const { return boundary_faces_; }
  /// Nodes on the box boundary in ascending node order.
  std::span<const int> boundary_nodes() const { return boundary_nodes_; }
  /// Lumped boundary weight (area / 4 per face corner), indexed by node.
  std::span<const double> boundary_weights() const { return boundary_weight_; }
  /// Position of a node in the boundary_nodes list, -1 for interior nodes.
  int boundary_slot(int v) const { return boundary_slot_[v]; }
  bool key_on_boundary(const LatticeKey& k) const;

  double omega_volume() const;

 private:
  void build_nodes();
  void build_constraints();
  void build_adjacency();
  void build_boundary();

  std::uint64_t id_;
  Box box_;
  Box omega_;
  double base_h_;
  std::array<int, 3> base_dims_{};
  std::vector<Cell> cells_;
  std::vector<std::uint8_t> in_omega_;
  int max_level_ = 0;
  std::unordered_map<std::uint64_t, int> cell_lookup_;

  std::vector<LatticeKey> node_keys_;
  std::unordered_map<std::uint64_t, int> node_lookup_;
  std::vector<std::array<int, 8>> cell_nodes_;

  int n_dofs_ = 0;
  std::vector<int> node_dof_;
  std::vector<int> dof_node_;
  std::vector<int> prolong_offsets_;
  std::vector<std::pair<int, double>> prolong_;

  std::vector<std::array<std::array<int, 4>, 6>> adjacency_;

  std::vector<BoundaryFace> boundary_faces_;
  std::vector<int> boundary_nodes_;
  std::vector<double> boundary_weight_;
  std::vector<int> boundary_slot_;
};

using MeshPtr = std::shared_ptr<const Mesh>;

/// Piecewise-constant relative permittivity, one value per cell.
struct CoefficientField {
  MeshPtr mesh;
  std::vector<double> values;

  static CoefficientField constant(MeshPtr mesh, double value);
  /// Constant inside Omega, exactly 1 outside.
  static CoefficientField background(MeshPtr mesh, double inside);
  std::uint64_t mesh_id() const { return mesh ? mesh->id() : 0; }
  double min_value() const;
  double max_in_omega() const;
  /// Integral over the cells of the mesh.
  double integral() const;
  double l2_norm_omega() const;
};

inline constexpr double kEpsMin = 1.0;
inline constexpr double kEpsMax = 25.0;

/// Throws GeometryError unless every value lies in [1, 25] and cells
/// outside Omega carry exactly 1.
void check_coefficient_invariants(const CoefficientField& eps);

/// Uniform level-0 tiling of G_b.
MeshPtr build_base_mesh(const DomainSpec& spec, double base_cell_size);
/// Uniform level-0 tiling of an arbitrary box sharing the lattice of Omega.
MeshPtr build_box_mesh(const Box& box, const Box& omega, double base_cell_size);

/// Same cells placed inside a larger, lattice-aligned box; the extra
/// region is tiled with level-0 cells.
MeshPtr embed_mesh(const Mesh& src, const Box& box);

/// Refine the marked cells (one bisection per axis) and close the result
/// under 2:1 face balance. Marks whose closure would need a cell outside
/// Omega refined are dropped. Throws RefinementError for marks outside
/// Omega or unknown ids.
MeshPtr refine_cells(const MeshPtr& mesh, std::span<const int> marked);

/// Volume-weighted transfer between two meshes of the same box. Works in
/// both directions of the refinement hierarchy.
CoefficientField interpolate_coefficient(const CoefficientField& src, const MeshPtr& dst);

/// Transfer onto a mesh of a box that contains the source box. Cells not
/// covered by the source get the background value 1.
CoefficientField extend_coefficient(const CoefficientField& src, const MeshPtr& dst);

/// Pack a lattice key into a hashable integer.
std::uint64_t pack_key(const LatticeKey& k);

}  // namespace epsrecon
