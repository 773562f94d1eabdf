#pragma once

#include <functional>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "epsrecon/mesh.hpp"
#include "epsrecon/wave_operator.hpp"

namespace epsrecon {

/// Incident pulse f(t) = sin(omega t) on (0, t1], t1 = 2 pi / omega.
struct SourceWaveform {
  double omega = 30.0;

  double t1() const;
  double eval(double t) const;
};

/// Node-wise time series on the boundary nodes of a mesh, samples at
/// t_n = n * dt. Layout [node][sample][component].
class BoundaryRecord {
 public:
  BoundaryRecord() = default;
  BoundaryRecord(Box box, double base_h, TimeGrid grid, std::vector<LatticeKey> nodes, bool with_dirichlet,
                 bool with_neumann);

  /// Empty record laid out on the boundary nodes of a mesh.
  static BoundaryRecord for_mesh(const Mesh& mesh, const TimeGrid& grid, bool with_dirichlet, bool with_neumann);

  const Box& box() const { return box_; }
  double base_h() const { return base_h_; }
  const TimeGrid& time_grid() const { return grid_; }
  const std::vector<LatticeKey>& nodes() const { return nodes_; }
  int n_nodes() const { return static_cast<int>(nodes_.size()); }
  int n_samples() const { return grid_.n_samples(); }
  bool has_dirichlet() const { return !dirichlet_.empty(); }
  bool has_neumann() const { return !neumann_.empty(); }

  std::span<double> dirichlet(int node, int sample);
  std::span<const double> dirichlet(int node, int sample) const;
  std::span<double> neumann(int node, int sample);
  std::span<const double> neumann(int node, int sample) const;
  std::vector<double>& dirichlet_data() { return dirichlet_; }
  const std::vector<double>& dirichlet_data() const { return dirichlet_; }
  std::vector<double>& neumann_data() { return neumann_; }
  const std::vector<double>& neumann_data() const { return neumann_; }

  /// Physical position of a record node.
  Vec3 node_position(int node) const;
  /// True when the node list equals the boundary nodes of the mesh.
  bool matches(const Mesh& mesh) const;
  /// Throws ShapeError unless the record fits the mesh and time grid.
  void check_compatible(const Mesh& mesh, const TimeGrid& grid) const;

  /// Resample onto the boundary of another mesh of the same box and onto
  /// another time grid: bilinear on boundary faces, linear in time.
  BoundaryRecord resample(const Mesh& mesh, const TimeGrid& grid) const;

 private:
  std::size_t index(int node, int sample) const {
    return (static_cast<std::size_t>(node) * grid_.n_samples() + sample) * 3;
  }

  Box box_{};
  double base_h_ = 0.0;
  TimeGrid grid_{};
  std::vector<LatticeKey> nodes_;
  std::vector<double> dirichlet_;
  std::vector<double> neumann_;
};

/// Full space-time field on all mesh nodes, layout [sample][node][component].
class WaveHistory {
 public:
  WaveHistory() = default;
  WaveHistory(MeshPtr mesh, TimeGrid grid);

  const MeshPtr& mesh() const { return mesh_; }
  const TimeGrid& time_grid() const { return grid_; }
  int n_samples() const { return grid_.n_samples(); }
  std::span<double> at(int sample);
  std::span<const double> at(int sample) const;
  std::span<const double> node(int sample, int v) const { return at(sample).subspan(3 * static_cast<std::size_t>(v), 3); }
  const std::vector<double>& data() const { return data_; }

 private:
  MeshPtr mesh_;
  TimeGrid grid_{};
  std::vector<double> data_;
};

struct ForwardConfig {
  double s = 1.0;
  TimeGrid time_grid;

  void validate() const;
};

/// Boundary force F = P^T (b o p) for one sample of boundary data p laid out
/// over the boundary nodes; result on all nodes.
using BoundaryForcing = std::function<void(int sample, std::span<double> force_all)>;
/// Called with each new sample (index, all-node field).
using SampleSink = std::function<void(int sample, std::span<const double> field_all)>;

/// Explicit leapfrog for M U'' + K U = F with U^0 = U^1 = 0:
///   U^{n+1} = 2U^n - U^{n-1} + dt^2 M^{-1} (F^n - K U^n),  n = 1..N-1.
/// The sink sees samples 0..N. Throws DivergenceError on non-finite values.
void leapfrog(const WaveOperator& op, const TimeGrid& grid, const BoundaryForcing& force, const SampleSink& sink);

/// Throws StabilityError when dt exceeds the stable step of the operator.
void check_stability(const Mesh& mesh, const CoefficientField& eps, double s, double dt);

struct ForwardResult {
  MeshPtr g_mesh;
  CoefficientField g_coefficient;
  /// Dirichlet and Neumann data on the boundary of G_b.
  BoundaryRecord record;
  /// Present when requested.
  std::optional<WaveHistory> history;
  /// Requested samples of the full field on the G mesh, all nodes.
  std::vector<std::pair<int, std::vector<double>>> snapshots;
};

/// Forward problem on the full domain G. The pulse (0, f(t), 0) enters
/// through the top face via dE/dn = -dE/dt + 2 f'(t) e_y, which is the
/// plain absorbing condition once t > t1; the bottom face absorbs and the
/// lateral faces carry zero flux. The
/// coefficient lives on a mesh of G_b and is extended by 1.
///
/// The Neumann record on the boundary of G_b is the discrete flux that the
/// exterior exerts on G_b, so solving in G_b with it reproduces the G run.
ForwardResult solve_forward_G(const DomainSpec& spec, const CoefficientField& coefficient, const ForwardConfig& config,
                              const SourceWaveform& waveform, bool keep_history = false,
                              std::span<const int> snapshot_samples = {});

/// State problem in G_b with zero initial data and Neumann data p on the
/// whole boundary.
WaveHistory solve_state_Gb(const CoefficientField& coefficient, const ForwardConfig& config,
                           const BoundaryRecord& neumann);

/// Same as solve_state_Gb but keeps only the boundary trace, stored as the
/// Dirichlet part of a record.
BoundaryRecord state_boundary_trace(const CoefficientField& coefficient, const ForwardConfig& config,
                                    const BoundaryRecord& neumann);

/// Boundary values of a history on its mesh, as the Dirichlet part of a
/// record.
BoundaryRecord boundary_trace(const WaveHistory& history);

}  // namespace epsrecon
