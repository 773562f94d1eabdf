#pragma once

#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "epsrecon/data_pipeline.hpp"
#include "epsrecon/mesh.hpp"
#include "epsrecon/wave_forward.hpp"

namespace epsrecon {

/// Binary coefficient container, little-endian:
///   "WSMESH1\n", u32 version, f64 box[6], f64 omega[6], f64 base_h,
///   u64 n_cells, then per cell i32 level, i32 origin[3] (lattice units),
///   f64 size, f64 value.
void write_coefficient(const std::filesystem::path& path, const CoefficientField& eps);
CoefficientField read_coefficient(const std::filesystem::path& path);

/// Binary boundary record container, little-endian:
///   "WSBND1\n", u32 version, f64 box[6], f64 base_h,
///   f64 t_final, f64 dt, f64 t1, i64 n_steps, u8 has_dirichlet,
///   u8 has_neumann, u64 n_nodes, i32 node[3] per node (lattice units),
///   then the Dirichlet and Neumann samples as f64 [node][sample][3].
void write_record(const std::filesystem::path& path, const BoundaryRecord& record);
BoundaryRecord read_record(const std::filesystem::path& path);

/// Text grid: "# nx ny nt dx dt x0 y0 z", one line with those values,
/// then one line of nt samples per detector, ix major.
void write_plane_text(const std::filesystem::path& path, const MeasurementPlaneData& data);
MeasurementPlaneData read_plane_text(const std::filesystem::path& path);

/// Legacy VTK ASCII unstructured grid of hexahedra with cell scalars.
void write_vtk_cells(const std::filesystem::path& path, const Mesh& mesh,
                     const std::map<std::string, std::span<const double>>& cell_fields);
/// Same with one node vector field (all nodes, 3 components each).
void write_vtk_vectors(const std::filesystem::path& path, const Mesh& mesh, const std::string& name,
                       std::span<const double> node_vectors);

}  // namespace epsrecon
