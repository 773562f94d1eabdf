#pragma once

#include <array>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "epsrecon/mesh.hpp"

namespace epsrecon {

enum class TargetKind { dielectric, metallic };
std::string to_string(TargetKind kind);

inline constexpr double kDielectricCutoff = 0.85;
inline constexpr double kMetallicCutoff = 0.3;
/// eps_max above this counts as a metallic-like target.
inline constexpr double kMetallicThreshold = 10.0;

inline double cutoff_for(TargetKind kind) { return kind == TargetKind::dielectric ? kDielectricCutoff : kMetallicCutoff; }
inline TargetKind classify(double eps_max) {
  return eps_max > kMetallicThreshold ? TargetKind::metallic : TargetKind::dielectric;
}

/// Keeps cells with eps >= cutoff * max_Omega eps, sets the rest to 1.
CoefficientField threshold_image(const CoefficientField& eps, TargetKind mode);

/// Omega cells with eps >= cutoff * max_Omega eps.
std::vector<int> support_cells(const CoefficientField& eps, TargetKind mode);
/// Bounding box of a set of cells; nullopt when empty.
std::optional<Box> bounding_box(const Mesh& mesh, const std::vector<int>& cells);

struct TargetReport {
  double eps_max = 1.0;
  double n_target = 1.0;
  TargetKind classification = TargetKind::dielectric;
  std::vector<int> support;
  std::optional<Box> box;

  /// Filled when a true coefficient is given.
  std::optional<double> n_true;
  std::optional<double> n_error;
  std::optional<Box> true_box;
  std::optional<std::array<double, 3>> extent_error;
};

TargetReport make_report(const CoefficientField& eps, const CoefficientField* truth = nullptr);

/// Table rows (label, report) in the column order
/// mesh, eps_max, n, n_error, class, box extents.
std::string report_table(const std::vector<std::pair<std::string, TargetReport>>& rows);

}  // namespace epsrecon
