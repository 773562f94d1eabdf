#include "epsrecon/postprocess.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

namespace epsrecon {

std::string to_string(TargetKind kind) { return kind == TargetKind::dielectric ? "dielectric" : "metallic"; }

std::vector<int> support_cells(const CoefficientField& eps, TargetKind mode) {
  const Mesh& mesh = *eps.mesh;
  const double cut = cutoff_for(mode) * eps.max_in_omega();
  std::vector<int> out;
  for (int c = 0; c < mesh.n_cells(); ++c)
    if (mesh.cell_in_omega(c) && eps.values[c] >= cut) out.push_back(c);
  return out;
}

CoefficientField threshold_image(const CoefficientField& eps, TargetKind mode) {
  CoefficientField out = CoefficientField::constant(eps.mesh, 1.0);
  for (int c : support_cells(eps, mode)) out.values[c] = eps.values[c];
  return out;
}

std::optional<Box> bounding_box(const Mesh& mesh, const std::vector<int>& cells) {
  if (cells.empty()) return std::nullopt;
  Box b{{1e300, 1e300, 1e300}, {-1e300, -1e300, -1e300}};
  for (int c : cells) {
    const Vec3 x = mesh.cell_center(c);
    const double half = 0.5 * mesh.cell_h(c);
    for (int a = 0; a < 3; ++a) {
      b.lo[a] = std::min(b.lo[a], x[a] - half);
      b.hi[a] = std::max(b.hi[a], x[a] + half);
    }
  }
  return b;
}

TargetReport make_report(const CoefficientField& eps, const CoefficientField* truth) {
  TargetReport r;
  r.eps_max = eps.max_in_omega();
  r.n_target = std::sqrt(r.eps_max);
  r.classification = classify(r.eps_max);
  r.support = support_cells(eps, r.classification);
  r.box = bounding_box(*eps.mesh, r.support);
  if (truth) {
    const double tmax = truth->max_in_omega();
    r.n_true = std::sqrt(tmax);
    r.n_error = std::abs(r.n_target - *r.n_true) / *r.n_true;
    r.true_box = bounding_box(*truth->mesh, support_cells(*truth, classify(tmax)));
    if (r.box && r.true_box) {
      std::array<double, 3> e{};
      for (int a = 0; a < 3; ++a) {
        const double t = r.true_box->extent(a);
        e[a] = std::abs(r.box->extent(a) - t) / t;
      }
      r.extent_error = e;
    }
  }
  return r;
}

std::string report_table(const std::vector<std::pair<std::string, TargetReport>>& rows) {
  std::string out = "mesh\teps_max\tn\tn_error\tclass\tdx\tdy\tdz\n";
  char buf[512];
  for (const auto& [label, r] : rows) {
    std::string err = r.n_error ? std::to_string(static_cast<int>(std::lround(100.0 * *r.n_error))) + "%" : "-";
    double ext[3] = {0.0, 0.0, 0.0};
    if (r.box)
      for (int a = 0; a < 3; ++a) ext[a] = r.box->extent(a);
    std::snprintf(buf, sizeof buf, "%s\t%.4f\t%.4f\t%s\t%s\t%.4f\t%.4f\t%.4f\n", label.c_str(), r.eps_max, r.n_target,
                  err.c_str(), to_string(r.classification).c_str(), ext[0], ext[1], ext[2]);
    out += buf;
  }
  return out;
}

}  // namespace epsrecon
