#include <gtest/gtest.h>

#include <cmath>

#include "epsrecon/adaptive.hpp"
#include "epsrecon/errors.hpp"
#include "test_support.hpp"

using namespace epsrecon;
using namespace epsrecon::testing;

namespace {

GradientField zero_gradient(const MeshPtr& mesh) {
  return {mesh, std::vector<double>(mesh->n_cells(), 0.0), {}, {}};
}

AdaptiveProblem twin_problem(const CoefficientField& truth, const CoefficientField& glob, double dt = 0.01) {
  const SourceWaveform src{30.0};
  AdaptiveProblem p;
  p.forward.time_grid = TimeGrid::make(1.2, dt, src.t1());
  p.data = solve_forward_G(twin_spec(), truth, p.forward, src).record;
  p.cutoff = CutoffZdelta::make(1.2);
  p.tikhonov = {0.01, glob};
  return p;
}

}  // namespace

TEST(MarkCells, UniformMarksAllOmega) {
  const auto mesh = build_base_mesh(twin_spec(), 0.04);
  auto g = zero_gradient(mesh);
  int omega = 0;
  for (int c = 0; c < mesh->n_cells(); ++c)
    if (mesh->cell_in_omega(c)) {
      g.values[c] = -0.3;
      ++omega;
    }
  EXPECT_EQ(static_cast<int>(mark_cells(g, 0.7).size()), omega);
}

TEST(MarkCells, SingleSpike) {
  const auto mesh = build_base_mesh(twin_spec(), 0.04);
  auto g = zero_gradient(mesh);
  for (int c = 0; c < mesh->n_cells(); ++c)
    if (mesh->cell_in_omega(c)) g.values[c] = 0.01 * (c % 7);
  const int spike = cell_at(*mesh, {0.0, 0.0, -0.05});
  g.values[spike] = -1.0;
  const auto m = mark_cells(g, 0.7);
  ASSERT_EQ(m.size(), 1u);
  EXPECT_EQ(m[0], spike);
}

TEST(MarkCells, ThresholdArithmetic) {
  const auto mesh = build_base_mesh(twin_spec(), 0.04);
  auto g = zero_gradient(mesh);
  const int a = cell_at(*mesh, {0.0, 0.0, -0.05});
  const int b = cell_at(*mesh, {0.05, 0.0, -0.05});
  const int c = cell_at(*mesh, {-0.05, 0.0, -0.05});
  g.values[a] = 1.0;
  g.values[b] = 0.71;
  g.values[c] = -0.69;
  auto m = mark_cells(g, 0.7);
  std::sort(m.begin(), m.end());
  std::vector<int> expect{a, b};
  std::sort(expect.begin(), expect.end());
  EXPECT_EQ(m, expect);
}

TEST(MarkCells, ZeroGradientMarksNothing) {
  const auto mesh = build_base_mesh(twin_spec(), 0.04);
  EXPECT_TRUE(mark_cells(zero_gradient(mesh), 0.7).empty());
  EXPECT_THROW(mark_cells(zero_gradient(mesh), 1.0), ConfigError);
}

TEST(Step6, Predicate) {
  EXPECT_TRUE(step6_stop(1.0, 1.0));
  EXPECT_TRUE(step6_stop(2.0, 1.0));
  EXPECT_FALSE(step6_stop(0.5, 1.0));
}

TEST(RunAdaptive, ConsistentDataStopsOnBaseMesh) {
  const auto mesh = build_base_mesh(twin_spec(), 0.04);
  const auto glob = cube_inclusion(mesh, 2.0);
  const auto p = twin_problem(glob, glob);
  const auto r = run_adaptive(p, AdaptiveConfig{});
  ASSERT_EQ(r.record.meshes.size(), 1u);
  EXPECT_EQ(r.record.stop, StopReason::Step3Tolerance);
  EXPECT_EQ(r.record.meshes[0].iterations, 0);
  EXPECT_LE(r.record.meshes[0].grad_norm, 1e-8);
}

TEST(RunAdaptive, ForcedStep6) {
  const auto mesh = build_base_mesh(twin_spec(), 0.04);
  const auto glob = CoefficientField::background(mesh, 1.0);
  const auto p = twin_problem(cube_inclusion(mesh, 4.0), glob);
  int calls = 0;
  // Gradient norm grows from one mesh to the next.
  auto solver = [&](Objective& obj, const CoefficientField& init, const CgConfig&) {
    CgResult r;
    r.eps = init;
    r.gradient = zero_gradient(obj.mesh());
    for (int c = 0; c < obj.mesh()->n_cells(); ++c)
      if (obj.mesh()->cell_in_omega(c)) r.gradient.values[c] = 1.0 + calls;
    r.iterations = 1;
    r.stop = CgStop::Stabilized;
    ++calls;
    return r;
  };
  const auto r = run_adaptive(p, AdaptiveConfig{}, {}, solver);
  EXPECT_EQ(r.record.stop, StopReason::Step6);
  ASSERT_EQ(r.record.meshes.size(), 2u);
  EXPECT_GT(r.record.meshes[1].cells, r.record.meshes[0].cells);
  EXPECT_EQ(r.record.meshes[0].marked, 512);
}

TEST(RunAdaptive, MaxRefinementsCap) {
  const auto mesh = build_base_mesh(twin_spec(), 0.04);
  const auto glob = CoefficientField::background(mesh, 1.0);
  const auto p = twin_problem(cube_inclusion(mesh, 4.0), glob, 0.02);
  int calls = 0;
  auto solver = [&](Objective& obj, const CoefficientField& init, const CgConfig&) {
    CgResult r;
    r.eps = init;
    r.gradient = zero_gradient(obj.mesh());
    r.gradient.values[cell_at(*obj.mesh(), {0.01, 0.01, -0.05})] = 1.0 / (1 + calls++);
    r.stop = CgStop::Stabilized;
    return r;
  };
  AdaptiveConfig cfg;
  cfg.max_refinements = 2;
  const auto r = run_adaptive(p, cfg, {}, solver);
  EXPECT_EQ(r.record.stop, StopReason::MaxRefinements);
  ASSERT_EQ(r.record.meshes.size(), 3u);
  for (std::size_t k = 1; k < r.record.meshes.size(); ++k) {
    EXPECT_GT(r.record.meshes[k].cells, r.record.meshes[k - 1].cells);
    EXPECT_LE(r.record.meshes[k].dt, r.record.meshes[k - 1].dt);
  }
  // The refined meshes need a smaller step.
  EXPECT_LT(r.record.meshes[1].dt, r.record.meshes[0].dt);
}

TEST(RunAdaptive, CubeTwinRefinesNearInclusion) {
  const auto mesh = build_base_mesh(twin_spec(), 0.04);
  const auto truth = cube_inclusion(mesh, 4.0);
  const auto glob = CoefficientField::background(mesh, 1.0);
  const auto p = twin_problem(truth, glob);
  AdaptiveConfig cfg;
  cfg.max_refinements = 1;
  cfg.cg.max_iters = 4;
  int violations = 0;
  const auto r = run_adaptive(p, cfg, [&](const InversionState& s) {
    const Mesh& m = *s.eps.mesh;
    for (int c = 0; c < m.n_cells(); ++c) {
      const double v = s.eps.values[c];
      violations += m.cell_in_omega(c) ? (v < 1.0 || v > 25.0) : v != 1.0;
    }
  });
  EXPECT_EQ(violations, 0);
  ASSERT_GE(r.record.meshes.size(), 2u);
  const auto marked = mark_cells(r.gradients[0], cfg.beta1);
  ASSERT_FALSE(marked.empty());
  // Distance from the cell box to the inclusion box at most one cell width.
  const Box inclusion{{-0.08, -0.08, -0.12}, {0.08, 0.08, 0.0}};
  int near = 0;
  for (int c : marked) {
    const Vec3 x = mesh->cell_center(c);
    const double half = 0.5 * mesh->cell_h(c);
    double d2 = 0.0;
    for (int a = 0; a < 3; ++a) {
      const double gap = std::max({inclusion.lo[a] - (x[a] + half), (x[a] - half) - inclusion.hi[a], 0.0});
      d2 += gap * gap;
    }
    near += std::sqrt(d2) <= mesh->cell_h(c) * (1 + 1e-9);
  }
  EXPECT_GE(near, 0.7 * static_cast<double>(marked.size()));

  // Replaying the final mesh and iterate reproduces the gradient norm.
  const auto& last = r.record.meshes.back();
  const MeshPtr fine = r.per_mesh.back().mesh;
  MeshProblem mp = prepare_mesh_problem(p, fine, last.dt);
  MeshObjective obj(mp.forward, mp.data, p.cutoff, mp.tikhonov);
  GradientField g;
  obj.value_and_gradient(r.per_mesh.back(), g);
  EXPECT_NEAR(g.norm_l2(), last.grad_norm, 1e-12 * last.grad_norm);

  const std::string json = r.record.to_json_lines();
  EXPECT_NE(json.find("\"stop\""), std::string::npos);
  const std::string table = r.record.summary_table();
  EXPECT_EQ(table.rfind("mesh\tcells", 0), 0u);
  EXPECT_NE(table.find("coarse\t"), std::string::npos);
  EXPECT_NE(table.find("1x\t"), std::string::npos);
}
