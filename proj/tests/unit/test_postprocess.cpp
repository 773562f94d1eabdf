#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "epsrecon/postprocess.hpp"
#include "test_support.hpp"

using namespace epsrecon;
using namespace epsrecon::testing;

namespace {

MeshPtr base() { return build_base_mesh(twin_spec(), 0.04); }

CoefficientField random_field(const MeshPtr& mesh, double hi, unsigned seed) {
  auto eps = CoefficientField::background(mesh, 1.0);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(1.0, hi);
  for (int c = 0; c < mesh->n_cells(); ++c)
    if (mesh->cell_in_omega(c)) eps.values[c] = u(rng);
  return eps;
}

}  // namespace

TEST(Threshold, MetallicCutoff) {
  const auto mesh = base();
  auto eps = random_field(mesh, 14.0, 1);
  const int peak = cell_at(*mesh, {0.02, 0.02, -0.02});
  eps.values[peak] = 14.4;
  const auto img = threshold_image(eps, TargetKind::metallic);
  for (int c = 0; c < mesh->n_cells(); ++c) {
    if (eps.values[c] >= 0.3 * 14.4)
      EXPECT_EQ(img.values[c], eps.values[c]);
    else
      EXPECT_EQ(img.values[c], 1.0);
  }
  EXPECT_NEAR(0.3 * 14.4, 4.32, 1e-12);
}

TEST(Threshold, ConstantFieldIsFixed) {
  const auto eps = CoefficientField::background(base(), 1.0);
  for (auto mode : {TargetKind::dielectric, TargetKind::metallic}) {
    const auto img = threshold_image(eps, mode);
    EXPECT_EQ(img.values, eps.values);
    EXPECT_EQ(static_cast<int>(support_cells(eps, mode).size()), eps.mesh->n_cells() - 1440 + 512);
  }
}

TEST(Threshold, TwoLevelField) {
  const auto mesh = base();
  const auto eps = cube_inclusion(mesh, 4.0);
  const auto img = threshold_image(eps, TargetKind::dielectric);
  EXPECT_EQ(img.values, eps.values);
  const auto support = support_cells(eps, TargetKind::dielectric);
  EXPECT_EQ(support.size(), 4u * 4 * 3);
  for (int c : support) EXPECT_EQ(eps.values[c], 4.0);
}

TEST(Threshold, OutputsAreOneOrInput) {
  const auto mesh = base();
  for (unsigned seed = 0; seed < 5; ++seed) {
    const auto eps = random_field(mesh, 25.0, seed);
    for (auto mode : {TargetKind::dielectric, TargetKind::metallic}) {
      const auto img = threshold_image(eps, mode);
      for (int c = 0; c < mesh->n_cells(); ++c) EXPECT_TRUE(img.values[c] == 1.0 || img.values[c] == eps.values[c]);
    }
    const auto d = support_cells(eps, TargetKind::dielectric);
    const auto m = support_cells(eps, TargetKind::metallic);
    EXPECT_TRUE(std::includes(m.begin(), m.end(), d.begin(), d.end()));
    EXPECT_LT(d.size(), m.size());
  }
}

TEST(Report, RefractiveIndexAndClass) {
  const auto mesh = base();
  const auto eps4 = cube_inclusion(mesh, 4.0);
  const auto r = make_report(eps4);
  EXPECT_EQ(r.eps_max, 4.0);
  EXPECT_EQ(r.n_target, 2.0);
  EXPECT_NEAR(r.n_target * r.n_target, r.eps_max, 1e-12);
  EXPECT_EQ(r.classification, TargetKind::dielectric);
  EXPECT_FALSE(r.n_error);
  ASSERT_TRUE(r.box);
  EXPECT_NEAR(r.box->lo[0], -0.08, 1e-12);
  EXPECT_NEAR(r.box->hi[0], 0.08, 1e-12);
  EXPECT_NEAR(r.box->lo[2], -0.12, 1e-12);
  EXPECT_NEAR(r.box->hi[2], 0.0, 1e-12);

  EXPECT_EQ(make_report(cube_inclusion(mesh, 17.0)).classification, TargetKind::metallic);
  EXPECT_EQ(make_report(cube_inclusion(mesh, 10.0)).classification, TargetKind::dielectric);
}

TEST(Report, ErrorAgainstTruth) {
  const auto mesh = base();
  const auto truth = cube_inclusion(mesh, 4.0);
  const auto rec = cube_inclusion(mesh, 1.9 * 1.9);
  const auto r = make_report(rec, &truth);
  ASSERT_TRUE(r.n_error);
  EXPECT_NEAR(*r.n_error, 0.05, 1e-12);
  EXPECT_NEAR(*r.n_true, 2.0, 1e-15);
  ASSERT_TRUE(r.extent_error);
  for (double e : *r.extent_error) EXPECT_NEAR(e, 0.0, 1e-12);
}

TEST(Report, DeterministicAndTableFormat) {
  const auto mesh = base();
  const auto truth = cube_inclusion(mesh, 4.0);
  const auto rec = random_field(mesh, 5.0, 4);
  const auto a = make_report(rec, &truth), b = make_report(rec, &truth);
  EXPECT_EQ(a.support, b.support);
  EXPECT_EQ(a.eps_max, b.eps_max);
  const auto table = report_table({{"coarse", make_report(cube_inclusion(mesh, 3.61), &truth)}, {"1x", a}});
  EXPECT_EQ(table.substr(0, table.find('\n')), "mesh\teps_max\tn\tn_error\tclass\tdx\tdy\tdz");
  EXPECT_NE(table.find("coarse\t3.6100\t1.9000\t5%\tdielectric\t0.1600\t0.1600\t0.1200\n"), std::string::npos);
}

TEST(Report, BoundingBoxOfEmptySet) { EXPECT_FALSE(bounding_box(*base(), {})); }
