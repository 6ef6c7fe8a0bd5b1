#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "twinbed/raddose/dose.hpp"

using namespace twinbed;
using namespace twinbed::raddose;

namespace {

// 4 x 4 x 2 mesh of 0.5 m voxels at the origin with a configured boundary rate.
RadiationSource small_source(double boundary_rate = 1e-4, double halving = 1.0) {
  RadiationSource s;
  s.origin = {0.0, 0.0, 0.0};
  s.voxel_size_m = 0.5;
  s.table = DoseTable(MeshDims{4, 4, 2});
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j)
      for (int k = 0; k < 2; ++k) s.table.set(i, j, k, 1e-3 / (1 + i + j + k));
  s.halving_distance_m = halving;
  s.boundary_rate_sv_s = boundary_rate;
  s.max_range_m = 8.0;
  s.boundary_mode = BoundaryRate::Configured;
  return s;
}

}  // namespace

TEST(DoseTable, SingleRowLookup) {
  const auto t = parse_dose_table("name,i,j,k,sv_s,sv_hr\nv0,0,0,0,1e-3,3.6\n", MeshDims{1, 1, 1});
  EXPECT_EQ(t.rate_sv_s(0, 0, 0), 1e-3);
  EXPECT_EQ(t.row_count(), 1u);
}

TEST(DoseTable, InconsistentUnitsRejected) {
  EXPECT_THROW(parse_dose_table("name,i,j,k,sv_s,sv_hr\nv0,0,0,0,1e-3,3.7\n", MeshDims{1, 1, 1}), TableError);
}

TEST(DoseTable, BadRowsRejected) {
  const MeshDims d{2, 2, 2};
  EXPECT_THROW(parse_dose_table("name,i,j,k,sv_s,sv_hr\nv,2,0,0,1,3600\n", d), TableError);
  EXPECT_THROW(parse_dose_table("name,i,j,k,sv_s,sv_hr\nv,0,0,0,-1,-3600\n", d), TableError);
  EXPECT_THROW(parse_dose_table("name,i,j,k,sv_s,sv_hr\nv,0,0,0,1,3600\nw,0,0,0,1,3600\n", d), TableError);
}

TEST(DoseTable, RegularMeshExportFullyAddressable) {
  // Analytic field written as a mesh export, then every voxel read back.
  auto field = [](int i, int j, int k) { return 1e-5 * std::exp(-0.3 * (i + 2 * j + 3 * k)); };
  std::ostringstream csv;
  csv.precision(17);
  csv << "name,i,j,k,sv_s,sv_hr\n";
  for (int i = 0; i < 5; ++i)
    for (int j = 0; j < 5; ++j)
      for (int k = 0; k < 5; ++k)
        csv << "v" << i << j << k << ',' << i << ',' << j << ',' << k << ',' << field(i, j, k) << ','
            << 3600.0 * field(i, j, k) << '\n';
  const auto t = parse_dose_table(csv.str(), MeshDims{5, 5, 5});
  EXPECT_EQ(t.row_count(), 125u);
  for (int i = 0; i < 5; ++i)
    for (int j = 0; j < 5; ++j)
      for (int k = 0; k < 5; ++k) EXPECT_DOUBLE_EQ(t.rate_sv_s(i, j, k), field(i, j, k));
}

TEST(UpdateDose, BeyondMaxRangeIsZero) {
  const auto s = small_source();
  const auto c = s.center();
  EXPECT_EQ(update_dose(s, {c.x + 8.01, c.y, c.z}), 0.0);
  EXPECT_EQ(evaluate_dose(s, {c.x, c.y - 50.0, c.z}).zone, Zone::Out);
}

TEST(UpdateDose, InsideMeshReadsTable) {
  const auto s = small_source();
  const auto e = evaluate_dose(s, {1.25, 0.25, 0.75});
  EXPECT_EQ(e.zone, Zone::InMesh);
  EXPECT_EQ(e.voxel, (std::array<int, 3>{2, 0, 1}));
  EXPECT_DOUBLE_EQ(e.rate_sv_s, 1e-3 / 4);
}

TEST(UpdateDose, BoundaryPointGivesBoundaryRate) {
  EXPECT_EQ(halving_rate(2e-5, 1.7, 1.7, 1.0), 2e-5);
}

TEST(UpdateDose, OneHalvingDistanceHalves) {
  const double d0 = 3e-5, x0 = 1.3, l = 0.8;
  const double r = halving_rate(d0, x0 + l, x0, l);
  EXPECT_LE(std::abs(r - 0.5 * d0) / (0.5 * d0), 1e-12);
}

TEST(UpdateDose, BoundaryDistanceOfBox) {
  const Vec3 h{1.0, 2.0, 0.5};
  EXPECT_DOUBLE_EQ(boundary_distance(h, {1.0, 0.0, 0.0}), 1.0);
  EXPECT_DOUBLE_EQ(boundary_distance(h, {0.0, -1.0, 0.0}), 2.0);
  const double s = 1.0 / std::sqrt(2.0);
  EXPECT_DOUBLE_EQ(boundary_distance(h, {s, s, 0.0}), std::sqrt(2.0));
}

TEST(UpdateDose, NonFinitePositionRejected) {
  const auto s = small_source();
  EXPECT_THROW(update_dose(s, {std::nan(""), 0.0, 0.0}), InvalidPosition);
}

TEST(Dosimeter, ConstantRateAccumulates) {
  RadiationSource s;
  s.table = DoseTable(MeshDims{1, 1, 1});
  s.table.set(0, 0, 0, 1e-4);
  s.voxel_size_m = 1.0;
  s.max_range_m = 5.0;
  Dosimeter d;
  d.position = {0.5, 0.5, 0.5};
  for (int i = 0; i < 10; ++i) d = dosimeter_tick(d, s, 1.0);
  EXPECT_NEAR(d.cumulative_dose_sv, 1e-3, 1e-15);
  EXPECT_NEAR(d.current_rate_sv_hr, 0.36, 1e-12);
}

TEST(Dosimeter, OutZoneLeavesDoseUnchanged) {
  const auto s = small_source();
  Dosimeter d;
  d.cumulative_dose_sv = 0.25;
  d.position = {100.0, 100.0, 100.0};
  for (int i = 0; i < 100; ++i) d = dosimeter_tick(d, s, 0.05);
  EXPECT_EQ(d.cumulative_dose_sv, 0.25);
  EXPECT_EQ(d.current_rate_sv_hr, 0.0);
  EXPECT_THROW(dosimeter_tick(d, s, 0.0), std::invalid_argument);
}

TEST(Dosimeter, WalkMatchesFineIntegral) {
  // Straight line through the approximation zone along +x, 50 ms steps,
  // against a 1 ms integral of the decay law computed here.
  const auto s = small_source(2e-4, 0.7);
  const auto c = s.center();
  const double x0 = s.half_extent().x;
  const double speed = 0.5, duration = 10.0;
  auto pos = [&](double t) { return Vec3{c.x + x0 + 0.2 + speed * t, c.y, c.z}; };

  Dosimeter d;
  for (double t = 0.0; t < duration - 1e-9; t += 0.05) {
    d.position = pos(t);
    d = dosimeter_tick(d, s, 0.05);
  }
  double fine = 0.0;
  for (int i = 0; i < 10000; ++i) {
    const double dist = pos(i * 0.001).x - c.x;
    fine += 2e-4 * std::exp2(-(dist - x0) / 0.7) * 0.001;
  }
  EXPECT_NEAR(d.cumulative_dose_sv, fine, 0.02 * fine);
}

TEST(RadiationSource, MaxRangeInsideMeshRejected) {
  auto s = small_source();
  s.max_range_m = 0.5;
  EXPECT_THROW(s.validate(), std::invalid_argument);
}
