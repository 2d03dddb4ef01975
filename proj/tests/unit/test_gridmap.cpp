#include <filesystem>
#include <fstream>
#include <random>
#include <set>

#include <gtest/gtest.h>

#include "ftp/errors.hpp"
#include "ftp/gridmap.hpp"
#include "../support/oracles.hpp"

using namespace ftp::gridmap;
using Eigen::Vector3d;

namespace {

Lattice cube(int n, double res, const Vector3d& origin = Vector3d::Zero()) {
  Lattice l;
  l.origin = origin;
  l.resolution = res;
  l.dims = {n, n, n};
  return l;
}

// Two boxes resting on a table at z = 0 plus the table plane itself.
PointCloud two_object_scene() {
  PointCloud c;
  for (double x = -0.3; x <= 0.3; x += 0.01)
    for (double y = -0.3; y <= 0.3; y += 0.01) c.points.emplace_back(x, y, 0.0);
  for (int i = 0; i < 10; ++i)
    for (int j = 0; j < 10; ++j) c.points.emplace_back(0.045 + 0.01 * i, 0.045 + 0.01 * j, 0.115);
  for (int i = 0; i < 10; ++i)
    for (int j = 0; j < 10; ++j) c.points.emplace_back(-0.195 + 0.01 * i, -0.095 + 0.01 * j, 0.065);
  return c;
}

}  // namespace

TEST(FilterAboveTable, BelowAndBoundary) {
  PointCloud c;
  c.points = {Vector3d(0, 0, -0.1), Vector3d(0, 0, 0.0)};
  EXPECT_TRUE(filter_above_table(c, 0.0, 0.0).empty());
}

TEST(FilterAboveTable, CountMatchesPredicateScan) {
  const PointCloud c = two_object_scene();
  const double eps = 0.005;
  std::size_t expected = 0;
  for (const auto& p : c.points) expected += p.z() > eps ? 1 : 0;
  EXPECT_EQ(filter_above_table(c, 0.0, eps).size(), expected);
  EXPECT_EQ(expected, 200u);
}

TEST(CompleteOcclusion, SinglePointColumn) {
  PointCloud c;
  c.points = {Vector3d(0.013, 0.021, 0.095)};
  const PointCloud out = complete_occlusion(c, 0.0, 0.02);
  EXPECT_EQ(out.size(), 1u + static_cast<std::size_t>(std::ceil(0.095 / 0.02)));
  EXPECT_TRUE(complete_occlusion(PointCloud{}, 0.0, 0.02).empty());
}

TEST(CompleteOcclusion, VolumeMatchesColumnExtrusion) {
  const double res = 0.02;
  const PointCloud above = filter_above_table(two_object_scene(), 0.0, 0.005);
  const PointCloud done = complete_occlusion(above, 0.0, res);
  const Lattice l = cube(40, res, Vector3d(-0.4, -0.4, -0.02));
  const VoxelGrid g = voxelize(done, l);
  // footprints are 0.1 x 0.1 and voxel aligned; tops 0.115 and 0.065 round up to whole layers
  const double expected = 0.1 * 0.1 * (std::ceil(0.115 / res) * res) + 0.1 * 0.1 * (std::ceil(0.065 / res) * res);
  const double volume = static_cast<double>(g.occupied_count()) * res * res * res;
  EXPECT_NEAR(volume, expected, 1e-12);
}

TEST(Voxelize, FloorDivisionAndHalfOpen) {
  const Lattice l = cube(10, 0.05);
  PointCloud c;
  c.points = {Vector3d(0.11, 0.11, 0.11), Vector3d(0.25, 0.01, 0.01), Vector3d(9, 9, 9)};
  const VoxelGrid g = voxelize(c, l);
  EXPECT_TRUE(g.occupied(2, 2, 2));
  EXPECT_TRUE(g.occupied(5, 0, 0));
  EXPECT_FALSE(g.occupied(4, 0, 0));
  EXPECT_EQ(g.out_of_bounds_points, 1u);
}

TEST(Voxelize, RandomCloudMatchesNaiveBinning) {
  std::mt19937_64 rng(21);
  std::uniform_real_distribution<double> u(-0.1, 0.9);
  const Lattice l = cube(16, 0.05);
  PointCloud c;
  std::set<std::array<int, 3>> expected;
  for (int n = 0; n < 500; ++n) {
    Vector3d p(u(rng), u(rng), u(rng));
    c.points.push_back(p);
    std::array<int, 3> idx{static_cast<int>(std::floor(p.x() / 0.05)), static_cast<int>(std::floor(p.y() / 0.05)),
                           static_cast<int>(std::floor(p.z() / 0.05))};
    if (idx[0] >= 0 && idx[1] >= 0 && idx[2] >= 0 && idx[0] < 16 && idx[1] < 16 && idx[2] < 16) expected.insert(idx);
  }
  const VoxelGrid g = voxelize(c, l);
  EXPECT_EQ(g.occupied_count(), expected.size());
  for (const auto& e : expected) EXPECT_TRUE(g.occupied(e[0], e[1], e[2]));
}

TEST(ComputeEdf, ThreeFourFive) {
  VoxelGrid g = VoxelGrid::empty(cube(12, 0.1));
  g.set(1, 1, 1);
  const DistanceField f = compute_edf(g);
  EXPECT_NEAR(f.at(4, 5, 1), 0.5, 1e-12);
  EXPECT_DOUBLE_EQ(f.at(1, 1, 1), 0.0);
}

TEST(ComputeEdf, FullAndEmpty) {
  VoxelGrid g = VoxelGrid::empty(cube(5, 0.1));
  EXPECT_TRUE(std::isinf(compute_edf(g).at(2, 2, 2)));
  std::fill(g.occupancy.begin(), g.occupancy.end(), 1);
  for (double d : compute_edf(g).distance) EXPECT_EQ(d, 0.0);
}

TEST(ComputeEdf, RandomGridMatchesBruteForce) {
  std::mt19937_64 rng(22);
  std::bernoulli_distribution b(0.03);
  VoxelGrid g = VoxelGrid::empty(cube(16, 0.02));
  for (auto& v : g.occupancy) v = b(rng) ? 1 : 0;
  const DistanceField f = compute_edf(g);
  const auto ref = oracle::brute_edf(g.occupancy, g.lattice.dims, 0.02);
  double worst = 0.0;
  for (std::size_t i = 0; i < ref.size(); ++i) worst = std::max(worst, std::abs(ref[i] - f.distance[i]));
  EXPECT_LE(worst, 1e-9);
}

TEST(QueryDistance, CentresMidpointsAndBounds) {
  std::mt19937_64 rng(23);
  std::bernoulli_distribution b(0.05);
  VoxelGrid g = VoxelGrid::empty(cube(10, 0.1));
  for (auto& v : g.occupancy) v = b(rng) ? 1 : 0;
  const DistanceField f = compute_edf(g);
  EXPECT_NEAR(query_distance(f, g.lattice.center(3, 4, 5)), f.at(3, 4, 5), 1e-12);
  const Vector3d mid = 0.5 * (g.lattice.center(3, 4, 5) + g.lattice.center(4, 4, 5));
  EXPECT_NEAR(query_distance(f, mid), 0.5 * (f.at(3, 4, 5) + f.at(4, 4, 5)), 1e-12);
  EXPECT_THROW(query_distance(f, Vector3d(-0.5, 0.5, 0.5)), ftp::OutOfBounds);

  std::uniform_real_distribution<double> u(0.06, 0.94);
  for (int n = 0; n < 200; ++n) {
    const Vector3d p(u(rng), u(rng), u(rng));
    const Index3 idx = g.lattice.index_of(p - Vector3d::Constant(0.05));
    double lo = 1e9, hi = -1e9;
    for (int di = 0; di < 2; ++di)
      for (int dj = 0; dj < 2; ++dj)
        for (int dk = 0; dk < 2; ++dk) {
          const double v = f.at(idx[0] + di, idx[1] + dj, idx[2] + dk);
          lo = std::min(lo, v);
          hi = std::max(hi, v);
        }
    const double q = query_distance(f, p);
    EXPECT_GE(q, lo - 1e-12);
    EXPECT_LE(q, hi + 1e-12);
  }
}

TEST(QueryDistance, GradientMatchesFiniteDifference) {
  VoxelGrid g = VoxelGrid::empty(cube(20, 0.05));
  rasterize_spheres(g, std::vector<ftp::geometry::ObstacleSphere>{{Vector3d(0.5, 0.5, 0.5), 0.15}});
  const DistanceField f = compute_edf(g);
  const Vector3d p(0.213, 0.377, 0.641);
  Vector3d grad;
  query_clearance(f, p, grad);
  const double h = 1e-6;
  for (int k = 0; k < 3; ++k) {
    Vector3d e = Vector3d::Zero();
    e[k] = h;
    const double fd = (query_clearance(f, p + e) - query_clearance(f, p - e)) / (2 * h);
    EXPECT_NEAR(grad[k], fd, 1e-6);
  }
  EXPECT_NEAR(query_clearance(f, p), query_distance(f, p) - 0.025, 1e-15);
}

TEST(Rasterize, SpheresAndBoxes) {
  VoxelGrid g = VoxelGrid::empty(cube(10, 0.1));
  rasterize_box(g, Vector3d(0.2, 0.2, 0.2), Vector3d(0.4, 0.4, 0.4));
  EXPECT_EQ(g.occupied_count(), 8u);
  VoxelGrid s = VoxelGrid::empty(cube(10, 0.1));
  rasterize_spheres(s, std::vector<ftp::geometry::ObstacleSphere>{{Vector3d(0.55, 0.55, 0.55), 0.01}});
  EXPECT_EQ(s.occupied_count(), 1u);
}

TEST(Files, OccupancyDumpRoundTrip) {
  std::mt19937_64 rng(24);
  std::bernoulli_distribution b(0.2);
  VoxelGrid g = VoxelGrid::empty(cube(7, 0.03, Vector3d(-0.1, 0.2, 0.3)));
  for (auto& v : g.occupancy) v = b(rng) ? 1 : 0;
  const auto path = std::filesystem::temp_directory_path() / "ftp_grid_roundtrip.bin";
  write_occupancy_dump(g, path);
  const VoxelGrid r = read_occupancy_dump(path);
  EXPECT_EQ(r.occupancy, g.occupancy);
  EXPECT_EQ(r.lattice.dims, g.lattice.dims);
  EXPECT_EQ(r.lattice.origin, g.lattice.origin);
  std::filesystem::remove(path);
}

TEST(Files, PlyAndCsvClouds) {
  const auto dir = std::filesystem::temp_directory_path();
  {
    std::ofstream ply(dir / "ftp_cloud.ply");
    ply << "ply\nformat ascii 1.0\nelement vertex 2\nproperty float x\nproperty float y\nproperty float z\n"
           "end_header\n0.1 0.2 0.3\n-1 0 2.5\n";
    std::ofstream csv(dir / "ftp_cloud.csv");
    csv << "x,y,z\n0.1,0.2,0.3\n";
  }
  const PointCloud a = read_point_cloud(dir / "ftp_cloud.ply");
  ASSERT_EQ(a.size(), 2u);
  EXPECT_DOUBLE_EQ(a.points[1].z(), 2.5);
  const PointCloud b = read_point_cloud(dir / "ftp_cloud.csv");
  ASSERT_EQ(b.size(), 1u);
  EXPECT_DOUBLE_EQ(b.points[0].y(), 0.2);
  EXPECT_THROW(read_point_cloud(dir / "ftp_missing.ply"), ftp::IoError);
}
