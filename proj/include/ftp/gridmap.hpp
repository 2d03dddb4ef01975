#pragma once
/**
 * World model for the task-space planner: point-cloud ingestion, table
 * removal, solid-extrusion occlusion completion, dense voxel occupancy and an
 * exact Euclidean distance transform.
 *
 * Finished grids and fields are plain values; the planner consumes immutable
 * snapshots of them.
 */

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "ftp/geometry.hpp"

namespace ftp::gridmap {

using Index3 = std::array<int, 3>;

struct PointCloud {
  std::vector<Eigen::Vector3d> points;

  std::size_t size() const { return points.size(); }
  bool empty() const { return points.empty(); }
};

/// Shared lattice geometry of grids and fields. Voxel (i, j, k) covers the
/// half-open box [origin + idx * res, origin + (idx + 1) * res).
struct Lattice {
  Eigen::Vector3d origin = Eigen::Vector3d::Zero();
  double resolution = 0.02;
  Index3 dims{0, 0, 0};

  std::size_t cell_count() const {
    return static_cast<std::size_t>(dims[0]) * dims[1] * dims[2];
  }
  /// Row-major with x slowest.
  std::size_t linear(int i, int j, int k) const {
    return (static_cast<std::size_t>(i) * dims[1] + j) * dims[2] + k;
  }
  bool in_range(int i, int j, int k) const {
    return i >= 0 && j >= 0 && k >= 0 && i < dims[0] && j < dims[1] && k < dims[2];
  }
  Index3 index_of(const Eigen::Vector3d& p) const;
  Eigen::Vector3d center(int i, int j, int k) const;
  /// Closed bounding box test.
  bool contains(const Eigen::Vector3d& p) const;
  Eigen::Vector3d upper_corner() const;
};

struct VoxelGrid {
  Lattice lattice;
  std::vector<std::uint8_t> occupancy;
  /// Points that fell outside the lattice during voxelization.
  std::size_t out_of_bounds_points = 0;

  static VoxelGrid empty(const Lattice& lattice);
  /// 1.2 m cube centred at the arm base, 0.02 m voxels.
  static VoxelGrid default_workspace();

  bool occupied(int i, int j, int k) const { return occupancy[lattice.linear(i, j, k)] != 0; }
  void set(int i, int j, int k, bool value = true) {
    occupancy[lattice.linear(i, j, k)] = value ? 1 : 0;
  }
  std::size_t occupied_count() const;
};

struct DistanceField {
  Lattice lattice;
  /// Metres to the centre of the nearest occupied voxel; +inf when the grid
  /// has no occupied voxel at all.
  std::vector<double> distance;

  double at(int i, int j, int k) const { return distance[lattice.linear(i, j, k)]; }
};

PointCloud filter_above_table(const PointCloud& cloud, double table_z, double eps);

/// Fills every (x, y) column from the table up to the column's highest
/// observed point. The input points are kept.
PointCloud complete_occlusion(const PointCloud& cloud, double table_z, double resolution);

VoxelGrid voxelize(const PointCloud& cloud, const Lattice& lattice);

/// Marks voxels whose centre lies inside any sphere.
void rasterize_spheres(VoxelGrid& grid, std::span<const geometry::ObstacleSphere> spheres);

/// Axis-aligned box [lo, hi]; voxels whose centre lies inside are marked.
void rasterize_box(VoxelGrid& grid, const Eigen::Vector3d& lo, const Eigen::Vector3d& hi);

/// Exact Euclidean distance transform (separable squared-distance passes).
DistanceField compute_edf(const VoxelGrid& grid);

/// Trilinear interpolation of the eight surrounding voxel-centre values.
/// Throws OutOfBounds outside the lattice box.
double query_distance(const DistanceField& field, const Eigen::Vector3d& p);

/// Same as query_distance and also returns the spatial gradient.
double query_distance(const DistanceField& field, const Eigen::Vector3d& p,
                      Eigen::Vector3d& gradient);

/// Clearance to the occupied voxel surfaces: interpolated distance minus
/// half a voxel. Negative or zero inside occupied space.
double query_clearance(const DistanceField& field, const Eigen::Vector3d& p);
double query_clearance(const DistanceField& field, const Eigen::Vector3d& p,
                       Eigen::Vector3d& gradient);

// --- files ---------------------------------------------------------------

/// ASCII PLY; reads x y z from the vertex element.
PointCloud read_ply(const std::filesystem::path& path);
/// One "x,y,z" row per point; a non-numeric first row is treated as header.
PointCloud read_csv_cloud(const std::filesystem::path& path);
/// Dispatches on extension (.ply / .csv).
PointCloud read_point_cloud(const std::filesystem::path& path);

/// Binary dump: "FTPGRID1", int32 dims[3], float64 origin[3], float64
/// resolution, then one byte per voxel in row-major (x slowest) order.
void write_occupancy_dump(const VoxelGrid& grid, const std::filesystem::path& path);
VoxelGrid read_occupancy_dump(const std::filesystem::path& path);

}  // namespace ftp::gridmap
