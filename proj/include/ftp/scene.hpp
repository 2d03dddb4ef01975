#pragma once
/**
 * Planner scenes: spheres (optionally moving along piecewise-linear paths or
 * appearing at a given time), boxes, an optional point cloud and a table
 * plane, plus the start, goal and scripted goal changes of a run.
 *
 *   {
 *     "name": "shelf",
 *     "grid": {"origin": [-0.6, -0.6, -0.6], "resolution": 0.02, "dims": [60, 60, 60]},
 *     "start": [x, y, z], "goal": [x, y, z],
 *     "goal_orientation_wxyz": [w, x, y, z],
 *     "spheres": [{"center": [..], "radius": 0.05, "appear_at": 1.0,
 *                  "path": [{"t": 0, "center": [..]}, {"t": 2, "center": [..]}]}],
 *     "boxes": [{"lo": [..], "hi": [..]}],
 *     "random_spheres": {"count": 10, "radius": 0.06, "lo": [..], "hi": [..],
 *                        "endpoint_clearance": 0.1},
 *     "point_cloud": "cloud.ply", "table_z": 0.0, "complete_occlusion": true,
 *     "goal_changes": [{"t": 3.0, "goal": [..]}]
 *   }
 */

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "ftp/geometry.hpp"
#include "ftp/gridmap.hpp"

namespace ftp::scene {

struct Keyframe {
  double time = 0.0;
  Eigen::Vector3d center = Eigen::Vector3d::Zero();
};

struct SceneSphere {
  Eigen::Vector3d center = Eigen::Vector3d::Zero();
  double radius = 0.05;
  /// Present only from this time on.
  double appear_at = 0.0;
  /// Piecewise-linear motion; held at the end keyframes outside their span.
  std::vector<Keyframe> path;

  bool present(double t) const { return t >= appear_at; }
  Eigen::Vector3d center_at(double t) const;
  bool moving() const { return path.size() > 1; }
};

struct SceneBox {
  Eigen::Vector3d lo = Eigen::Vector3d::Zero();
  Eigen::Vector3d hi = Eigen::Vector3d::Zero();
};

struct RandomSpheres {
  int count = 0;
  double radius = 0.06;
  Eigen::Vector3d lo = Eigen::Vector3d::Constant(-0.4);
  Eigen::Vector3d hi = Eigen::Vector3d::Constant(0.4);
  /// Required gap between a sphere surface and the start/goal.
  double endpoint_clearance = 0.1;
};

struct GoalChange {
  double time = 0.0;
  Eigen::Vector3d goal = Eigen::Vector3d::Zero();
};

struct Scene {
  std::string name = "scene";
  gridmap::Lattice lattice = gridmap::VoxelGrid::default_workspace().lattice;
  Eigen::Vector3d start = Eigen::Vector3d::Zero();
  Eigen::Vector3d goal = Eigen::Vector3d::Zero();
  std::optional<Eigen::Quaterniond> goal_orientation;
  std::vector<SceneSphere> spheres;
  std::vector<SceneBox> boxes;
  RandomSpheres random;
  /// Occupied-space points after table filtering and occlusion completion.
  gridmap::PointCloud cloud;
  double table_z = 0.0;
  std::vector<GoalChange> goal_changes;

  bool dynamic() const;
  /// Spheres present at time t at their current centres.
  std::vector<geometry::ObstacleSphere> spheres_at(double t) const;
  gridmap::VoxelGrid grid_at(double t) const;
  gridmap::DistanceField field_at(double t) const;
  /// Goal in effect at time t after the scripted changes.
  Eigen::Vector3d goal_at(double t) const;
};

/// `base_dir` resolves a relative point_cloud path. Throws ConfigError /
/// IoError.
Scene scene_from_json(const nlohmann::json& j, const std::filesystem::path& base_dir);
Scene load_scene(const std::filesystem::path& path);

/// Adds `random.count` static spheres drawn uniformly in [lo, hi], rejecting
/// draws that come within endpoint_clearance of the start or goal.
Scene with_random_spheres(Scene scene, std::uint64_t seed);

}  // namespace ftp::scene
