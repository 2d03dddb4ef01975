#pragma once

#include <vector>

#include <Eigen/Dense>

#include "ftp/gridmap.hpp"
#include "ftp/kinematics.hpp"
#include "ftp/planner/bspline.hpp"
#include "ftp/planner/bspline_optimizer.hpp"
#include "ftp/planner/kino_search.hpp"
#include "ftp/planner/types.hpp"

namespace ftp::planner {

/// Full start state of a plan. Acceleration only shapes the spline end
/// conditions; the lattice search starts from position and velocity.
struct PlanStart {
  Eigen::Vector3d position = Eigen::Vector3d::Zero();
  Eigen::Vector3d velocity = Eigen::Vector3d::Zero();
  Eigen::Vector3d acceleration = Eigen::Vector3d::Zero();
};

struct PlanResult {
  BSplineTrajectory trajectory;
  KinoPath search_path;
  OptimizationReport report;
  /// False when the optimised spline was rejected and the search-only
  /// spline is returned instead.
  bool optimized = false;
  bool dynamically_feasible = false;
  double min_clearance = 0.0;
  double search_seconds = 0.0;
  double optimize_seconds = 0.0;
  double total_seconds = 0.0;
};

/// Fits a uniform cubic B-spline to a search path. The knot interval is the
/// largest value <= knot_interval that divides the path duration into at
/// least three spans. The outer three control points at each end reproduce
/// position, velocity and acceleration of the path ends; at the start the
/// given velocity and acceleration are used instead of the path's own.
BSplineTrajectory parameterize(const KinoPath& path, double knot_interval,
                               const Eigen::Vector3d& start_vel, const Eigen::Vector3d& start_acc);

/// Search, fit, optimise, verify. Throws what kino_search throws, and
/// NoPathFound when neither the optimised nor the raw spline is collision
/// free.
PlanResult plan_trajectory(const PlanStart& start, const Eigen::Vector3d& goal,
                           const gridmap::DistanceField& field, const PlannerConfig& cfg);

struct CollisionReport {
  bool clean = true;
  /// Earliest sampled time with clearance < 0 (valid when !clean).
  double collision_time = 0.0;
  /// Smallest clearance among samples taken (up to the collision, if any).
  double min_clearance = 0.0;
};

/// Samples the curve from `from_time` to its end with at most one voxel of
/// arc length between samples. Leaving the map counts as a collision.
CollisionReport check_trajectory(const BSplineTrajectory& traj, const gridmap::DistanceField& field,
                                 const PlannerConfig& cfg, double from_time = 0.0);

struct Waypoint {
  double time = 0.0;
  kinematics::Pose pose;
  Eigen::Vector3d velocity = Eigen::Vector3d::Zero();
};

/// Samples at multiples of dt plus the final instant. Orientation is slerped
/// from `start_orientation` to `goal_orientation` by the fraction of arc
/// length travelled.
std::vector<Waypoint> emit_waypoints(const BSplineTrajectory& traj, double dt,
                                     const Eigen::Quaterniond& start_orientation,
                                     const Eigen::Quaterniond& goal_orientation);

}  // namespace ftp::planner
