#pragma once

#include <array>
#include <span>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Geometry>

#include "ftp/kinematics.hpp"

namespace ftp::geometry {

/// Lever arm of the tri-point pose representation [m].
inline constexpr double kTriPointLever = 0.1;

struct PoseError {
  double distance_sum = 0.0;  // D_roll + D_pitch + D_yaw [m]
  double angle = 0.0;         // shortest angular difference, in [0, pi]

  double total() const { return distance_sum + angle; }
};

struct ObstacleSphere {
  Eigen::Vector3d center = Eigen::Vector3d::Zero();
  double radius = 0.025;
};

/// Per obstacle, the minimum surface distance over the five links.
/// Negative entries mean penetration.
using ObstacleDistances = std::vector<double>;

/// Roll, pitch, yaw with R = Rz(yaw) * Ry(pitch) * Rx(roll).
Eigen::Vector3d quaternion_to_rpy(const Eigen::Quaterniond& q);

/// Points displaced by `lever` along the pose's x, y and z axes, obtained by
/// rebuilding the rotation from its roll/pitch/yaw factors.
std::array<Eigen::Vector3d, 3> tri_points(const kinematics::Pose& pose, double lever = kTriPointLever);

double tri_point_distance_sum(const kinematics::Pose& a, const kinematics::Pose& b,
                              double lever = kTriPointLever);

/// 2*acos(clip(q1.q2)) folded into [0, pi].
double quat_shortest_angle(const Eigen::Quaterniond& q1, const Eigen::Quaterniond& q2);

PoseError pose_error(const kinematics::Pose& end_effector, const kinematics::Pose& target,
                     double lever = kTriPointLever);

/// Distance from p to the closed segment ab. The line minimiser is clamped
/// to the segment; a == b degenerates to the point distance.
double point_segment_distance(const Eigen::Vector3d& p, const Eigen::Vector3d& a,
                              const Eigen::Vector3d& b);

/// Throws EmptyObstacleList when `obstacles` is empty.
ObstacleDistances obstacle_link_distances(const kinematics::FrameChain& chain,
                                          std::span<const ObstacleSphere> obstacles);

}  // namespace ftp::geometry
