#pragma once
/**
 * Forward kinematics of a six-joint serial arm in the standard
 * Denavit-Hartenberg convention:
 *
 *   T_i = Rot_z(theta_i) * Trans_z(d_i) * Trans_x(a_i) * Rot_x(alpha_i)
 *
 * The default table is the UR5e. Joint limits are enforced at the FK entry
 * point; configurations are never wrapped silently.
 */

#include <array>
#include <cmath>
#include <filesystem>
#include <string>

#include <Eigen/Dense>
#include <Eigen/Geometry>

namespace ftp::kinematics {

inline constexpr int kNumJoints = 6;
inline constexpr int kNumLinks = 5;

using JointConfig = Eigen::Matrix<double, kNumJoints, 1>;

struct DHRow {
  double alpha = 0.0;         // link twist [rad]
  double a = 0.0;             // link length [m]
  double d = 0.0;             // link offset [m]
  double theta_offset = 0.0;  // added to the joint variable [rad]
  double theta_min = -2.0 * M_PI;
  double theta_max = 2.0 * M_PI;
};

struct DHTable {
  std::array<DHRow, kNumJoints> rows;

  /// UR5e parameters.
  static DHTable ur5e();
  /// Reads {"rows": [{"alpha", "a", "d", "limits": [min, max]}, ...]}.
  static DHTable load(const std::filesystem::path& path);
  static DHTable from_json_text(const std::string& text);

  bool within_limits(const JointConfig& q) const;
  /// Clamps each joint into its range.
  JointConfig clamp(const JointConfig& q) const;
};

/// End-effector or target pose. Orientation is a unit quaternion kept in
/// the w >= 0 hemisphere when produced by this library.
struct Pose {
  Eigen::Vector3d position = Eigen::Vector3d::Zero();
  Eigen::Quaterniond orientation = Eigen::Quaterniond::Identity();
};

/// Flips the quaternion into the w >= 0 hemisphere.
Eigen::Quaterniond canonical(const Eigen::Quaterniond& q);

struct FrameChain {
  std::array<Eigen::Vector3d, kNumJoints + 1> origins;
  std::array<Eigen::Matrix4d, kNumJoints + 1> transforms;

  /// Pose of frame 6.
  Pose end_effector() const;
};

struct Segment {
  Eigen::Vector3d start;
  Eigen::Vector3d end;

  double length() const { return (end - start).norm(); }
};

using LinkSegments = std::array<Segment, kNumLinks>;

Eigen::Matrix4d dh_transform(const DHRow& row, double q);

/// Throws JointLimitViolation if any joint lies outside its row's range.
FrameChain forward_kinematics(const DHTable& table, const JointConfig& q);

/// Segments between consecutive joint-frame origins 1..6; the base link is
/// excluded. Zero-length segments are kept.
LinkSegments link_segments(const FrameChain& chain);

}  // namespace ftp::kinematics
