#include "ftp/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "ftp/errors.hpp"

namespace ftp::geometry {

using Eigen::Matrix3d;
using Eigen::Quaterniond;
using Eigen::Vector3d;

Vector3d quaternion_to_rpy(const Quaterniond& q) {
  const double w = q.w(), x = q.x(), y = q.y(), z = q.z();
  const double roll = std::atan2(2.0 * (w * x + y * z), 1.0 - 2.0 * (x * x + y * y));
  const double pitch = std::asin(std::clamp(2.0 * (w * y - z * x), -1.0, 1.0));
  const double yaw = std::atan2(2.0 * (w * z + x * y), 1.0 - 2.0 * (y * y + z * z));
  return {roll, pitch, yaw};
}

namespace {

Matrix3d rot_roll(double a) {
  Matrix3d R;
  R << 1, 0, 0, 0, std::cos(a), -std::sin(a), 0, std::sin(a), std::cos(a);
  return R;
}

Matrix3d rot_pitch(double a) {
  Matrix3d R;
  R << std::cos(a), 0, std::sin(a), 0, 1, 0, -std::sin(a), 0, std::cos(a);
  return R;
}

Matrix3d rot_yaw(double a) {
  Matrix3d R;
  R << std::cos(a), -std::sin(a), 0, std::sin(a), std::cos(a), 0, 0, 0, 1;
  return R;
}

}  // namespace

std::array<Vector3d, 3> tri_points(const kinematics::Pose& pose, double lever) {
  const Vector3d rpy = quaternion_to_rpy(pose.orientation.normalized());
  const Matrix3d R = rot_yaw(rpy[2]) * rot_pitch(rpy[1]) * rot_roll(rpy[0]);
  return {pose.position + lever * R.col(0), pose.position + lever * R.col(1),
          pose.position + lever * R.col(2)};
}

double tri_point_distance_sum(const kinematics::Pose& a, const kinematics::Pose& b, double lever) {
  const auto pa = tri_points(a, lever);
  const auto pb = tri_points(b, lever);
  return (pa[0] - pb[0]).norm() + (pa[1] - pb[1]).norm() + (pa[2] - pb[2]).norm();
}

double quat_shortest_angle(const Quaterniond& q1, const Quaterniond& q2) {
  const double dot = std::clamp(q1.coeffs().dot(q2.coeffs()), -1.0, 1.0);
  const double diff = std::abs(2.0 * std::acos(dot));
  return diff > M_PI ? 2.0 * M_PI - diff : diff;
}

PoseError pose_error(const kinematics::Pose& end_effector, const kinematics::Pose& target,
                     double lever) {
  return {tri_point_distance_sum(end_effector, target, lever),
          quat_shortest_angle(end_effector.orientation, target.orientation)};
}

double point_segment_distance(const Vector3d& p, const Vector3d& a, const Vector3d& b) {
  // Lexicographic endpoint order makes the result exactly symmetric in (a, b).
  const bool swap = std::lexicographical_compare(b.data(), b.data() + 3, a.data(), a.data() + 3);
  const Vector3d& p1 = swap ? b : a;
  const Vector3d& p2 = swap ? a : b;
  const Vector3d dir = p2 - p1;
  const double len2 = dir.squaredNorm();
  if (len2 == 0.0) return (p - p1).norm();
  const double t = std::clamp(-(p1 - p).dot(dir) / len2, 0.0, 1.0);
  return (p1 + t * dir - p).norm();
}

ObstacleDistances obstacle_link_distances(const kinematics::FrameChain& chain,
                                          std::span<const ObstacleSphere> obstacles) {
  if (obstacles.empty()) throw EmptyObstacleList("obstacle_link_distances needs at least one obstacle");
  const auto segs = kinematics::link_segments(chain);
  ObstacleDistances out(obstacles.size());
  for (std::size_t k = 0; k < obstacles.size(); ++k) {
    double best = std::numeric_limits<double>::infinity();
    for (const auto& s : segs) {
      best = std::min(best, point_segment_distance(obstacles[k].center, s.start, s.end));
    }
    out[k] = best - obstacles[k].radius;
  }
  return out;
}

}  // namespace ftp::geometry
