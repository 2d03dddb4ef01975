#pragma once
/**
 * Best-first lattice search over position-velocity states. Nodes are expanded
 * with constant-acceleration primitives (each axis in {-a_lim, 0, +a_lim},
 * fixed duration); every expansion also tries a direct cubic connection to
 * the goal that ends at rest.
 *
 * Cost of a path: sum over primitives of (|u|^2 + time_weight) * duration; the
 * heuristic is time_weight * |goal - p| / v_max, a lower bound on the
 * remaining time cost.
 */

#include <vector>

#include <Eigen/Dense>

#include "ftp/gridmap.hpp"
#include "ftp/planner/types.hpp"

namespace ftp::planner {

/// One piece of the search result, stored as a cubic in local time:
/// p(s) = c0 + c1 s + c2 s^2 + c3 s^3, s in [0, duration].
struct KinoSegment {
  Eigen::Matrix<double, 3, 4> coeffs = Eigen::Matrix<double, 3, 4>::Zero();
  double duration = 0.0;
  bool is_shot = false;

  static KinoSegment primitive(const KinoState& from, const Eigen::Vector3d& accel, double duration);
  /// Cubic from (p0, v0) to (p1, v1) over `duration`.
  static KinoSegment hermite(const KinoState& from, const KinoState& to, double duration);

  Eigen::Vector3d position(double s) const;
  Eigen::Vector3d velocity(double s) const;
  Eigen::Vector3d acceleration(double s) const;
};

struct TimedState {
  KinoState state;
  double time = 0.0;
};

struct KinoPath {
  KinoState start;
  std::vector<KinoSegment> segments;
  std::size_t expanded_nodes = 0;

  bool empty() const { return segments.empty(); }
  double duration() const;
  /// Segment-boundary states with their time stamps, start included.
  std::vector<TimedState> states() const;
  Eigen::Vector3d position(double t) const;
  Eigen::Vector3d velocity(double t) const;
  Eigen::Vector3d acceleration(double t) const;
  /// Polyline length sampled at `step` seconds.
  double length(double step = 1e-3) const;
};

/// Errors: OutOfBounds (start/goal outside the field), StartInCollision,
/// GoalInCollision, NoPathFound (open set exhausted or node budget hit).
KinoPath kino_search(const KinoState& start, const Eigen::Vector3d& goal,
                     const gridmap::DistanceField& field, const PlannerConfig& cfg);

}  // namespace ftp::planner
