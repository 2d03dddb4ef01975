#pragma once

#include <array>
#include <vector>

#include <Eigen/Dense>

namespace ftp::planner {

/// Uniform cubic B-spline in task space. With n + 1 control points the
/// curve is defined on [0, (n - 2) * knot_interval].
class BSplineTrajectory {
 public:
  static constexpr int kDegree = 3;

  BSplineTrajectory() = default;
  /// Throws std::invalid_argument for fewer than 4 points or a non-positive
  /// knot interval.
  BSplineTrajectory(std::vector<Eigen::Vector3d> control_points, double knot_interval);

  /// Control points that reproduce position, velocity and acceleration
  /// exactly at one end of the curve (the first three or last three).
  static std::array<Eigen::Vector3d, 3> boundary_points(const Eigen::Vector3d& p,
                                                        const Eigen::Vector3d& v,
                                                        const Eigen::Vector3d& a, double dt);

  const std::vector<Eigen::Vector3d>& control_points() const { return ctrl_; }
  std::vector<Eigen::Vector3d>& mutable_control_points() { return ctrl_; }
  double knot_interval() const { return dt_; }
  int degree() const { return kDegree; }
  int segment_count() const { return static_cast<int>(ctrl_.size()) - kDegree; }
  double duration() const { return segment_count() * dt_; }
  bool empty() const { return ctrl_.empty(); }

  /// de Boor evaluation. derivative_order in {0, 1, 2}; throws OutOfDomain
  /// outside [0, duration()] (a 1e-12 relative slack is allowed at the ends).
  Eigen::Vector3d evaluate(double t, int derivative_order = 0) const;

  /// Derivative control points: (Q[i+1] - Q[i]) / knot_interval, applied
  /// `order` times.
  std::vector<Eigen::Vector3d> derivative_control_points(int order) const;

  /// Sum of chord lengths at the given sampling step.
  double arc_length(double step = 1e-3) const;

 private:
  std::vector<Eigen::Vector3d> ctrl_;
  double dt_ = 0.1;
};

/// Evaluates a uniform B-spline of arbitrary degree with knots
/// t_j = (j - degree) * dt via the de Boor recursion.
Eigen::Vector3d de_boor(const std::vector<Eigen::Vector3d>& ctrl, int degree, double dt, double t);

}  // namespace ftp::planner
