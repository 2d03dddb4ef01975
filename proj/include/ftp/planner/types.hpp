#pragma once

#include <Eigen/Dense>

namespace ftp::planner {

struct PlannerConfig {
  double v_max = 0.5;             // m/s, bound on the speed of search states
  double a_lim = 1.0;             // m/s^2, per-axis primitive acceleration
  double primitive_duration = 0.2;  // s
  double time_weight = 1.0;       // cost per second of path time in the search
  double lambda_smooth = 1.0;
  double lambda_collision = 10.0;
  double lambda_feasible = 1.0;
  double safe_clearance = 0.05;   // m
  double replan_period = 0.5;     // s
  double goal_tolerance = 0.02;   // m
  int node_budget = 200000;
  /// Closed-set cell size of the lattice search [m].
  double search_resolution = 0.04;
  /// Target knot interval of the optimised spline [s].
  double knot_interval = 0.1;
  int max_iterations = 200;
  double gradient_tolerance = 1e-4;

  /// Throws ConfigError when any field is not positive.
  void validate() const;
};

/// Position-velocity search state.
struct KinoState {
  Eigen::Vector3d position = Eigen::Vector3d::Zero();
  Eigen::Vector3d velocity = Eigen::Vector3d::Zero();
};

}  // namespace ftp::planner
