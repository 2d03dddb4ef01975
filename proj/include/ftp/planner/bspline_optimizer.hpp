#pragma once

#include <vector>

#include <Eigen/Dense>

#include "ftp/gridmap.hpp"
#include "ftp/planner/bspline.hpp"
#include "ftp/planner/types.hpp"

namespace ftp::planner {

/// Control points held fixed at each end: they carry position, velocity and
/// acceleration at the endpoints.
inline constexpr int kFixedEndPoints = 3;

/// Fraction of v_max / a_lim at which the feasibility hinge starts.
inline constexpr double kFeasibilityMargin = 0.9;

struct SplineCostTerms {
  double smoothness = 0.0;
  double collision = 0.0;
  double feasibility = 0.0;
  double total = 0.0;
};

/// Weighted cost of a control polygon:
///   lambda_smooth   * sum |Q[i+1] - 2 Q[i] + Q[i-1]|^2
/// + lambda_collision * sum_free max(0, safe_clearance - clearance(Q[i]))^2
/// + lambda_feasible  * per-axis hinge^2 on velocity / acceleration points.
/// When `gradient` is non-null it receives d(total)/dQ for every point; the
/// collision term only covers points that are free to move.
SplineCostTerms spline_cost(const std::vector<Eigen::Vector3d>& ctrl, double knot_interval,
                            const gridmap::DistanceField& field, const PlannerConfig& cfg,
                            std::vector<Eigen::Vector3d>* gradient = nullptr);

struct OptimizationReport {
  int iterations = 0;
  double initial_cost = 0.0;
  double final_cost = 0.0;
  double gradient_inf_norm = 0.0;
  /// Cost after every accepted step, starting with the initial cost.
  std::vector<double> cost_history;
};

/// Gradient descent (L-BFGS direction, backtracking line search) until the
/// infinity norm of the gradient falls below cfg.gradient_tolerance or
/// cfg.max_iterations is reached. The outer three control points at each end
/// stay fixed. Throws InfeasibleSeed if a free control point still lies
/// inside occupied space afterwards.
BSplineTrajectory optimize_bspline(const BSplineTrajectory& seed, const gridmap::DistanceField& field,
                                   const PlannerConfig& cfg, OptimizationReport* report = nullptr);

/// Seed given as raw control points at cfg.knot_interval.
BSplineTrajectory optimize_bspline(const std::vector<Eigen::Vector3d>& seed,
                                   const gridmap::DistanceField& field, const PlannerConfig& cfg,
                                   OptimizationReport* report = nullptr);

/// Per-axis velocity / acceleration control points within the limits
/// (up to `tolerance`).
bool is_dynamically_feasible(const BSplineTrajectory& traj, const PlannerConfig& cfg,
                             double tolerance = 1e-9);

}  // namespace ftp::planner
