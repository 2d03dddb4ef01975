#include "ftp/planner/trajectory_planner.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <optional>

#include "ftp/errors.hpp"

namespace ftp::planner {

using Eigen::Vector3d;

void PlannerConfig::validate() const {
  const double positives[] = {v_max,          a_lim,           primitive_duration, time_weight,
                              lambda_smooth,  lambda_collision, lambda_feasible,   safe_clearance,
                              replan_period,  goal_tolerance,  search_resolution,  knot_interval,
                              gradient_tolerance};
  for (double v : positives) {
    if (!(v > 0.0) || !std::isfinite(v)) throw ConfigError("planner parameters must be positive");
  }
  if (node_budget <= 0) throw ConfigError("planner node_budget must be positive");
  if (max_iterations < 0) throw ConfigError("planner max_iterations must be non-negative");
}

BSplineTrajectory parameterize(const KinoPath& path, double knot_interval, const Vector3d& start_vel,
                               const Vector3d& start_acc) {
  if (!(knot_interval > 0.0)) throw std::invalid_argument("knot interval must be positive");
  const double T = path.duration();
  if (path.empty() || T <= 0.0) {
    // Stationary curve of three spans.
    return BSplineTrajectory(std::vector<Vector3d>(6, path.start.position), knot_interval);
  }
  const int spans = std::max(3, static_cast<int>(std::ceil(T / knot_interval - 1e-9)));
  const double dt = T / spans;

  std::vector<Vector3d> ctrl(spans + 3);
  const auto head = BSplineTrajectory::boundary_points(path.position(0.0), start_vel, start_acc, dt);
  const auto tail =
      BSplineTrajectory::boundary_points(path.position(T), path.velocity(T), path.acceleration(T), dt);
  for (int i = 0; i < 3; ++i) {
    ctrl[i] = head[i];
    ctrl[spans + i] = tail[i];
  }
  // Interior point i sits near the curve at knot time (i - 1) * dt.
  for (int i = 3; i < spans; ++i) ctrl[i] = path.position((i - 1) * dt);
  return BSplineTrajectory(std::move(ctrl), dt);
}

namespace {

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

}  // namespace

PlanResult plan_trajectory(const PlanStart& start, const Vector3d& goal, const gridmap::DistanceField& field,
                           const PlannerConfig& cfg) {
  const auto t0 = std::chrono::steady_clock::now();
  PlanResult result;

  KinoState s{start.position, start.velocity};
  const double speed = s.velocity.norm();
  if (speed > cfg.v_max) s.velocity *= cfg.v_max / speed;
  result.search_path = kino_search(s, goal, field, cfg);
  result.search_seconds = seconds_since(t0);

  const BSplineTrajectory seed = parameterize(result.search_path, cfg.knot_interval, start.velocity, start.acceleration);
  const auto t1 = std::chrono::steady_clock::now();
  std::optional<BSplineTrajectory> optimized;
  try {
    optimized = optimize_bspline(seed, field, cfg, &result.report);
  } catch (const InfeasibleSeed&) {
    optimized.reset();
  }
  result.optimize_seconds = seconds_since(t1);

  if (optimized) {
    const CollisionReport check = check_trajectory(*optimized, field, cfg);
    if (check.clean) {
      result.trajectory = std::move(*optimized);
      result.optimized = true;
      result.min_clearance = check.min_clearance;
    }
  }
  if (!result.optimized) {
    const CollisionReport check = check_trajectory(seed, field, cfg);
    if (!check.clean) throw NoPathFound("no collision-free trajectory for the search path");
    result.trajectory = seed;
    result.min_clearance = check.min_clearance;
  }
  result.dynamically_feasible = is_dynamically_feasible(result.trajectory, cfg, 1e-6);
  result.total_seconds = seconds_since(t0);
  return result;
}

CollisionReport check_trajectory(const BSplineTrajectory& traj, const gridmap::DistanceField& field,
                                 const PlannerConfig& cfg, double from_time) {
  (void)cfg;
  CollisionReport out;
  out.min_clearance = std::numeric_limits<double>::infinity();
  const double T = traj.duration();
  from_time = std::clamp(from_time, 0.0, T);

  // The velocity control polygon bounds the speed (convex hull).
  double speed_bound = 0.0;
  for (const auto& v : traj.derivative_control_points(1)) speed_bound = std::max(speed_bound, v.norm());
  const double span = T - from_time;
  int n = 0;
  if (span > 0.0 && speed_bound > 0.0) {
    n = static_cast<int>(std::ceil(span * speed_bound / field.lattice.resolution));
  }

  for (int i = 0; i <= n; ++i) {
    const double t = n == 0 ? from_time : from_time + span * i / n;
    const Vector3d p = traj.evaluate(t);
    const double c = field.lattice.contains(p) ? gridmap::query_clearance(field, p)
                                               : -std::numeric_limits<double>::infinity();
    if (c < 0.0) {
      out.clean = false;
      out.collision_time = t;
      out.min_clearance = std::min(out.min_clearance, c);
      return out;
    }
    out.min_clearance = std::min(out.min_clearance, c);
  }
  return out;
}

std::vector<Waypoint> emit_waypoints(const BSplineTrajectory& traj, double dt,
                                     const Eigen::Quaterniond& start_orientation,
                                     const Eigen::Quaterniond& goal_orientation) {
  if (!(dt > 0.0)) throw std::invalid_argument("waypoint spacing must be positive");
  const double T = traj.duration();
  std::vector<double> times;
  const int whole = static_cast<int>(std::floor(T / dt + 1e-9));
  for (int k = 0; k <= whole; ++k) times.push_back(std::min(k * dt, T));
  if (T - times.back() > 1e-9) times.push_back(T);

  // Cumulative arc length at each sample time.
  std::vector<double> arc(times.size(), 0.0);
  for (std::size_t k = 1; k < times.size(); ++k) {
    constexpr int kSub = 32;
    double len = 0.0;
    Vector3d prev = traj.evaluate(times[k - 1]);
    for (int s = 1; s <= kSub; ++s) {
      const Vector3d cur = traj.evaluate(times[k - 1] + (times[k] - times[k - 1]) * s / kSub);
      len += (cur - prev).norm();
      prev = cur;
    }
    arc[k] = arc[k - 1] + len;
  }
  const double total = arc.back();

  const Eigen::Quaterniond q0 = start_orientation.normalized();
  const Eigen::Quaterniond q1 = goal_orientation.normalized();
  std::vector<Waypoint> out;
  out.reserve(times.size());
  for (std::size_t k = 0; k < times.size(); ++k) {
    const double frac = total > 1e-12 ? arc[k] / total : 1.0;
    Waypoint w;
    w.time = times[k];
    w.pose.position = traj.evaluate(times[k]);
    w.pose.orientation = kinematics::canonical(q0.slerp(frac, q1).normalized());
    w.velocity = traj.evaluate(times[k], 1);
    out.push_back(w);
  }
  return out;
}

}  // namespace ftp::planner
