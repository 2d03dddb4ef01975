#pragma once
/**
 * Replanning loop around plan_trajectory. A new plan is requested when the
 * active trajectory runs into occupied space ahead of the current time, when
 * replan_period has elapsed since the last plan, or after a goal change.
 * Every new plan starts from the active trajectory's state at `now`.
 */

#include <optional>

#include <Eigen/Dense>

#include "ftp/gridmap.hpp"
#include "ftp/planner/trajectory_planner.hpp"
#include "ftp/planner/types.hpp"

namespace ftp::planner {

enum class ReplanTrigger { None, Initial, Collision, Periodic, GoalChanged };

const char* to_string(ReplanTrigger trigger);

struct ReplanOutcome {
  /// Empty when the current trajectory is kept.
  std::optional<PlanResult> plan;
  ReplanTrigger trigger = ReplanTrigger::None;
  /// Clearance report of the active trajectory at the moment of the call.
  CollisionReport check;

  bool replanned() const { return plan.has_value(); }
};

class ReplanManager {
 public:
  explicit ReplanManager(PlannerConfig cfg);

  /// First plan, from rest at `start`, stamped at time `now`.
  const PlanResult& initialize(const Eigen::Vector3d& start, const Eigen::Vector3d& goal,
                               const gridmap::DistanceField& field, double now = 0.0);

  /// Forces a replan on the next call to step().
  void set_goal(const Eigen::Vector3d& goal);

  /// One replanning cycle. On NoPathFound (or a start/goal collision) the
  /// exception propagates and the previous trajectory stays active.
  ReplanOutcome step(double now, const gridmap::DistanceField& field);

  bool initialized() const { return active_.has_value(); }
  const BSplineTrajectory& trajectory() const;
  const PlanResult& active_plan() const;
  /// Global time at which the active trajectory's local time is zero.
  double trajectory_start_time() const { return start_time_; }
  double last_plan_time() const { return start_time_; }
  const Eigen::Vector3d& goal() const { return goal_; }
  const PlannerConfig& config() const { return cfg_; }

  /// State of the active trajectory at global time `now` (held at the end
  /// point once the trajectory is finished).
  PlanStart state_at(double now) const;

 private:
  PlannerConfig cfg_;
  Eigen::Vector3d goal_ = Eigen::Vector3d::Zero();
  std::optional<PlanResult> active_;
  double start_time_ = 0.0;
  bool goal_dirty_ = false;
};

}  // namespace ftp::planner
