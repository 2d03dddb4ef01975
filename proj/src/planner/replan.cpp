#include "ftp/planner/replan.hpp"

#include <algorithm>
#include <stdexcept>

#include "ftp/errors.hpp"

namespace ftp::planner {

using Eigen::Vector3d;

const char* to_string(ReplanTrigger trigger) {
  switch (trigger) {
    case ReplanTrigger::None: return "none";
    case ReplanTrigger::Initial: return "initial";
    case ReplanTrigger::Collision: return "collision";
    case ReplanTrigger::Periodic: return "periodic";
    case ReplanTrigger::GoalChanged: return "goal_changed";
  }
  return "unknown";
}

ReplanManager::ReplanManager(PlannerConfig cfg) : cfg_(cfg) { cfg_.validate(); }

const PlanResult& ReplanManager::initialize(const Vector3d& start, const Vector3d& goal,
                                            const gridmap::DistanceField& field, double now) {
  PlanStart s;
  s.position = start;
  active_ = plan_trajectory(s, goal, field, cfg_);
  goal_ = goal;
  start_time_ = now;
  goal_dirty_ = false;
  return *active_;
}

void ReplanManager::set_goal(const Vector3d& goal) {
  goal_ = goal;
  goal_dirty_ = true;
}

const BSplineTrajectory& ReplanManager::trajectory() const { return active_plan().trajectory; }

const PlanResult& ReplanManager::active_plan() const {
  if (!active_) throw std::logic_error("replan manager has no active trajectory");
  return *active_;
}

PlanStart ReplanManager::state_at(double now) const {
  const BSplineTrajectory& traj = trajectory();
  const double t = std::clamp(now - start_time_, 0.0, traj.duration());
  PlanStart s;
  s.position = traj.evaluate(t, 0);
  s.velocity = traj.evaluate(t, 1);
  s.acceleration = traj.evaluate(t, 2);
  return s;
}

ReplanOutcome ReplanManager::step(double now, const gridmap::DistanceField& field) {
  ReplanOutcome out;
  const BSplineTrajectory& traj = trajectory();
  const double local = std::clamp(now - start_time_, 0.0, traj.duration());
  out.check = check_trajectory(traj, field, cfg_, local);

  if (goal_dirty_) {
    out.trigger = ReplanTrigger::GoalChanged;
  } else if (!out.check.clean) {
    out.trigger = ReplanTrigger::Collision;
  } else if (now - start_time_ >= cfg_.replan_period - 1e-9) {
    out.trigger = ReplanTrigger::Periodic;
  } else {
    return out;
  }

  out.plan = plan_trajectory(state_at(now), goal_, field, cfg_);
  active_ = *out.plan;
  start_time_ = now;
  goal_dirty_ = false;
  return out;
}

}  // namespace ftp::planner
