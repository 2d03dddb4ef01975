#pragma once
/**
 * Kinematic reaching task with spherical obstacles.
 *
 * The arm follows commanded joint velocities exactly (clip, integrate, clamp
 * to the joint limits). Episodes end on the step limit only. Observation:
 *
 *   [ q (6) | ee position (3), ee quaternion wxyz (4) |
 *     target position (3), target quaternion wxyz (4) | error (2) | d_obs (n) ]
 *
 * With three obstacles the observation has 25 entries.
 */

#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "ftp/geometry.hpp"
#include "ftp/kinematics.hpp"

namespace ftp::env {

using Rng = std::mt19937_64;
using StateVector = Eigen::VectorXd;
using Action = Eigen::Matrix<double, kinematics::kNumJoints, 1>;

struct WorkspaceSpec {
  double outer_radius = 0.85;
  double inner_cyl_radius = 0.30;
  double annulus_major = 0.60;
  double annulus_minor = 0.15;
  double obstacle_radius = 0.025;
  int obstacle_count = 3;

  void validate() const;
};

struct EpisodeConfig {
  int max_steps = 100;
  double dt = 0.05;
  double action_limit = 3.14;
  /// Final error below which an episode counts as a success.
  double success_threshold = 0.01;

  void validate() const;
};

struct RewardParams {
  double error_weight = 1e-3;      // on e^2
  double log_offset = 1e-4;        // inside ln(e^2 + .)
  double collision_weight = 0.1;   // on the summed penalties
  double penalty_distance = 0.08;  // distance at which the penalty vanishes
};

/// Full pose error (tri-point sum, angle) or position-only (|dp|, 0).
enum class ErrorMode { Pose, PositionOnly };

struct EnvConfig {
  WorkspaceSpec workspace;
  EpisodeConfig episode;
  RewardParams reward;
  ErrorMode error_mode = ErrorMode::Pose;
  double tri_point_lever = geometry::kTriPointLever;
  kinematics::JointConfig home = (kinematics::JointConfig() << 0.0, -M_PI / 2, M_PI / 2, -M_PI / 2,
                                  -M_PI / 2, 0.0)
                                     .finished();
  /// Uniform noise half-width added to the home configuration on reset.
  double home_noise = 0.0;
  kinematics::DHTable dh = kinematics::DHTable::ur5e();

  int state_dim() const { return 6 + 7 + 7 + 2 + workspace.obstacle_count; }
};

/// Uniform over the ball of radius outer_radius, z >= 0, outside the base
/// cylinder; orientation uniform over SO(3).
kinematics::Pose sample_target(Rng& rng, const WorkspaceSpec& ws = {});

/// Sphere centres uniform in the shell annulus_minor <= r <= annulus_major
/// around the target, restricted to directions u with u . (base - target) >= 0
/// and u_z >= 0.
std::vector<geometry::ObstacleSphere> sample_obstacles(Rng& rng, const kinematics::Pose& target,
                                                       const WorkspaceSpec& ws = {});

/// Error block for the given mode.
geometry::PoseError task_error(const kinematics::Pose& ee, const kinematics::Pose& target, ErrorMode mode,
                               double lever = geometry::kTriPointLever);

StateVector build_state(const kinematics::DHTable& dh, const kinematics::JointConfig& q,
                        const kinematics::Pose& target, std::span<const geometry::ObstacleSphere> obstacles,
                        ErrorMode mode = ErrorMode::Pose, double lever = geometry::kTriPointLever);

/// Clip per axis, integrate over dt, clamp to the joint limits.
kinematics::JointConfig step(const kinematics::DHTable& dh, const kinematics::JointConfig& q,
                             const Action& a, const EpisodeConfig& cfg);

/// Penalty of one obstacle distance, in [0, 1]. Negative distances count as
/// zero distance.
double collision_penalty(double distance, double penalty_distance);

/// -(error_weight e^2 + ln(e^2 + log_offset) + collision_weight * sum of penalties).
double reward(double e, std::span<const double> d_obs, const RewardParams& params = {});

struct StepResult {
  StateVector state;
  double reward = 0.0;
  double error = 0.0;      // e after the step
  double min_d_obs = 0.0;  // smallest obstacle distance after the step
  bool done = false;
};

class ReachEnv {
 public:
  ReachEnv(EnvConfig cfg, std::uint64_t seed);

  /// New target and obstacles, arm at home. Returns the first observation.
  StateVector reset();
  StepResult step(const Action& action);

  /// For tracking: replace the target or the obstacles mid-episode.
  void set_target(const kinematics::Pose& target) { target_ = target; }
  void set_obstacles(std::vector<geometry::ObstacleSphere> obstacles);
  void set_joints(const kinematics::JointConfig& q) { q_ = q; }

  StateVector observe() const;
  double current_error() const;
  kinematics::Pose end_effector() const;

  const EnvConfig& config() const { return cfg_; }
  const kinematics::JointConfig& joints() const { return q_; }
  const kinematics::Pose& target() const { return target_; }
  const std::vector<geometry::ObstacleSphere>& obstacles() const { return obstacles_; }
  int steps() const { return steps_; }
  Rng& rng() { return rng_; }

 private:
  EnvConfig cfg_;
  Rng rng_;
  kinematics::JointConfig q_;
  kinematics::Pose target_;
  std::vector<geometry::ObstacleSphere> obstacles_;
  int steps_ = 0;
};

}  // namespace ftp::env
