#include "ftp/env.hpp"

#include <algorithm>
#include <cmath>

#include "ftp/errors.hpp"

namespace ftp::env {

using Eigen::Quaterniond;
using Eigen::Vector3d;
using kinematics::JointConfig;
using kinematics::Pose;

void WorkspaceSpec::validate() const {
  if (!(outer_radius > inner_cyl_radius && inner_cyl_radius >= 0.0)) {
    throw ConfigError("workspace: need outer_radius > inner_cyl_radius >= 0");
  }
  if (!(annulus_major > annulus_minor && annulus_minor >= 0.0)) {
    throw ConfigError("workspace: need annulus_major > annulus_minor >= 0");
  }
  if (!(obstacle_radius > 0.0)) throw ConfigError("workspace: obstacle_radius must be positive");
  if (obstacle_count < 1) throw ConfigError("workspace: obstacle_count must be at least 1");
}

void EpisodeConfig::validate() const {
  if (max_steps <= 0) throw ConfigError("episode: max_steps must be positive");
  if (!(dt > 0.0)) throw ConfigError("episode: dt must be positive");
  if (!(action_limit > 0.0)) throw ConfigError("episode: action_limit must be positive");
}

namespace {

Quaterniond uniform_quaternion(Rng& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const double u1 = u(rng), u2 = u(rng), u3 = u(rng);
  const double a = std::sqrt(1.0 - u1), b = std::sqrt(u1);
  Quaterniond q(a * std::sin(2 * M_PI * u2), a * std::cos(2 * M_PI * u2), b * std::sin(2 * M_PI * u3),
                b * std::cos(2 * M_PI * u3));
  return kinematics::canonical(q.normalized());
}

}  // namespace

Pose sample_target(Rng& rng, const WorkspaceSpec& ws) {
  const double R = ws.outer_radius;
  std::uniform_real_distribution<double> xy(-R, R), z(0.0, R);
  Pose p;
  for (;;) {
    const Vector3d c(xy(rng), xy(rng), z(rng));
    if (c.norm() > R) continue;
    if (c.head<2>().squaredNorm() < ws.inner_cyl_radius * ws.inner_cyl_radius) continue;
    p.position = c;
    break;
  }
  p.orientation = uniform_quaternion(rng);
  return p;
}

std::vector<geometry::ObstacleSphere> sample_obstacles(Rng& rng, const Pose& target, const WorkspaceSpec& ws) {
  const Vector3d to_base = -target.position;
  std::normal_distribution<double> n(0.0, 1.0);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const double r0 = ws.annulus_minor, r1 = ws.annulus_major;
  std::vector<geometry::ObstacleSphere> out;
  out.reserve(ws.obstacle_count);
  while (static_cast<int>(out.size()) < ws.obstacle_count) {
    Vector3d dir(n(rng), n(rng), n(rng));
    const double len = dir.norm();
    if (len == 0.0) continue;
    dir /= len;
    if (dir.dot(to_base) < 0.0 || dir.z() < 0.0) continue;
    // Radius with density proportional to r^2 (uniform in volume).
    const double r = std::cbrt(r0 * r0 * r0 + u(rng) * (r1 * r1 * r1 - r0 * r0 * r0));
    geometry::ObstacleSphere s;
    s.center = target.position + r * dir;
    s.radius = ws.obstacle_radius;
    out.push_back(s);
  }
  return out;
}

geometry::PoseError task_error(const Pose& ee, const Pose& target, ErrorMode mode, double lever) {
  if (mode == ErrorMode::PositionOnly) {
    geometry::PoseError e;
    e.distance_sum = (ee.position - target.position).norm();
    return e;
  }
  return geometry::pose_error(ee, target, lever);
}

StateVector build_state(const kinematics::DHTable& dh, const JointConfig& q, const Pose& target,
                        std::span<const geometry::ObstacleSphere> obstacles, ErrorMode mode, double lever) {
  const kinematics::FrameChain chain = kinematics::forward_kinematics(dh, q);
  const Pose ee = chain.end_effector();
  const geometry::PoseError err = task_error(ee, target, mode, lever);
  const geometry::ObstacleDistances d = geometry::obstacle_link_distances(chain, obstacles);

  StateVector s(6 + 7 + 7 + 2 + static_cast<int>(d.size()));
  int k = 0;
  for (int i = 0; i < 6; ++i) s[k++] = q[i];
  auto put_pose = [&](const Pose& p) {
    for (int i = 0; i < 3; ++i) s[k++] = p.position[i];
    s[k++] = p.orientation.w();
    s[k++] = p.orientation.x();
    s[k++] = p.orientation.y();
    s[k++] = p.orientation.z();
  };
  put_pose(ee);
  put_pose(target);
  s[k++] = err.distance_sum;
  s[k++] = err.angle;
  for (double v : d) s[k++] = v;
  return s;
}

JointConfig step(const kinematics::DHTable& dh, const JointConfig& q, const Action& a, const EpisodeConfig& cfg) {
  const Action clipped = a.cwiseMax(-cfg.action_limit).cwiseMin(cfg.action_limit);
  return dh.clamp(q + clipped * cfg.dt);
}

double collision_penalty(double distance, double penalty_distance) {
  return std::max(0.0, 1.0 - std::max(distance, 0.0) / penalty_distance);
}

double reward(double e, std::span<const double> d_obs, const RewardParams& p) {
  double penalty = 0.0;
  for (double d : d_obs) penalty += collision_penalty(d, p.penalty_distance);
  return -(p.error_weight * e * e + std::log(e * e + p.log_offset) + p.collision_weight * penalty);
}

ReachEnv::ReachEnv(EnvConfig cfg, std::uint64_t seed) : cfg_(std::move(cfg)), rng_(seed), q_(cfg_.home) {
  cfg_.workspace.validate();
  cfg_.episode.validate();
}

StateVector ReachEnv::reset() {
  steps_ = 0;
  q_ = cfg_.home;
  if (cfg_.home_noise > 0.0) {
    std::uniform_real_distribution<double> u(-cfg_.home_noise, cfg_.home_noise);
    for (int i = 0; i < kinematics::kNumJoints; ++i) q_[i] += u(rng_);
    q_ = cfg_.dh.clamp(q_);
  }
  target_ = sample_target(rng_, cfg_.workspace);
  obstacles_ = sample_obstacles(rng_, target_, cfg_.workspace);
  return observe();
}

void ReachEnv::set_obstacles(std::vector<geometry::ObstacleSphere> obstacles) {
  if (obstacles.empty()) throw EmptyObstacleList("environment needs at least one obstacle");
  obstacles_ = std::move(obstacles);
}

StateVector ReachEnv::observe() const {
  return build_state(cfg_.dh, q_, target_, obstacles_, cfg_.error_mode, cfg_.tri_point_lever);
}

Pose ReachEnv::end_effector() const { return kinematics::forward_kinematics(cfg_.dh, q_).end_effector(); }

double ReachEnv::current_error() const {
  return task_error(end_effector(), target_, cfg_.error_mode, cfg_.tri_point_lever).total();
}

StepResult ReachEnv::step(const Action& action) {
  q_ = env::step(cfg_.dh, q_, action, cfg_.episode);
  ++steps_;
  StepResult r;
  r.state = observe();
  const int n_obs = static_cast<int>(obstacles_.size());
  const auto d = std::span<const double>(r.state.data() + r.state.size() - n_obs, n_obs);
  r.error = r.state[20] + r.state[21];
  r.min_d_obs = *std::min_element(d.begin(), d.end());
  r.reward = reward(r.error, d, cfg_.reward);
  r.done = steps_ >= cfg_.episode.max_steps;
  return r;
}

}  // namespace ftp::env
