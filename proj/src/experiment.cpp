#include "ftp/experiment.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <ostream>
#include <set>

#include "ftp/errors.hpp"
#include "ftp/io.hpp"
#include "ftp/planner/kino_search.hpp"
#include "ftp/planner/replan.hpp"
#include "ftp/planner/trajectory_io.hpp"
#include "ftp/planner/trajectory_planner.hpp"
#include "ftp/scene.hpp"

namespace ftp::experiment {

using config::Experiment;
using config::json;
using Eigen::Vector3d;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

fs::path seed_dir(const Experiment& ex, std::uint64_t seed) {
  return ex.out_dir / ("seed_" + std::to_string(seed));
}

/// Strict reader for the small driver sections.
json section_checked(const Experiment& ex, const std::string& name, std::initializer_list<const char*> keys) {
  const json& s = ex.section(name);
  if (!s.is_object()) throw ConfigError(name + ": expected an object");
  std::set<std::string> known(keys.begin(), keys.end());
  for (const auto& item : s.items()) {
    if (!known.count(item.key())) throw ConfigError(name + ": unknown key '" + item.key() + "'");
  }
  return s;
}

template <typename T>
T value(const json& s, const char* key, T fallback) {
  try {
    return s.value(key, fallback);
  } catch (const json::exception& e) {
    throw ConfigError(std::string(key) + ": " + e.what());
  }
}

fs::path checkpoint_path(const Experiment& ex, const std::string& sec, std::uint64_t seed) {
  std::string text = ex.section(sec).value("checkpoint", std::string());
  if (text.empty()) throw ConfigError(sec + ".checkpoint is required");
  const std::string tag = "{seed}";
  for (std::size_t pos; (pos = text.find(tag)) != std::string::npos;) text.replace(pos, tag.size(), std::to_string(seed));
  fs::path p = text;
  if (!p.is_absolute()) p = ex.base_dir / p;
  if (!fs::exists(p)) throw IoError("checkpoint not found: " + p.string());
  return p;
}

/// Rebuilds the networks of a checkpoint; hyperparameters come from the
/// sidecar when present, otherwise from the experiment.
rl::TrainConfig load_trained(const Experiment& ex, const fs::path& ckpt, rl::ActorCritic& model) {
  rl::TrainConfig cfg = train_config(ex);
  const fs::path side = ckpt.string() + ".json";
  if (fs::exists(side)) {
    json j;
    try {
      j = json::parse(io::read_text(side));
    } catch (const json::exception& e) {
      throw ConfigError(side.string() + ": " + e.what());
    }
    cfg.env = config::env_from_json(j.at("env"));
    config::rl_from_json(j.at("rl"), cfg);
  }
  rl::Rng rng(0);
  model = rl::ActorCritic::make(cfg.env.state_dim(), kinematics::kNumJoints, cfg.ppo, rng);
  rl::load_model(ckpt, model);
  return cfg;
}

scene::Scene experiment_scene(const Experiment& ex) {
  if (!ex.has("scene")) throw ConfigError("a scene section is required for this mode");
  return scene::scene_from_json(ex.section("scene"), ex.base_dir);
}

planner::PlannerConfig planner_config(const Experiment& ex) {
  return ex.has("planner") ? config::planner_from_json(ex.section("planner")) : planner::PlannerConfig{};
}

std::uint64_t trial_seed(std::uint64_t seed, int trial) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(trial), 0x5ce7u};
  std::uint32_t out[2];
  seq.generate(out, out + 2);
  return (static_cast<std::uint64_t>(out[0]) << 32) | out[1];
}

bool reaches(const planner::BSplineTrajectory& traj, const Vector3d& goal, double tol) {
  return !traj.empty() && (traj.evaluate(traj.duration()) - goal).norm() <= tol;
}

// --- planners compared in the benchmark ---------------------------------

planner::PlannerMetrics plan_ours(const scene::Scene& sc, const gridmap::DistanceField& field,
                                  const planner::PlannerConfig& cfg, planner::PlanResult* out) {
  planner::PlannerMetrics m;
  m.planner = "ours";
  const auto t0 = Clock::now();
  try {
    planner::PlanStart start;
    start.position = sc.start;
    planner::PlanResult r = planner::plan_trajectory(start, sc.goal, field, cfg);
    m.time = seconds_since(t0);
    const auto check = planner::check_trajectory(r.trajectory, field, cfg);
    m.success = check.clean && reaches(r.trajectory, sc.goal, cfg.goal_tolerance);
    m.length = r.trajectory.arc_length();
    m.min_clearance = check.min_clearance;
    if (out) *out = std::move(r);
  } catch (const Error&) {
    m.time = seconds_since(t0);
  }
  return m;
}

planner::PlannerMetrics plan_search_only(const scene::Scene& sc, const gridmap::DistanceField& field,
                                         const planner::PlannerConfig& cfg) {
  planner::PlannerMetrics m;
  m.planner = "search_only";
  const auto t0 = Clock::now();
  try {
    planner::KinoState start;
    start.position = sc.start;
    const planner::KinoPath path = planner::kino_search(start, sc.goal, field, cfg);
    const planner::BSplineTrajectory traj =
        planner::parameterize(path, cfg.knot_interval, Vector3d::Zero(), Vector3d::Zero());
    m.time = seconds_since(t0);
    const auto check = planner::check_trajectory(traj, field, cfg);
    m.success = check.clean && reaches(traj, sc.goal, cfg.goal_tolerance);
    m.length = traj.arc_length();
    m.min_clearance = check.min_clearance;
  } catch (const Error&) {
    m.time = seconds_since(t0);
  }
  return m;
}

planner::PlannerMetrics plan_straight_line(const scene::Scene& sc, const gridmap::DistanceField& field) {
  planner::PlannerMetrics m;
  m.planner = "straight_line";
  const auto t0 = Clock::now();
  const double len = (sc.goal - sc.start).norm();
  const int n = std::max(1, static_cast<int>(std::ceil(len / (0.5 * field.lattice.resolution))));
  bool clean = true;
  double min_c = std::numeric_limits<double>::infinity();
  for (int i = 0; i <= n && clean; ++i) {
    const Vector3d p = sc.start + (sc.goal - sc.start) * (static_cast<double>(i) / n);
    if (!field.lattice.contains(p)) {
      clean = false;
      break;
    }
    const double c = gridmap::query_clearance(field, p);
    min_c = std::min(min_c, c);
    if (c < 0.0) clean = false;
  }
  m.time = seconds_since(t0);
  m.success = clean;
  m.length = len;
  m.min_clearance = std::isfinite(min_c) ? min_c : 0.0;
  return m;
}

// --- tracking helpers ------------------------------------------------------

/// The env observes a fixed number of obstacles: the nearest scene spheres,
/// padded with a far-away sphere when the scene has fewer.
std::vector<geometry::ObstacleSphere> observed_obstacles(const std::vector<geometry::ObstacleSphere>& all,
                                                         const Vector3d& ee, int count) {
  std::vector<geometry::ObstacleSphere> sorted = all;
  std::stable_sort(sorted.begin(), sorted.end(), [&](const auto& a, const auto& b) {
    return (a.center - ee).norm() - a.radius < (b.center - ee).norm() - b.radius;
  });
  std::vector<geometry::ObstacleSphere> out;
  for (int i = 0; i < count; ++i) {
    if (i < static_cast<int>(sorted.size())) {
      out.push_back(sorted[i]);
    } else {
      out.push_back({Vector3d(0.0, 0.0, 5.0), 0.025});
    }
  }
  return out;
}

}  // namespace

rl::TrainConfig train_config(const Experiment& ex) {
  rl::TrainConfig cfg;
  if (ex.has("env")) cfg.env = config::env_from_json(ex.section("env"));
  if (ex.has("rl")) config::rl_from_json(ex.section("rl"), cfg);
  return cfg;
}

// --- train -----------------------------------------------------------------

void run_train(const Experiment& ex, std::ostream& log) {
  const rl::TrainConfig base = train_config(ex);
  std::vector<std::vector<rl::EpisodeRecord>> curves;
  for (std::uint64_t seed : ex.seeds) {
    rl::TrainConfig cfg = base;
    cfg.seed = seed;
    const auto t0 = Clock::now();
    rl::TrainResult r = rl::train(cfg, [&](const rl::UpdateDiagnostics& d, const std::vector<rl::EpisodeRecord>& eps) {
      double mean = 0.0;
      for (const auto& e : eps) mean += e.episode_return;
      if (!eps.empty()) mean /= static_cast<double>(eps.size());
      log << "seed " << seed << " update " << d.update << " steps " << d.steps << " return " << mean
          << " std " << d.mean_std << " kl " << d.approx_kl << '\n';
    });
    const fs::path dir = seed_dir(ex, seed);
    rl::write_curve_csv(dir / "curve.csv", r.curve, cfg.success_thresholds, ex.hash);
    rl::write_diagnostics_csv(dir / "diagnostics.csv", r.diagnostics, ex.hash);
    rl::save_model(dir / "model.ckpt", r.model, cfg);
    log << "seed " << seed << " done in " << seconds_since(t0) << " s, final mean return "
        << rl::final_mean_return(r.curve) << '\n';
    curves.push_back(std::move(r.curve));
  }

  std::size_t episodes = 0;
  for (const auto& c : curves) episodes = std::max(episodes, c.size());
  auto os = io::open_output(ex.out_dir / "aggregate.csv");
  io::write_csv_header(os, {"episode", "seeds", "mean_return", "var_return", "mean_final_error", "var_final_error"},
                       ex.hash);
  for (std::size_t e = 0; e < episodes; ++e) {
    double n = 0.0, sr = 0.0, sr2 = 0.0, se = 0.0, se2 = 0.0;
    for (const auto& c : curves) {
      if (e >= c.size()) continue;
      n += 1.0;
      sr += c[e].episode_return;
      se += c[e].final_error;
    }
    const double mr = sr / n;
    const double me = se / n;
    for (const auto& c : curves) {
      if (e >= c.size()) continue;
      sr2 += (c[e].episode_return - mr) * (c[e].episode_return - mr);
      se2 += (c[e].final_error - me) * (c[e].final_error - me);
    }
    os << e << ',' << static_cast<int>(n) << ',' << io::format_double(mr) << ',' << io::format_double(sr2 / n) << ','
       << io::format_double(me) << ',' << io::format_double(se2 / n) << '\n';
  }
}

// --- evaluate --------------------------------------------------------------

void run_evaluate(const Experiment& ex, std::ostream& log) {
  const json s = section_checked(ex, "evaluate", {"checkpoint", "episodes"});
  const int episodes = value(s, "episodes", 100);
  if (episodes <= 0) throw ConfigError("evaluate.episodes must be positive");

  auto summary = io::open_output(ex.out_dir / "evaluate_summary.csv");
  std::vector<std::string> cols{"seed", "episodes", "mean_return", "mean_final_error"};
  rl::TrainConfig probe = train_config(ex);
  for (double t : probe.success_thresholds) cols.push_back("success_rate@" + io::format_double(t));
  io::write_csv_header(summary, cols, ex.hash);

  for (std::uint64_t seed : ex.seeds) {
    rl::ActorCritic model;
    const rl::TrainConfig cfg = load_trained(ex, checkpoint_path(ex, "evaluate", seed), model);
    env::ReachEnv env(cfg.env, seed);
    std::vector<rl::EpisodeRecord> recs;
    for (int k = 0; k < episodes; ++k) {
      rl::EpisodeRecord rec;
      rl::evaluate_episode(model.policy, env, &rec);
      rec.episode = k;
      recs.push_back(rec);
    }
    rl::write_curve_csv(seed_dir(ex, seed) / "evaluate.csv", recs, cfg.success_thresholds, ex.hash);
    double ret = 0.0, err = 0.0;
    for (const auto& r : recs) {
      ret += r.episode_return;
      err += r.final_error;
    }
    summary << seed << ',' << episodes << ',' << io::format_double(ret / episodes) << ','
            << io::format_double(err / episodes);
    for (double t : probe.success_thresholds) {
      int hits = 0;
      for (const auto& r : recs) hits += r.final_error < t ? 1 : 0;
      summary << ',' << io::format_double(static_cast<double>(hits) / episodes);
    }
    summary << '\n';
    log << "seed " << seed << " mean final error " << err / episodes << '\n';
  }
}

// --- plan ------------------------------------------------------------------

void run_plan(const Experiment& ex, std::ostream& log) {
  const json s = section_checked(ex, "plan", {"trials", "sample_dt", "waypoint_dt", "write_trajectories"});
  const int trials = value(s, "trials", 1);
  const double sample_dt = value(s, "sample_dt", 0.02);
  const double waypoint_dt = value(s, "waypoint_dt", 0.1);
  const bool write = value(s, "write_trajectories", true);
  if (trials <= 0 || !(sample_dt > 0.0) || !(waypoint_dt > 0.0)) throw ConfigError("plan: bad trials or time steps");

  const scene::Scene base = experiment_scene(ex);
  const planner::PlannerConfig cfg = planner_config(ex);
  const fs::path metrics = ex.out_dir / "metrics.csv";
  fs::remove(metrics);

  int row = 0;
  int successes = 0;
  for (std::uint64_t seed : ex.seeds) {
    for (int k = 0; k < trials; ++k, ++row) {
      const scene::Scene sc = scene::with_random_spheres(base, trial_seed(seed, k));
      const gridmap::DistanceField field = sc.field_at(0.0);
      planner::PlanResult result;
      planner::PlannerMetrics m = plan_ours(sc, field, cfg, &result);
      m.scene = sc.name;
      m.trial = row;
      planner::append_benchmark_row(metrics, m, ex.hash);
      successes += m.success ? 1 : 0;
      if (m.success && write) {
        const fs::path stem = seed_dir(ex, seed) / ("trial_" + std::to_string(k));
        planner::write_trajectory_csv(result.trajectory, sample_dt, stem.string() + ".csv", ex.hash);
        const Eigen::Quaterniond q = sc.goal_orientation.value_or(Eigen::Quaterniond::Identity());
        planner::write_trajectory_json(result.trajectory,
                                       planner::emit_waypoints(result.trajectory, waypoint_dt, q, q),
                                       stem.string() + ".json", ex.hash);
      }
    }
  }
  log << "plan: " << successes << '/' << row << " successful\n";
}

// --- bench -----------------------------------------------------------------

void run_bench(const Experiment& ex, std::ostream& log) {
  const json s = section_checked(ex, "bench", {"scenes", "trials", "planners"});
  const int trials = value(s, "trials", 100);
  if (trials <= 0) throw ConfigError("bench.trials must be positive");
  const auto planners =
      value(s, "planners", std::vector<std::string>{"ours", "search_only", "straight_line"});
  for (const auto& p : planners) {
    if (p != "ours" && p != "search_only" && p != "straight_line") throw ConfigError("bench: unknown planner " + p);
  }

  std::vector<scene::Scene> scenes;
  if (s.contains("scenes")) {
    for (const json& item : s["scenes"]) {
      if (item.is_string()) {
        fs::path p = item.get<std::string>();
        scenes.push_back(scene::load_scene(p.is_absolute() ? p : ex.base_dir / p));
      } else {
        scenes.push_back(scene::scene_from_json(item, ex.base_dir));
      }
    }
  } else {
    scenes.push_back(experiment_scene(ex));
  }
  const planner::PlannerConfig cfg = planner_config(ex);

  const fs::path rows = ex.out_dir / "bench.csv";
  fs::remove(rows);
  struct Tally {
    int n = 0, ok = 0;
    double length = 0.0, time = 0.0;
  };
  std::vector<std::vector<Tally>> tally(scenes.size(), std::vector<Tally>(planners.size()));

  int row = 0;
  for (std::uint64_t seed : ex.seeds) {
    for (int k = 0; k < trials; ++k, ++row) {
      for (std::size_t si = 0; si < scenes.size(); ++si) {
        const scene::Scene sc = scene::with_random_spheres(scenes[si], trial_seed(seed, k));
        const gridmap::DistanceField field = sc.field_at(0.0);
        for (std::size_t pi = 0; pi < planners.size(); ++pi) {
          planner::PlannerMetrics m = planners[pi] == "ours"          ? plan_ours(sc, field, cfg, nullptr)
                                      : planners[pi] == "search_only" ? plan_search_only(sc, field, cfg)
                                                                      : plan_straight_line(sc, field);
          m.scene = sc.name;
          m.trial = row;
          planner::append_benchmark_row(rows, m, ex.hash);
          Tally& t = tally[si][pi];
          ++t.n;
          if (m.success) {
            ++t.ok;
            t.length += m.length;
            t.time += m.time;
          }
        }
      }
    }
  }

  auto os = io::open_output(ex.out_dir / "bench_summary.csv");
  io::write_csv_header(os, {"scene", "planner", "trials", "success_rate_pct", "mean_length_m", "mean_time_s"},
                       ex.hash);
  for (std::size_t si = 0; si < scenes.size(); ++si) {
    for (std::size_t pi = 0; pi < planners.size(); ++pi) {
      const Tally& t = tally[si][pi];
      const double ok = std::max(1, t.ok);
      os << scenes[si].name << ',' << planners[pi] << ',' << t.n << ','
         << io::format_double(100.0 * t.ok / t.n) << ',' << io::format_double(t.length / ok) << ','
         << io::format_double(t.time / ok) << '\n';
      log << scenes[si].name << ' ' << planners[pi] << ": " << t.ok << '/' << t.n << " successful\n";
    }
  }
}

// --- track -----------------------------------------------------------------

void run_track(const Experiment& ex, std::ostream& log) {
  const json s = section_checked(ex, "track", {"checkpoint", "duration", "settle"});
  const double duration = value(s, "duration", 10.0);
  const double settle = value(s, "settle", 2.0);
  if (!(duration > 0.0) || settle < 0.0) throw ConfigError("track: bad duration or settle");
  const scene::Scene sc = experiment_scene(ex);
  const planner::PlannerConfig pcfg = planner_config(ex);

  auto summary = io::open_output(ex.out_dir / "track_summary.csv");
  std::vector<std::string> cols{"seed", "steps", "replans", "planner_failures", "final_error", "final_goal_distance"};
  const rl::TrainConfig probe = train_config(ex);
  for (double t : probe.success_thresholds) cols.push_back("success@" + io::format_double(t));
  io::write_csv_header(summary, cols, ex.hash);

  for (std::uint64_t seed : ex.seeds) {
    rl::ActorCritic model;
    const rl::TrainConfig cfg = load_trained(ex, checkpoint_path(ex, "track", seed), model);
    env::ReachEnv env(cfg.env, seed);
    env.reset();
    const double dt = cfg.env.episode.dt;
    const int n_obs = cfg.env.workspace.obstacle_count;

    auto os = io::open_output(seed_dir(ex, seed) / "track.csv");
    io::write_csv_header(os,
                         {"t", "x", "y", "z", "target_x", "target_y", "target_z", "goal_x", "goal_y", "goal_z",
                          "error", "min_d_obs", "clearance", "event"},
                         ex.hash);

    const kinematics::Pose ee0 = env.end_effector();
    const Eigen::Quaterniond goal_q = sc.goal_orientation.value_or(ee0.orientation);
    planner::ReplanManager manager(pcfg);
    Vector3d goal = sc.goal_at(0.0);
    gridmap::DistanceField field = sc.field_at(0.0);
    std::vector<planner::Waypoint> waypoints;
    Eigen::Quaterniond target_q = ee0.orientation;
    int replans = 0;
    int failures = 0;
    std::string event;

    try {
      manager.initialize(ee0.position, goal, field, 0.0);
      waypoints = planner::emit_waypoints(manager.trajectory(), dt, target_q, goal_q);
      event = "initial_plan";
      ++replans;
    } catch (const Error& e) {
      event = std::string("planner_failure:") + e.what();
      ++failures;
    }

    const int steps = static_cast<int>(std::ceil((duration + settle) / dt - 1e-9));
    double last_error = 0.0;
    kinematics::Pose target{ee0.position, ee0.orientation};
    for (int i = 0; i < steps; ++i) {
      const double t = i * dt;
      if (sc.dynamic() && i > 0) field = sc.field_at(t);
      const Vector3d g = sc.goal_at(t);
      if ((g - goal).norm() > 0.0) {
        goal = g;
        event += event.empty() ? "goal_changed" : ";goal_changed";
        if (manager.initialized()) manager.set_goal(goal);
      }
      if (manager.initialized() && i > 0) {
        try {
          const planner::ReplanOutcome out = manager.step(t, field);
          if (out.replanned()) {
            ++replans;
            waypoints = planner::emit_waypoints(manager.trajectory(), dt, target.orientation, goal_q);
            event += (event.empty() ? "replan:" : ";replan:") + std::string(planner::to_string(out.trigger));
          }
        } catch (const Error& e) {
          ++failures;
          event += (event.empty() ? "planner_failure:" : ";planner_failure:") + std::string(e.what());
        }
      } else if (!manager.initialized() && i > 0) {
        try {
          manager.initialize(env.end_effector().position, goal, field, t);
          waypoints = planner::emit_waypoints(manager.trajectory(), dt, target.orientation, goal_q);
          ++replans;
          event += event.empty() ? "initial_plan" : ";initial_plan";
        } catch (const Error&) {
          ++failures;
        }
      }

      if (!waypoints.empty()) {
        const double local = t + dt - manager.trajectory_start_time();
        const auto idx = static_cast<std::size_t>(std::clamp(std::llround(local / dt), 0LL,
                                                             static_cast<long long>(waypoints.size()) - 1));
        target = waypoints[idx].pose;
      }
      env.set_target(target);
      const Vector3d ee = env.end_effector().position;
      env.set_obstacles(observed_obstacles(sc.spheres_at(t), ee, n_obs));
      const env::StepResult r = env.step(model.policy.mean.forward(env.observe()));
      last_error = r.error;
      const Vector3d p = env.end_effector().position;
      std::replace(event.begin(), event.end(), ',', ' ');
      const double clearance =
          field.lattice.contains(p) ? gridmap::query_clearance(field, p) : std::numeric_limits<double>::quiet_NaN();
      os << io::format_double(t + dt) << ',' << io::format_double(p.x()) << ',' << io::format_double(p.y()) << ','
         << io::format_double(p.z()) << ',' << io::format_double(target.position.x()) << ','
         << io::format_double(target.position.y()) << ',' << io::format_double(target.position.z()) << ','
         << io::format_double(goal.x()) << ',' << io::format_double(goal.y()) << ',' << io::format_double(goal.z())
         << ',' << io::format_double(r.error) << ',' << io::format_double(r.min_d_obs) << ','
         << io::format_double(clearance) << ',' << event << '\n';
      event.clear();
    }

    const double goal_dist = (env.end_effector().position - goal).norm();
    summary << seed << ',' << steps << ',' << replans << ',' << failures << ',' << io::format_double(last_error)
            << ',' << io::format_double(goal_dist);
    for (double thr : probe.success_thresholds) summary << ',' << (last_error < thr ? 1 : 0);
    summary << '\n';
    log << "seed " << seed << " track: " << replans << " plans, final error " << last_error << '\n';
  }
}

void run(const Experiment& ex, std::ostream& log) {
  if (ex.mode == "train") return run_train(ex, log);
  if (ex.mode == "evaluate") return run_evaluate(ex, log);
  if (ex.mode == "plan") return run_plan(ex, log);
  if (ex.mode == "track") return run_track(ex, log);
  if (ex.mode == "bench") return run_bench(ex, log);
  throw ConfigError("unknown mode " + ex.mode);
}

}  // namespace ftp::experiment
