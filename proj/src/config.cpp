#include "ftp/config.hpp"

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <set>
#include <sstream>

#include "ftp/errors.hpp"
#include "ftp/io.hpp"

extern char** environ;

namespace ftp::config {

namespace {

/// Typed field access that remembers which keys were consumed.
class Reader {
 public:
  Reader(const json& j, std::string where) : j_(j), where_(std::move(where)) {
    if (!j_.is_object()) throw ConfigError(where_ + ": expected an object");
  }

  template <typename T>
  void get(const std::string& key, T& out) {
    seen_.insert(key);
    if (!j_.contains(key)) return;
    try {
      out = j_.at(key).get<T>();
    } catch (const json::exception& e) {
      throw ConfigError(where_ + "." + key + ": " + e.what());
    }
  }

  const json* raw(const std::string& key) {
    seen_.insert(key);
    return j_.contains(key) ? &j_.at(key) : nullptr;
  }

  void finish() const {
    for (const auto& item : j_.items()) {
      if (!seen_.count(item.key())) throw ConfigError(where_ + ": unknown key '" + item.key() + "'");
    }
  }

  const std::string& where() const { return where_; }

 private:
  const json& j_;
  std::string where_;
  std::set<std::string> seen_;
};

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
  return s;
}

}  // namespace

// --- planner ---------------------------------------------------------------

json to_json(const planner::PlannerConfig& c) {
  return {{"v_max", c.v_max},
          {"a_lim", c.a_lim},
          {"primitive_duration", c.primitive_duration},
          {"time_weight", c.time_weight},
          {"lambda_smooth", c.lambda_smooth},
          {"lambda_collision", c.lambda_collision},
          {"lambda_feasible", c.lambda_feasible},
          {"safe_clearance", c.safe_clearance},
          {"replan_period", c.replan_period},
          {"goal_tolerance", c.goal_tolerance},
          {"node_budget", c.node_budget},
          {"search_resolution", c.search_resolution},
          {"knot_interval", c.knot_interval},
          {"max_iterations", c.max_iterations},
          {"gradient_tolerance", c.gradient_tolerance}};
}

planner::PlannerConfig planner_from_json(const json& j) {
  planner::PlannerConfig c;
  Reader r(j, "planner");
  r.get("v_max", c.v_max);
  r.get("a_lim", c.a_lim);
  r.get("primitive_duration", c.primitive_duration);
  r.get("time_weight", c.time_weight);
  r.get("lambda_smooth", c.lambda_smooth);
  r.get("lambda_collision", c.lambda_collision);
  r.get("lambda_feasible", c.lambda_feasible);
  r.get("safe_clearance", c.safe_clearance);
  r.get("replan_period", c.replan_period);
  r.get("goal_tolerance", c.goal_tolerance);
  r.get("node_budget", c.node_budget);
  r.get("search_resolution", c.search_resolution);
  r.get("knot_interval", c.knot_interval);
  r.get("max_iterations", c.max_iterations);
  r.get("gradient_tolerance", c.gradient_tolerance);
  r.finish();
  c.validate();
  return c;
}

// --- env -------------------------------------------------------------------

json to_json(const env::EnvConfig& c) {
  json dh_rows = json::array();
  for (const auto& row : c.dh.rows) {
    dh_rows.push_back({{"alpha", row.alpha},
                       {"a", row.a},
                       {"d", row.d},
                       {"theta_offset", row.theta_offset},
                       {"limits", {row.theta_min, row.theta_max}}});
  }
  return {{"workspace",
           {{"outer_radius", c.workspace.outer_radius},
            {"inner_cyl_radius", c.workspace.inner_cyl_radius},
            {"annulus_major", c.workspace.annulus_major},
            {"annulus_minor", c.workspace.annulus_minor},
            {"obstacle_radius", c.workspace.obstacle_radius},
            {"obstacle_count", c.workspace.obstacle_count}}},
          {"episode",
           {{"max_steps", c.episode.max_steps},
            {"dt", c.episode.dt},
            {"action_limit", c.episode.action_limit},
            {"success_threshold", c.episode.success_threshold}}},
          {"reward",
           {{"error_weight", c.reward.error_weight},
            {"log_offset", c.reward.log_offset},
            {"collision_weight", c.reward.collision_weight},
            {"penalty_distance", c.reward.penalty_distance}}},
          {"error_mode", c.error_mode == env::ErrorMode::Pose ? "pose" : "position"},
          {"tri_point_lever", c.tri_point_lever},
          {"home", std::vector<double>(c.home.data(), c.home.data() + c.home.size())},
          {"home_noise", c.home_noise},
          {"dh", {{"rows", dh_rows}}}};
}

env::EnvConfig env_from_json(const json& j) {
  env::EnvConfig c;
  Reader r(j, "env");
  if (const json* ws = r.raw("workspace")) {
    Reader w(*ws, "env.workspace");
    w.get("outer_radius", c.workspace.outer_radius);
    w.get("inner_cyl_radius", c.workspace.inner_cyl_radius);
    w.get("annulus_major", c.workspace.annulus_major);
    w.get("annulus_minor", c.workspace.annulus_minor);
    w.get("obstacle_radius", c.workspace.obstacle_radius);
    w.get("obstacle_count", c.workspace.obstacle_count);
    w.finish();
  }
  if (const json* ep = r.raw("episode")) {
    Reader e(*ep, "env.episode");
    e.get("max_steps", c.episode.max_steps);
    e.get("dt", c.episode.dt);
    e.get("action_limit", c.episode.action_limit);
    e.get("success_threshold", c.episode.success_threshold);
    e.finish();
  }
  if (const json* rw = r.raw("reward")) {
    Reader e(*rw, "env.reward");
    e.get("error_weight", c.reward.error_weight);
    e.get("log_offset", c.reward.log_offset);
    e.get("collision_weight", c.reward.collision_weight);
    e.get("penalty_distance", c.reward.penalty_distance);
    e.finish();
  }
  std::string mode = "pose";
  r.get("error_mode", mode);
  mode = lower(mode);
  if (mode == "pose") {
    c.error_mode = env::ErrorMode::Pose;
  } else if (mode == "position" || mode == "position_only") {
    c.error_mode = env::ErrorMode::PositionOnly;
  } else {
    throw ConfigError("env.error_mode: expected \"pose\" or \"position\"");
  }
  r.get("tri_point_lever", c.tri_point_lever);
  if (const json* home = r.raw("home")) {
    std::vector<double> h;
    try {
      h = home->get<std::vector<double>>();
    } catch (const json::exception& e) {
      throw ConfigError(std::string("env.home: ") + e.what());
    }
    if (h.size() != kinematics::kNumJoints) throw ConfigError("env.home: expected 6 joint angles");
    for (int i = 0; i < kinematics::kNumJoints; ++i) c.home[i] = h[i];
  }
  r.get("home_noise", c.home_noise);
  if (const json* dh = r.raw("dh")) c.dh = kinematics::DHTable::from_json_text(dh->dump());
  r.finish();
  c.workspace.validate();
  c.episode.validate();
  if (!c.dh.within_limits(c.home)) throw ConfigError("env.home lies outside the joint limits");
  return c;
}

// --- rl --------------------------------------------------------------------

json to_json(const rl::TrainConfig& c) {
  const rl::PpoConfig& p = c.ppo;
  json rl{{"clip_eps", p.clip_eps},
          {"gamma", p.gamma},
          {"gae_lambda", p.gae_lambda},
          {"pf_floor", p.pf_floor},
          {"epochs", p.epochs},
          {"minibatch_size", p.minibatch_size},
          {"steps_per_update", p.steps_per_update},
          {"total_steps", p.total_steps},
          {"actor_lr", p.actor_lr},
          {"critic_lr", p.critic_lr},
          {"policy_feedback", p.policy_feedback},
          {"pf_density", p.pf_density == rl::PfDensity::Joint ? "joint" : "geometric_mean"},
          {"pf_product_to_end", p.pf_product_to_end},
          {"pf_in_gae", p.pf_in_gae},
          {"normalize_advantages", p.normalize_advantages},
          {"hidden", p.hidden},
          {"tanh_third_layer", p.tanh_third_layer},
          {"initial_log_std", p.initial_log_std},
          {"min_log_std", p.min_log_std},
          {"ensemble_likelihood", p.ensemble_likelihood == rl::EnsembleLikelihood::Base ? "base" : "averaged"},
          {"target_kl", p.target_kl},
          {"schedule", rl::to_string(c.schedule.variant)},
          {"alpha", c.schedule.alpha},
          {"beta", c.schedule.beta},
          {"success_thresholds", c.success_thresholds}};
  return {{"seed", c.seed}, {"env", to_json(c.env)}, {"rl", rl}};
}

void rl_from_json(const json& j, rl::TrainConfig& c) {
  rl::PpoConfig& p = c.ppo;
  Reader r(j, "rl");
  r.get("clip_eps", p.clip_eps);
  r.get("gamma", p.gamma);
  r.get("gae_lambda", p.gae_lambda);
  r.get("pf_floor", p.pf_floor);
  r.get("epochs", p.epochs);
  r.get("minibatch_size", p.minibatch_size);
  r.get("steps_per_update", p.steps_per_update);
  r.get("total_steps", p.total_steps);
  r.get("actor_lr", p.actor_lr);
  r.get("critic_lr", p.critic_lr);
  r.get("policy_feedback", p.policy_feedback);
  std::string density = p.pf_density == rl::PfDensity::Joint ? "joint" : "geometric_mean";
  r.get("pf_density", density);
  density = lower(density);
  if (density == "joint") {
    p.pf_density = rl::PfDensity::Joint;
  } else if (density == "geometric_mean") {
    p.pf_density = rl::PfDensity::GeometricMean;
  } else {
    throw ConfigError("rl.pf_density: expected \"joint\" or \"geometric_mean\"");
  }
  r.get("pf_product_to_end", p.pf_product_to_end);
  r.get("pf_in_gae", p.pf_in_gae);
  r.get("normalize_advantages", p.normalize_advantages);
  r.get("hidden", p.hidden);
  r.get("tanh_third_layer", p.tanh_third_layer);
  r.get("initial_log_std", p.initial_log_std);
  r.get("min_log_std", p.min_log_std);
  std::string likelihood = p.ensemble_likelihood == rl::EnsembleLikelihood::Base ? "base" : "averaged";
  r.get("ensemble_likelihood", likelihood);
  likelihood = lower(likelihood);
  if (likelihood == "base") {
    p.ensemble_likelihood = rl::EnsembleLikelihood::Base;
  } else if (likelihood == "averaged") {
    p.ensemble_likelihood = rl::EnsembleLikelihood::Averaged;
  } else {
    throw ConfigError("rl.ensemble_likelihood: expected \"base\" or \"averaged\"");
  }
  r.get("target_kl", p.target_kl);
  std::string schedule = rl::to_string(c.schedule.variant);
  r.get("schedule", schedule);
  c.schedule.variant = rl::parse_schedule(schedule);
  r.get("alpha", c.schedule.alpha);
  r.get("beta", c.schedule.beta);
  r.get("success_thresholds", c.success_thresholds);
  r.finish();
  p.validate();
  if (c.schedule.alpha < 0.0 || c.schedule.beta < 0.0) throw ConfigError("rl: alpha and beta must be >= 0");
}

// --- hashing ---------------------------------------------------------------

std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string config_hash(const json& doc) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(fnv1a64(doc.dump())));
  return buf;
}

// --- overrides -------------------------------------------------------------

void apply_overrides(json& doc, const std::vector<std::pair<std::string, std::string>>& vars,
                     const std::string& prefix) {
  for (const auto& [name, value] : vars) {
    if (name.size() <= prefix.size() || name.compare(0, prefix.size(), prefix) != 0) continue;
    std::vector<std::string> keys;
    std::string rest = name.substr(prefix.size());
    for (std::size_t pos; (pos = rest.find("__")) != std::string::npos;) {
      keys.push_back(lower(rest.substr(0, pos)));
      rest = rest.substr(pos + 2);
    }
    keys.push_back(lower(rest));
    if (std::any_of(keys.begin(), keys.end(), [](const std::string& k) { return k.empty(); })) {
      throw ConfigError("malformed override " + name);
    }
    json parsed;
    try {
      parsed = json::parse(value);
    } catch (const json::exception&) {
      parsed = value;
    }
    json* node = &doc;
    for (std::size_t i = 0; i + 1 < keys.size(); ++i) {
      if (!node->is_object()) throw ConfigError("override " + name + " descends into a non-object");
      node = &(*node)[keys[i]];
      if (node->is_null()) *node = json::object();
    }
    if (!node->is_object()) throw ConfigError("override " + name + " descends into a non-object");
    (*node)[keys.back()] = parsed;
  }
}

std::vector<std::pair<std::string, std::string>> process_environment() {
  std::vector<std::pair<std::string, std::string>> out;
  for (char** e = environ; e && *e; ++e) {
    const std::string entry(*e);
    const auto eq = entry.find('=');
    if (eq == std::string::npos) continue;
    out.emplace_back(entry.substr(0, eq), entry.substr(eq + 1));
  }
  std::sort(out.begin(), out.end());
  return out;
}

// --- experiment ------------------------------------------------------------

namespace {

const char* const kSections[] = {"env", "rl", "planner", "scene", "plan", "track", "bench", "evaluate"};
const char* const kModes[] = {"train", "evaluate", "plan", "track", "bench"};

json parse_file(const std::filesystem::path& path) {
  try {
    return json::parse(io::read_text(path));
  } catch (const json::exception& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

}  // namespace

const json& Experiment::section(const std::string& name) const {
  static const json empty = json::object();
  return doc.contains(name) ? doc.at(name) : empty;
}

std::filesystem::path Experiment::path(const std::string& sec, const std::string& key) const {
  const json& s = section(sec);
  if (!s.contains(key) || !s.at(key).is_string()) {
    throw ConfigError(sec + "." + key + ": expected a path string");
  }
  std::filesystem::path p = s.at(key).get<std::string>();
  return p.is_absolute() ? p : base_dir / p;
}

std::vector<std::uint64_t> parse_seed_list(const std::string& text) {
  std::vector<std::uint64_t> seeds;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item.erase(std::remove_if(item.begin(), item.end(), [](unsigned char c) { return std::isspace(c); }),
               item.end());
    if (item.empty()) continue;
    if (!std::all_of(item.begin(), item.end(), [](unsigned char c) { return std::isdigit(c); })) {
      throw ConfigError("seed list: '" + item + "' is not a non-negative integer");
    }
    seeds.push_back(std::stoull(item));
  }
  if (seeds.empty()) throw ConfigError("seed list is empty");
  return seeds;
}

namespace {

bool is_seed(const json& v) { return v.is_number_unsigned() || (v.is_number_integer() && v.get<long long>() >= 0); }

}  // namespace

Experiment experiment_from_json(json doc, const std::filesystem::path& base_dir,
                                const std::vector<std::pair<std::string, std::string>>& overrides) {
  if (!doc.is_object()) throw ConfigError("experiment config must be a JSON object");
  for (const char* sec : kSections) {
    if (doc.contains(sec) && doc[sec].is_string()) {
      std::filesystem::path p = doc[sec].get<std::string>();
      if (!p.is_absolute()) p = base_dir / p;
      doc[sec] = parse_file(p);
    }
  }
  apply_overrides(doc, overrides);

  Experiment ex;
  ex.base_dir = base_dir;
  std::set<std::string> known{"mode", "seeds", "out"};
  for (const char* sec : kSections) known.insert(sec);
  for (const auto& item : doc.items()) {
    if (!known.count(item.key())) throw ConfigError("experiment: unknown key '" + item.key() + "'");
  }

  ex.mode = doc.value("mode", std::string());
  if (std::find(std::begin(kModes), std::end(kModes), ex.mode) == std::end(kModes)) {
    throw ConfigError("experiment: mode must be one of train, evaluate, plan, track, bench");
  }
  if (!doc.contains("seeds")) throw ConfigError("experiment: seeds missing");
  const json& seeds = doc["seeds"];
  if (seeds.is_string()) {
    ex.seeds = parse_seed_list(seeds.get<std::string>());
  } else if (seeds.is_array()) {
    for (const auto& s : seeds) {
      if (!is_seed(s)) throw ConfigError("experiment: seeds must be non-negative integers");
      ex.seeds.push_back(s.get<std::uint64_t>());
    }
  } else if (is_seed(seeds)) {
    ex.seeds.push_back(seeds.get<std::uint64_t>());
  } else {
    throw ConfigError("experiment: seeds must be a list, a comma-separated string or a single integer");
  }
  if (ex.seeds.empty()) throw ConfigError("experiment: seed list is empty");

  std::filesystem::path out = doc.value("out", std::string("out"));
  ex.out_dir = out.is_absolute() ? out : base_dir / out;
  ex.hash = config_hash(doc);
  ex.doc = std::move(doc);
  return ex;
}

Experiment load_experiment(const std::filesystem::path& path,
                           const std::vector<std::pair<std::string, std::string>>& overrides) {
  return experiment_from_json(parse_file(path), path.parent_path(), overrides);
}

}  // namespace ftp::config
