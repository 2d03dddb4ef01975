#include <filesystem>
#include <fstream>

#include <gtest/gtest.h>

#include "ftp/config.hpp"
#include "ftp/errors.hpp"

using namespace ftp::config;

namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("ftp_cfg_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

void write(const fs::path& p, const std::string& text) { std::ofstream(p) << text; }

}  // namespace

TEST(PlannerConfig, RoundTripAndUnknownKey) {
  ftp::planner::PlannerConfig cfg;
  cfg.v_max = 0.7;
  cfg.node_budget = 1234;
  const auto back = planner_from_json(to_json(cfg));
  EXPECT_EQ(back.v_max, 0.7);
  EXPECT_EQ(back.node_budget, 1234);
  EXPECT_THROW(planner_from_json(json{{"v_maxx", 1.0}}), ftp::ConfigError);
  EXPECT_THROW(planner_from_json(json{{"v_max", -1.0}}), ftp::ConfigError);
}

TEST(EnvConfig, RoundTripAndValidation) {
  ftp::env::EnvConfig cfg;
  cfg.workspace.obstacle_count = 1;
  cfg.error_mode = ftp::env::ErrorMode::PositionOnly;
  const auto back = env_from_json(to_json(cfg));
  EXPECT_EQ(back.workspace.obstacle_count, 1);
  EXPECT_EQ(back.error_mode, ftp::env::ErrorMode::PositionOnly);
  EXPECT_EQ(back.state_dim(), 23);
  EXPECT_THROW(env_from_json(json{{"workspace", {{"outer_radius", 0.1}}}}), ftp::ConfigError);
  EXPECT_THROW(env_from_json(json{{"error_mode", "sideways"}}), ftp::ConfigError);
}

TEST(RlConfig, ReadsScheduleAndPpo) {
  ftp::rl::TrainConfig cfg;
  rl_from_json(json{{"schedule", "AEL"}, {"alpha", 3}, {"pf_floor", 0.7}, {"ensemble_likelihood", "base"},
                    {"target_kl", 0.02}},
               cfg);
  EXPECT_EQ(cfg.schedule.variant, ftp::rl::Schedule::Linear);
  EXPECT_EQ(cfg.schedule.alpha, 3.0);
  EXPECT_EQ(cfg.ppo.pf_floor, 0.7);
  EXPECT_EQ(cfg.ppo.ensemble_likelihood, ftp::rl::EnsembleLikelihood::Base);
  EXPECT_EQ(cfg.ppo.target_kl, 0.02);
  EXPECT_THROW(rl_from_json(json{{"clip_eps", 1.5}}, cfg), ftp::ConfigError);
  EXPECT_THROW(rl_from_json(json{{"unknown", 1}}, cfg), ftp::ConfigError);
}

TEST(Hash, StableAndSensitive) {
  EXPECT_EQ(fnv1a64(""), 0xcbf29ce484222325ULL);
  EXPECT_EQ(fnv1a64("a"), 0xaf63dc4c8601ec8cULL);
  const json a{{"x", 1}, {"y", {1, 2}}};
  EXPECT_EQ(config_hash(a), config_hash(json::parse(a.dump())));
  EXPECT_NE(config_hash(a), config_hash(json{{"x", 2}, {"y", {1, 2}}}));
  EXPECT_EQ(config_hash(a).size(), 16u);
}

TEST(Overrides, NestedAndTyped) {
  json doc{{"rl", {{"pf_floor", 0.9}}}};
  apply_overrides(doc, {{"FTP_RL__PF_FLOOR", "0.7"},
                        {"FTP_ENV__WORKSPACE__OBSTACLE_COUNT", "1"},
                        {"FTP_MODE", "plan"},
                        {"OTHER_THING", "5"}});
  EXPECT_EQ(doc["rl"]["pf_floor"], 0.7);
  EXPECT_EQ(doc["env"]["workspace"]["obstacle_count"], 1);
  EXPECT_EQ(doc["mode"], "plan");
  EXPECT_FALSE(doc.contains("other_thing"));
}

TEST(SeedList, Parsing) {
  EXPECT_EQ(parse_seed_list("1,2, 3"), (std::vector<std::uint64_t>{1, 2, 3}));
  EXPECT_THROW(parse_seed_list(""), ftp::ConfigError);
  EXPECT_THROW(parse_seed_list("1,x"), ftp::ConfigError);
}

TEST(Experiment, InlinesSectionsAndResolvesOut) {
  const fs::path dir = scratch("inline");
  write(dir / "rl.json", R"({"schedule": "NONE"})");
  write(dir / "exp.json", R"({"mode": "train", "seeds": [4, 5], "out": "runs", "rl": "rl.json"})");
  const Experiment ex = load_experiment(dir / "exp.json");
  EXPECT_EQ(ex.mode, "train");
  EXPECT_EQ(ex.seeds, (std::vector<std::uint64_t>{4, 5}));
  EXPECT_EQ(ex.out_dir, dir / "runs");
  EXPECT_EQ(ex.section("rl")["schedule"], "NONE");
  EXPECT_EQ(ex.hash.size(), 16u);
}

TEST(Experiment, Errors) {
  EXPECT_THROW(experiment_from_json(json{{"mode", "train"}, {"seeds", json::array()}}, "."), ftp::ConfigError);
  EXPECT_THROW(experiment_from_json(json{{"mode", "dance"}, {"seeds", {1}}}, "."), ftp::ConfigError);
  EXPECT_THROW(experiment_from_json(json{{"mode", "train"}, {"seeds", {1}}, {"extra", 1}}, "."), ftp::ConfigError);
  EXPECT_THROW(experiment_from_json(json{{"mode", "train"}, {"seeds", {1}}, {"rl", "missing.json"}}, "/nonexistent"),
               ftp::Error);
  EXPECT_THROW(load_experiment("/nonexistent/exp.json"), ftp::Error);
}

TEST(Experiment, OverridesChangeHash) {
  const json doc{{"mode", "train"}, {"seeds", {1}}, {"rl", {{"pf_floor", 0.9}}}};
  const Experiment a = experiment_from_json(doc, ".");
  const Experiment b = experiment_from_json(doc, ".", {{"FTP_RL__PF_FLOOR", "0.8"}});
  EXPECT_EQ(b.section("rl")["pf_floor"], 0.8);
  EXPECT_NE(a.hash, b.hash);
  const Experiment c = experiment_from_json(doc, ".", {{"FTP_SEEDS", "7,8"}});
  EXPECT_EQ(c.seeds, (std::vector<std::uint64_t>{7, 8}));
}
