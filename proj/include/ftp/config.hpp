#pragma once
/**
 * JSON configuration for every module plus the experiment document read by
 * the command-line tool.
 *
 * Experiment document:
 *   {
 *     "mode": "train" | "evaluate" | "plan" | "track" | "bench",
 *     "seeds": [0, 1, 2],
 *     "out": "runs/demo",
 *     "env": {...} | "env.json",
 *     "rl": {...} | "rl.json",
 *     "planner": {...} | "planner.json",
 *     "scene": {...} | "scene.json",
 *     "plan": {...}, "track": {...}, "bench": {...}, "evaluate": {...}
 *   }
 *
 * A section given as a string is a path relative to the document. Unknown
 * keys are rejected. Environment variables FTP_<SECTION>__<KEY>=<json value>
 * override single fields after sections are resolved (nested keys are
 * joined with "__"; names are matched case-insensitively).
 */

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <json.hpp>

#include "ftp/env.hpp"
#include "ftp/kinematics.hpp"
#include "ftp/planner/types.hpp"
#include "ftp/trainer.hpp"

namespace ftp::config {

using json = nlohmann::json;

// --- sections ------------------------------------------------------------

json to_json(const planner::PlannerConfig& cfg);
planner::PlannerConfig planner_from_json(const json& j);

json to_json(const env::EnvConfig& cfg);
env::EnvConfig env_from_json(const json& j);

/// PPO fields plus "schedule", "alpha", "beta", "success_thresholds".
json to_json(const rl::TrainConfig& cfg);
/// Reads the "rl" section into a TrainConfig (env and seed untouched).
void rl_from_json(const json& j, rl::TrainConfig& cfg);

// --- hashing -------------------------------------------------------------

std::uint64_t fnv1a64(std::string_view bytes);
/// 16 hex digits of fnv1a64 over the compact dump of `doc`.
std::string config_hash(const json& doc);

// --- overrides -----------------------------------------------------------

/// Applies NAME=VALUE pairs whose name starts with `prefix`. VALUE is parsed
/// as JSON, falling back to a plain string.
void apply_overrides(json& doc, const std::vector<std::pair<std::string, std::string>>& vars,
                     const std::string& prefix = "FTP_");

/// The process environment as NAME=VALUE pairs.
std::vector<std::pair<std::string, std::string>> process_environment();

// --- experiment ----------------------------------------------------------

struct Experiment {
  std::string mode;
  std::vector<std::uint64_t> seeds;
  std::filesystem::path out_dir;
  std::filesystem::path base_dir;  // directory of the document
  json doc;                        // fully resolved document
  std::string hash;

  const json& section(const std::string& name) const;
  bool has(const std::string& name) const { return doc.contains(name); }
  /// Path value resolved against base_dir.
  std::filesystem::path path(const std::string& section, const std::string& key) const;
};

/// Reads the document, inlines file sections, applies overrides, validates
/// mode and seeds. Throws ConfigError / IoError.
Experiment load_experiment(const std::filesystem::path& path,
                           const std::vector<std::pair<std::string, std::string>>& overrides = {});
Experiment experiment_from_json(json doc, const std::filesystem::path& base_dir,
                                const std::vector<std::pair<std::string, std::string>>& overrides = {});

/// "1,2,3" -> {1, 2, 3}; throws ConfigError on junk or an empty list.
std::vector<std::uint64_t> parse_seed_list(const std::string& text);

}  // namespace ftp::config
