#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "ftp/env.hpp"
#include "ftp/rl.hpp"

namespace ftp::rl {

struct TrainConfig {
  env::EnvConfig env;
  PpoConfig ppo;
  EnsembleSchedule schedule;
  std::uint64_t seed = 0;
  /// Final-error thresholds reported per episode.
  std::vector<double> success_thresholds{0.005, 0.01, 0.02, 0.04, 0.06};
};

/// The plain PPO baseline: no ensembles, constant gamma in the returns.
TrainConfig vanilla(TrainConfig cfg);

struct EpisodeRecord {
  int episode = 0;
  double episode_return = 0.0;
  double final_error = 0.0;
  double min_d_obs = 0.0;
  double mean_ensemble = 1.0;
};

struct TrainResult {
  std::vector<EpisodeRecord> curve;
  std::vector<UpdateDiagnostics> diagnostics;
  ActorCritic model;
  long steps = 0;
};

using TrainProgress = std::function<void(const UpdateDiagnostics&, const std::vector<EpisodeRecord>&)>;

/// Collects whole episodes until at least steps_per_update transitions are
/// buffered, then runs one PPO update; stops once total_steps have been
/// collected. Deterministic for a given config and seed.
TrainResult train(const TrainConfig& cfg, const TrainProgress& progress = {});

/// Mean return of the last `window` episodes (all of them if fewer).
double final_mean_return(const std::vector<EpisodeRecord>& curve, std::size_t window = 100);

/// Deterministic rollout of the mean action. Returns the final error.
double evaluate_episode(const nn::GaussianPolicy& policy, env::ReachEnv& env, EpisodeRecord* record = nullptr);

// --- files ---------------------------------------------------------------

/// episode, return, final_error, min_d_obs, mean_ensemble, success@<thr>...
void write_curve_csv(const std::filesystem::path& path, const std::vector<EpisodeRecord>& curve,
                     const std::vector<double>& thresholds, const std::string& config_hash = "");
void write_diagnostics_csv(const std::filesystem::path& path, const std::vector<UpdateDiagnostics>& diag,
                           const std::string& config_hash = "");

/// Binary checkpoint plus "<path>.json" with the hyperparameters.
void save_model(const std::filesystem::path& path, const ActorCritic& model, const TrainConfig& cfg);
/// Restores networks saved by save_model into `model` (shapes must match).
void load_model(const std::filesystem::path& path, ActorCritic& model);

}  // namespace ftp::rl
