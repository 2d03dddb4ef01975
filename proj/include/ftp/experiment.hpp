#pragma once
/**
 * Experiment drivers behind the command-line tool. Each takes a resolved
 * experiment document and writes its artifacts under out_dir; every CSV
 * starts with a "# config_hash=" line and a column header.
 *
 * train     seed_<s>/{curve,diagnostics}.csv, seed_<s>/model.ckpt(+.json),
 *           aggregate.csv (per-episode mean and variance over seeds)
 * evaluate  seed_<s>/evaluate.csv, evaluate_summary.csv
 * plan      metrics.csv, seed_<s>/trial_<k>.{csv,json} for successful plans
 * track     seed_<s>/track.csv, track_summary.csv
 * bench     bench.csv (one row per scene, planner, trial), bench_summary.csv
 *
 * Section keys (all optional unless noted):
 *   plan      trials=1, sample_dt=0.02, waypoint_dt=0.1, write_trajectories=true
 *   evaluate  checkpoint (required; "{seed}" is replaced), episodes=100
 *   track     checkpoint (required), duration=10, settle=2
 *   bench     scenes=[scene object or path...] (defaults to the "scene"
 *             section), trials=100, planners=["ours","search_only","straight_line"]
 */

#include <iosfwd>
#include <string>

#include "ftp/config.hpp"
#include "ftp/trainer.hpp"

namespace ftp::experiment {

/// Env from the "env" section and PPO/schedule from "rl".
rl::TrainConfig train_config(const config::Experiment& ex);

void run_train(const config::Experiment& ex, std::ostream& log);
void run_evaluate(const config::Experiment& ex, std::ostream& log);
void run_plan(const config::Experiment& ex, std::ostream& log);
void run_track(const config::Experiment& ex, std::ostream& log);
void run_bench(const config::Experiment& ex, std::ostream& log);

/// Dispatches on ex.mode.
void run(const config::Experiment& ex, std::ostream& log);

}  // namespace ftp::experiment
