#include "ftp/trainer.hpp"

#include <cmath>

#include <json.hpp>

#include "ftp/config.hpp"
#include "ftp/errors.hpp"
#include "ftp/io.hpp"

namespace ftp::rl {

namespace {

Rng stream(std::uint64_t seed, std::uint32_t index) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32), index};
  return Rng(seq);
}

}  // namespace

TrainConfig vanilla(TrainConfig cfg) {
  cfg.schedule.variant = Schedule::None;
  cfg.ppo.policy_feedback = false;
  return cfg;
}

TrainResult train(const TrainConfig& cfg, const TrainProgress& progress) {
  cfg.ppo.validate();
  env::ReachEnv env(cfg.env, stream(cfg.seed, 1)());
  Rng init_rng = stream(cfg.seed, 2);
  Rng act_rng = stream(cfg.seed, 3);
  Rng shuffle_rng = stream(cfg.seed, 4);

  TrainResult result;
  result.model = ActorCritic::make(cfg.env.state_dim(), kinematics::kNumJoints, cfg.ppo, init_rng);
  ActorCritic& ac = result.model;

  const int horizon = cfg.env.episode.max_steps;
  const long total = cfg.ppo.total_steps;
  const double total_episodes = std::ceil(static_cast<double>(total) / horizon);

  RolloutBuffer buffer;
  std::size_t curve_mark = 0;
  int episode = 0;
  int update = 0;
  while (result.steps < total) {
    env::StateVector s = env.reset();
    EpisodeRecord rec;
    rec.episode = episode;
    double ens_sum = 0.0;
    int len = 0;
    for (int t = 0; t < horizon; ++t) {
      const Eigen::VectorXd mu = ac.policy.mean.forward(s);
      const int i = ensemble_count(cfg.schedule, episode, total_episodes, act_rng);
      const EnsembleAction ea = ensemble_action(mu, ac.policy.log_std, i, act_rng);
      Eigen::VectorXd per_dim;
      const double log_density = nn::log_prob(
          mu, likelihood_log_std(ac.policy.log_std, i, cfg.ppo.ensemble_likelihood), ea.action, &per_dim);
      const double pf_gamma = cfg.ppo.policy_feedback
                                  ? pf_discount(pf_log_density(per_dim, cfg.ppo.pf_density), cfg.ppo.pf_floor)
                                  : cfg.ppo.gamma;
      const env::StepResult r = env.step(ea.action);

      Transition tr;
      tr.state = std::move(s);
      tr.action = ea.action;
      tr.log_density = log_density;
      tr.reward = r.reward;
      tr.pf_gamma = pf_gamma;
      tr.done = r.done;
      tr.ensemble_size = i;
      buffer.add(std::move(tr));

      rec.episode_return += r.reward;
      rec.final_error = r.error;
      rec.min_d_obs = t == 0 ? r.min_d_obs : std::min(rec.min_d_obs, r.min_d_obs);
      ens_sum += i;
      ++len;
      ++result.steps;
      s = r.state;
      if (r.done) break;
    }
    rec.mean_ensemble = len > 0 ? ens_sum / len : 1.0;
    result.curve.push_back(rec);
    ++episode;

    if (static_cast<long>(buffer.size()) >= cfg.ppo.steps_per_update) {
      UpdateDiagnostics d = ppo_update(ac, buffer, cfg.ppo, shuffle_rng);
      d.update = update++;
      d.steps = result.steps;
      result.diagnostics.push_back(d);
      buffer.clear();
      if (progress) {
        const std::vector<EpisodeRecord> recent(result.curve.begin() + static_cast<long>(curve_mark),
                                                result.curve.end());
        progress(d, recent);
      }
      curve_mark = result.curve.size();
    }
  }
  return result;
}

double final_mean_return(const std::vector<EpisodeRecord>& curve, std::size_t window) {
  if (curve.empty()) return 0.0;
  const std::size_t n = std::min(window, curve.size());
  double sum = 0.0;
  for (std::size_t i = curve.size() - n; i < curve.size(); ++i) sum += curve[i].episode_return;
  return sum / static_cast<double>(n);
}

double evaluate_episode(const nn::GaussianPolicy& policy, env::ReachEnv& env, EpisodeRecord* record) {
  env::StateVector s = env.reset();
  EpisodeRecord rec;
  for (int t = 0; t < env.config().episode.max_steps; ++t) {
    const env::StepResult r = env.step(policy.mean.forward(s));
    rec.episode_return += r.reward;
    rec.final_error = r.error;
    rec.min_d_obs = t == 0 ? r.min_d_obs : std::min(rec.min_d_obs, r.min_d_obs);
    s = r.state;
    if (r.done) break;
  }
  if (record) *record = rec;
  return rec.final_error;
}

// --- files ---------------------------------------------------------------

void write_curve_csv(const std::filesystem::path& path, const std::vector<EpisodeRecord>& curve,
                     const std::vector<double>& thresholds, const std::string& config_hash) {
  std::vector<std::string> cols{"episode", "return", "final_error", "min_d_obs", "mean_ensemble"};
  for (double t : thresholds) cols.push_back("success@" + io::format_double(t));
  auto os = io::open_output(path);
  io::write_csv_header(os, cols, config_hash);
  for (const auto& r : curve) {
    os << r.episode << ',' << io::format_double(r.episode_return) << ',' << io::format_double(r.final_error)
       << ',' << io::format_double(r.min_d_obs) << ',' << io::format_double(r.mean_ensemble);
    for (double t : thresholds) os << ',' << (r.final_error < t ? 1 : 0);
    os << '\n';
  }
}

void write_diagnostics_csv(const std::filesystem::path& path, const std::vector<UpdateDiagnostics>& diag,
                           const std::string& config_hash) {
  auto os = io::open_output(path);
  io::write_csv_header(os,
                       {"update", "steps", "policy_loss", "value_loss", "mean_ratio", "clip_fraction",
                        "approx_kl", "mean_std", "mean_ensemble", "epochs"},
                       config_hash);
  for (const auto& d : diag) {
    os << d.update << ',' << d.steps << ',' << io::format_double(d.policy_loss) << ','
       << io::format_double(d.value_loss) << ',' << io::format_double(d.mean_ratio) << ','
       << io::format_double(d.clip_fraction) << ',' << io::format_double(d.approx_kl) << ','
       << io::format_double(d.mean_std) << ',' << io::format_double(d.mean_ensemble) << ',' << d.epochs << '\n';
  }
}

void save_model(const std::filesystem::path& path, const ActorCritic& model, const TrainConfig& cfg) {
  std::vector<nn::NamedTensor> tensors = nn::to_tensors(model.policy.mean, "actor");
  tensors.push_back({"actor.log_std", nn::RowMatrix(model.policy.log_std.transpose())});
  for (auto& t : nn::to_tensors(model.critic.net, "critic")) tensors.push_back(std::move(t));
  nn::write_checkpoint(path, tensors);

  nlohmann::json side = config::to_json(cfg);
  side["format"] = "ftp-checkpoint";
  side["version"] = 1;
  side["state_dim"] = cfg.env.state_dim();
  side["action_dim"] = kinematics::kNumJoints;
  auto os = io::open_output(path.string() + ".json");
  os << side.dump(2) << '\n';
}

void load_model(const std::filesystem::path& path, ActorCritic& model) {
  const auto tensors = nn::read_checkpoint(path);
  nn::from_tensors(model.policy.mean, "actor", tensors);
  nn::from_tensors(model.critic.net, "critic", tensors);
  for (const auto& t : tensors) {
    if (t.name == "actor.log_std") {
      if (t.value.size() != model.policy.log_std.size()) throw ShapeMismatch("log_std size differs");
      model.policy.log_std = Eigen::Map<const Eigen::VectorXd>(t.value.data(), t.value.size());
      return;
    }
  }
  throw ShapeMismatch("checkpoint lacks actor.log_std");
}

}  // namespace ftp::rl
