#pragma once
/**
 * PPO building blocks: action-ensemble sample counts, policy-feedback
 * discounting, returns and advantages, the clipped surrogate and value
 * losses with their gradients, and one PPO update over a rollout buffer.
 */

#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "ftp/nn.hpp"

namespace ftp::rl {

using Rng = std::mt19937_64;
using Eigen::MatrixXd;
using Eigen::VectorXd;

// --- action ensembles ----------------------------------------------------

enum class Schedule { None, Linear, Poisson, Beta, Exponential, Weibull };

/// "NONE", "AEL", "AEP", "AEB", "AEE", "AEW" (case-insensitive).
Schedule parse_schedule(const std::string& name);
std::string to_string(Schedule s);

struct EnsembleSchedule {
  Schedule variant = Schedule::Weibull;
  double alpha = 7.0;
  double beta = 20.0;
};

/// Largest count the schedule can return at the given progress.
int ensemble_cap(const EnsembleSchedule& schedule, double progress);

/// Number of policy samples to average at episode e_n of e_a. Counts are
/// rounded half up and clipped to [1, cap]. Throws InvalidProgress unless
/// 0 <= e_n <= e_a and e_a > 0.
int ensemble_count(const EnsembleSchedule& schedule, double e_n, double e_a, Rng& rng);

/// Density used for importance ratios and policy feedback of an ensemble
/// action: the base policy N(mu, sigma^2), or the distribution of the
/// average itself, N(mu, sigma^2 / i).
enum class EnsembleLikelihood { Base, Averaged };

struct EnsembleAction {
  VectorXd action;
  /// Log density of `action` under the base policy N(mu, sigma^2).
  double log_density = 0.0;
  int samples = 1;
};

/// Mean of `i` draws from N(mean, exp(log_std)^2).
EnsembleAction ensemble_action(const VectorXd& mean, const VectorXd& log_std, int i, Rng& rng);

/// Per-dimension log_std of the density selected by `mode` for an ensemble
/// of `i` samples.
VectorXd likelihood_log_std(const VectorXd& log_std, int i, EnsembleLikelihood mode);
EnsembleAction ensemble_action(const nn::GaussianPolicy& policy, const VectorXd& state, int i, Rng& rng);

// --- policy feedback -----------------------------------------------------

enum class PfDensity { Joint, GeometricMean };

/// clip(exp(log_density), pf_floor, 1).
double pf_discount(double log_density, double pf_floor);

/// Per-step density used by the discount: the joint density, or the
/// geometric mean of the per-dimension densities.
double pf_log_density(const VectorXd& per_dim_log_density, PfDensity mode);

/// R_t = sum_{i >= t} r_i * prod_{j=t}^{i} g_j over one episode. With
/// `product_to_end` the product always runs to the final step instead.
VectorXd pf_return(const VectorXd& rewards, const VectorXd& gammas, bool product_to_end = false);

// --- advantages ----------------------------------------------------------

/// GAE by backward recursion with constant gamma. dones[t] cuts the
/// bootstrap after step t; `bootstrap` is V(s_T) for an unfinished tail.
/// Throws LengthMismatch.
VectorXd compute_gae(const VectorXd& rewards, const VectorXd& values, const std::vector<bool>& dones,
                     double bootstrap, double gamma, double lambda);

/// Same with a per-step discount gamma_t.
VectorXd compute_gae(const VectorXd& rewards, const VectorXd& values, const std::vector<bool>& dones,
                     double bootstrap, const VectorXd& gammas, double lambda);

/// Zero mean, unit variance (returns the input shifted only when the
/// spread is zero).
VectorXd normalize(const VectorXd& x);

// --- losses --------------------------------------------------------------

struct PolicyLossTerms {
  double loss = 0.0;
  /// dLoss / d(new log density) per sample.
  VectorXd dlogp;
  double mean_ratio = 0.0;
  double clip_fraction = 0.0;
  /// Mean of (r - 1) - log r, a non-negative estimate of KL(old, new).
  double approx_kl = 0.0;
};

/// -mean(min(r A, clip(r, 1 - eps, 1 + eps) A)), r = exp(new - old).
PolicyLossTerms policy_loss(const VectorXd& new_logp, const VectorXd& old_logp, const VectorXd& advantages,
                            double clip_eps);

/// mean((targets - values)^2); `dvalues` receives the per-sample gradient.
double value_loss(const VectorXd& values, const VectorXd& targets, VectorXd* dvalues = nullptr);

struct PolicyGradient {
  VectorXd mean_params;  // sized like policy.mean.parameters()
  VectorXd log_std;
};

/// Policy loss over a batch (states and actions one per column) with its
/// gradient with respect to all policy parameters. `ensemble_sizes`, when
/// given, evaluates sample b under N(mu, sigma^2 / i_b).
PolicyLossTerms policy_loss_and_grad(const nn::GaussianPolicy& policy, const MatrixXd& states,
                                     const MatrixXd& actions, const VectorXd& old_logp,
                                     const VectorXd& advantages, double clip_eps, PolicyGradient& grad,
                                     const VectorXd* ensemble_sizes = nullptr);

/// Value loss over a batch with its gradient (sized like net.parameters()).
double value_loss_and_grad(const nn::Mlp& net, const MatrixXd& states, const VectorXd& targets, VectorXd& grad);

// --- update --------------------------------------------------------------

struct Transition {
  VectorXd state;
  VectorXd action;
  double log_density = 0.0;
  double reward = 0.0;
  double value = 0.0;
  double pf_gamma = 1.0;
  bool done = false;
  int ensemble_size = 1;
};

class RolloutBuffer {
 public:
  void add(Transition t);
  void clear();
  std::size_t size() const { return steps_.size(); }
  bool empty() const { return steps_.empty(); }
  const std::vector<Transition>& steps() const { return steps_; }
  std::vector<Transition>& steps() { return steps_; }
  /// Index ranges [begin, end) of each episode (the last may be unfinished).
  std::vector<std::pair<std::size_t, std::size_t>> episodes() const;

 private:
  std::vector<Transition> steps_;
};

struct PpoConfig {
  double clip_eps = 0.2;
  double gamma = 0.99;
  double gae_lambda = 0.95;
  /// Lower clip of the policy-feedback discount.
  double pf_floor = 0.9;
  int epochs = 10;
  int minibatch_size = 64;
  int steps_per_update = 2048;
  long total_steps = 200000;
  double actor_lr = 3e-4;
  double critic_lr = 1e-3;
  /// Policy-feedback discount on; off means pf_gamma = gamma everywhere.
  bool policy_feedback = true;
  PfDensity pf_density = PfDensity::Joint;
  /// Product in the PF return runs to the episode end instead of step i.
  bool pf_product_to_end = false;
  /// Use pf_gamma inside GAE instead of the constant gamma.
  bool pf_in_gae = false;
  bool normalize_advantages = true;
  int hidden = 256;
  bool tanh_third_layer = true;
  double initial_log_std = 0.0;
  double min_log_std = -20.0;
  EnsembleLikelihood ensemble_likelihood = EnsembleLikelihood::Averaged;
  /// Stops the epochs of an update once the mean approximate KL of an epoch
  /// exceeds 1.5 * target_kl; 0 disables.
  double target_kl = 0.0;

  void validate() const;
};

struct UpdateDiagnostics {
  int update = 0;
  long steps = 0;
  double policy_loss = 0.0;
  double value_loss = 0.0;
  double mean_ratio = 0.0;
  double clip_fraction = 0.0;
  double approx_kl = 0.0;
  double mean_std = 0.0;
  double mean_ensemble = 0.0;
  int epochs = 0;
};

struct ActorCritic {
  nn::GaussianPolicy policy;
  nn::ValueNet critic;
  nn::Adam actor_opt;
  nn::Adam log_std_opt;
  nn::Adam critic_opt;

  static ActorCritic make(int state_dim, int action_dim, const PpoConfig& cfg, Rng& rng);
};

/// Fills value (from the critic), advantages and PF returns for the buffer.
struct PreparedBatch {
  MatrixXd states;
  MatrixXd actions;
  VectorXd old_logp;
  VectorXd ensemble_sizes;
  VectorXd advantages;
  VectorXd returns;
};
PreparedBatch prepare_batch(const RolloutBuffer& buffer, const nn::ValueNet& critic, const PpoConfig& cfg);

/// cfg.epochs passes of shuffled minibatches, each taking one optimiser step
/// on the policy loss and one on the value loss.
UpdateDiagnostics ppo_update(ActorCritic& ac, const RolloutBuffer& buffer, const PpoConfig& cfg, Rng& rng);

}  // namespace ftp::rl
