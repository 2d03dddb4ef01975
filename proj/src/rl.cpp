#include "ftp/rl.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <numeric>

#include "ftp/errors.hpp"

namespace ftp::rl {

// --- action ensembles ----------------------------------------------------

Schedule parse_schedule(const std::string& name) {
  std::string s = name;
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::toupper(c); });
  if (s == "NONE") return Schedule::None;
  if (s == "AEL") return Schedule::Linear;
  if (s == "AEP") return Schedule::Poisson;
  if (s == "AEB") return Schedule::Beta;
  if (s == "AEE") return Schedule::Exponential;
  if (s == "AEW") return Schedule::Weibull;
  throw ConfigError("unknown ensemble schedule '" + name + "'");
}

std::string to_string(Schedule s) {
  switch (s) {
    case Schedule::None: return "NONE";
    case Schedule::Linear: return "AEL";
    case Schedule::Poisson: return "AEP";
    case Schedule::Beta: return "AEB";
    case Schedule::Exponential: return "AEE";
    case Schedule::Weibull: return "AEW";
  }
  return "NONE";
}

namespace {

int round_half_up(double x) { return static_cast<int>(std::floor(x + 0.5)); }

int clip_count(double x, int cap) { return std::clamp(round_half_up(x), 1, std::max(1, cap)); }

}  // namespace

int ensemble_cap(const EnsembleSchedule& s, double p) {
  const double grow_a = 1.0 + s.alpha * p;
  const double grow_b = 1.0 + s.beta * p;
  switch (s.variant) {
    case Schedule::None: return 1;
    case Schedule::Linear: return round_half_up(grow_a);
    case Schedule::Poisson:
    case Schedule::Beta:
    case Schedule::Exponential: return static_cast<int>(std::ceil(grow_a));
    case Schedule::Weibull: return static_cast<int>(std::ceil(grow_b));
  }
  return 1;
}

int ensemble_count(const EnsembleSchedule& s, double e_n, double e_a, Rng& rng) {
  if (!(e_a > 0.0) || !(e_n >= 0.0) || e_n > e_a) {
    throw InvalidProgress("ensemble progress needs 0 <= e_n <= e_a and e_a > 0");
  }
  if (s.alpha < 0.0 || s.beta < 0.0) throw ConfigError("ensemble alpha and beta must be non-negative");
  const double p = e_n / e_a;
  const double grow_a = 1.0 + s.alpha * p;
  const double grow_b = 1.0 + s.beta * p;
  const int cap = ensemble_cap(s, p);
  switch (s.variant) {
    case Schedule::None: return 1;
    case Schedule::Linear: return round_half_up(grow_a);
    case Schedule::Poisson: {
      std::poisson_distribution<int> d(grow_a);
      return std::clamp(d(rng), 1, cap);
    }
    case Schedule::Beta: {
      std::gamma_distribution<double> ga(grow_a, 1.0), gb(grow_b, 1.0);
      const double x = ga(rng), y = gb(rng);
      return clip_count(grow_a * x / (x + y), cap);
    }
    case Schedule::Exponential: {
      std::exponential_distribution<double> d(1.0 / grow_a);
      return clip_count(d(rng), cap);
    }
    case Schedule::Weibull: {
      std::weibull_distribution<double> d(grow_a, grow_b);
      return clip_count(d(rng), cap);
    }
  }
  return 1;
}

EnsembleAction ensemble_action(const VectorXd& mean, const VectorXd& log_std, int i, Rng& rng) {
  if (i < 1) throw std::invalid_argument("ensemble needs at least one sample");
  std::normal_distribution<double> n(0.0, 1.0);
  const VectorXd std_dev = log_std.array().exp();
  VectorXd sum = VectorXd::Zero(mean.size());
  for (int j = 0; j < i; ++j) {
    for (Eigen::Index d = 0; d < mean.size(); ++d) sum[d] += mean[d] + std_dev[d] * n(rng);
  }
  EnsembleAction out;
  out.action = sum / static_cast<double>(i);
  out.log_density = nn::log_prob(mean, log_std, out.action);
  out.samples = i;
  return out;
}

VectorXd likelihood_log_std(const VectorXd& log_std, int i, EnsembleLikelihood mode) {
  if (mode == EnsembleLikelihood::Base || i <= 1) return log_std;
  return (log_std.array() - 0.5 * std::log(static_cast<double>(i))).matrix();
}

EnsembleAction ensemble_action(const nn::GaussianPolicy& policy, const VectorXd& state, int i, Rng& rng) {
  return ensemble_action(policy.mean.forward(state), policy.log_std, i, rng);
}

// --- policy feedback -----------------------------------------------------

double pf_discount(double log_density, double pf_floor) {
  return std::clamp(std::exp(std::min(log_density, 0.0)), pf_floor, 1.0);
}

double pf_log_density(const VectorXd& per_dim, PfDensity mode) {
  return mode == PfDensity::Joint ? per_dim.sum() : per_dim.mean();
}

VectorXd pf_return(const VectorXd& rewards, const VectorXd& gammas, bool product_to_end) {
  if (rewards.size() != gammas.size()) throw LengthMismatch("rewards and discounts differ in length");
  const Eigen::Index T = rewards.size();
  VectorXd R(T);
  if (!product_to_end) {
    double next = 0.0;
    for (Eigen::Index t = T - 1; t >= 0; --t) {
      next = gammas[t] * (rewards[t] + next);
      R[t] = next;
    }
    return R;
  }
  double suffix = 0.0, prod = 1.0;
  for (Eigen::Index t = T - 1; t >= 0; --t) {
    suffix += rewards[t];
    prod *= gammas[t];
    R[t] = suffix * prod;
  }
  return R;
}

// --- advantages ----------------------------------------------------------

VectorXd compute_gae(const VectorXd& rewards, const VectorXd& values, const std::vector<bool>& dones,
                     double bootstrap, const VectorXd& gammas, double lambda) {
  const Eigen::Index T = rewards.size();
  if (values.size() != T || gammas.size() != T || static_cast<Eigen::Index>(dones.size()) != T) {
    throw LengthMismatch("GAE inputs differ in length");
  }
  VectorXd adv(T);
  double next_adv = 0.0;
  double next_value = bootstrap;
  for (Eigen::Index t = T - 1; t >= 0; --t) {
    const double keep = dones[t] ? 0.0 : 1.0;
    const double delta = rewards[t] + gammas[t] * next_value * keep - values[t];
    next_adv = delta + gammas[t] * lambda * keep * next_adv;
    adv[t] = next_adv;
    next_value = values[t];
  }
  return adv;
}

VectorXd compute_gae(const VectorXd& rewards, const VectorXd& values, const std::vector<bool>& dones,
                     double bootstrap, double gamma, double lambda) {
  return compute_gae(rewards, values, dones, bootstrap, VectorXd::Constant(rewards.size(), gamma), lambda);
}

VectorXd normalize(const VectorXd& x) {
  if (x.size() == 0) return x;
  const double mean = x.mean();
  const VectorXd c = x.array() - mean;
  const double sd = std::sqrt(c.squaredNorm() / static_cast<double>(x.size()));
  return sd > 0.0 ? VectorXd(c / (sd + 1e-8)) : c;
}

// --- losses --------------------------------------------------------------

PolicyLossTerms policy_loss(const VectorXd& new_logp, const VectorXd& old_logp, const VectorXd& adv,
                            double eps) {
  const Eigen::Index n = new_logp.size();
  if (old_logp.size() != n || adv.size() != n) throw LengthMismatch("policy loss inputs differ in length");
  PolicyLossTerms out;
  out.dlogp = VectorXd::Zero(n);
  if (n == 0) return out;
  double sum = 0.0, ratio_sum = 0.0, kl = 0.0;
  int clipped = 0;
  for (Eigen::Index b = 0; b < n; ++b) {
    const double r = std::exp(new_logp[b] - old_logp[b]);
    const double unclipped = r * adv[b];
    const double rc = std::clamp(r, 1.0 - eps, 1.0 + eps);
    const double clipped_term = rc * adv[b];
    if (unclipped <= clipped_term) {
      sum += unclipped;
      out.dlogp[b] = -unclipped / static_cast<double>(n);
    } else {
      sum += clipped_term;
    }
    ratio_sum += r;
    kl += (r - 1.0) - (new_logp[b] - old_logp[b]);
    if (std::abs(r - 1.0) > eps) ++clipped;
  }
  out.loss = -sum / static_cast<double>(n);
  out.mean_ratio = ratio_sum / static_cast<double>(n);
  out.clip_fraction = static_cast<double>(clipped) / static_cast<double>(n);
  out.approx_kl = kl / static_cast<double>(n);
  return out;
}

double value_loss(const VectorXd& values, const VectorXd& targets, VectorXd* dvalues) {
  if (values.size() != targets.size()) throw LengthMismatch("value loss inputs differ in length");
  const Eigen::Index n = values.size();
  if (n == 0) {
    if (dvalues) dvalues->resize(0);
    return 0.0;
  }
  const VectorXd diff = values - targets;
  if (dvalues) *dvalues = 2.0 * diff / static_cast<double>(n);
  return diff.squaredNorm() / static_cast<double>(n);
}

PolicyLossTerms policy_loss_and_grad(const nn::GaussianPolicy& policy, const MatrixXd& states,
                                     const MatrixXd& actions, const VectorXd& old_logp,
                                     const VectorXd& advantages, double eps, PolicyGradient& grad,
                                     const VectorXd* ensemble_sizes) {
  nn::ForwardCache cache;
  const MatrixXd mu = policy.mean.forward_batch(states, &cache);
  if (actions.rows() != mu.rows() || actions.cols() != mu.cols()) {
    throw ShapeMismatch("actions do not match the policy output");
  }
  if (ensemble_sizes && ensemble_sizes->size() != actions.cols()) {
    throw LengthMismatch("ensemble sizes do not match the batch");
  }
  const Eigen::ArrayXd inv_var = (-2.0 * policy.log_std.array()).exp();
  const Eigen::ArrayXd inv_std = (-policy.log_std.array()).exp();
  static const double kHalfLog2Pi = 0.5 * std::log(2.0 * M_PI);
  const double dims = static_cast<double>(mu.rows());

  // Sample b is scored under N(mu, sigma^2 / i_b); i_b = 1 without ensembles.
  const Eigen::ArrayXd scale =
      ensemble_sizes ? Eigen::ArrayXd(ensemble_sizes->array()) : Eigen::ArrayXd::Ones(actions.cols());
  const MatrixXd diff = actions - mu;
  const MatrixXd z = ((diff.array().colwise() * inv_std).rowwise() * scale.sqrt().transpose()).matrix();
  const double log_norm = policy.log_std.sum() + kHalfLog2Pi * dims;
  const VectorXd new_logp =
      (-0.5 * z.colwise().squaredNorm().transpose().array() - log_norm + 0.5 * dims * scale.log()).matrix();

  PolicyLossTerms terms = policy_loss(new_logp, old_logp, advantages, eps);

  // dlogp/dmu = i (a - mu) / sigma^2 ; dlogp/dlog_sigma = z^2 - 1.
  const VectorXd weight = (terms.dlogp.array() * scale).matrix();
  const MatrixXd dmu = (diff.array().colwise() * inv_var).matrix() * weight.asDiagonal();
  grad.mean_params = VectorXd::Zero(policy.mean.parameter_count());
  policy.mean.backward(cache, dmu, grad.mean_params);
  grad.log_std = ((z.array().square() - 1.0).matrix() * terms.dlogp);
  return terms;
}

double value_loss_and_grad(const nn::Mlp& net, const MatrixXd& states, const VectorXd& targets, VectorXd& grad) {
  nn::ForwardCache cache;
  const MatrixXd v = net.forward_batch(states, &cache);
  if (v.rows() != 1) throw ShapeMismatch("critic must have a scalar output");
  VectorXd dv;
  const double loss = value_loss(v.row(0).transpose(), targets, &dv);
  grad = VectorXd::Zero(net.parameter_count());
  net.backward(cache, dv.transpose(), grad);
  return loss;
}

// --- update --------------------------------------------------------------

void RolloutBuffer::add(Transition t) { steps_.push_back(std::move(t)); }

void RolloutBuffer::clear() { steps_.clear(); }

std::vector<std::pair<std::size_t, std::size_t>> RolloutBuffer::episodes() const {
  std::vector<std::pair<std::size_t, std::size_t>> out;
  std::size_t begin = 0;
  for (std::size_t i = 0; i < steps_.size(); ++i) {
    if (steps_[i].done) {
      out.emplace_back(begin, i + 1);
      begin = i + 1;
    }
  }
  if (begin < steps_.size()) out.emplace_back(begin, steps_.size());
  return out;
}

void PpoConfig::validate() const {
  if (!(clip_eps > 0.0 && clip_eps < 1.0)) throw ConfigError("ppo: clip must lie in (0, 1)");
  if (!(gamma > 0.0 && gamma <= 1.0)) throw ConfigError("ppo: gamma must lie in (0, 1]");
  if (!(gae_lambda >= 0.0 && gae_lambda <= 1.0)) throw ConfigError("ppo: gae lambda must lie in [0, 1]");
  if (policy_feedback && !(pf_floor > 0.0 && pf_floor <= 1.0)) throw ConfigError("ppo: pf_floor must lie in (0, 1]");
  if (epochs <= 0 || minibatch_size <= 0 || steps_per_update <= 0) {
    throw ConfigError("ppo: epochs, minibatch size and steps per update must be positive");
  }
  if (total_steps < 0) throw ConfigError("ppo: total steps must be non-negative");
  if (!(actor_lr > 0.0 && critic_lr > 0.0)) throw ConfigError("ppo: learning rates must be positive");
  if (hidden <= 0) throw ConfigError("ppo: hidden width must be positive");
  if (target_kl < 0.0) throw ConfigError("ppo: target_kl must be non-negative");
}

ActorCritic ActorCritic::make(int state_dim, int action_dim, const PpoConfig& cfg, Rng& rng) {
  ActorCritic ac;
  ac.policy = nn::GaussianPolicy::make(state_dim, action_dim, rng, cfg.hidden, cfg.tanh_third_layer,
                                       cfg.initial_log_std);
  ac.critic = nn::ValueNet::make(state_dim, rng, cfg.hidden, cfg.tanh_third_layer);
  ac.actor_opt = nn::Adam(ac.policy.mean.parameter_count(), cfg.actor_lr);
  ac.log_std_opt = nn::Adam(action_dim, cfg.actor_lr);
  ac.critic_opt = nn::Adam(ac.critic.net.parameter_count(), cfg.critic_lr);
  return ac;
}

PreparedBatch prepare_batch(const RolloutBuffer& buffer, const nn::ValueNet& critic, const PpoConfig& cfg) {
  const auto& steps = buffer.steps();
  const Eigen::Index n = static_cast<Eigen::Index>(steps.size());
  PreparedBatch b;
  if (n == 0) return b;
  const Eigen::Index sdim = steps[0].state.size(), adim = steps[0].action.size();
  b.states.resize(sdim, n);
  b.actions.resize(adim, n);
  b.old_logp.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    b.states.col(i) = steps[i].state;
    b.actions.col(i) = steps[i].action;
    b.old_logp[i] = steps[i].log_density;
  }
  b.ensemble_sizes.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    b.ensemble_sizes[i] =
        cfg.ensemble_likelihood == EnsembleLikelihood::Averaged ? static_cast<double>(steps[i].ensemble_size) : 1.0;
  }
  const VectorXd values = critic.net.forward_batch(b.states).row(0).transpose();
  b.advantages.resize(n);
  b.returns.resize(n);
  for (const auto& [begin, end] : buffer.episodes()) {
    const Eigen::Index len = static_cast<Eigen::Index>(end - begin);
    VectorXd r(len), g(len), v(len);
    std::vector<bool> dones(len);
    for (Eigen::Index k = 0; k < len; ++k) {
      const Transition& t = steps[begin + k];
      r[k] = t.reward;
      g[k] = t.pf_gamma;
      v[k] = values[begin + k];
      dones[k] = t.done;
    }
    // An unfinished tail bootstraps from its own last value estimate.
    const double tail = dones.back() ? 0.0 : v[len - 1];
    const VectorXd adv = cfg.pf_in_gae ? compute_gae(r, v, dones, tail, g, cfg.gae_lambda)
                                       : compute_gae(r, v, dones, tail, cfg.gamma, cfg.gae_lambda);
    b.advantages.segment(begin, len) = adv;
    b.returns.segment(begin, len) = pf_return(r, g, cfg.pf_product_to_end);
  }
  if (cfg.normalize_advantages) b.advantages = normalize(b.advantages);
  return b;
}

UpdateDiagnostics ppo_update(ActorCritic& ac, const RolloutBuffer& buffer, const PpoConfig& cfg, Rng& rng) {
  UpdateDiagnostics diag;
  const PreparedBatch batch = prepare_batch(buffer, ac.critic, cfg);
  const Eigen::Index n = batch.states.cols();
  diag.steps = n;
  if (n == 0) return diag;

  std::vector<Eigen::Index> order(n);
  std::iota(order.begin(), order.end(), 0);
  const Eigen::Index mb = std::min<Eigen::Index>(cfg.minibatch_size, n);
  int count = 0;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double epoch_kl = 0.0;
    int epoch_batches = 0;
    for (Eigen::Index start = 0; start < n; start += mb) {
      const Eigen::Index len = std::min(mb, n - start);
      MatrixXd s(batch.states.rows(), len), a(batch.actions.rows(), len);
      VectorXd old_lp(len), adv(len), ret(len), ens(len);
      for (Eigen::Index k = 0; k < len; ++k) {
        const Eigen::Index idx = order[start + k];
        s.col(k) = batch.states.col(idx);
        a.col(k) = batch.actions.col(idx);
        old_lp[k] = batch.old_logp[idx];
        adv[k] = batch.advantages[idx];
        ret[k] = batch.returns[idx];
        ens[k] = batch.ensemble_sizes[idx];
      }

      PolicyGradient pg;
      const PolicyLossTerms pl = policy_loss_and_grad(ac.policy, s, a, old_lp, adv, cfg.clip_eps, pg, &ens);
      ac.actor_opt.step(ac.policy.mean.parameters(), pg.mean_params);
      ac.log_std_opt.step(ac.policy.log_std, pg.log_std);
      ac.policy.log_std = ac.policy.log_std.cwiseMax(cfg.min_log_std);

      VectorXd vg;
      const double vl = value_loss_and_grad(ac.critic.net, s, ret, vg);
      ac.critic_opt.step(ac.critic.net.parameters(), vg);

      diag.policy_loss += pl.loss;
      diag.value_loss += vl;
      diag.mean_ratio += pl.mean_ratio;
      diag.clip_fraction += pl.clip_fraction;
      diag.approx_kl += pl.approx_kl;
      ++count;
      epoch_kl += pl.approx_kl;
      ++epoch_batches;
    }
    diag.epochs = epoch + 1;
    if (cfg.target_kl > 0.0 && epoch_kl / epoch_batches > 1.5 * cfg.target_kl) break;
  }
  diag.policy_loss /= count;
  diag.value_loss /= count;
  diag.mean_ratio /= count;
  diag.clip_fraction /= count;
  diag.approx_kl /= count;
  diag.mean_std = ac.policy.log_std.array().exp().mean();
  double ens = 0.0;
  for (const auto& t : buffer.steps()) ens += t.ensemble_size;
  diag.mean_ensemble = ens / static_cast<double>(buffer.size());
  return diag;
}

}  // namespace ftp::rl
