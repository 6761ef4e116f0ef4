#pragma once

#include <maipp/sim.hpp>

#include <iosfwd>
#include <limits>
#include <vector>

namespace maipp {

struct TrainConfig {
  double learning_rate = 5e-5;
  double lr_decay = 0.96;
  int decay_every = 32;  // optimizer steps per decay
  int batch_size = 512;
  int epochs = 8;
  double clip = 0.2;
  double gamma = 1.0;
  double gae_lambda = 0.95;
  double entropy_coef = 0.01;
  double value_coef = 0.5;
  bool normalize_advantages = true;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;

  void validate() const;
};

/// Learning rate used by optimizer step `step` (0-based).
double learning_rate_at(const TrainConfig& cfg, long step);

class Adam {
 public:
  explicit Adam(const nn::ParamSet& like);
  /// params -= lr * mhat / (sqrt(vhat) + eps)
  void step(nn::ParamSet& params, const nn::ParamSet& grads, double lr, const TrainConfig& cfg);
  long steps() const { return t_; }

 private:
  nn::ParamSet m_, v_;
  long t_ = 0;
};

/// Advantages and bootstrapped returns per transition. Transitions are grouped
/// by (episode, agent) in buffer order; a group ends at its done flag.
struct Advantages {
  Eigen::VectorXd advantage;
  Eigen::VectorXd ret;
};
Advantages compute_gae(const std::vector<Transition>& buffer, double gamma, double lambda);

struct LossStats {
  double total = 0.0;
  double policy = 0.0;
  double value = 0.0;
  double entropy = 0.0;
  double approx_kl = 0.0;
  double clip_fraction = 0.0;
};

/// Clipped surrogate of one sample: min(r A, clip(r, 1-eps, 1+eps) A).
double clipped_surrogate(double ratio, double advantage, double clip);

/// Mean PPO loss over `batch` and its gradient (added into `grads`).
LossStats ppo_loss_gradient(const PolicyParams& params, const std::vector<const Transition*>& batch,
                            const std::vector<double>& advantages, const std::vector<double>& returns,
                            const TrainConfig& cfg, nn::ParamSet& grads);

/// Loss value only (for finite differences).
double ppo_loss(const PolicyParams& params, const std::vector<const Transition*>& batch,
                const std::vector<double>& advantages, const std::vector<double>& returns, const TrainConfig& cfg);

struct UpdateResult {
  LossStats stats;  // averaged over minibatches
  int optimizer_steps = 0;
};

/// GAE, then `epochs` passes of shuffled minibatches. Throws on a non-finite
/// loss or gradient.
UpdateResult ppo_update(PolicyParams& params, Adam& opt, const std::vector<Transition>& buffer,
                        const TrainConfig& cfg, Rng& rng);

struct RolloutConfig {
  EpisodeConfig episode;
  InstanceConfig instance;
};

struct RolloutBatch {
  std::vector<Transition> transitions;
  std::vector<double> episode_returns;  // summed team reward per episode
  std::vector<double> final_traces;
};

/// Runs `episodes` stochastic episodes on fresh instances drawn from `rng`.
RolloutBatch collect_rollouts(const PolicyParams& params, const RolloutConfig& cfg, int episodes, Rng& rng,
                              int jobs = 1);

struct TrainLogRow {
  int step = 0;
  LossStats stats;
  double mean_return = 0.0;
  double mean_trace = 0.0;
  double lr = 0.0;
};

void write_train_log_header(std::ostream& os);
void write_train_log_row(std::ostream& os, const TrainLogRow& row);

struct TrainingRun {
  int updates = 1;
  int episodes_per_update = 8;
  int jobs = 1;
};

/// collect -> update loop; `on_step` (if set) sees each log row.
std::vector<TrainLogRow> train(PolicyParams& params, const RolloutConfig& rollout, const TrainConfig& cfg,
                               const TrainingRun& run, Rng& rng,
                               const std::function<void(const TrainLogRow&)>& on_step = {});

struct EvalConfig {
  EpisodeConfig episode;
  InstanceConfig instance;
  int instances = 30;
  int trials = 10;
  std::uint64_t seed = 0;
  int jobs = 1;
};

struct EvalResult {
  std::vector<double> traces;  // instance-major
  std::vector<double> returns;
  double mean = 0.0;
  double std = 0.0;
  double mean_return = 0.0;
};

/// Mean/std final trace of a method over instances x trials with paired seeds:
/// trial (i, t) uses the same instance and episode stream for every method.
EvalResult evaluate_variant(const PolicyParams* params, const MethodSpec& method, const EvalConfig& cfg);

}  // namespace maipp
