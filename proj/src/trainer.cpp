#include <maipp/parallel.hpp>
#include <maipp/trainer.hpp>

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <map>
#include <numeric>
#include <ostream>
#include <sstream>
#include <stdexcept>

namespace maipp {

void TrainConfig::validate() const {
  if (!(learning_rate > 0) || !(lr_decay > 0) || decay_every < 1 || batch_size < 1 || epochs < 1)
    throw std::invalid_argument("train: learning rate, decay, batch size and epochs must be positive");
  if (!(clip > 0 && clip < 1)) throw std::invalid_argument("train: clip must lie in (0,1)");
  if (!(gamma > 0 && gamma <= 1) || !(gae_lambda >= 0 && gae_lambda <= 1))
    throw std::invalid_argument("train: gamma in (0,1], lambda in [0,1]");
  if (entropy_coef < 0 || value_coef < 0) throw std::invalid_argument("train: loss coefficients must be >= 0");
}

double learning_rate_at(const TrainConfig& cfg, long step) {
  return cfg.learning_rate * std::pow(cfg.lr_decay, static_cast<double>(step / cfg.decay_every));
}

Adam::Adam(const nn::ParamSet& like) : m_(like.zeros_like()), v_(like.zeros_like()) {}

void Adam::step(nn::ParamSet& params, const nn::ParamSet& grads, double lr, const TrainConfig& cfg) {
  ++t_;
  const double c1 = 1.0 - std::pow(cfg.adam_beta1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(cfg.adam_beta2, static_cast<double>(t_));
  for (std::size_t i = 0; i < params.size(); ++i) {
    m_[i] = cfg.adam_beta1 * m_[i] + (1.0 - cfg.adam_beta1) * grads[i];
    v_[i] = cfg.adam_beta2 * v_[i] + (1.0 - cfg.adam_beta2) * grads[i].cwiseAbs2();
    params[i].array() -= lr * (m_[i].array() / c1) / ((v_[i].array() / c2).sqrt() + cfg.adam_eps);
  }
}

Advantages compute_gae(const std::vector<Transition>& buffer, double gamma, double lambda) {
  const auto n = static_cast<Eigen::Index>(buffer.size());
  Advantages out{Eigen::VectorXd::Zero(n), Eigen::VectorXd::Zero(n)};
  // Next transition of the same (episode, agent) stream, or -1.
  std::vector<Eigen::Index> next(buffer.size(), -1);
  std::map<std::pair<int, int>, Eigen::Index> last;
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto key = std::make_pair(buffer[i].episode, buffer[i].agent);
    if (auto it = last.find(key); it != last.end() && !buffer[it->second].done) next[it->second] = i;
    last[key] = i;
  }
  for (Eigen::Index i = n - 1; i >= 0; --i) {
    const Transition& t = buffer[i];
    const Eigen::Index j = next[i];
    const double next_value = j >= 0 ? buffer[j].value : 0.0;
    const double next_adv = j >= 0 ? out.advantage(j) : 0.0;
    const double delta = t.reward + gamma * next_value - t.value;
    out.advantage(i) = delta + gamma * lambda * next_adv;
    out.ret(i) = out.advantage(i) + t.value;
  }
  return out;
}

double clipped_surrogate(double ratio, double advantage, double clip) {
  return std::min(ratio * advantage, std::clamp(ratio, 1.0 - clip, 1.0 + clip) * advantage);
}

namespace {

struct SampleLoss {
  nn::Var loss;
  double policy, value, entropy, ratio;
};

SampleLoss sample_loss(nn::Tape& tape, const PolicyParams& params, const Transition& t, double adv, double ret,
                       const TrainConfig& cfg) {
  const DecodeVars out = forward(tape, t.obs, params);
  const nn::Var logp = nn::log(nn::element(out.probs, 0, t.action));
  const nn::Var ratio = nn::exp(nn::sub(logp, tape.constant(nn::Mat::Constant(1, 1, t.log_prob))));
  const nn::Var surr = nn::minimum(nn::scale(ratio, adv), nn::scale(nn::clamp(ratio, 1.0 - cfg.clip, 1.0 + cfg.clip), adv));
  const nn::Var vloss = nn::square(nn::sub(out.value, tape.constant(nn::Mat::Constant(1, 1, ret))));
  const nn::Var ent = nn::entropy(out.probs);
  const nn::Var loss =
      nn::sub(nn::add(nn::scale(surr, -1.0), nn::scale(vloss, cfg.value_coef)), nn::scale(ent, cfg.entropy_coef));
  return {loss, -surr.scalar(), vloss.scalar(), ent.scalar(), ratio.scalar()};
}

void check_batch(const std::vector<const Transition*>& batch, const std::vector<double>& adv,
                 const std::vector<double>& ret) {
  if (batch.empty()) throw std::invalid_argument("ppo: empty batch");
  if (adv.size() != batch.size() || ret.size() != batch.size())
    throw std::invalid_argument("ppo: advantage/return size mismatch");
}

}  // namespace

LossStats ppo_loss_gradient(const PolicyParams& params, const std::vector<const Transition*>& batch,
                            const std::vector<double>& advantages, const std::vector<double>& returns,
                            const TrainConfig& cfg, nn::ParamSet& grads) {
  check_batch(batch, advantages, returns);
  const double w = 1.0 / static_cast<double>(batch.size());
  LossStats s;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    nn::Tape tape;
    const SampleLoss l = sample_loss(tape, params, *batch[i], advantages[i], returns[i], cfg);
    tape.backward(l.loss);
    tape.accumulate(grads, w);
    s.total += w * l.loss.scalar();
    s.policy += w * l.policy;
    s.value += w * l.value;
    s.entropy += w * l.entropy;
    s.approx_kl += w * (l.ratio - 1.0 - std::log(l.ratio));
    s.clip_fraction += w * (std::abs(l.ratio - 1.0) > cfg.clip ? 1.0 : 0.0);
  }
  return s;
}

double ppo_loss(const PolicyParams& params, const std::vector<const Transition*>& batch,
                const std::vector<double>& advantages, const std::vector<double>& returns, const TrainConfig& cfg) {
  check_batch(batch, advantages, returns);
  double total = 0.0;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    nn::Tape tape;
    total += sample_loss(tape, params, *batch[i], advantages[i], returns[i], cfg).loss.scalar();
  }
  return total / static_cast<double>(batch.size());
}

UpdateResult ppo_update(PolicyParams& params, Adam& opt, const std::vector<Transition>& buffer,
                        const TrainConfig& cfg, Rng& rng) {
  cfg.validate();
  if (buffer.empty()) throw std::invalid_argument("ppo_update: empty buffer");
  const Advantages ga = compute_gae(buffer, cfg.gamma, cfg.gae_lambda);
  Eigen::VectorXd adv = ga.advantage;
  if (cfg.normalize_advantages && adv.size() > 1) {
    const double mu = adv.mean();
    const double sd = std::sqrt((adv.array() - mu).square().mean());
    adv = (adv.array() - mu) / (sd + 1e-8);
  }

  std::vector<std::size_t> order(buffer.size());
  std::iota(order.begin(), order.end(), 0);
  UpdateResult res;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(cfg.batch_size)) {
      const std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(cfg.batch_size));
      std::vector<const Transition*> mb;
      std::vector<double> a, r;
      for (std::size_t k = start; k < end; ++k) {
        mb.push_back(&buffer[order[k]]);
        a.push_back(adv(static_cast<Eigen::Index>(order[k])));
        r.push_back(ga.ret(static_cast<Eigen::Index>(order[k])));
      }
      nn::ParamSet grads = params.tensors.zeros_like();
      const LossStats s = ppo_loss_gradient(params, mb, a, r, cfg, grads);
      if (!std::isfinite(s.total) || !grads.all_finite()) {
        std::ostringstream os;
        os << "ppo_update: non-finite loss at epoch " << epoch << " (total=" << s.total << " policy=" << s.policy
           << " value=" << s.value << " entropy=" << s.entropy << ")";
        throw std::runtime_error(os.str());
      }
      opt.step(params.tensors, grads, learning_rate_at(cfg, opt.steps()), cfg);
      ++res.optimizer_steps;
      res.stats.total += s.total;
      res.stats.policy += s.policy;
      res.stats.value += s.value;
      res.stats.entropy += s.entropy;
      res.stats.approx_kl += s.approx_kl;
      res.stats.clip_fraction += s.clip_fraction;
    }
  }
  const double k = 1.0 / res.optimizer_steps;
  res.stats.total *= k;
  res.stats.policy *= k;
  res.stats.value *= k;
  res.stats.entropy *= k;
  res.stats.approx_kl *= k;
  res.stats.clip_fraction *= k;
  return res;
}

RolloutBatch collect_rollouts(const PolicyParams& params, const RolloutConfig& cfg, int episodes, Rng& rng, int jobs) {
  if (episodes < 1) throw std::invalid_argument("collect_rollouts: episodes must be >= 1");
  if (!cfg.episode.method.learned()) throw std::invalid_argument("collect_rollouts: method must be a learned policy");
  std::vector<std::uint64_t> seeds(static_cast<std::size_t>(episodes));
  for (auto& s : seeds) s = rng();
  std::vector<std::vector<Transition>> per(seeds.size());
  std::vector<EpisodeMetrics> metrics(seeds.size());
  parallel_for(seeds.size(), jobs, [&](std::size_t e) {
    InstanceConfig ic = cfg.instance;
    ic.agents = cfg.episode.agents;
    const Instance inst = make_instance(seeds[e], ic);
    Rng ep = derive_rng(seeds[e], 99);
    EpisodeHooks hooks;
    hooks.policy = &params;
    hooks.transitions = &per[e];
    hooks.episode_index = static_cast<int>(e);
    metrics[e] = run_episode(cfg.episode, inst, ep, hooks);
  });
  RolloutBatch out;
  for (std::size_t e = 0; e < seeds.size(); ++e) {
    out.transitions.insert(out.transitions.end(), per[e].begin(), per[e].end());
    out.episode_returns.push_back(std::accumulate(metrics[e].reward_sums.begin(), metrics[e].reward_sums.end(), 0.0));
    out.final_traces.push_back(metrics[e].final_trace);
  }
  return out;
}

void write_train_log_header(std::ostream& os) {
  os << "step,loss,policy_loss,value_loss,entropy,approx_kl,clip_fraction,mean_return,mean_trace,lr\n";
}

void write_train_log_row(std::ostream& os, const TrainLogRow& r) {
  os << r.step << ',' << std::setprecision(10) << r.stats.total << ',' << r.stats.policy << ',' << r.stats.value << ','
     << r.stats.entropy << ',' << r.stats.approx_kl << ',' << r.stats.clip_fraction << ',' << r.mean_return << ','
     << r.mean_trace << ',' << r.lr << '\n';
}

std::vector<TrainLogRow> train(PolicyParams& params, const RolloutConfig& rollout, const TrainConfig& cfg,
                               const TrainingRun& run, Rng& rng, const std::function<void(const TrainLogRow&)>& on_step) {
  cfg.validate();
  Adam opt(params.tensors);
  std::vector<TrainLogRow> log;
  for (int step = 0; step < run.updates; ++step) {
    const RolloutBatch batch = collect_rollouts(params, rollout, run.episodes_per_update, rng, run.jobs);
    TrainLogRow row;
    row.step = step;
    row.lr = learning_rate_at(cfg, opt.steps());
    row.mean_return = std::accumulate(batch.episode_returns.begin(), batch.episode_returns.end(), 0.0) /
                      static_cast<double>(batch.episode_returns.size());
    row.mean_trace = std::accumulate(batch.final_traces.begin(), batch.final_traces.end(), 0.0) /
                     static_cast<double>(batch.final_traces.size());
    if (!batch.transitions.empty()) row.stats = ppo_update(params, opt, batch.transitions, cfg, rng).stats;
    if (on_step) on_step(row);
    log.push_back(row);
  }
  return log;
}

EvalResult evaluate_variant(const PolicyParams* params, const MethodSpec& method, const EvalConfig& cfg) {
  if (cfg.instances < 1 || cfg.trials < 1) throw std::invalid_argument("evaluate_variant: need >= 1 instance and trial");
  EpisodeConfig ec = cfg.episode;
  ec.method = method;
  InstanceConfig ic = cfg.instance;
  ic.agents = ec.agents;
  const auto total = static_cast<std::size_t>(cfg.instances) * static_cast<std::size_t>(cfg.trials);
  EvalResult res;
  res.traces.resize(total);
  res.returns.resize(total);
  std::vector<Instance> instances;
  for (int i = 0; i < cfg.instances; ++i) instances.push_back(make_instance(derive_rng(cfg.seed, 100, i)(), ic));
  parallel_for(total, cfg.jobs, [&](std::size_t k) {
    const auto i = k / static_cast<std::size_t>(cfg.trials);
    const auto t = k % static_cast<std::size_t>(cfg.trials);
    Rng ep = derive_rng(cfg.seed, 200 + i, t);
    EpisodeHooks hooks;
    hooks.policy = params;
    const EpisodeMetrics m = run_episode(ec, instances[i], ep, hooks);
    res.traces[k] = m.final_trace;
    res.returns[k] = std::accumulate(m.reward_sums.begin(), m.reward_sums.end(), 0.0);
  });
  const double n = static_cast<double>(total);
  res.mean = std::accumulate(res.traces.begin(), res.traces.end(), 0.0) / n;
  double var = 0.0;
  for (double v : res.traces) var += (v - res.mean) * (v - res.mean);
  res.std = std::sqrt(var / n);
  res.mean_return = std::accumulate(res.returns.begin(), res.returns.end(), 0.0) / n;
  return res;
}

}  // namespace maipp
