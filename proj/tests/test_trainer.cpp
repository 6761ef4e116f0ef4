#include <maipp/trainer.hpp>

#include "support.hpp"

#include <doctest.h>

#include <cmath>
#include <limits>
#include <map>
#include <sstream>

using namespace maipp;

namespace {

PolicyParams tiny_policy(std::uint64_t seed = 1) {
  PolicyConfig c;
  c.d_model = 8;
  c.layers = 1;
  c.k_eig = 4;
  c.ffn_hidden = 8;
  Rng rng(seed);
  return init_policy(c, rng);
}

RolloutConfig tiny_rollout(const std::string& method = "TI(2,2)") {
  RolloutConfig rc;
  rc.instance.roadmap.nodes = 12;
  rc.instance.roadmap.neighbors = 4;
  rc.episode.agents = 2;
  rc.episode.budget = 1.0;
  rc.episode.resolution = 15;
  rc.episode.method = MethodSpec::parse(method);
  return rc;
}

Transition step(int episode, int agent, double reward, double value, bool done = false) {
  Transition t;
  t.episode = episode;
  t.agent = agent;
  t.reward = reward;
  t.value = value;
  t.done = done;
  return t;
}

struct Frozen {
  PolicyParams params;
  std::vector<Transition> buffer;
  std::vector<const Transition*> batch;
  std::vector<double> adv, ret;
};

// A handful of real transitions with deterministic advantages.
Frozen frozen_batch(std::size_t count = 6) {
  Frozen f{tiny_policy(3), {}, {}, {}, {}};
  Rng rng(5);
  f.buffer = collect_rollouts(f.params, tiny_rollout(), 1, rng).transitions;
  REQUIRE(f.buffer.size() >= count);
  f.buffer.resize(count);
  for (std::size_t i = 0; i < count; ++i) {
    f.batch.push_back(&f.buffer[i]);
    f.adv.push_back(std::sin(1.0 + static_cast<double>(i)));
    f.ret.push_back(0.3 * static_cast<double>(i));
  }
  return f;
}

}  // namespace

TEST_CASE("learning rate decays in steps") {
  TrainConfig c;
  CHECK(learning_rate_at(c, 0) == 5e-5);
  CHECK(learning_rate_at(c, 31) == 5e-5);
  CHECK(learning_rate_at(c, 32) == doctest::Approx(5e-5 * 0.96).epsilon(1e-15));
  CHECK(learning_rate_at(c, 64) == doctest::Approx(5e-5 * 0.96 * 0.96).epsilon(1e-15));
}

TEST_CASE("clipped surrogate") {
  CHECK(clipped_surrogate(1.5, 1.0, 0.2) == doctest::Approx(1.2));
  CHECK(clipped_surrogate(1.5, -1.0, 0.2) == doctest::Approx(-1.5));
  CHECK(clipped_surrogate(0.5, 1.0, 0.2) == doctest::Approx(0.5));
  CHECK(clipped_surrogate(0.5, -2.0, 0.2) == doctest::Approx(-1.6));
  CHECK(clipped_surrogate(1.1, 3.0, 0.2) == doctest::Approx(3.3));
}

TEST_CASE("gae matches the discounted sum of td errors") {
  const double g = 0.9, l = 0.8;
  const std::vector<double> r{1.0, 2.0, 3.0, 0.5}, v{0.5, 0.1, 0.2, 0.7};
  std::vector<Transition> buf;
  for (std::size_t i = 0; i < 4; ++i) buf.push_back(step(0, 0, r[i], v[i], i == 3));
  const Advantages a = compute_gae(buf, g, l);
  for (std::size_t t = 0; t < 4; ++t) {
    double expect = 0.0;
    for (std::size_t k = t; k < 4; ++k) {
      const double next = k + 1 < 4 ? v[k + 1] : 0.0;
      expect += std::pow(g * l, static_cast<double>(k - t)) * (r[k] + g * next - v[k]);
    }
    CHECK(a.advantage(static_cast<Eigen::Index>(t)) == doctest::Approx(expect).epsilon(1e-14));
    CHECK(a.ret(static_cast<Eigen::Index>(t)) == doctest::Approx(expect + v[t]).epsilon(1e-14));
  }
  // lambda = 1, gamma = 1 gives reward-to-go.
  const Advantages mc = compute_gae(buf, 1.0, 1.0);
  CHECK(mc.ret(0) == doctest::Approx(6.5));
  CHECK(mc.ret(2) == doctest::Approx(3.5));
}

TEST_CASE("gae separates interleaved agents and episodes") {
  Rng rng(1);
  std::vector<Transition> a_only, b_only, mixed;
  for (int k = 0; k < 5; ++k) {
    a_only.push_back(step(0, 0, testing::random_vector(rng, 1)(0), testing::random_vector(rng, 1)(0), k == 4));
    b_only.push_back(step(0, 1, testing::random_vector(rng, 1)(0), testing::random_vector(rng, 1)(0), k == 4));
  }
  for (int k = 0; k < 5; ++k) {
    mixed.push_back(a_only[k]);
    mixed.push_back(b_only[k]);
  }
  const Advantages A = compute_gae(a_only, 0.99, 0.95), B = compute_gae(b_only, 0.99, 0.95),
                   M = compute_gae(mixed, 0.99, 0.95);
  for (int k = 0; k < 5; ++k) {
    CHECK(M.advantage(2 * k) == doctest::Approx(A.advantage(k)).epsilon(1e-14));
    CHECK(M.advantage(2 * k + 1) == doctest::Approx(B.advantage(k)).epsilon(1e-14));
  }
  // A done flag cuts the stream even when the key repeats.
  std::vector<Transition> cut{step(0, 0, 1.0, 0.0, true), step(0, 0, 5.0, 0.0, true)};
  CHECK(compute_gae(cut, 1.0, 1.0).advantage(0) == doctest::Approx(1.0));
}

TEST_CASE("zero advantages give a zero policy gradient") {
  Frozen f = frozen_batch();
  std::fill(f.adv.begin(), f.adv.end(), 0.0);
  TrainConfig c;
  c.entropy_coef = 0.0;
  c.value_coef = 0.0;
  nn::ParamSet grads = f.params.tensors.zeros_like();
  const LossStats s = ppo_loss_gradient(f.params, f.batch, f.adv, f.ret, c, grads);
  CHECK(s.policy == 0.0);
  for (std::size_t i = 0; i < grads.size(); ++i) CHECK(grads[i].cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("unclipped loss gradient equals the vanilla policy gradient") {
  const Frozen f = frozen_batch();
  TrainConfig c;
  c.clip = std::numeric_limits<double>::infinity();
  c.entropy_coef = 0.0;
  c.value_coef = 0.0;
  nn::ParamSet ppo = f.params.tensors.zeros_like();
  ppo_loss_gradient(f.params, f.batch, f.adv, f.ret, c, ppo);

  // -(1/N) sum A_i grad log pi(a_i | s_i), built directly on the tape.
  nn::ParamSet pg = f.params.tensors.zeros_like();
  for (std::size_t i = 0; i < f.batch.size(); ++i) {
    nn::Tape tape;
    const DecodeVars out = forward(tape, f.batch[i]->obs, f.params);
    const nn::Var logp = nn::log(nn::element(out.probs, 0, f.batch[i]->action));
    tape.backward(nn::scale(logp, -f.adv[i] / static_cast<double>(f.batch.size())));
    tape.accumulate(pg);
  }
  double worst = 0.0;
  for (std::size_t i = 0; i < pg.size(); ++i) worst = std::max(worst, (pg[i] - ppo[i]).cwiseAbs().maxCoeff());
  CHECK(worst < 1e-8);
}

TEST_CASE("ppo loss gradient matches finite differences") {
  Frozen f = frozen_batch();
  // Move away from the behavior policy so ratios differ from one but stay unclipped.
  for (auto& t : f.buffer) t.log_prob -= 0.05;
  TrainConfig c;
  c.clip = 0.2;
  nn::ParamSet grads = f.params.tensors.zeros_like();
  ppo_loss_gradient(f.params, f.batch, f.adv, f.ret, c, grads);
  Rng rng(9);
  const double h = 1e-6;
  double worst = 0.0;
  for (std::size_t p = 0; p < grads.size(); ++p) {
    for (int trial = 0; trial < 3; ++trial) {
      const auto k = static_cast<Eigen::Index>(rng() % static_cast<std::uint64_t>(grads[p].size()));
      PolicyParams plus = f.params, minus = f.params;
      plus.tensors[p](k) += h;
      minus.tensors[p](k) -= h;
      const double fd = (ppo_loss(plus, f.batch, f.adv, f.ret, c) - ppo_loss(minus, f.batch, f.adv, f.ret, c)) / (2 * h);
      worst = std::max(worst, std::abs(fd - grads[p](k)) / std::max(1.0, std::abs(fd)));
    }
  }
  CHECK(worst < 1e-4);
}

TEST_CASE("adam takes a bias-corrected first step of size lr") {
  nn::ParamSet p;
  p.add("w", nn::Mat::Constant(1, 3, 1.0));
  nn::ParamSet g = p.zeros_like();
  g[0] << 2.0, -0.5, 0.0;
  Adam opt(p);
  opt.step(p, g, 0.1, TrainConfig{});
  CHECK(p[0](0) == doctest::Approx(0.9).epsilon(1e-6));
  CHECK(p[0](1) == doctest::Approx(1.1).epsilon(1e-6));
  CHECK(p[0](2) == 1.0);
  CHECK(opt.steps() == 1);
}

TEST_CASE("rollouts produce well-formed transitions") {
  const PolicyParams params = tiny_policy();
  Rng rng(2);
  const RolloutBatch b = collect_rollouts(params, tiny_rollout(), 3, rng);
  CHECK(b.episode_returns.size() == 3);
  CHECK(b.final_traces.size() == 3);
  REQUIRE(!b.transitions.empty());
  std::map<std::pair<int, int>, int> done;
  for (const auto& t : b.transitions) {
    CHECK(t.log_prob <= 0.0);
    CHECK(std::isfinite(t.value));
    if (!t.done) {
      CHECK(t.reward >= 0.0);
      CHECK(t.reward <= 1.0);
    }
    done[{t.episode, t.agent}] += t.done;
  }
  CHECK(done.size() == 6);
  for (const auto& [key, d] : done) CHECK(d == 1);
  Rng again(2);
  const RolloutBatch b2 = collect_rollouts(params, tiny_rollout(), 3, again, 2);
  CHECK(b2.final_traces == b.final_traces);
  CHECK_THROWS_AS(collect_rollouts(params, tiny_rollout("random"), 1, rng), std::invalid_argument);
}

TEST_CASE("non-finite losses abort the update") {
  Frozen f = frozen_batch();
  f.buffer[2].reward = std::nan("");
  Adam opt(f.params.tensors);
  Rng rng(1);
  CHECK_THROWS_AS(ppo_update(f.params, opt, f.buffer, TrainConfig{}, rng), std::runtime_error);
}

TEST_CASE("an update changes the parameters and reports finite stats") {
  Frozen f = frozen_batch(6);
  const PolicyParams before = f.params;
  TrainConfig c;
  c.learning_rate = 1e-3;
  c.batch_size = 4;
  c.epochs = 2;
  Adam opt(f.params.tensors);
  Rng rng(1);
  const UpdateResult r = ppo_update(f.params, opt, f.buffer, c, rng);
  CHECK(r.optimizer_steps == 4);
  CHECK(std::isfinite(r.stats.total));
  CHECK(r.stats.entropy > 0.0);
  CHECK(r.stats.approx_kl >= 0.0);
  bool changed = false;
  for (std::size_t i = 0; i < before.tensors.size(); ++i) changed |= before.tensors[i] != f.params.tensors[i];
  CHECK(changed);
}

TEST_CASE("train loop logs one row per update") {
  PolicyParams params = tiny_policy();
  TrainConfig c;
  c.epochs = 1;
  c.batch_size = 64;
  TrainingRun run;
  run.updates = 2;
  run.episodes_per_update = 2;
  Rng rng(4);
  int seen = 0;
  const auto log = train(params, tiny_rollout(), c, run, rng, [&](const TrainLogRow&) { ++seen; });
  CHECK(log.size() == 2);
  CHECK(seen == 2);
  std::ostringstream os;
  write_train_log_header(os);
  for (const auto& r : log) write_train_log_row(os, r);
  std::istringstream is(os.str());
  std::string line;
  int lines = 0;
  while (std::getline(is, line)) {
    ++lines;
    CHECK(std::count(line.begin(), line.end(), ',') == 9);
  }
  CHECK(lines == 3);
  TrainConfig bad;
  bad.clip = 1.5;
  CHECK_THROWS_AS(train(params, tiny_rollout(), bad, run, rng), std::invalid_argument);
}

TEST_CASE("evaluation pairs trials across methods") {
  EvalConfig ec;
  ec.episode = tiny_rollout().episode;
  ec.instance = tiny_rollout().instance;
  ec.instances = 2;
  ec.trials = 2;
  ec.seed = 17;
  const EvalResult a = evaluate_variant(nullptr, MethodSpec::parse("random"), ec);
  ec.jobs = 2;
  const EvalResult b = evaluate_variant(nullptr, MethodSpec::parse("random"), ec);
  CHECK(a.traces.size() == 4);
  CHECK(a.traces == b.traces);
  double mean = 0.0;
  for (double t : a.traces) mean += t / 4.0;
  CHECK(a.mean == doctest::Approx(mean));
  CHECK_THROWS(evaluate_variant(nullptr, MethodSpec::parse("TI(2,2)"), ec));
}

TEST_CASE("without broadcasting, intent methods move like the intent-free policy") {
  const PolicyParams params = tiny_policy(8);
  EvalConfig ec;
  ec.episode = tiny_rollout().episode;
  ec.episode.broadcast_intent = false;
  ec.instance = tiny_rollout().instance;
  ec.instances = 2;
  ec.trials = 2;
  const EvalResult free = evaluate_variant(&params, MethodSpec::parse("intent-free"), ec);
  const EvalResult di = evaluate_variant(&params, MethodSpec::parse("DI(2,2)"), ec);
  const EvalResult ti = evaluate_variant(&params, MethodSpec::parse("TI(2,2)"), ec);
  CHECK(free.traces == di.traces);
  CHECK(free.traces == ti.traces);
}
