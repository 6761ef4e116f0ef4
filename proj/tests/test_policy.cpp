#include <maipp/policy.hpp>

#include "support.hpp"

#include <doctest.h>

#include <cmath>
#include <numeric>
#include <sstream>

using namespace maipp;

namespace {

PolicyConfig small_config() {
  PolicyConfig c;
  c.d_model = 8;
  c.layers = 2;
  c.k_eig = 4;
  c.ffn_hidden = 8;
  return c;
}

Eigen::MatrixXd random_matrix(Rng& rng, Eigen::Index r, Eigen::Index c) {
  Eigen::MatrixXd m(r, c);
  for (Eigen::Index i = 0; i < m.size(); ++i) m(i) = std::uniform_real_distribution<double>(-1, 1)(rng);
  return m;
}

Observation random_observation(const WaypointGraph& g, const PolicyConfig& cfg, Rng& rng, int current = 0) {
  Observation obs;
  obs.nodes = random_matrix(rng, g.size(), 5);
  obs.positional = positional_embedding(g, cfg.k_eig);
  obs.current = current;
  for (const auto& e : g.neighbors(current)) {
    obs.neighbors.push_back(e.to);
    obs.allowed.push_back(true);
  }
  obs.remaining_budget = 1.3;
  obs.interest_threshold = 0.4;
  obs.rec = {testing::random_vector(rng, cfg.d_model), testing::random_vector(rng, cfg.d_model)};
  return obs;
}

WaypointGraph triangle() {
  Points2d nodes(3, 2);
  nodes << 0.1, 0.1, 0.9, 0.1, 0.5, 0.9;
  auto len = [&](int a, int b) { return (nodes.row(a) - nodes.row(b)).norm(); };
  return WaypointGraph(nodes, {{{1, len(0, 1)}, {2, len(0, 2)}},
                               {{0, len(1, 0)}, {2, len(1, 2)}},
                               {{0, len(2, 0)}, {1, len(2, 1)}}});
}

}  // namespace

TEST_CASE("attention with a single key returns its value projection") {
  Rng rng(1);
  const AttentionWeights w{random_matrix(rng, 4, 3), random_matrix(rng, 4, 3), random_matrix(rng, 4, 3)};
  const Eigen::MatrixXd q = random_matrix(rng, 5, 4);
  const Eigen::MatrixXd kv = random_matrix(rng, 1, 4);
  const Eigen::MatrixXd out = attention_layer(q, kv, w);
  const Eigen::RowVectorXd v = kv * w.wv;
  for (int r = 0; r < 5; ++r) CHECK((out.row(r) - v).cwiseAbs().maxCoeff() < 1e-14);
}

TEST_CASE("attention over identical keys averages the values") {
  Rng rng(2);
  const AttentionWeights w{random_matrix(rng, 4, 3), random_matrix(rng, 4, 3), random_matrix(rng, 4, 3)};
  Eigen::MatrixXd kv = random_matrix(rng, 3, 4);
  // Make every key identical while the values differ: wk sees only column 0.
  AttentionWeights w2 = w;
  w2.wk.setZero();
  w2.wk.row(0).setOnes();
  kv.col(0).setConstant(0.7);
  const Eigen::MatrixXd out = attention_layer(random_matrix(rng, 2, 4), kv, w2);
  const Eigen::RowVectorXd avg = (kv * w2.wv).colwise().mean();
  CHECK((out.row(0) - avg).cwiseAbs().maxCoeff() < 1e-14);
  CHECK((out.row(1) - avg).cwiseAbs().maxCoeff() < 1e-14);
}

TEST_CASE("attention matches a hand-expanded 2x3 case") {
  Rng rng(3);
  const AttentionWeights w{random_matrix(rng, 3, 2), random_matrix(rng, 3, 2), random_matrix(rng, 3, 2)};
  const Eigen::MatrixXd hq = random_matrix(rng, 2, 3), hkv = random_matrix(rng, 3, 3);
  const Eigen::MatrixXd out = attention_layer(hq, hkv, w);
  for (int i = 0; i < 2; ++i) {
    double scores[3], z = 0.0;
    for (int j = 0; j < 3; ++j) {
      double s = 0.0;
      for (int d = 0; d < 2; ++d) {
        double qd = 0.0, kd = 0.0;
        for (int f = 0; f < 3; ++f) {
          qd += hq(i, f) * w.wq(f, d);
          kd += hkv(j, f) * w.wk(f, d);
        }
        s += qd * kd;
      }
      scores[j] = std::exp(s / std::sqrt(2.0));
      z += scores[j];
    }
    for (int d = 0; d < 2; ++d) {
      double expect = 0.0;
      for (int j = 0; j < 3; ++j) {
        double vd = 0.0;
        for (int f = 0; f < 3; ++f) vd += hkv(j, f) * w.wv(f, d);
        expect += scores[j] / z * vd;
      }
      CHECK(out(i, d) == doctest::Approx(expect).epsilon(1e-13));
    }
  }
}

TEST_CASE("triangle graph laplacian spectrum") {
  const Eigen::VectorXd ev = laplacian_spectrum(triangle());
  CHECK(std::abs(ev(0)) < 1e-12);
  CHECK(ev(1) == doctest::Approx(1.5).epsilon(1e-12));
  CHECK(ev(2) == doctest::Approx(1.5).epsilon(1e-12));
}

TEST_CASE("positional embedding is orthonormal, sign-fixed and zero padded") {
  Rng rng(4);
  const WaypointGraph g = build_prm(rng, 40, 5);
  const Eigen::MatrixXd pe = positional_embedding(g, 8);
  CHECK(pe.rows() == 40);
  CHECK(pe.cols() == 8);
  CHECK(((pe.transpose() * pe) - Eigen::MatrixXd::Identity(8, 8)).cwiseAbs().maxCoeff() < 1e-10);
  for (int c = 0; c < 8; ++c) {
    int first = 0;
    while (std::abs(pe(first, c)) <= 1e-10) ++first;
    CHECK(pe(first, c) > 0);
  }
  const Eigen::MatrixXd small = positional_embedding(triangle(), 4);
  CHECK(small.col(2).norm() == 0.0);
  CHECK(small.col(3).norm() == 0.0);
  CHECK(small.col(0).norm() == doctest::Approx(1.0));
  const Eigen::MatrixXd flipped = flip_signs(pe, rng);
  for (int c = 0; c < 8; ++c) CHECK(flipped.col(c).cwiseAbs() == pe.col(c).cwiseAbs());
}

TEST_CASE("encoder is permutation equivariant") {
  Rng rng(5);
  const PolicyParams params = init_policy(small_config(), rng);
  const Eigen::MatrixXd nodes = random_matrix(rng, 12, 5), pe = random_matrix(rng, 12, 4);
  std::vector<int> perm(12);
  std::iota(perm.begin(), perm.end(), 0);
  std::shuffle(perm.begin(), perm.end(), rng);
  Eigen::MatrixXd pn(12, 5), pp(12, 4);
  for (int i = 0; i < 12; ++i) {
    pn.row(i) = nodes.row(perm[i]);
    pp.row(i) = pe.row(perm[i]);
  }
  const Eigen::MatrixXd e = encode(nodes, pe, params), ep = encode(pn, pp, params);
  for (int i = 0; i < 12; ++i) CHECK((ep.row(i) - e.row(perm[i])).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("policy output is invariant to node relabeling") {
  Rng rng(6);
  const PolicyConfig cfg = small_config();
  const PolicyParams params = init_policy(cfg, rng);
  const WaypointGraph g = build_prm(rng, 15, 4);
  const Observation obs = random_observation(g, cfg, rng, 3);
  std::vector<int> perm(15), inv(15);
  std::iota(perm.begin(), perm.end(), 0);
  std::shuffle(perm.begin(), perm.end(), rng);
  for (int i = 0; i < 15; ++i) inv[perm[i]] = i;
  Observation p = obs;
  for (int i = 0; i < 15; ++i) {
    p.nodes.row(i) = obs.nodes.row(perm[i]);
    p.positional.row(i) = obs.positional.row(perm[i]);
  }
  p.current = inv[obs.current];
  for (auto& n : p.neighbors) n = inv[n];
  const PolicyOutput a = evaluate(obs, params), b = evaluate(p, params);
  CHECK((a.probs - b.probs).cwiseAbs().maxCoeff() < 1e-12);
  CHECK(a.value == doctest::Approx(b.value).epsilon(1e-12));
}

TEST_CASE("policy is a distribution over the allowed neighbors") {
  Rng rng(7);
  const PolicyConfig cfg = small_config();
  const PolicyParams params = init_policy(cfg, rng);
  const WaypointGraph g = build_prm(rng, 20, 5);
  for (int trial = 0; trial < 20; ++trial) {
    Observation obs = random_observation(g, cfg, rng, trial % 20);
    for (std::size_t k = 0; k < obs.allowed.size(); ++k) obs.allowed[k] = (k % 3) != 1;
    const PolicyOutput out = evaluate(obs, params);
    CHECK(out.probs.size() == static_cast<Eigen::Index>(obs.neighbors.size()));
    CHECK(out.probs.sum() == doctest::Approx(1.0).epsilon(1e-12));
    for (std::size_t k = 0; k < obs.allowed.size(); ++k) {
      if (obs.allowed[k]) CHECK(out.probs(static_cast<Eigen::Index>(k)) > 0.0);
      else CHECK(out.probs(static_cast<Eigen::Index>(k)) == 0.0);
    }
    CHECK(std::isfinite(out.value));
    CHECK(out.next.hidden.size() == cfg.d_model);
  }
}

TEST_CASE("a single allowed neighbor gets all the mass") {
  Rng rng(8);
  const PolicyConfig cfg = small_config();
  const PolicyParams params = init_policy(cfg, rng);
  const WaypointGraph g = build_prm(rng, 20, 5);
  Observation obs = random_observation(g, cfg, rng);
  std::fill(obs.allowed.begin(), obs.allowed.end(), false);
  obs.allowed[2] = true;
  const PolicyOutput out = evaluate(obs, params);
  CHECK(out.probs(2) == 1.0);
  std::fill(obs.allowed.begin(), obs.allowed.end(), false);
  CHECK_THROWS_AS(evaluate(obs, params), std::invalid_argument);
}

TEST_CASE("neighbors with identical embeddings get identical probability") {
  Rng rng(9);
  const PolicyConfig cfg = small_config();
  const PolicyParams params = init_policy(cfg, rng);
  const WaypointGraph g = triangle();
  Observation obs = random_observation(g, cfg, rng, 0);
  obs.nodes.row(2) = obs.nodes.row(1);
  obs.positional.row(2) = obs.positional.row(1);
  const PolicyOutput out = evaluate(obs, params);
  CHECK(out.probs(0) == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(out.probs(1) == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("backprop gradients match finite differences") {
  Rng rng(10);
  const PolicyConfig cfg = small_config();
  const PolicyParams params = init_policy(cfg, rng);
  const WaypointGraph g = build_prm(rng, 12, 4);
  const Observation obs = random_observation(g, cfg, rng, 1);
  CHECK(gradient_check(params, obs, 0, rng) < 1e-4);
  CHECK(gradient_check(params, obs, static_cast<int>(obs.neighbors.size()) - 1, rng, 200) < 1e-4);
}

TEST_CASE("sampling and greedy selection") {
  Rng rng(11);
  Eigen::VectorXd p(4);
  p << 0.1, 0.0, 0.6, 0.3;
  CHECK(greedy_action(p) == 2);
  std::vector<int> counts(4, 0);
  const int n = 20000;
  for (int i = 0; i < n; ++i) ++counts[sample_action(p, rng)];
  CHECK(counts[1] == 0);
  CHECK(std::abs(counts[2] / double(n) - 0.6) < 0.02);
  CHECK(std::abs(counts[0] / double(n) - 0.1) < 0.02);
  CHECK_THROWS_AS(sample_action(Eigen::VectorXd::Zero(3), rng), std::invalid_argument);
}

TEST_CASE("random policy is uniform over allowed moves") {
  Observation obs;
  obs.neighbors = {4, 5, 6, 7};
  obs.allowed = {true, false, true, true};
  const Eigen::VectorXd p = random_policy(obs);
  CHECK(p(1) == 0.0);
  CHECK(p(0) == doctest::Approx(1.0 / 3));
  obs.allowed = {false, false, false, false};
  CHECK_THROWS_AS(random_policy(obs), std::invalid_argument);
}

TEST_CASE("checkpoints round-trip bit-exactly") {
  Rng rng(12);
  const PolicyParams params = init_policy(small_config(), rng);
  std::stringstream ss;
  save_checkpoint(ss, params);
  const std::string bytes = ss.str();
  std::stringstream in(bytes);
  const PolicyParams back = load_checkpoint(in);
  CHECK(back.cfg == params.cfg);
  REQUIRE(back.tensors.size() == params.tensors.size());
  for (std::size_t i = 0; i < params.tensors.size(); ++i) {
    CHECK(back.tensors.name(i) == params.tensors.name(i));
    CHECK(back.tensors[i] == params.tensors[i]);
  }
  std::stringstream again;
  save_checkpoint(again, back);
  CHECK(again.str() == bytes);

  std::stringstream truncated(bytes.substr(0, bytes.size() / 2));
  CHECK_THROWS(load_checkpoint(truncated));
  std::stringstream garbage("not a checkpoint");
  CHECK_THROWS(load_checkpoint(garbage));
  CHECK_THROWS(load_checkpoint(std::string("/nonexistent/policy.ckpt")));
}

TEST_CASE("invalid policy configs are rejected") {
  Rng rng(13);
  PolicyConfig c = small_config();
  c.d_model = 0;
  CHECK_THROWS_AS(init_policy(c, rng), std::invalid_argument);
  c = small_config();
  c.k_eig = 0;
  CHECK_THROWS_AS(init_policy(c, rng), std::invalid_argument);
}
