#pragma once

// Attention-based actor-critic over a waypoint graph.
//
// Encoder: per-node linear projection of (x, y, mean, variance, intent) plus
// a projected Laplacian positional embedding, followed by `layers`
// single-head self-attention blocks (residual + layer norm, tanh
// feed-forward). Decoder: the current node embedding concatenated with the
// interest threshold and remaining budget is projected back to d_model,
// stepped through an LSTM cell, and used as the query of a pointer layer over
// the neighbor embeddings; the pointer's normalized weights are the policy.

#include <maipp/nn/tape.hpp>
#include <maipp/roadmap.hpp>

#include <iosfwd>
#include <string>
#include <vector>

namespace maipp {

struct PolicyConfig {
  int d_model = 128;
  int layers = 4;
  int k_eig = 32;
  int ffn_hidden = 128;

  void validate() const;
  bool operator==(const PolicyConfig&) const = default;
};

struct PolicyParams {
  PolicyConfig cfg;
  nn::ParamSet tensors;
};

PolicyParams init_policy(const PolicyConfig& cfg, Rng& rng);

struct RecurrentState {
  Eigen::VectorXd hidden;
  Eigen::VectorXd cell;

  static RecurrentState zeros(int d_model) {
    return {Eigen::VectorXd::Zero(d_model), Eigen::VectorXd::Zero(d_model)};
  }
};

struct Observation {
  Eigen::MatrixXd nodes;       // n x 5 augmented features
  Eigen::MatrixXd positional;  // n x k_eig
  int current = 0;
  std::vector<int> neighbors;
  std::vector<bool> allowed;   // budget mask aligned with neighbors
  double remaining_budget = 0.0;
  double interest_threshold = 0.0;
  RecurrentState rec;
};

struct PolicyOutput {
  Eigen::VectorXd probs;  // over observation.neighbors
  double value = 0.0;
  RecurrentState next;
};

struct AttentionWeights {
  Eigen::MatrixXd wq, wk, wv;
};

/// softmax(q k^T / sqrt(d)) v with q = h_q Wq, k = h_kv Wk, v = h_kv Wv.
nn::Var attention(nn::Var h_q, nn::Var h_kv, nn::Var wq, nn::Var wk, nn::Var wv);
Eigen::MatrixXd attention_layer(const Eigen::MatrixXd& h_q, const Eigen::MatrixXd& h_kv, const AttentionWeights& w);

/// Eigenvectors of the k_eig smallest nontrivial eigenvalues of the
/// symmetric-normalized Laplacian (zero-padded when the graph is small), each
/// signed so that its first non-negligible entry is positive.
Eigen::MatrixXd positional_embedding(const WaypointGraph& g, int k_eig);
/// Symmetric-normalized Laplacian eigenvalues in ascending order.
Eigen::VectorXd laplacian_spectrum(const WaypointGraph& g);
/// Random per-column sign flips (training-time augmentation).
Eigen::MatrixXd flip_signs(const Eigen::MatrixXd& pe, Rng& rng);

nn::Var encode(nn::Tape& tape, const Eigen::MatrixXd& nodes, const Eigen::MatrixXd& positional,
               const PolicyParams& params);
Eigen::MatrixXd encode(const Eigen::MatrixXd& nodes, const Eigen::MatrixXd& positional, const PolicyParams& params);

struct DecodeVars {
  nn::Var probs;  // 1 x |neighbors|
  nn::Var value;  // 1 x 1
  nn::Var hidden;
  nn::Var cell;
};

DecodeVars decode(nn::Tape& tape, nn::Var embeddings, const Observation& obs, const PolicyParams& params);

/// Full forward pass on a fresh tape.
DecodeVars forward(nn::Tape& tape, const Observation& obs, const PolicyParams& params);
PolicyOutput evaluate(const Observation& obs, const PolicyParams& params);

/// Uniform distribution over the allowed neighbors.
Eigen::VectorXd random_policy(const Observation& obs);

int sample_action(const Eigen::VectorXd& probs, Rng& rng);
int greedy_action(const Eigen::VectorXd& probs);

/// Max relative error between backprop gradients of log pi(action) and of the
/// value estimate and central finite differences. Checks every coordinate when
/// `max_coords` is 0, otherwise a random subset of that size.
double gradient_check(const PolicyParams& params, const Observation& obs, int action, Rng& rng,
                      std::size_t max_coords = 0, double step = 1e-5);

void save_checkpoint(std::ostream& os, const PolicyParams& params);
PolicyParams load_checkpoint(std::istream& is);
void save_checkpoint(const std::string& path, const PolicyParams& params);
PolicyParams load_checkpoint(const std::string& path);

}  // namespace maipp
