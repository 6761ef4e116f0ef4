#pragma once

#include <maipp/belief.hpp>
#include <maipp/policy.hpp>

#include <vector>

namespace maipp {

struct RrtConfig {
  double step = 0.1;
  int min_candidates = 8;
  int max_candidates = 64;
  int iterations = 300;       // growth before candidates are collected
  int max_iterations = 5000;  // hard cap while topping up to min_candidates
};

struct CandidatePath {
  std::vector<Vec2> waypoints;  // starts at the agent position
  double length = 0.0;
  double predicted_final_trace = 0.0;
};

/// Root-to-node branches of an RRT grown from `start` whose cumulative length
/// lies in [lo, hi], in tree insertion order, capped at max_candidates.
/// Extensions that would pass `hi` are shortened to end exactly at it.
std::vector<CandidatePath> grow_rrt(const Vec2& start, double lo, double hi, Rng& rng, const RrtConfig& cfg = {});

/// Virtual measurement locations every `interval` of arc length along a path.
Points2d virtual_measurements(const CandidatePath& path, double interval = 0.2);

/// Full-grid trace after virtual measurements along `path` and every
/// conditioning path.
double evaluate_path(const CandidatePath& path, const BeliefState& belief,
                     const std::vector<CandidatePath>& conditioning, double interval = 0.2);

/// Scores many candidates against one conditioned posterior.
class PathEvaluator {
 public:
  PathEvaluator(const BeliefState& belief, const std::vector<CandidatePath>& conditioning, double interval = 0.2);
  double operator()(const CandidatePath& path) const;

 private:
  TargetPosterior<double> post_;
  double interval_;
};

struct SgaAgent {
  const BeliefState* belief = nullptr;
  std::vector<CandidatePath> candidates;
};

/// Sequential greedy selection in the given order: each agent takes the
/// candidate with the lowest predicted trace, conditioned on the paths chosen
/// by earlier agents it can see (`visible[i][j]`). Ties go to the lowest
/// candidate index. Fills `predicted_final_trace` on every candidate.
std::vector<int> sga_select(std::vector<SgaAgent>& agents, const std::vector<std::vector<bool>>& visible,
                            double interval = 0.2);

/// Planning horizon for an agent with `remaining` budget under RRT(lo, hi).
std::pair<double, double> rrt_horizon(double lo, double hi, double remaining, double interval = 0.2);

struct SgaRoundInput {
  Vec2 position;
  double remaining = 0.0;
  const BeliefState* belief = nullptr;
};

struct SgaRoundResult {
  CandidatePath chosen;
  std::vector<Vec2> executed;  // prefix actually travelled this round
  double executed_length = 0.0;
};

/// One SGA+RRT round over the agents (fixed id order). Agents with no
/// remaining budget get an empty result.
std::vector<SgaRoundResult> sga_round(const std::vector<SgaRoundInput>& agents,
                                      const std::vector<std::vector<bool>>& visible, double lo, double hi,
                                      const RrtConfig& cfg, Rng& rng, double interval = 0.2);

/// Learned policy with the intent feature zeroed.
PolicyOutput intent_free_policy_step(const PolicyParams& params, Observation obs);

}  // namespace maipp
