#include <maipp/geometry.hpp>
#include <maipp/planners.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace maipp {

namespace {
constexpr double kBudgetEps = 1e-9;
constexpr double kArcTol = 1e-12;
}

std::vector<CandidatePath> grow_rrt(const Vec2& start, double lo, double hi, Rng& rng, const RrtConfig& cfg) {
  if (!(lo > 0) || !(lo <= hi)) throw std::invalid_argument("grow_rrt: horizon must satisfy 0 < a <= b");
  if (hi < cfg.step) throw std::invalid_argument("grow_rrt: horizon shorter than the step size");
  if (!in_unit_square(start)) throw std::invalid_argument("grow_rrt: start outside [0,1]^2");

  std::vector<Vec2> nodes{start};
  std::vector<int> parent{-1};
  std::vector<double> cost{0.0};
  std::vector<int> hits;
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  int it = 0;
  while (it < cfg.max_iterations &&
         (it < cfg.iterations || static_cast<int>(hits.size()) < cfg.min_candidates)) {
    ++it;
    const Vec2 sample(unit(rng), unit(rng));
    std::size_t near = 0;
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < nodes.size(); ++i) {
      const double d = (nodes[i] - sample).squaredNorm();
      if (d < best) {
        best = d;
        near = i;
      }
    }
    const double dist = std::sqrt(best);
    // Steps are shortened so no branch outgrows the horizon.
    const double reach = std::min({dist, cfg.step, hi - cost[near]});
    if (reach <= kArcTol) continue;
    const Vec2 next = reach >= dist ? sample : Vec2(nodes[near] + (reach / dist) * (sample - nodes[near]));
    const double c = cost[near] + reach;
    nodes.push_back(next);
    parent.push_back(static_cast<int>(near));
    cost.push_back(c);
    if (c >= lo - kArcTol) hits.push_back(static_cast<int>(nodes.size()) - 1);
  }
  if (hits.empty())
    throw std::runtime_error("grow_rrt: no branch reached the horizon window [" + std::to_string(lo) + ", " +
                             std::to_string(hi) + "]");

  std::vector<CandidatePath> out;
  for (int h : hits) {
    if (static_cast<int>(out.size()) >= cfg.max_candidates) break;
    CandidatePath p;
    for (int v = h; v >= 0; v = parent[v]) p.waypoints.push_back(nodes[v]);
    std::reverse(p.waypoints.begin(), p.waypoints.end());
    p.length = cost[h];
    out.push_back(std::move(p));
  }
  return out;
}

Points2d virtual_measurements(const CandidatePath& path, double interval) {
  return to_points(points_along(path.waypoints, interval));
}

namespace {

Points2d conditioning_points(const std::vector<CandidatePath>& paths, double interval) {
  std::vector<Vec2> pts;
  for (const auto& p : paths) {
    const auto v = points_along(p.waypoints, interval);
    pts.insert(pts.end(), v.begin(), v.end());
  }
  return to_points(pts);
}

}  // namespace

PathEvaluator::PathEvaluator(const BeliefState& belief, const std::vector<CandidatePath>& conditioning,
                             double interval)
    : post_(belief.grid_posterior().with_extra(conditioning_points(conditioning, interval))), interval_(interval) {}

double PathEvaluator::operator()(const CandidatePath& path) const {
  return post_.trace_with(virtual_measurements(path, interval_));
}

double evaluate_path(const CandidatePath& path, const BeliefState& belief,
                     const std::vector<CandidatePath>& conditioning, double interval) {
  return PathEvaluator(belief, conditioning, interval)(path);
}

std::vector<int> sga_select(std::vector<SgaAgent>& agents, const std::vector<std::vector<bool>>& visible,
                            double interval) {
  const std::size_t m = agents.size();
  std::vector<int> chosen(m, -1);
  for (std::size_t i = 0; i < m; ++i) {
    auto& agent = agents[i];
    if (agent.candidates.empty()) continue;
    std::vector<CandidatePath> cond;
    for (std::size_t j = 0; j < i; ++j) {
      if (chosen[j] >= 0 && visible[i][j]) cond.push_back(agents[j].candidates[static_cast<std::size_t>(chosen[j])]);
    }
    const PathEvaluator eval(*agent.belief, cond, interval);
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < agent.candidates.size(); ++c) {
      auto& cand = agent.candidates[c];
      cand.predicted_final_trace = eval(cand);
      if (cand.predicted_final_trace < best) {
        best = cand.predicted_final_trace;
        chosen[i] = static_cast<int>(c);
      }
    }
  }
  return chosen;
}

std::pair<double, double> rrt_horizon(double lo, double hi, double remaining, double interval) {
  if (remaining >= hi) return {lo, hi};
  if (remaining >= lo) return {lo, remaining};
  // Falls back to [min(remaining, lo/2), remaining], never shorter than the executed prefix.
  return {std::max(std::min(remaining, 0.5 * lo), std::min(interval, remaining)), remaining};
}

std::vector<SgaRoundResult> sga_round(const std::vector<SgaRoundInput>& agents,
                                      const std::vector<std::vector<bool>>& visible, double lo, double hi,
                                      const RrtConfig& cfg, Rng& rng, double interval) {
  std::vector<SgaAgent> sga(agents.size());
  for (std::size_t i = 0; i < agents.size(); ++i) {
    sga[i].belief = agents[i].belief;
    if (agents[i].remaining <= kBudgetEps) continue;
    const auto [a, b] = rrt_horizon(lo, hi, agents[i].remaining, interval);
    RrtConfig c = cfg;
    c.step = std::min(cfg.step, b);
    sga[i].candidates = grow_rrt(agents[i].position, a, b, rng, c);
  }
  const std::vector<int> chosen = sga_select(sga, visible, interval);
  std::vector<SgaRoundResult> out(agents.size());
  for (std::size_t i = 0; i < agents.size(); ++i) {
    if (chosen[i] < 0) continue;
    auto& r = out[i];
    r.chosen = sga[i].candidates[static_cast<std::size_t>(chosen[i])];
    const double rem = agents[i].remaining;
    r.executed_length = rem - interval <= kBudgetEps ? rem : interval;
    r.executed = polyline_prefix(r.chosen.waypoints, r.executed_length);
  }
  return out;
}

PolicyOutput intent_free_policy_step(const PolicyParams& params, Observation obs) {
  obs.nodes.col(4).setZero();
  return evaluate(obs, params);
}

}  // namespace maipp
