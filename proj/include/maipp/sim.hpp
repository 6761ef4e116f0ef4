#pragma once

#include <maipp/field.hpp>
#include <maipp/intent.hpp>
#include <maipp/planners.hpp>
#include <maipp/policy.hpp>
#include <maipp/roadmap.hpp>

#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <vector>

namespace maipp {

enum class MethodKind { Rrt, DestinationIntent, TrajectoryIntent, TrajectoryIntentBest, IntentFree, Random };

/// Planner selection written with the table labels: "RRT(0.3,0.4)", "DI(8,3)",
/// "TI(8,5)", "TI(8,5)*", "intent-free", "random".
struct MethodSpec {
  MethodKind kind = MethodKind::Random;
  double horizon_lo = 0.0;  // RRT only
  double horizon_hi = 0.0;
  int paths = 0;  // DI/TI only
  int steps = 0;

  static MethodSpec parse(const std::string& text);
  std::string label() const;
  bool learned() const;
  bool uses_graph() const { return kind != MethodKind::Rrt; }
  bool operator==(const MethodSpec&) const = default;
};

inline constexpr double kInfiniteRange = std::numeric_limits<double>::infinity();

struct EpisodeConfig {
  int agents = 3;
  double budget = 3.0;
  double measurement_interval = 0.2;
  double comm_range = kInfiniteRange;
  double interest_threshold = 0.4;
  double ucb_beta = 1.0;
  double noise_std = 0.1;
  int resolution = 30;
  GpHyper gp;
  MethodSpec method;
  RrtConfig rrt;
  bool broadcast_intent = true;
  bool greedy = false;             // argmax instead of sampling for learned methods
  bool flip_positional = false;    // random eigenvector signs (training augmentation)
  double final_reward_scale = 0.02;
  bool step_reward_full_grid = true;  // otherwise restricted to the high-interest set

  void validate() const;
};

/// World plus per-agent roadmaps sharing the start position as node 0.
struct Instance {
  GroundTruth world;
  Vec2 start;
  std::vector<WaypointGraph> graphs;
};

struct InstanceConfig {
  FieldConfig field;
  RoadmapConfig roadmap;
  int agents = 3;
  bool shared_graph = false;  // one roadmap for every agent
};

Instance make_instance(std::uint64_t seed, const InstanceConfig& cfg);

struct MeasurementRecord {
  Vec2 location;
  double value = 0.0;
  double time = 0.0;
  int agent = 0;
  int seq = 0;
};

struct AgentState {
  int id = 0;
  Vec2 position = Vec2::Zero();
  int node = 0;
  double budget = 0.0;
  double spent = 0.0;  // C(psi)
  std::vector<int> trajectory;  // executed node sequence, starting at node 0
  RecurrentState rec;
  std::optional<IntentMessage> intent;
  std::vector<MeasurementRecord> log;  // own measurements

  double remaining() const { return budget - spent; }
};

/// One learned decision, recorded for training.
struct Transition {
  Observation obs;
  int action = 0;
  double log_prob = 0.0;
  double value = 0.0;
  double reward = 0.0;
  bool done = false;
  int agent = 0;
  int episode = 0;
};

struct DecisionRecord {
  int agent = 0;
  double time = 0.0;
  std::size_t known = 0;         // measurements in the agent's merged log
  std::size_t union_size = 0;    // all measurements taken by anyone up to now
  double trace = 0.0;            // agent's own full-grid trace after merging
};

struct EpisodeMetrics {
  double final_trace = 0.0;
  std::vector<std::pair<double, double>> trace_curve;  // (team distance, union trace)
  std::vector<double> reward_sums;
  std::vector<std::vector<Vec2>> trajectories;  // per agent, visited positions
  std::vector<double> path_lengths;
  std::vector<int> measurement_counts;
  std::vector<DecisionRecord> decisions;
  std::vector<MeasurementRecord> measurements;  // union, canonical order
};

/// Agent j is visible to i iff |p_i - p_j| <= range (always includes i).
std::vector<std::vector<bool>> comm_filter(const std::vector<Vec2>& positions, double range);

double step_reward(double trace_prev, double trace_curr);
double final_reward(double restricted_trace, double scale = 0.02);

struct EpisodeHooks {
  const PolicyParams* policy = nullptr;          // required by learned methods
  std::vector<Transition>* transitions = nullptr;  // filled when non-null
  int episode_index = 0;
};

EpisodeMetrics run_episode(const EpisodeConfig& cfg, const Instance& instance, Rng& rng,
                           const EpisodeHooks& hooks = {});

/// Trajectories as CSV rows: agent,index,x,y.
void write_trajectories_csv(std::ostream& os, const EpisodeMetrics& m);

}  // namespace maipp
