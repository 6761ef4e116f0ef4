#pragma once

#include <maipp/belief.hpp>
#include <maipp/policy.hpp>
#include <maipp/roadmap.hpp>

#include <array>
#include <cstdint>
#include <functional>
#include <vector>

namespace maipp {

/// Eigenvalue floor for fitted intent covariances.
inline constexpr double kMinCovBound = 1e-3;

struct IntentBody {
  Vec2 mean = Vec2::Zero();
  Eigen::Matrix2d cov = Eigen::Matrix2d::Identity();
};

struct IntentMessage {
  std::uint32_t agent_id = 0;
  std::uint32_t step = 0;
  Vec2 mean = Vec2::Zero();
  Eigen::Matrix2d cov = Eigen::Matrix2d::Identity();
};

inline constexpr std::size_t kIntentWireSize = 2 * sizeof(std::uint32_t) + 5 * sizeof(double);
using IntentWire = std::array<unsigned char, kIntentWireSize>;

/// agent_id, step, mean (2), cov upper triangle (xx, xy, yy).
IntentWire encode_intent(const IntentMessage& msg);
IntentMessage decode_intent(const IntentWire& wire);

struct SampledTrajectory {
  std::vector<int> nodes;             // sampled nodes, excluding the start node
  std::vector<Vec2> coords;           // coordinates of `nodes`
  std::vector<Vec2> virtual_points;   // virtual measurement locations along the rollout
  double trace_reduction = 0.0;       // full-grid trace reduction from the virtual points
  bool truncated = false;             // stopped early by the budget mask
};

struct SampledTrajectorySet {
  int start = 0;
  std::vector<SampledTrajectory> trajectories;
};

/// Frozen world view used to roll the policy forward virtually.
struct RolloutContext {
  const WaypointGraph* graph = nullptr;
  const BeliefState* belief = nullptr;  // must be refit
  Eigen::VectorXd intent_levels;        // other agents' fused intent, held fixed
  Eigen::MatrixXd positional;
  int current = 0;
  double budget = 0.0;
  double spent = 0.0;
  double since_measurement = 0.0;
  double interest_threshold = 0.4;
  double measurement_interval = 0.2;
  RecurrentState rec;
};

using PolicyFn = std::function<PolicyOutput(const Observation&)>;

/// Builds the decoder observation with the budget mask (edge allowed iff
/// spent + length <= budget).
Observation make_observation(const WaypointGraph& g, Eigen::MatrixXd features, const Eigen::MatrixXd& positional,
                             int current, double budget, double spent, double interest_threshold,
                             RecurrentState rec);

SampledTrajectorySet sample_trajectories(const PolicyFn& policy, const RolloutContext& ctx, int paths, int steps,
                                         Rng& rng);

Eigen::Matrix2d clamp_covariance(const Eigen::Matrix2d& cov, double min_bound = kMinCovBound);

/// Maximum-likelihood Gaussian fit (1/N covariance) followed by clamping.
IntentBody fit_gaussian(const std::vector<Vec2>& points, double min_bound = kMinCovBound);

IntentBody fit_destination_intent(const SampledTrajectorySet& trajs, double min_bound = kMinCovBound);
IntentBody fit_trajectory_intent(const SampledTrajectorySet& trajs, double min_bound = kMinCovBound);

double gaussian_density(const Vec2& x, const Vec2& mean, const Eigen::Matrix2d& cov);

/// Sum of the received Gaussians at each node, scaled so the maximum is 1
/// (all zeros when nothing was received).
Eigen::VectorXd fuse_intents(const std::vector<IntentMessage>& messages, const Points2d& node_coords);

}  // namespace maipp
