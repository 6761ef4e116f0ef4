#pragma once

#include <maipp/belief.hpp>

#include <iosfwd>
#include <optional>
#include <vector>

namespace maipp {

struct Edge {
  int to;
  double length;
};

/// Undirected PRM waypoint graph; adjacency lists are sorted by node index.
class WaypointGraph {
 public:
  WaypointGraph() = default;
  WaypointGraph(Points2d nodes, std::vector<std::vector<Edge>> adjacency);

  int size() const { return static_cast<int>(nodes_.rows()); }
  const Points2d& nodes() const { return nodes_; }
  Vec2 node(int i) const { return nodes_.row(i).transpose(); }
  const std::vector<Edge>& neighbors(int v) const;
  std::size_t edge_count() const;

 private:
  Points2d nodes_{0, 2};
  std::vector<std::vector<Edge>> adj_;
};

struct RoadmapConfig {
  int nodes = 200;
  int neighbors = 20;
};

/// Uniform PRM over [0,1]^2 with the symmetric closure of each node's k nearest
/// neighbors; disconnected components are bridged by their shortest edge.
/// When `start` is given it becomes node 0.
WaypointGraph build_prm(Rng& rng, int n, int k, std::optional<Vec2> start = std::nullopt);

const std::vector<Edge>& neighbors(const WaypointGraph& g, int v);

bool is_connected(const WaypointGraph& g);

struct AugmentedNode {
  double x, y;
  double belief_mean;
  double belief_var;
  double intent_level;
};

std::vector<AugmentedNode> augment(const WaypointGraph& g, const BeliefState& belief,
                                   const Eigen::VectorXd& intent_levels);

/// n x 5 feature matrix (x, y, mean, variance, intent).
Eigen::MatrixXd node_features(const std::vector<AugmentedNode>& nodes);

void write_nodes_csv(std::ostream& os, const WaypointGraph& g);
void write_edges_csv(std::ostream& os, const WaypointGraph& g);

}  // namespace maipp
