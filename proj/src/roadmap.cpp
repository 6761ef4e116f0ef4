#include <maipp/roadmap.hpp>

#include <algorithm>
#include <limits>
#include <numeric>
#include <ostream>
#include <queue>
#include <set>
#include <stdexcept>

namespace maipp {

WaypointGraph::WaypointGraph(Points2d nodes, std::vector<std::vector<Edge>> adjacency)
    : nodes_(std::move(nodes)), adj_(std::move(adjacency)) {
  if (static_cast<Eigen::Index>(adj_.size()) != nodes_.rows())
    throw std::invalid_argument("graph: adjacency size mismatch");
  for (auto& list : adj_) std::sort(list.begin(), list.end(), [](const Edge& a, const Edge& b) { return a.to < b.to; });
}

const std::vector<Edge>& WaypointGraph::neighbors(int v) const {
  if (v < 0 || v >= size()) throw std::out_of_range("graph: node index out of range");
  return adj_[static_cast<std::size_t>(v)];
}

std::size_t WaypointGraph::edge_count() const {
  std::size_t c = 0;
  for (const auto& l : adj_) c += l.size();
  return c / 2;
}

const std::vector<Edge>& neighbors(const WaypointGraph& g, int v) { return g.neighbors(v); }

namespace {

std::vector<int> component_labels(int n, const std::vector<std::set<int>>& adj) {
  std::vector<int> label(static_cast<std::size_t>(n), -1);
  int next = 0;
  for (int s = 0; s < n; ++s) {
    if (label[s] >= 0) continue;
    std::queue<int> q;
    q.push(s);
    label[s] = next;
    while (!q.empty()) {
      const int u = q.front();
      q.pop();
      for (int v : adj[u]) {
        if (label[v] < 0) {
          label[v] = next;
          q.push(v);
        }
      }
    }
    ++next;
  }
  return label;
}

}  // namespace

WaypointGraph build_prm(Rng& rng, int n, int k, std::optional<Vec2> start) {
  if (k < 1 || n <= k) throw std::invalid_argument("build_prm: requires n > k >= 1");
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  Points2d pts(n, 2);
  for (int i = 0; i < n; ++i) {
    pts(i, 0) = unit(rng);
    pts(i, 1) = unit(rng);
  }
  if (start) {
    if (!in_unit_square(*start)) throw std::invalid_argument("build_prm: start outside [0,1]^2");
    pts.row(0) = start->transpose();
  }

  std::vector<std::set<int>> adj(static_cast<std::size_t>(n));
  std::vector<int> order(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    std::iota(order.begin(), order.end(), 0);
    auto dist = [&](int j) { return (pts.row(i) - pts.row(j)).squaredNorm(); };
    std::partial_sort(order.begin(), order.begin() + k + 1, order.end(), [&](int a, int b) {
      const double da = a == i ? -1.0 : dist(a);
      const double db = b == i ? -1.0 : dist(b);
      return da < db || (da == db && a < b);
    });
    for (int r = 1; r <= k; ++r) {
      const int j = order[r];
      if (dist(j) == 0.0) continue;
      adj[i].insert(j);
      adj[j].insert(i);
    }
  }

  // Bridge the component holding node 0 to its nearest outside node until connected.
  for (;;) {
    const auto label = component_labels(n, adj);
    if (*std::max_element(label.begin(), label.end()) == 0) break;
    double best = std::numeric_limits<double>::infinity();
    int bu = -1, bv = -1;
    for (int u = 0; u < n; ++u) {
      if (label[u] != 0) continue;
      for (int v = 0; v < n; ++v) {
        if (label[v] == 0) continue;
        const double d = (pts.row(u) - pts.row(v)).squaredNorm();
        if (d > 0.0 && d < best) {
          best = d;
          bu = u;
          bv = v;
        }
      }
    }
    if (bu < 0) throw std::runtime_error("build_prm: cannot bridge coincident nodes");
    adj[bu].insert(bv);
    adj[bv].insert(bu);
  }

  std::vector<std::vector<Edge>> lists(static_cast<std::size_t>(n));
  for (int u = 0; u < n; ++u) {
    for (int v : adj[u]) lists[u].push_back({v, (pts.row(u) - pts.row(v)).norm()});
  }
  return WaypointGraph(std::move(pts), std::move(lists));
}

bool is_connected(const WaypointGraph& g) {
  const int n = g.size();
  if (n == 0) return true;
  std::vector<char> seen(static_cast<std::size_t>(n), 0);
  std::queue<int> q;
  q.push(0);
  seen[0] = 1;
  int count = 1;
  while (!q.empty()) {
    const int u = q.front();
    q.pop();
    for (const auto& e : g.neighbors(u)) {
      if (!seen[e.to]) {
        seen[e.to] = 1;
        ++count;
        q.push(e.to);
      }
    }
  }
  return count == n;
}

std::vector<AugmentedNode> augment(const WaypointGraph& g, const BeliefState& belief,
                                   const Eigen::VectorXd& intent_levels) {
  if (intent_levels.size() != g.size()) throw std::invalid_argument("augment: intent level count mismatch");
  const Eigen::VectorXd mu = belief.mean_at(g.nodes());
  const Eigen::VectorXd var = belief.variance_at(g.nodes());
  std::vector<AugmentedNode> out(static_cast<std::size_t>(g.size()));
  for (int i = 0; i < g.size(); ++i) {
    out[i] = {g.nodes()(i, 0), g.nodes()(i, 1), mu(i), var(i), intent_levels(i)};
  }
  return out;
}

Eigen::MatrixXd node_features(const std::vector<AugmentedNode>& nodes) {
  Eigen::MatrixXd f(static_cast<Eigen::Index>(nodes.size()), 5);
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    const auto& a = nodes[i];
    f.row(static_cast<Eigen::Index>(i)) << a.x, a.y, a.belief_mean, a.belief_var, a.intent_level;
  }
  return f;
}

void write_nodes_csv(std::ostream& os, const WaypointGraph& g) {
  os.precision(17);
  os << "node,x,y\n";
  for (int i = 0; i < g.size(); ++i) os << i << ',' << g.nodes()(i, 0) << ',' << g.nodes()(i, 1) << '\n';
}

void write_edges_csv(std::ostream& os, const WaypointGraph& g) {
  os.precision(17);
  os << "u,v,length\n";
  for (int u = 0; u < g.size(); ++u) {
    for (const auto& e : g.neighbors(u)) {
      if (u < e.to) os << u << ',' << e.to << ',' << e.length << '\n';
    }
  }
}

}  // namespace maipp
