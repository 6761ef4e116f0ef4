#include <maipp/geometry.hpp>
#include <maipp/intent.hpp>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <numbers>
#include <stdexcept>

namespace maipp {

IntentWire encode_intent(const IntentMessage& msg) {
  IntentWire w{};
  unsigned char* p = w.data();
  auto put = [&p](const auto& v) {
    std::memcpy(p, &v, sizeof(v));
    p += sizeof(v);
  };
  put(msg.agent_id);
  put(msg.step);
  put(msg.mean.x());
  put(msg.mean.y());
  put(msg.cov(0, 0));
  put(msg.cov(0, 1));
  put(msg.cov(1, 1));
  return w;
}

IntentMessage decode_intent(const IntentWire& wire) {
  IntentMessage m;
  const unsigned char* p = wire.data();
  auto get = [&p](auto& v) {
    std::memcpy(&v, p, sizeof(v));
    p += sizeof(v);
  };
  double xx, xy, yy;
  get(m.agent_id);
  get(m.step);
  get(m.mean.x());
  get(m.mean.y());
  get(xx);
  get(xy);
  get(yy);
  m.cov << xx, xy, xy, yy;
  return m;
}

Observation make_observation(const WaypointGraph& g, Eigen::MatrixXd features, const Eigen::MatrixXd& positional,
                             int current, double budget, double spent, double interest_threshold,
                             RecurrentState rec) {
  Observation obs;
  obs.nodes = std::move(features);
  obs.positional = positional;
  obs.current = current;
  for (const auto& e : g.neighbors(current)) {
    obs.neighbors.push_back(e.to);
    obs.allowed.push_back(spent + e.length <= budget);
  }
  obs.remaining_budget = budget - spent;
  obs.interest_threshold = interest_threshold;
  obs.rec = std::move(rec);
  return obs;
}

SampledTrajectorySet sample_trajectories(const PolicyFn& policy, const RolloutContext& ctx, int paths, int steps,
                                         Rng& rng) {
  if (paths < 1 || steps < 1) throw std::invalid_argument("sample_trajectories: paths and steps must be >= 1");
  if (!ctx.graph || !ctx.belief) throw std::invalid_argument("sample_trajectories: missing graph or belief");
  const WaypointGraph& g = *ctx.graph;
  const TargetPosterior<double> node_post = ctx.belief->posterior_at(g.nodes());
  const Eigen::VectorXd node_mean = ctx.belief->mean_at(g.nodes());
  const TargetPosterior<double>& grid_post = ctx.belief->grid_posterior();

  SampledTrajectorySet out;
  out.start = ctx.current;
  for (int a = 0; a < paths; ++a) {
    SampledTrajectory traj;
    int cur = ctx.current;
    double spent = ctx.spent;
    double carry = ctx.since_measurement;
    RecurrentState rec = ctx.rec;
    for (int s = 0; s < steps; ++s) {
      Eigen::MatrixXd feat(g.size(), 5);
      feat.col(0) = g.nodes().col(0);
      feat.col(1) = g.nodes().col(1);
      feat.col(2) = node_mean;
      feat.col(3) = node_post.variances_with(to_points(traj.virtual_points));
      feat.col(4) = ctx.intent_levels;
      Observation obs = make_observation(g, std::move(feat), ctx.positional, cur, ctx.budget, spent,
                                         ctx.interest_threshold, rec);
      if (std::none_of(obs.allowed.begin(), obs.allowed.end(), [](bool b) { return b; })) {
        traj.truncated = true;
        break;
      }
      const PolicyOutput po = policy(obs);
      const int pick = sample_action(po.probs, rng);
      const int next = obs.neighbors[static_cast<std::size_t>(pick)];
      const auto seg = points_along({g.node(cur), g.node(next)}, ctx.measurement_interval, carry);
      traj.virtual_points.insert(traj.virtual_points.end(), seg.begin(), seg.end());
      spent += g.neighbors(cur)[static_cast<std::size_t>(pick)].length;
      traj.nodes.push_back(next);
      traj.coords.push_back(g.node(next));
      rec = po.next;
      cur = next;
    }
    traj.trace_reduction = grid_post.trace() - grid_post.trace_with(to_points(traj.virtual_points));
    out.trajectories.push_back(std::move(traj));
  }
  return out;
}

Eigen::Matrix2d clamp_covariance(const Eigen::Matrix2d& cov, double min_bound) {
  if (std::abs(cov(0, 1) - cov(1, 0)) > 1e-12 * std::max(1.0, cov.cwiseAbs().maxCoeff()))
    throw std::invalid_argument("clamp_covariance: matrix is not symmetric");
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> es(cov);
  if (es.eigenvalues().minCoeff() >= min_bound) return cov;
  const Eigen::Vector2d lambda = es.eigenvalues().cwiseMax(min_bound);
  Eigen::Matrix2d out = es.eigenvectors() * lambda.asDiagonal() * es.eigenvectors().transpose();
  out(1, 0) = out(0, 1);
  return out;
}

IntentBody fit_gaussian(const std::vector<Vec2>& points, double min_bound) {
  if (points.empty()) throw std::invalid_argument("fit_gaussian: no points");
  IntentBody b;
  b.mean = Vec2::Zero();
  for (const auto& p : points) b.mean += p;
  b.mean /= static_cast<double>(points.size());
  Eigen::Matrix2d c = Eigen::Matrix2d::Zero();
  for (const auto& p : points) c += (p - b.mean) * (p - b.mean).transpose();
  c /= static_cast<double>(points.size());
  c(1, 0) = c(0, 1);
  b.cov = clamp_covariance(c, min_bound);
  return b;
}

IntentBody fit_destination_intent(const SampledTrajectorySet& trajs, double min_bound) {
  std::vector<Vec2> pts;
  for (const auto& t : trajs.trajectories) {
    if (!t.coords.empty()) pts.push_back(t.coords.back());
  }
  if (pts.empty()) throw std::invalid_argument("fit_destination_intent: no trajectory nodes");
  return fit_gaussian(pts, min_bound);
}

IntentBody fit_trajectory_intent(const SampledTrajectorySet& trajs, double min_bound) {
  std::vector<Vec2> pts;
  for (const auto& t : trajs.trajectories) pts.insert(pts.end(), t.coords.begin(), t.coords.end());
  if (pts.empty()) throw std::invalid_argument("fit_trajectory_intent: no trajectory nodes");
  return fit_gaussian(pts, min_bound);
}

double gaussian_density(const Vec2& x, const Vec2& mean, const Eigen::Matrix2d& cov) {
  const double det = cov.determinant();
  if (!(det > 0)) throw std::invalid_argument("gaussian_density: covariance not positive definite");
  const Vec2 d = x - mean;
  const double q = d.dot(cov.inverse() * d);
  return std::exp(-0.5 * q) / (2.0 * std::numbers::pi * std::sqrt(det));
}

Eigen::VectorXd fuse_intents(const std::vector<IntentMessage>& messages, const Points2d& node_coords) {
  Eigen::VectorXd f = Eigen::VectorXd::Zero(node_coords.rows());
  for (const auto& m : messages) {
    for (Eigen::Index i = 0; i < node_coords.rows(); ++i) f(i) += gaussian_density(node_coords.row(i).transpose(), m.mean, m.cov);
  }
  const double mx = f.size() ? f.maxCoeff() : 0.0;
  if (mx > 0) f /= mx;
  return f;
}

}  // namespace maipp
