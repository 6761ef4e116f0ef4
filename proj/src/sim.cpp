#include <maipp/geometry.hpp>
#include <maipp/sim.hpp>

#include <algorithm>
#include <cmath>
#include <ostream>
#include <queue>
#include <regex>
#include <sstream>
#include <stdexcept>

namespace maipp {

namespace {

constexpr double kBudgetEps = 1e-9;

enum StreamTag : std::uint64_t { kActions = 11, kIntents = 12, kNoise = 13, kPlanner = 14, kPositional = 15 };

std::string fmt_num(double v) {
  std::ostringstream os;
  os << v;
  return os.str();
}

}  // namespace

MethodSpec MethodSpec::parse(const std::string& text) {
  static const std::regex rrt(R"(\s*RRT\s*\(\s*([0-9.eE+-]+)\s*,\s*([0-9.eE+-]+)\s*\)\s*)");
  static const std::regex intent(R"(\s*(DI|TI)\s*\(\s*(\d+)\s*,\s*(\d+)\s*\)\s*(\*?)\s*)");
  MethodSpec m;
  std::smatch g;
  if (std::regex_match(text, g, rrt)) {
    m.kind = MethodKind::Rrt;
    m.horizon_lo = std::stod(g[1]);
    m.horizon_hi = std::stod(g[2]);
    if (!(m.horizon_lo > 0) || !(m.horizon_lo < m.horizon_hi))
      throw std::invalid_argument("invalid method '" + text + "': RRT horizon needs 0 < a < b");
  } else if (std::regex_match(text, g, intent)) {
    const bool star = g[4].length() > 0;
    if (g[1] == "DI" && star) throw std::invalid_argument("invalid method '" + text + "': DI has no * variant");
    m.kind = g[1] == "DI" ? MethodKind::DestinationIntent
                          : (star ? MethodKind::TrajectoryIntentBest : MethodKind::TrajectoryIntent);
    m.paths = std::stoi(g[2]);
    m.steps = std::stoi(g[3]);
    if (m.paths < 1 || m.steps < 1) throw std::invalid_argument("invalid method '" + text + "': counts must be >= 1");
  } else if (text == "intent-free") {
    m.kind = MethodKind::IntentFree;
  } else if (text == "random") {
    m.kind = MethodKind::Random;
  } else {
    throw std::invalid_argument("invalid method '" + text + "'");
  }
  return m;
}

std::string MethodSpec::label() const {
  switch (kind) {
    case MethodKind::Rrt:
      return "RRT(" + fmt_num(horizon_lo) + "," + fmt_num(horizon_hi) + ")";
    case MethodKind::DestinationIntent:
      return "DI(" + std::to_string(paths) + "," + std::to_string(steps) + ")";
    case MethodKind::TrajectoryIntent:
      return "TI(" + std::to_string(paths) + "," + std::to_string(steps) + ")";
    case MethodKind::TrajectoryIntentBest:
      return "TI(" + std::to_string(paths) + "," + std::to_string(steps) + ")*";
    case MethodKind::IntentFree:
      return "intent-free";
    case MethodKind::Random:
      return "random";
  }
  return "?";
}

bool MethodSpec::learned() const {
  return kind == MethodKind::DestinationIntent || kind == MethodKind::TrajectoryIntent ||
         kind == MethodKind::TrajectoryIntentBest || kind == MethodKind::IntentFree;
}

void EpisodeConfig::validate() const {
  if (agents < 1) throw std::invalid_argument("episode: agents must be >= 1");
  if (!(budget > 0)) throw std::invalid_argument("episode: budget must be > 0");
  if (!(measurement_interval > 0)) throw std::invalid_argument("episode: measurement interval must be > 0");
  if (!(comm_range > 0)) throw std::invalid_argument("episode: comm_range must be > 0");
  if (!(noise_std >= 0)) throw std::invalid_argument("episode: noise_std must be >= 0");
  if (resolution < 1) throw std::invalid_argument("episode: resolution must be >= 1");
  gp.validate();
}

Instance make_instance(std::uint64_t seed, const InstanceConfig& cfg) {
  if (cfg.agents < 1) throw std::invalid_argument("make_instance: agents must be >= 1");
  Rng field_rng = derive_rng(seed, 1);
  GroundTruth world = generate_ground_truth(field_rng, cfg.field);
  Rng start_rng = derive_rng(seed, 2);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const double sx = unit(start_rng);
  const Vec2 start(sx, unit(start_rng));
  std::vector<WaypointGraph> graphs;
  for (int i = 0; i < cfg.agents; ++i) {
    if (cfg.shared_graph && i > 0) {
      graphs.push_back(graphs.front());
      continue;
    }
    Rng g_rng = derive_rng(seed, 3, static_cast<std::uint64_t>(i));
    graphs.push_back(build_prm(g_rng, cfg.roadmap.nodes, cfg.roadmap.neighbors, start));
  }
  return {std::move(world), start, std::move(graphs)};
}

std::vector<std::vector<bool>> comm_filter(const std::vector<Vec2>& positions, double range) {
  if (!(range > 0)) throw std::invalid_argument("comm_filter: range must be > 0");
  const std::size_t m = positions.size();
  std::vector<std::vector<bool>> vis(m, std::vector<bool>(m, false));
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < m; ++j) vis[i][j] = i == j || (positions[i] - positions[j]).norm() <= range;
  }
  return vis;
}

double step_reward(double trace_prev, double trace_curr) {
  if (!(trace_prev > 0)) throw std::invalid_argument("step_reward: previous trace must be positive");
  return (trace_prev - trace_curr) / trace_prev;
}

double final_reward(double restricted, double scale) { return -scale * restricted; }

namespace {

// Agent i knows entries [0, upto[j]) of agent j's log. Logs are time-ordered,
// so every merge extends a prefix and the union order is canonical.
BeliefState belief_from(const std::vector<AgentState>& agents, const std::vector<std::size_t>& upto,
                        const EpisodeConfig& cfg) {
  std::size_t n = 0;
  for (std::size_t j = 0; j < agents.size(); ++j) n += upto[j];
  Points2d x(static_cast<Eigen::Index>(n), 2);
  Eigen::VectorXd y(static_cast<Eigen::Index>(n));
  Eigen::Index r = 0;
  for (std::size_t j = 0; j < agents.size(); ++j) {
    for (std::size_t k = 0; k < upto[j]; ++k, ++r) {
      x.row(r) = agents[j].log[k].location.transpose();
      y(r) = agents[j].log[k].value;
    }
  }
  BeliefState b(cfg.gp, cfg.resolution);
  b.set_measurements(std::move(x), std::move(y));
  b.refit();
  return b;
}

std::size_t count_until(const std::vector<MeasurementRecord>& log, double t) {
  return static_cast<std::size_t>(
      std::upper_bound(log.begin(), log.end(), t, [](double v, const MeasurementRecord& m) { return v < m.time; }) -
      log.begin());
}

double reward_trace(const BeliefState& b, const EpisodeConfig& cfg) {
  if (cfg.step_reward_full_grid) return b.trace();
  return restricted_trace(b.variance(), high_interest_set(b.mean(), b.variance(), cfg.interest_threshold, cfg.ucb_beta));
}

double interest_trace(const BeliefState& b, const EpisodeConfig& cfg) {
  return restricted_trace(b.variance(), high_interest_set(b.mean(), b.variance(), cfg.interest_threshold, cfg.ucb_beta));
}

void take_measurements(AgentState& a, const Vec2& from, const Vec2& to, double t0, double interval, double& carry,
                       const GroundTruth& world, double noise_std, Rng& noise) {
  const double len = (to - from).norm();
  for (const Vec2& p : points_along({from, to}, interval, carry)) {
    MeasurementRecord r;
    r.location = p;
    r.value = measure(world, p, noise_std, noise);
    r.time = t0 + std::min((p - from).norm(), len);
    r.agent = a.id;
    r.seq = static_cast<int>(a.log.size());
    a.log.push_back(r);
  }
}

struct Motion {
  Vec2 from, to;
  double t0 = 0.0, t1 = 0.0;

  Vec2 at(double t) const {
    if (t >= t1 || t1 <= t0) return to;
    if (t <= t0) return from;
    return from + ((t - t0) / (t1 - t0)) * (to - from);
  }
};

class Episode {
 public:
  Episode(const EpisodeConfig& cfg, const Instance& inst, Rng& rng, const EpisodeHooks& hooks)
      : cfg_(cfg), inst_(inst), hooks_(hooks), base_(rng()) {
    const auto m = static_cast<std::size_t>(cfg.agents);
    agents_.resize(m);
    known_.assign(m, std::vector<std::size_t>(m, 0));
    carry_.assign(m, 0.0);
    for (std::size_t i = 0; i < m; ++i) {
      auto& a = agents_[i];
      a.id = static_cast<int>(i);
      a.position = inst.start;
      a.budget = cfg.budget;
      a.trajectory = {0};
      noise_.push_back(derive_rng(base_, kNoise, i));
    }
    metrics_.reward_sums.assign(m, 0.0);
    metrics_.trajectories.assign(m, {inst.start});
  }

  EpisodeMetrics run() {
    if (cfg_.method.kind == MethodKind::Rrt)
      run_rounds();
    else
      run_events();
    std::vector<std::size_t> all(agents_.size());
    for (std::size_t j = 0; j < agents_.size(); ++j) all[j] = agents_[j].log.size();
    const BeliefState team = belief_from(agents_, all, cfg_);
    metrics_.final_trace = team.trace();
    for (const auto& a : agents_) {
      metrics_.path_lengths.push_back(a.spent);
      metrics_.measurement_counts.push_back(static_cast<int>(a.log.size()));
      metrics_.measurements.insert(metrics_.measurements.end(), a.log.begin(), a.log.end());
    }
    return std::move(metrics_);
  }

 private:
  // Team view at time t: union trace over everything measured so far.
  void record_curve(double t) {
    std::vector<std::size_t> upto(agents_.size());
    double dist = 0.0;
    for (std::size_t j = 0; j < agents_.size(); ++j) {
      upto[j] = count_until(agents_[j].log, t);
      dist += travelled(j, t);
    }
    const double tr = belief_from(agents_, upto, cfg_).trace();
    if (metrics_.trace_curve.empty() || metrics_.trace_curve.back() != std::make_pair(dist, tr))
      metrics_.trace_curve.emplace_back(dist, tr);
  }

  double travelled(std::size_t j, double t) const {
    if (motion_.empty()) return agents_[j].spent;
    const Motion& mv = motion_[j];
    if (t >= mv.t1) return agents_[j].spent;
    return agents_[j].spent - (mv.t1 - std::max(t, mv.t0));
  }

  std::size_t union_size(double t) const {
    std::size_t n = 0;
    for (const auto& a : agents_) n += count_until(a.log, t);
    return n;
  }

  // ---- graph methods: asynchronous event loop ----

  void run_events() {
    const auto m = agents_.size();
    if (inst_.graphs.size() < m) throw std::invalid_argument("run_episode: need one roadmap per agent");
    if (cfg_.method.learned() && !hooks_.policy) throw std::invalid_argument("run_episode: learned method needs policy parameters");
    const int d = hooks_.policy ? hooks_.policy->cfg.d_model : 1;
    const int k_eig = hooks_.policy ? hooks_.policy->cfg.k_eig : 1;
    motion_.resize(m);
    for (std::size_t i = 0; i < m; ++i) {
      const auto& g = inst_.graphs[i];
      if (g.size() == 0 || (g.node(0) - inst_.start).norm() > 1e-12)
        throw std::invalid_argument("run_episode: roadmap node 0 must be the start position");
      motion_[i] = {inst_.start, inst_.start, 0.0, 0.0};
      agents_[i].rec = RecurrentState::zeros(d);
      actions_.push_back(derive_rng(base_, kActions, i));
      intents_.push_back(derive_rng(base_, kIntents, i));
      Eigen::MatrixXd pe = positional_embedding(g, k_eig);
      if (cfg_.flip_positional) {
        Rng pr = derive_rng(base_, kPositional, i);
        pe = flip_signs(pe, pr);
      }
      positional_.push_back(std::move(pe));
    }
    pending_.assign(m, -1);
    prev_trace_.assign(m, 0.0);
    decisions_.assign(m, 0);

    using Event = std::pair<double, int>;
    std::priority_queue<Event, std::vector<Event>, std::greater<>> queue;
    for (std::size_t i = 0; i < m; ++i) queue.emplace(0.0, static_cast<int>(i));
    record_curve(0.0);
    while (!queue.empty()) {
      const auto [t, id] = queue.top();
      queue.pop();
      if (decide(static_cast<std::size_t>(id), t)) queue.emplace(motion_[static_cast<std::size_t>(id)].t1, id);
      record_curve(t);
    }
  }

  // Returns false when the agent halts.
  bool decide(std::size_t i, double t) {
    AgentState& a = agents_[i];
    const WaypointGraph& g = inst_.graphs[i];
    std::vector<Vec2> pos(agents_.size());
    for (std::size_t j = 0; j < agents_.size(); ++j) pos[j] = motion_[j].at(t);
    const auto vis = comm_filter(pos, cfg_.comm_range);

    for (std::size_t j = 0; j < agents_.size(); ++j) {
      if (vis[i][j]) known_[i][j] = std::max(known_[i][j], count_until(agents_[j].log, t));
    }
    const BeliefState belief = belief_from(agents_, known_[i], cfg_);
    DecisionRecord rec;
    rec.agent = a.id;
    rec.time = t;
    for (auto c : known_[i]) rec.known += c;
    rec.union_size = union_size(t);
    rec.trace = belief.trace();
    metrics_.decisions.push_back(rec);

    const double tr = reward_trace(belief, cfg_);
    if (decisions_[i] > 0 && prev_trace_[i] > 0) credit(i, step_reward(prev_trace_[i], tr));
    prev_trace_[i] = tr;

    std::vector<IntentMessage> inbox;
    if (cfg_.method.kind != MethodKind::IntentFree) {
      for (std::size_t j = 0; j < agents_.size(); ++j) {
        if (j != i && vis[i][j] && agents_[j].intent) inbox.push_back(*agents_[j].intent);
      }
    }
    const Eigen::VectorXd levels = fuse_intents(inbox, g.nodes());
    Observation obs = make_observation(g, node_features(augment(g, belief, levels)), positional_[i], a.node, a.budget,
                                       a.spent, cfg_.interest_threshold, a.rec);

    if (std::none_of(obs.allowed.begin(), obs.allowed.end(), [](bool b) { return b; })) {
      credit(i, final_reward(interest_trace(belief, cfg_), cfg_.final_reward_scale));
      if (pending_[i] >= 0) (*hooks_.transitions)[static_cast<std::size_t>(pending_[i])].done = true;
      pending_[i] = -1;
      motion_[i] = {a.position, a.position, t, t};
      return false;
    }

    const MethodKind kind = cfg_.method.kind;
    const bool intent_method = kind == MethodKind::DestinationIntent || kind == MethodKind::TrajectoryIntent ||
                               kind == MethodKind::TrajectoryIntentBest;
    std::optional<SampledTrajectorySet> sampled;
    if (intent_method) {
      RolloutContext ctx;
      ctx.graph = &g;
      ctx.belief = &belief;
      ctx.intent_levels = levels;
      ctx.positional = positional_[i];
      ctx.current = a.node;
      ctx.budget = a.budget;
      ctx.spent = a.spent;
      ctx.since_measurement = carry_[i];
      ctx.interest_threshold = cfg_.interest_threshold;
      ctx.measurement_interval = cfg_.measurement_interval;
      ctx.rec = a.rec;
      const PolicyParams& params = *hooks_.policy;
      sampled = sample_trajectories([&params](const Observation& o) { return evaluate(o, params); }, ctx,
                                    cfg_.method.paths, cfg_.method.steps, intents_[i]);
      const IntentBody body = kind == MethodKind::DestinationIntent ? fit_destination_intent(*sampled)
                                                                    : fit_trajectory_intent(*sampled);
      if (cfg_.broadcast_intent) {
        IntentMessage msg;
        msg.agent_id = static_cast<std::uint32_t>(a.id);
        msg.step = static_cast<std::uint32_t>(decisions_[i]);
        msg.mean = body.mean;
        msg.cov = body.cov;
        a.intent = msg;
      }
    }

    PolicyOutput po;
    if (kind == MethodKind::Random) {
      po.probs = random_policy(obs);
      po.next = a.rec;
    } else if (kind == MethodKind::IntentFree) {
      po = intent_free_policy_step(*hooks_.policy, obs);
    } else {
      po = evaluate(obs, *hooks_.policy);
    }

    int action = -1;
    if (kind == MethodKind::TrajectoryIntentBest) {
      double best = -std::numeric_limits<double>::infinity();
      for (const auto& tj : sampled->trajectories) {
        if (tj.nodes.empty() || !(tj.trace_reduction > best)) continue;
        best = tj.trace_reduction;
        const auto it = std::find(obs.neighbors.begin(), obs.neighbors.end(), tj.nodes.front());
        action = static_cast<int>(it - obs.neighbors.begin());
      }
    }
    if (action < 0) action = cfg_.greedy && kind != MethodKind::Random ? greedy_action(po.probs)
                                                                      : sample_action(po.probs, actions_[i]);

    if (hooks_.transitions && cfg_.method.learned()) {
      Transition tr_rec;
      tr_rec.obs = obs;
      tr_rec.action = action;
      tr_rec.log_prob = std::log(po.probs(action));
      tr_rec.value = po.value;
      tr_rec.agent = a.id;
      tr_rec.episode = hooks_.episode_index;
      hooks_.transitions->push_back(std::move(tr_rec));
      pending_[i] = static_cast<int>(hooks_.transitions->size()) - 1;
    }
    a.rec = po.next;
    ++decisions_[i];

    const Edge& e = g.neighbors(a.node)[static_cast<std::size_t>(action)];
    const Vec2 from = g.node(a.node);
    const Vec2 to = g.node(e.to);
    take_measurements(a, from, to, t, cfg_.measurement_interval, carry_[i], inst_.world, cfg_.noise_std, noise_[i]);
    a.spent += e.length;
    a.node = e.to;
    a.position = to;
    a.trajectory.push_back(e.to);
    metrics_.trajectories[i].push_back(to);
    motion_[i] = {from, to, t, t + e.length};
    return true;
  }

  void credit(std::size_t i, double r) {
    metrics_.reward_sums[i] += r;
    if (pending_[i] >= 0) (*hooks_.transitions)[static_cast<std::size_t>(pending_[i])].reward += r;
  }

  // ---- RRT: synchronous SGA rounds ----

  void run_rounds() {
    Rng plan = derive_rng(base_, kPlanner);
    const double lo = cfg_.method.horizon_lo, hi = cfg_.method.horizon_hi;
    const auto m = agents_.size();
    record_curve(0.0);
    for (int round = 0;; ++round) {
      bool any = false;
      for (const auto& a : agents_) any = any || a.remaining() > kBudgetEps;
      if (!any) break;
      const double t = round * cfg_.measurement_interval;
      std::vector<Vec2> pos(m);
      for (std::size_t j = 0; j < m; ++j) pos[j] = agents_[j].position;
      const auto vis = comm_filter(pos, cfg_.comm_range);

      std::vector<BeliefState> beliefs;
      beliefs.reserve(m);
      for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = 0; j < m; ++j) {
          if (vis[i][j]) known_[i][j] = agents_[j].log.size();
        }
        beliefs.push_back(belief_from(agents_, known_[i], cfg_));
        if (agents_[i].remaining() > kBudgetEps) {
          DecisionRecord rec;
          rec.agent = static_cast<int>(i);
          rec.time = t;
          for (auto c : known_[i]) rec.known += c;
          rec.union_size = union_size(t);
          rec.trace = beliefs.back().trace();
          metrics_.decisions.push_back(rec);
        }
      }
      std::vector<SgaRoundInput> in(m);
      for (std::size_t i = 0; i < m; ++i) {
        in[i].position = agents_[i].position;
        in[i].remaining = std::max(0.0, agents_[i].remaining());
        in[i].belief = &beliefs[i];
      }
      const auto out = sga_round(in, vis, lo, hi, cfg_.rrt, plan, cfg_.measurement_interval);
      for (std::size_t i = 0; i < m; ++i) {
        if (out[i].executed.size() < 2) {
          if (in[i].remaining > kBudgetEps) agents_[i].spent = agents_[i].budget;  // nothing left to plan
          continue;
        }
        AgentState& a = agents_[i];
        const auto& path = out[i].executed;
        double seg_t = t;
        for (std::size_t s = 1; s < path.size(); ++s) {
          take_measurements(a, path[s - 1], path[s], seg_t, cfg_.measurement_interval, carry_[i], inst_.world,
                            cfg_.noise_std, noise_[i]);
          seg_t += (path[s] - path[s - 1]).norm();
          metrics_.trajectories[i].push_back(path[s]);
        }
        a.spent = in[i].remaining - out[i].executed_length <= kBudgetEps ? a.budget : a.spent + out[i].executed_length;
        a.position = path.back();
      }
      record_curve(std::numeric_limits<double>::infinity());
    }
  }

  const EpisodeConfig& cfg_;
  const Instance& inst_;
  EpisodeHooks hooks_;
  std::uint64_t base_;
  std::vector<AgentState> agents_;
  std::vector<std::vector<std::size_t>> known_;
  std::vector<double> carry_;
  std::vector<Rng> noise_, actions_, intents_;
  std::vector<Eigen::MatrixXd> positional_;
  std::vector<Motion> motion_;
  std::vector<int> pending_;
  std::vector<double> prev_trace_;
  std::vector<int> decisions_;
  EpisodeMetrics metrics_;
};

}  // namespace

EpisodeMetrics run_episode(const EpisodeConfig& cfg, const Instance& instance, Rng& rng, const EpisodeHooks& hooks) {
  cfg.validate();
  return Episode(cfg, instance, rng, hooks).run();
}

void write_trajectories_csv(std::ostream& os, const EpisodeMetrics& m) {
  os << "agent,index,x,y\n";
  for (std::size_t a = 0; a < m.trajectories.size(); ++a) {
    for (std::size_t k = 0; k < m.trajectories[a].size(); ++k)
      os << a << ',' << k << ',' << m.trajectories[a][k].x() << ',' << m.trajectories[a][k].y() << '\n';
  }
}

}  // namespace maipp
