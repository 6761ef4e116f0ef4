#include <maipp/config.hpp>

#include <json.hpp>

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

namespace maipp {

namespace {

using nlohmann::json;

// Reads keys from one JSON object and rejects any it did not consume.
class Section {
 public:
  Section(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw std::invalid_argument("config: '" + path_ + "' must be an object");
  }

  template <typename T>
  void get(const char* key, T& out) {
    seen_.insert(key);
    if (!j_.contains(key)) return;
    try {
      out = j_.at(key).get<T>();
    } catch (const json::exception& e) {
      throw std::invalid_argument("config: bad value for '" + path_ + "." + key + "': " + e.what());
    }
  }

  void range(const char* key, double& out) {
    seen_.insert(key);
    if (!j_.contains(key)) return;
    out = parse_range(j_.at(key), path_ + "." + key);
  }

  std::optional<Section> child(const char* key) {
    seen_.insert(key);
    if (!j_.contains(key)) return std::nullopt;
    return Section(j_.at(key), path_.empty() ? key : path_ + "." + key);
  }

  const json& raw(const char* key) {
    seen_.insert(key);
    return j_.at(key);
  }
  bool has(const char* key) const { return j_.contains(key); }

  void finish() const {
    for (const auto& [k, v] : j_.items()) {
      if (!seen_.count(k)) throw std::invalid_argument("config: unknown key '" + (path_.empty() ? k : path_ + "." + k) + "'");
    }
  }

  static double parse_range(const json& v, const std::string& where) {
    if (v.is_null()) return kInfiniteRange;
    if (v.is_string() && (v == "inf" || v == "global")) return kInfiniteRange;
    if (v.is_number()) return v.get<double>();
    throw std::invalid_argument("config: '" + where + "' must be a number, \"inf\" or null");
  }

 private:
  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

}  // namespace

std::string format_range(double range) {
  if (std::isinf(range)) return "inf";
  std::ostringstream os;
  os << range;
  return os.str();
}

void ExperimentConfig::validate() const {
  field.validate();
  episode.validate();
  policy.validate();
  if (instances < 1 || trials < 1) throw std::invalid_argument("config: instances and trials must be >= 1");
  if (graph.nodes <= graph.neighbors || graph.neighbors < 1)
    throw std::invalid_argument("config: graph needs nodes > neighbors >= 1");
  for (double b : budgets)
    if (!(b > 0)) throw std::invalid_argument("config: budgets must be > 0");
  for (double r : comm_ranges)
    if (!(r > 0)) throw std::invalid_argument("config: comm ranges must be > 0");
  if (training.updates < 1 || training.episodes_per_update < 1)
    throw std::invalid_argument("config: training updates and episodes must be >= 1");
}

InstanceConfig ExperimentConfig::instance_config() const {
  InstanceConfig ic;
  ic.field = field;
  ic.roadmap = graph;
  ic.agents = episode.agents;
  ic.shared_graph = shared_graph;
  return ic;
}

ExperimentConfig parse_experiment(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw std::invalid_argument(std::string("config: malformed JSON: ") + e.what());
  }
  ExperimentConfig c;
  Section root(j, "");
  root.get("seed", c.seed);
  root.get("instances", c.instances);
  root.get("trials", c.trials);
  root.get("record_wall_time", c.record_wall_time);
  root.get("results_file", c.results_file);
  root.get("summary_file", c.summary_file);
  if (root.has("checkpoint")) c.checkpoint = root.raw("checkpoint").get<std::string>();
  root.get("budgets", c.budgets);
  if (root.has("comm_ranges")) {
    for (const auto& v : root.raw("comm_ranges")) c.comm_ranges.push_back(Section::parse_range(v, "comm_ranges"));
  }
  if (root.has("methods")) {
    for (const auto& v : root.raw("methods")) c.methods.push_back(MethodSpec::parse(v.get<std::string>()));
  }

  if (auto s = root.child("field")) {
    s->get("min_components", c.field.min_components);
    s->get("max_components", c.field.max_components);
    s->get("min_std", c.field.min_std);
    s->get("max_std", c.field.max_std);
    s->get("min_weight", c.field.min_weight);
    s->get("max_weight", c.field.max_weight);
    s->get("grid_resolution", c.field.grid_resolution);
    s->finish();
  }
  if (auto s = root.child("graph")) {
    s->get("nodes", c.graph.nodes);
    s->get("neighbors", c.graph.neighbors);
    s->get("shared", c.shared_graph);
    s->finish();
  }
  if (auto s = root.child("episode")) {
    auto& e = c.episode;
    s->get("agents", e.agents);
    s->get("budget", e.budget);
    s->get("measurement_interval", e.measurement_interval);
    s->range("comm_range", e.comm_range);
    s->get("interest_threshold", e.interest_threshold);
    s->get("ucb_beta", e.ucb_beta);
    s->get("noise_std", e.noise_std);
    s->get("resolution", e.resolution);
    s->get("lengthscale", e.gp.lengthscale);
    s->get("signal_variance", e.gp.signal_variance);
    s->get("noise_variance", e.gp.noise_variance);
    s->get("broadcast_intent", e.broadcast_intent);
    s->get("greedy", e.greedy);
    s->get("final_reward_scale", e.final_reward_scale);
    s->get("step_reward_full_grid", e.step_reward_full_grid);
    if (s->has("method")) e.method = MethodSpec::parse(s->raw("method").get<std::string>());
    s->finish();
  }
  if (auto s = root.child("rrt")) {
    s->get("step", c.episode.rrt.step);
    s->get("min_candidates", c.episode.rrt.min_candidates);
    s->get("max_candidates", c.episode.rrt.max_candidates);
    s->get("iterations", c.episode.rrt.iterations);
    s->get("max_iterations", c.episode.rrt.max_iterations);
    s->finish();
  }
  if (auto s = root.child("policy")) {
    s->get("d_model", c.policy.d_model);
    s->get("layers", c.policy.layers);
    s->get("k_eig", c.policy.k_eig);
    s->get("ffn_hidden", c.policy.ffn_hidden);
    s->finish();
  }
  if (auto s = root.child("train")) {
    auto& t = c.train;
    s->get("learning_rate", t.learning_rate);
    s->get("lr_decay", t.lr_decay);
    s->get("decay_every", t.decay_every);
    s->get("batch_size", t.batch_size);
    s->get("epochs", t.epochs);
    s->get("clip", t.clip);
    s->get("gamma", t.gamma);
    s->get("gae_lambda", t.gae_lambda);
    s->get("entropy_coef", t.entropy_coef);
    s->get("value_coef", t.value_coef);
    s->get("normalize_advantages", t.normalize_advantages);
    s->get("updates", c.training.updates);
    s->get("episodes_per_update", c.training.episodes_per_update);
    s->finish();
    t.validate();
  }
  root.finish();
  c.validate();
  return c;
}

ExperimentConfig load_experiment(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_experiment(ss.str());
}

}  // namespace maipp
