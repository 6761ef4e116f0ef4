// maipp: world generation, single episodes, benchmark grids, training and plots.

#include <maipp/benchmark.hpp>
#include <maipp/config.hpp>
#include <maipp/plot.hpp>
#include <maipp/trainer.hpp>

#include <CLI11.hpp>
#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>

namespace fs = std::filesystem;
using namespace maipp;

namespace {

struct Common {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out = ".";
  int jobs = 1;
  std::string checkpoint;
};

ExperimentConfig load(const Common& c) {
  ExperimentConfig cfg = c.config.empty() ? ExperimentConfig{} : load_experiment(c.config);
  if (c.seed) cfg.seed = *c.seed;
  if (!c.checkpoint.empty()) cfg.checkpoint = c.checkpoint;
  return cfg;
}

std::ofstream open_out(const fs::path& p) {
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  std::ofstream os(p);
  if (!os) throw std::runtime_error("cannot write '" + p.string() + "'");
  return os;
}

std::optional<PolicyParams> policy_for(const ExperimentConfig& cfg, const std::vector<MethodSpec>& methods) {
  const bool learned = std::any_of(methods.begin(), methods.end(), [](const MethodSpec& m) { return m.learned(); });
  if (!learned) return std::nullopt;
  if (!cfg.checkpoint) throw std::runtime_error("learned method requested but no --checkpoint given");
  return load_checkpoint(*cfg.checkpoint);
}

void gen_world(const Common& c) {
  const ExperimentConfig cfg = load(c);
  const Instance inst = make_instance(derive_rng(cfg.seed, 100, 0)(), cfg.instance_config());
  const fs::path out(c.out);
  nlohmann::json j;
  j["start"] = {inst.start.x(), inst.start.y()};
  j["normalizer"] = inst.world.normalizer();
  for (const auto& comp : inst.world.components())
    j["components"].push_back({{"mean", {comp.mean.x(), comp.mean.y()}}, {"std", comp.std}, {"weight", comp.weight}});
  open_out(out / "world.json") << j.dump(2) << '\n';
  auto field = open_out(out / "field.csv");
  write_grid_csv(field, rasterize(inst.world, cfg.field.grid_resolution), cfg.field.grid_resolution);
  for (std::size_t i = 0; i < inst.graphs.size(); ++i) {
    auto nodes = open_out(out / ("graph" + std::to_string(i) + "_nodes.csv"));
    write_nodes_csv(nodes, inst.graphs[i]);
    auto edges = open_out(out / ("graph" + std::to_string(i) + "_edges.csv"));
    write_edges_csv(edges, inst.graphs[i]);
  }
  std::cout << "wrote world (" << inst.world.components().size() << " components) to " << out << '\n';
}

void run_one(const Common& c) {
  const ExperimentConfig cfg = load(c);
  EpisodeConfig ec = cfg.episode;
  if (!cfg.methods.empty()) ec.method = cfg.methods.front();
  const auto policy = policy_for(cfg, {ec.method});
  const Instance inst = make_instance(derive_rng(cfg.seed, 100, 0)(), cfg.instance_config());
  Rng rng = derive_rng(cfg.seed, 200, 0);
  EpisodeHooks hooks;
  hooks.policy = policy ? &*policy : nullptr;
  const EpisodeMetrics m = run_episode(ec, inst, rng, hooks);

  BeliefState team(ec.gp, ec.resolution);
  for (const auto& r : m.measurements) team.add(r.location, r.value);
  team.refit();
  const fs::path out(c.out);
  auto traj = open_out(out / "trajectories.csv");
  write_trajectories_csv(traj, m);
  auto mean = open_out(out / "belief_mean.csv");
  write_grid_csv(mean, team.mean(), ec.resolution);
  auto sd = open_out(out / "belief_std.csv");
  write_grid_csv(sd, team.variance().cwiseMax(0.0).cwiseSqrt(), ec.resolution);
  auto curve = open_out(out / "trace_curve.csv");
  write_curve_csv(curve, m.trace_curve);
  nlohmann::json j;
  j["method"] = ec.method.label();
  j["final_trace"] = m.final_trace;
  j["reward_sums"] = m.reward_sums;
  j["path_lengths"] = m.path_lengths;
  j["measurement_counts"] = m.measurement_counts;
  open_out(out / "metrics.json") << j.dump(2) << '\n';
  std::cout << ec.method.label() << ": final trace " << m.final_trace << '\n';
}

void bench(const Common& c) {
  const ExperimentConfig cfg = load(c);
  const auto policy = policy_for(cfg, cfg.methods);
  const auto rows = run_benchmark(cfg, policy ? &*policy : nullptr, c.jobs);
  const fs::path out(c.out);
  auto res = open_out(out / cfg.results_file);
  write_results_csv(res, rows);
  const auto summary = summarize(rows);
  auto sum = open_out(out / cfg.summary_file);
  write_summary_csv(sum, summary);
  for (const auto& s : summary)
    std::cout << s.method << "  m=" << s.m << " B=" << s.budget << " range=" << format_range(s.comm_range)
              << "  mean=" << s.mean << " std=" << s.std << " (n=" << s.count << ")\n";
}

void train_cmd(const Common& c) {
  ExperimentConfig cfg = load(c);
  RolloutConfig rc{cfg.episode, cfg.instance_config()};
  if (!rc.episode.method.learned()) rc.episode.method = MethodSpec::parse("TI(8,5)");
  rc.episode.flip_positional = true;
  Rng rng = derive_rng(cfg.seed, 300);
  PolicyParams params = init_policy(cfg.policy, rng);
  TrainingRun run = cfg.training;
  run.jobs = c.jobs;
  const fs::path out(c.out);
  auto log = open_out(out / "train_log.csv");
  write_train_log_header(log);
  train(params, rc, cfg.train, run, rng, [&](const TrainLogRow& row) {
    write_train_log_row(log, row);
    log.flush();
    std::cout << "update " << row.step << "  return " << row.mean_return << "  trace " << row.mean_trace << '\n';
  });
  const fs::path ckpt = c.checkpoint.empty() ? out / "policy.ckpt" : fs::path(c.checkpoint);
  if (ckpt.has_parent_path()) fs::create_directories(ckpt.parent_path());
  save_checkpoint(ckpt.string(), params);
  std::cout << "saved " << ckpt << '\n';
}

void plot_cmd(const Common& c, const std::string& input, const std::string& kind) {
  std::ifstream in(input);
  if (!in) throw std::runtime_error("cannot open '" + input + "'");
  std::string svg;
  if (kind == "trajectories") {
    svg = svg_trajectories(read_trajectories_csv(in), "trajectories");
  } else if (kind == "belief" || kind == "std") {
    int res = 0;
    const Eigen::VectorXd v = read_grid_csv(in, res);
    svg = svg_heatmap(v, res, kind == "belief" ? "belief mean" : "belief std");
  } else if (kind == "trace-curve") {
    svg = svg_trace_curve(read_curve_csv(in), "trace vs distance");
  } else {
    throw std::invalid_argument("unknown plot kind '" + kind + "'");
  }
  const fs::path out = fs::path(c.out) / (kind + ".svg");
  open_out(out) << svg;
  std::cout << "wrote " << out << '\n';
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multi-agent informative path planning toolkit"};
  app.require_subcommand(1);
  Common c;
  std::string input, kind = "trajectories";
  auto add_common = [&c](CLI::App* sub) {
    sub->add_option("--config", c.config, "experiment config (JSON)")->check(CLI::ExistingFile);
    sub->add_option("--seed", c.seed, "override the config seed");
    sub->add_option("--out", c.out, "output directory");
    sub->add_option("--jobs", c.jobs, "worker threads")->check(CLI::PositiveNumber);
    sub->add_option("--checkpoint", c.checkpoint, "policy checkpoint");
  };
  auto* gw = app.add_subcommand("gen-world", "generate a world and roadmaps");
  auto* run = app.add_subcommand("run", "run one episode and dump it");
  auto* bn = app.add_subcommand("bench", "run the benchmark grid");
  auto* tr = app.add_subcommand("train", "train the policy with PPO");
  auto* pl = app.add_subcommand("plot", "render an episode dump as SVG");
  for (auto* s : {gw, run, bn, tr, pl}) add_common(s);
  pl->add_option("--input", input, "dump file (trajectories.csv, belief_mean.csv, ...)")->required();
  pl->add_option("--kind", kind, "trajectories | belief | std | trace-curve")
      ->check(CLI::IsMember({"trajectories", "belief", "std", "trace-curve"}));

  CLI11_PARSE(app, argc, argv);
  try {
    if (*gw) gen_world(c);
    if (*run) run_one(c);
    if (*bn) bench(c);
    if (*tr) train_cmd(c);
    if (*pl) plot_cmd(c, input, kind);
  } catch (const std::exception& e) {
    std::cerr << "maipp: error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
