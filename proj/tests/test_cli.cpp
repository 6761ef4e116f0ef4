#include <maipp/benchmark.hpp>
#include <maipp/plot.hpp>

#include <doctest.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

using namespace maipp;
namespace fs = std::filesystem;

namespace {

std::size_t count_of(const std::string& s, const std::string& needle) {
  std::size_t n = 0;
  for (auto p = s.find(needle); p != std::string::npos; p = s.find(needle, p + needle.size())) ++n;
  return n;
}

const char* const kTinyConfig = R"json({
  "seed": 3,
  "instances": 2,
  "trials": 2,
  "record_wall_time": false,
  "methods": ["random", "RRT(0.3,0.4)"],
  "budgets": [1.0],
  "comm_ranges": ["inf", 0.5],
  "graph": {"nodes": 30, "neighbors": 5},
  "episode": {"agents": 2, "resolution": 15}
})json";

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() / ("maipp_test_" + std::to_string(std::random_device{}()));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

void write_file(const fs::path& p, const std::string& text) { std::ofstream(p) << text; }

std::string read_file(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

int run_cli(const std::string& args, const fs::path& log) {
  const std::string cmd = std::string(MAIPP_CLI) + " " + args + " > " + log.string() + " 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

}  // namespace

TEST_CASE("experiment configs parse with defaults and overrides") {
  const ExperimentConfig c = parse_experiment(kTinyConfig);
  CHECK(c.seed == 3);
  CHECK(c.methods.size() == 2);
  CHECK(c.methods[1].label() == "RRT(0.3,0.4)");
  CHECK(std::isinf(c.comm_ranges[0]));
  CHECK(c.comm_ranges[1] == 0.5);
  CHECK(c.graph.nodes == 30);
  CHECK(c.episode.agents == 2);
  CHECK(c.episode.budget == 3.0);
  CHECK(c.episode.gp.lengthscale == 0.45);
  const ExperimentConfig d = parse_experiment("{}");
  CHECK(d.instances == 30);
  CHECK(d.trials == 10);
  CHECK(std::isinf(d.episode.comm_range));
  CHECK(parse_experiment(R"({"comm_ranges": [null, "global"]})").comm_ranges.size() == 2);
}

TEST_CASE("bad configs are rejected with a diagnostic") {
  CHECK_THROWS_AS(parse_experiment("{"), std::invalid_argument);
  CHECK_THROWS_AS(parse_experiment(R"({"sede": 1})"), std::invalid_argument);
  CHECK_THROWS_AS(parse_experiment(R"({"episode": {"budjet": 1}})"), std::invalid_argument);
  CHECK_THROWS_AS(parse_experiment(R"({"episode": {"budget": -1}})"), std::invalid_argument);
  CHECK_THROWS_AS(parse_experiment(R"({"episode": {"budget": "three"}})"), std::invalid_argument);
  CHECK_THROWS_AS(parse_experiment(R"json({"methods": ["DI(8,3)*"]})json"), std::invalid_argument);
  CHECK_THROWS_AS(parse_experiment(R"({"comm_ranges": ["far"]})"), std::invalid_argument);
  CHECK_THROWS_AS(parse_experiment(R"({"train": {"clip": 2}})"), std::invalid_argument);
  CHECK_THROWS_AS(parse_experiment(R"({"graph": {"nodes": 5, "neighbors": 5}})"), std::invalid_argument);
  CHECK_THROWS_AS(load_experiment("/nonexistent/config.json"), std::runtime_error);
  try {
    parse_experiment(R"({"episode": {"budjet": 1}})");
  } catch (const std::invalid_argument& e) {
    CHECK(std::string(e.what()).find("episode.budjet") != std::string::npos);
  }
}

TEST_CASE("a single benchmark row reduces the prior trace") {
  ExperimentConfig c = parse_experiment(kTinyConfig);
  c.methods = {MethodSpec::parse("random")};
  c.comm_ranges.clear();
  c.instances = 1;
  c.trials = 1;
  const auto rows = run_benchmark(c, nullptr);
  REQUIRE(rows.size() == 1);
  CHECK(rows[0].trace_final < 225.0);  // 15 x 15 prior
  CHECK(rows[0].trace_final > 0.0);
  CHECK(rows[0].wall_ms == 0.0);
}

TEST_CASE("benchmark grid order, pairing and determinism") {
  const ExperimentConfig c = parse_experiment(kTinyConfig);
  const auto a = run_benchmark(c, nullptr, 1);
  const auto b = run_benchmark(c, nullptr, 3);
  REQUIRE(a.size() == 2 * 2 * 2 * 2);
  std::ostringstream sa, sb;
  write_results_csv(sa, a);
  write_results_csv(sb, b);
  CHECK(sa.str() == sb.str());
  CHECK(a[0].method == "random");
  CHECK(std::isinf(a[0].comm_range));
  CHECK(a[4].method == "RRT(0.3,0.4)");
  CHECK(a[8].comm_range == 0.5);
  CHECK(a[1].trial == 1);
  CHECK(a[2].instance == 1);
  ExperimentConfig learned = c;
  learned.methods = {MethodSpec::parse("TI(2,2)")};
  CHECK_THROWS_AS(run_benchmark(learned, nullptr), std::invalid_argument);
}

TEST_CASE("results csv round-trips") {
  std::vector<ResultRow> rows{{0, 1, "RRT(0.3,0.4)", 3, 3.0, kInfiniteRange, 25.5, 1.25},
                              {2, 0, "TI(8,5)*", 3, 2.0, 0.3, 12.125, 0.0}};
  std::ostringstream os;
  write_results_csv(os, rows);
  CHECK(os.str().rfind(std::string(kResultsHeader) + "\n", 0) == 0);
  CHECK(os.str().find("0,1,\"RRT(0.3,0.4)\",3,3,inf,25.5,1.250\n") != std::string::npos);
  std::istringstream is(os.str());
  const auto back = read_results_csv(is);
  REQUIRE(back.size() == 2);
  CHECK(back[1].method == "TI(8,5)*");
  CHECK(back[1].comm_range == 0.3);
  CHECK(std::isinf(back[0].comm_range));
  CHECK(back[0].trace_final == 25.5);
  std::istringstream bad("nope\n");
  CHECK_THROWS_AS(read_results_csv(bad), std::invalid_argument);
}

TEST_CASE("summary aggregates by configuration") {
  std::vector<ResultRow> rows;
  const double vals[] = {1.0, 2.0, 4.0, 10.0, 20.0};
  for (int k = 0; k < 3; ++k) rows.push_back({0, k, "random", 3, 3.0, kInfiniteRange, vals[k], 0.0});
  for (int k = 3; k < 5; ++k) rows.push_back({0, k, "random", 3, 2.0, kInfiniteRange, vals[k], 0.0});
  const auto s = summarize(rows);
  REQUIRE(s.size() == 2);
  CHECK(s[0].count == 3);
  CHECK(s[0].mean == doctest::Approx(7.0 / 3.0));
  // Population standard deviation.
  const double m = 7.0 / 3.0;
  CHECK(s[0].std == doctest::Approx(std::sqrt(((1 - m) * (1 - m) + (2 - m) * (2 - m) + (4 - m) * (4 - m)) / 3.0)));
  CHECK(s[1].budget == 2.0);
  CHECK(s[1].mean == 15.0);
  CHECK(s[1].std == 5.0);
  std::ostringstream os;
  write_summary_csv(os, s);
  CHECK(os.str().rfind("method,m,B,comm_range,n,mean,std\n\"random\",3,3,inf,3,", 0) == 0);
}

TEST_CASE("svg renderers") {
  const std::string empty = svg_trajectories({}, "t");
  CHECK(empty.find("<svg") != std::string::npos);
  CHECK(empty.find("</svg>") != std::string::npos);
  CHECK(empty.find("class=\"axes\"") != std::string::npos);
  CHECK(count_of(empty, "class=\"agent\"") == 0);
  const std::vector<Polyline> three{{Vec2(0.1, 0.1), Vec2(0.2, 0.3)}, {Vec2(0.5, 0.5)}, {Vec2(0.9, 0.1), Vec2(0.8, 0.2)}};
  CHECK(count_of(svg_trajectories(three), "<polyline class=\"agent\"") == 3);
  const std::string heat = svg_heatmap(Eigen::VectorXd::LinSpaced(900, 0.0, 1.0), 30, "mean");
  CHECK(count_of(heat, "<rect class=\"cell\"") == 900);
  CHECK_THROWS_AS(svg_heatmap(Eigen::VectorXd::Zero(10), 3), std::invalid_argument);
  const std::string curve = svg_trace_curve({{0.0, 900.0}, {1.0, 500.0}, {2.0, 300.0}});
  CHECK(count_of(curve, "<polyline class=\"trace\"") == 1);
  CHECK(svg_trajectories({}, "a<b").find("a&lt;b") != std::string::npos);
}

TEST_CASE("episode dump readers") {
  std::istringstream traj("agent,index,x,y\n0,0,0.5,0.5\n0,1,0.25,0.5\n1,0,0.5,0.5\n");
  const auto polys = read_trajectories_csv(traj);
  REQUIRE(polys.size() == 2);
  CHECK(polys[0].size() == 2);
  CHECK(polys[0][1] == Vec2(0.25, 0.5));
  std::istringstream grid("1,2\n3,4\n");
  int res = 0;
  const Eigen::VectorXd g = read_grid_csv(grid, res);
  CHECK(res == 2);
  CHECK(g(2) == 3.0);
  std::ostringstream curve_out;
  write_curve_csv(curve_out, {{0.0, 900.0}, {0.5, 850.25}});
  std::istringstream curve_in(curve_out.str());
  const auto curve = read_curve_csv(curve_in);
  REQUIRE(curve.size() == 2);
  CHECK(curve[1].second == 850.25);

  std::istringstream no_header("0,0,0.5,0.5\n");
  CHECK_THROWS_AS(read_trajectories_csv(no_header), std::invalid_argument);
  std::istringstream short_row("agent,index,x,y\n0,0,0.5\n");
  CHECK_THROWS_AS(read_trajectories_csv(short_row), std::invalid_argument);
  std::istringstream ragged("1,2\n3\n");
  CHECK_THROWS_AS(read_grid_csv(ragged, res), std::invalid_argument);
  std::istringstream rect("1,2,3\n4,5,6\n");
  CHECK_THROWS_AS(read_grid_csv(rect, res), std::invalid_argument);
  std::istringstream nan_cell("1,x\n3,4\n");
  CHECK_THROWS_AS(read_grid_csv(nan_cell, res), std::invalid_argument);
  std::istringstream bad_curve("distance,trace\n1\n");
  CHECK_THROWS_AS(read_curve_csv(bad_curve), std::invalid_argument);
}

TEST_CASE("command line subcommands and exit codes") {
  TempDir tmp;
  const fs::path cfg = tmp.path / "tiny.json";
  write_file(cfg, kTinyConfig);
  const fs::path log = tmp.path / "log.txt";
  const std::string common = " --config " + cfg.string() + " --out " + (tmp.path / "out").string();

  CHECK(run_cli("gen-world" + common, log) == 0);
  CHECK(fs::exists(tmp.path / "out" / "world.json"));
  CHECK(fs::exists(tmp.path / "out" / "graph1_edges.csv"));

  CHECK(run_cli("run" + common + " --seed 5", log) == 0);
  for (const char* f : {"trajectories.csv", "belief_mean.csv", "belief_std.csv", "trace_curve.csv", "metrics.json"})
    CHECK(fs::exists(tmp.path / "out" / f));

  CHECK(run_cli("bench" + common + " --jobs 2", log) == 0);
  const std::string first = read_file(tmp.path / "out" / "results.csv");
  CHECK(run_cli("bench" + common, log) == 0);
  CHECK(read_file(tmp.path / "out" / "results.csv") == first);
  CHECK(count_of(first, "\n") == 17);

  for (const char* kind : {"trajectories", "belief", "std", "trace-curve"}) {
    const std::string input = std::string(kind) == "trajectories" ? "trajectories.csv"
                              : std::string(kind) == "trace-curve" ? "trace_curve.csv"
                              : std::string(kind) == "belief"      ? "belief_mean.csv"
                                                                   : "belief_std.csv";
    CHECK(run_cli("plot" + common + " --kind " + kind + " --input " + (tmp.path / "out" / input).string(), log) == 0);
    CHECK(fs::exists(tmp.path / "out" / (std::string(kind) + ".svg")));
  }

  // Failures: unknown subcommand, missing file, bad config, learned method without a checkpoint.
  CHECK(run_cli("frobnicate", log) != 0);
  CHECK(run_cli("run --config /nonexistent.json", log) != 0);
  write_file(tmp.path / "bad.json", R"({"episode": {"budjet": 2}})");
  CHECK(run_cli("run --config " + (tmp.path / "bad.json").string() + " --out " + tmp.path.string(), log) != 0);
  CHECK(read_file(log).find("maipp: error:") != std::string::npos);
  write_file(tmp.path / "learned.json", R"json({"methods": ["TI(8,5)"], "instances": 1, "trials": 1})json");
  CHECK(run_cli("bench --config " + (tmp.path / "learned.json").string() + " --out " + tmp.path.string(), log) != 0);
  write_file(tmp.path / "garbage.csv", "not,a,grid\n1\n");
  CHECK(run_cli("plot --kind belief --input " + (tmp.path / "garbage.csv").string() + " --out " + tmp.path.string(),
                log) != 0);
}
