#include <maipp/benchmark.hpp>
#include <maipp/parallel.hpp>

#include <chrono>
#include <cmath>
#include <iomanip>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>

namespace maipp {

std::vector<ResultRow> run_benchmark(const ExperimentConfig& cfg, const PolicyParams* policy, int jobs) {
  cfg.validate();
  if (cfg.methods.empty()) throw std::invalid_argument("benchmark: no methods listed");
  for (const auto& m : cfg.methods) {
    if (m.learned() && !policy) throw std::invalid_argument("benchmark: method " + m.label() + " needs a checkpoint");
  }
  const std::vector<double> budgets = cfg.budgets.empty() ? std::vector<double>{cfg.episode.budget} : cfg.budgets;
  const std::vector<double> ranges =
      cfg.comm_ranges.empty() ? std::vector<double>{cfg.episode.comm_range} : cfg.comm_ranges;
  const InstanceConfig ic = cfg.instance_config();
  std::vector<Instance> instances;
  for (int i = 0; i < cfg.instances; ++i) instances.push_back(make_instance(derive_rng(cfg.seed, 100, i)(), ic));

  struct Job {
    double budget, range;
    MethodSpec method;
    int instance, trial;
  };
  std::vector<Job> grid;
  for (double b : budgets)
    for (double r : ranges)
      for (const auto& m : cfg.methods)
        for (int i = 0; i < cfg.instances; ++i)
          for (int t = 0; t < cfg.trials; ++t) grid.push_back({b, r, m, i, t});

  std::vector<ResultRow> rows(grid.size());
  parallel_for(grid.size(), jobs, [&](std::size_t k) {
    const Job& job = grid[k];
    EpisodeConfig ec = cfg.episode;
    ec.budget = job.budget;
    ec.comm_range = job.range;
    ec.method = job.method;
    Rng ep = derive_rng(cfg.seed, 200 + static_cast<std::uint64_t>(job.instance), static_cast<std::uint64_t>(job.trial));
    EpisodeHooks hooks;
    hooks.policy = policy;
    const auto t0 = std::chrono::steady_clock::now();
    const EpisodeMetrics m = run_episode(ec, instances[static_cast<std::size_t>(job.instance)], ep, hooks);
    const auto t1 = std::chrono::steady_clock::now();
    ResultRow& row = rows[k];
    row.instance = job.instance;
    row.trial = job.trial;
    row.method = job.method.label();
    row.m = ec.agents;
    row.budget = job.budget;
    row.comm_range = job.range;
    row.trace_final = m.final_trace;
    row.wall_ms = cfg.record_wall_time ? std::chrono::duration<double, std::milli>(t1 - t0).count() : 0.0;
  });
  return rows;
}

std::vector<SummaryRow> summarize(const std::vector<ResultRow>& rows) {
  std::vector<SummaryRow> out;
  std::vector<std::vector<double>> samples;
  for (const auto& r : rows) {
    std::size_t k = 0;
    while (k < out.size() && !(out[k].method == r.method && out[k].m == r.m && out[k].budget == r.budget &&
                               out[k].comm_range == r.comm_range))
      ++k;
    if (k == out.size()) {
      out.push_back({r.method, r.m, r.budget, r.comm_range, 0, 0.0, 0.0});
      samples.emplace_back();
    }
    samples[k].push_back(r.trace_final);
  }
  for (std::size_t k = 0; k < out.size(); ++k) {
    const auto& s = samples[k];
    double mean = 0.0;
    for (double v : s) mean += v;
    mean /= static_cast<double>(s.size());
    double var = 0.0;
    for (double v : s) var += (v - mean) * (v - mean);
    out[k].count = static_cast<int>(s.size());
    out[k].mean = mean;
    out[k].std = std::sqrt(var / static_cast<double>(s.size()));
  }
  return out;
}

void write_results_csv(std::ostream& os, const std::vector<ResultRow>& rows) {
  os << kResultsHeader << '\n';
  os << std::setprecision(12);
  for (const auto& r : rows) {
    os << r.instance << ',' << r.trial << ',' << '"' << r.method << '"' << ',' << r.m << ',' << r.budget << ','
       << format_range(r.comm_range) << ',' << r.trace_final << ',' << std::fixed << std::setprecision(3) << r.wall_ms
       << std::defaultfloat << std::setprecision(12) << '\n';
  }
}

namespace {

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  bool quoted = false;
  for (char ch : line) {
    if (ch == '"') {
      quoted = !quoted;
    } else if (ch == ',' && !quoted) {
      out.push_back(cur);
      cur.clear();
    } else {
      cur += ch;
    }
  }
  if (quoted) throw std::invalid_argument("results csv: unterminated quote");
  out.push_back(cur);
  return out;
}

}  // namespace

std::vector<ResultRow> read_results_csv(std::istream& is) {
  std::string line;
  if (!std::getline(is, line) || line != kResultsHeader) throw std::invalid_argument("results csv: unexpected header");
  std::vector<ResultRow> rows;
  int lineno = 1;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto f = split_csv(line);
    if (f.size() != 8) throw std::invalid_argument("results csv: line " + std::to_string(lineno) + " has wrong field count");
    try {
      ResultRow r;
      r.instance = std::stoi(f[0]);
      r.trial = std::stoi(f[1]);
      r.method = f[2];
      r.m = std::stoi(f[3]);
      r.budget = std::stod(f[4]);
      r.comm_range = f[5] == "inf" ? kInfiniteRange : std::stod(f[5]);
      r.trace_final = std::stod(f[6]);
      r.wall_ms = std::stod(f[7]);
      rows.push_back(r);
    } catch (const std::logic_error&) {
      throw std::invalid_argument("results csv: bad number on line " + std::to_string(lineno));
    }
  }
  return rows;
}

void write_summary_csv(std::ostream& os, const std::vector<SummaryRow>& rows) {
  os << "method,m,B,comm_range,n,mean,std\n" << std::setprecision(12);
  for (const auto& r : rows) {
    os << '"' << r.method << '"' << ',' << r.m << ',' << r.budget << ',' << format_range(r.comm_range) << ','
       << r.count << ',' << r.mean << ',' << r.std << '\n';
  }
}

}  // namespace maipp
