#pragma once

#include <maipp/config.hpp>

#include <iosfwd>
#include <string>
#include <vector>

namespace maipp {

struct ResultRow {
  int instance = 0;
  int trial = 0;
  std::string method;
  int m = 0;
  double budget = 0.0;
  double comm_range = kInfiniteRange;
  double trace_final = 0.0;
  double wall_ms = 0.0;
};

struct SummaryRow {
  std::string method;
  int m = 0;
  double budget = 0.0;
  double comm_range = kInfiniteRange;
  int count = 0;
  double mean = 0.0;
  double std = 0.0;
};

inline constexpr const char* kResultsHeader = "instance,trial,method,m,B,comm_range,trace_final,wall_ms";

/// Every (budget, comm range, method, instance, trial) episode, in that
/// nesting order. Trials are paired across methods: same instance and episode
/// stream. `policy` is required when a learned method is listed.
std::vector<ResultRow> run_benchmark(const ExperimentConfig& cfg, const PolicyParams* policy, int jobs = 1);

/// Mean and population std per (method, m, B, comm range), in first-seen order.
std::vector<SummaryRow> summarize(const std::vector<ResultRow>& rows);

void write_results_csv(std::ostream& os, const std::vector<ResultRow>& rows);
std::vector<ResultRow> read_results_csv(std::istream& is);
void write_summary_csv(std::ostream& os, const std::vector<SummaryRow>& rows);

}  // namespace maipp
