#pragma once

#include <maipp/trainer.hpp>

#include <optional>
#include <string>
#include <vector>

namespace maipp {

/// Everything an experiment needs, read from a JSON file. Missing keys keep
/// their defaults; unknown keys are rejected.
struct ExperimentConfig {
  std::uint64_t seed = 0;
  FieldConfig field;
  RoadmapConfig graph;
  bool shared_graph = false;
  EpisodeConfig episode;
  std::vector<MethodSpec> methods;
  std::vector<double> budgets;      // empty: episode.budget only
  std::vector<double> comm_ranges;  // empty: episode.comm_range only
  int instances = 30;
  int trials = 10;
  bool record_wall_time = true;     // false writes wall_ms = 0 for byte-stable CSVs
  std::string results_file = "results.csv";
  std::string summary_file = "summary.csv";
  std::optional<std::string> checkpoint;
  PolicyConfig policy;
  TrainConfig train;
  TrainingRun training;

  void validate() const;
  InstanceConfig instance_config() const;
};

ExperimentConfig parse_experiment(const std::string& json_text);
ExperimentConfig load_experiment(const std::string& path);

/// "inf" for an unlimited range.
std::string format_range(double range);

}  // namespace maipp
