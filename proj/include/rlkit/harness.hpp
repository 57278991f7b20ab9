#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "rlkit/stats.hpp"

namespace rlkit {

// Declarative description of one experiment: an algorithm, an environment,
// seed fan-out and output location.  Parsed from versioned JSON; unknown keys
// are rejected.
struct ExperimentConfig {
  int version = 1;
  std::string algo;
  std::string env;
  std::map<std::string, double> algo_params;
  std::map<std::string, double> env_params;
  int n_seeds = 1;
  std::uint64_t master_seed = 0;
  long steps = 10000;
  long eval_every = 1000;
  std::string out_dir = "results";
  int workers = 0;  // 0: hardware concurrency

  static ExperimentConfig from_json_text(const std::string& text);
  static ExperimentConfig from_json_file(const std::string& path);
  std::string to_json_text() const;
};

struct MetricRow {
  long step = 0;
  long episode = 0;
  std::string metric;
  double value = 0.0;
};

struct RunRecord {
  int run_id = 0;
  std::uint64_t seed = 0;
  std::vector<MetricRow> rows;
  double wall_seconds = 0.0;
};

// Known algorithm / environment identifiers (validated at parse time).
const std::vector<std::string>& known_algos();
const std::vector<std::string>& known_envs();

// n_seeds independent runs on derived streams; deterministic per
// (config, master_seed), parallel across runs.
std::vector<RunRecord> run_experiment(const ExperimentConfig& cfg);

// CSV schema: header run_id,seed,step,episode,metric,value
void write_train_csv(const std::string& path, const std::vector<RunRecord>& records);
std::vector<RunRecord> read_train_csv(const std::string& path);

// Aggregate rows: per (metric, step) the IQM of run values with a percentile
// bootstrap interval.
struct AggregateRow {
  std::string metric;
  long step = 0;
  int n = 0;
  double center = 0.0;  // IQM (mean below 4 samples)
  double lo = 0.0;
  double hi = 0.0;
};

struct Report {
  std::vector<AggregateRow> rows;
};

Report report(const std::vector<std::string>& csv_paths, int n_resamples = 2000,
              double level = 0.95);
void write_report_csv(const std::string& path, const Report& rep);

// Convenience: run + write CSV + write report; returns the CSV path.
std::string run_and_write(const ExperimentConfig& cfg);

}  // namespace rlkit
