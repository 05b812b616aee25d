#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "ssgnn/graph.hpp"
#include "ssgnn/trainer.hpp"

#include <json.hpp>

namespace ssgnn {

// A configuration-driven experiment: one task/strategy on one dataset, swept
// over lambda/alpha grids and repeated over seeds. Reports land in output_dir
// as runs.csv, summary.csv, per-run JSON and plot-data CSVs; the best grid
// point is selected by mean validation accuracy.
struct ExperimentSpec {
  std::string dataset_path;            // or synthetic
  std::optional<SbmParams> synthetic;
  std::string dataset_name = "dataset";
  std::string task = "gcn";
  std::string strategy = "joint";      // joint | two-stage:fix | two-stage:tune_all
  std::string labeler = "lp";          // lp | ica (context/corrected label)
  std::vector<double> lambda_grid{0.0};
  std::vector<double> alpha_grid;      // used by corrected-label only
  std::vector<std::uint64_t> seeds{0, 1, 2, 3, 4, 5, 6, 7, 8, 9};
  std::optional<int> few_label_n;      // resplit protocol when set
  std::string output_dir = "out";
  int workers = 1;
  TrainConfig base;                    // epochs/lr/arch/pretext defaults and overrides
  double m_e_fraction = -1.0;          // masked-edge count as a fraction of |V|
  double m_a_fraction = -1.0;          // masked-node count as a fraction of |V|
  std::optional<std::string> partition_file;
  bool dump_targets = false;
  bool dump_weak_labels = false;

  static ExperimentSpec from_json(const nlohmann::json& j);
  static ExperimentSpec from_file(const std::string& path);
};

struct RunRecord {
  double lambda = 0.0;
  double alpha = 0.0;
  std::uint64_t seed = 0;
  double val_acc = 0.0;
  double test_acc = 0.0;
  std::string run_id;
};

struct ExperimentReport {
  std::vector<RunRecord> runs;  // sorted by (lambda, alpha, seed)
  double best_lambda = 0.0;
  double best_alpha = 0.0;
  double best_mean_val = 0.0;
  double best_mean_test = 0.0;
  double best_std_test = 0.0;
};

// Executes the grid x seeds, writes all report files, returns the summary.
ExperimentReport run_experiment(const ExperimentSpec& spec);

// Representation probe protocol: trains the probe on raw features and on
// embeddings of a trained plain GCN, writes probe.csv, returns (raw, gcn)
// accuracies averaged over seeds.
struct ProbeReport {
  double raw_acc = 0.0;
  double gcn_acc = 0.0;
};
ProbeReport run_probe(const ExperimentSpec& spec);

// Loads the dataset named by the spec (file or synthetic).
std::pair<Graph, SplitMasks> load_spec_dataset(const ExperimentSpec& spec);

std::string format_double(double v);

}  // namespace ssgnn
