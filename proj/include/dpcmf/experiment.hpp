#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "dpcmf/dataset.hpp"
#include "dpcmf/metrics.hpp"
#include "dpcmf/trainer.hpp"

namespace dpcmf {

// Flat key = value document with [section] headers. Keys are addressed as
// "section.key"; later assignments win. Unknown keys are rejected when the
// document is resolved against the experiment schema.
class ConfigDoc {
 public:
  static ConfigDoc parse_file(const std::string& path);
  static ConfigDoc parse_string(const std::string& text,
                                const std::string& origin = "<string>");

  void set(const std::string& dotted_key, const std::string& value);
  std::optional<std::string> get(const std::string& dotted_key) const;
  const std::vector<std::pair<std::string, std::string>>& items() const {
    return items_;
  }

 private:
  std::vector<std::pair<std::string, std::string>> items_;
  std::map<std::string, std::string> values_;
};

struct ExperimentPlan {
  std::string ratings_path;
  std::string features_path;  // empty = no features
  bool strict_features = false;
  std::optional<double> binarize_threshold;
  SplitSpec split;
  TrainConfig train;
  std::vector<double> sweep_alpha;
  std::vector<double> sweep_lambda_f;
  std::size_t eval_buckets = 4;
  std::optional<double> clamp_low;
  std::optional<double> clamp_high;
  std::string output_dir;

  std::vector<std::pair<std::string, std::string>> resolved() const;
};

// Validates the document against the experiment schema and fills defaults.
// Referenced data paths must exist.
ExperimentPlan resolve_plan(const ConfigDoc& doc);

struct LoadedData {
  RatingDataset train;
  RatingDataset validation;
  RatingDataset test;
  FeatureDataset features;
};

// Shared ingestion pipeline: load, optional binarize, split, load features
// against the rating item vocabulary. Emits vocabulary sidecars into
// output_dir when it is nonempty.
LoadedData load_experiment_data(const ExperimentPlan& plan);

struct SynthCommandArgs {
  SyntheticSpec spec;
  std::string output_dir;
};

// Writes ratings.tsv, features.tsv, truth_embeddings.tsv, synth.cfg and a
// manifest.txt with per-file line counts.
void run_synth(const SynthCommandArgs& args);

struct TrainCommandResult {
  TrainReport report;
};

TrainCommandResult run_train(const ExperimentPlan& plan,
                             const ProgressFn& progress = nullptr);

struct EvalCommandResult {
  MetricReport report;
};

EvalCommandResult run_eval(const ExperimentPlan& plan,
                           const std::string& checkpoint_path);

struct SweepRow {
  double alpha = 0.0;
  double lambda_f = 0.0;
  double validation_rmse = 0.0;
  double test_rmse = 0.0;
  bool selected = false;
};

struct SweepCommandResult {
  std::vector<SweepRow> rows;
  std::size_t selected_index = 0;
};

// Trains every (alpha, lambda_f) grid point, selects the best validation
// RMSE (ties: smallest alpha, then smallest lambda_f), and reports its test
// RMSE.
SweepCommandResult run_sweep(const ExperimentPlan& plan);

struct StatsCommandResult {
  PopularityBuckets buckets;
  std::vector<double> density_by_bucket;
  std::vector<FeaturePopularity> popular_fraction;
};

StatsCommandResult run_stats(const ExperimentPlan& plan);

}  // namespace dpcmf
