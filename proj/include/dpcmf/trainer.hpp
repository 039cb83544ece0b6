#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "dpcmf/cmf.hpp"
#include "dpcmf/dataset.hpp"
#include "dpcmf/privacy.hpp"

namespace dpcmf {

enum class TrainMode {
  kNonprivateAls,
  kNonprivateCmf,
  kDpAls,
  kDpCmf,
};

enum class WeightingMode {
  kUniform,
  kUnweighted,
};

std::string to_string(TrainMode mode);
std::string to_string(WeightingMode mode);
TrainMode parse_train_mode(const std::string& name);
WeightingMode parse_weighting_mode(const std::string& name);

bool is_private(TrainMode mode);

struct TrainConfig {
  TrainMode mode = TrainMode::kNonprivateAls;
  std::size_t dim = 16;
  int iterations = 10;
  double lambda = 0.1;
  double lambda_f = 0.1;
  double alpha = 0.0;
  double implicit_weight = 0.0;
  double init_scale = 1.0;
  double max_rating = 1.0;     // rating clip bound (private modes)
  double max_user_norm = 1.0;  // user-norm clip bound (private modes)
  std::optional<double> epsilon;
  std::optional<double> delta;
  std::uint64_t seed = 0;
  WeightingMode weighting = WeightingMode::kUnweighted;

  // Throws ConfigError on any inconsistency; private modes require the
  // privacy fields and uniform weighting, and reject implicit mode.
  void validate() const;
  ClipParams clip() const { return {max_rating, max_user_norm}; }
  // Full resolved configuration (defaults expanded) for provenance.
  std::vector<std::pair<std::string, std::string>> resolved() const;
};

struct IterationRecord {
  int iteration = 0;
  double train_loss = 0.0;
  std::optional<double> validation_rmse;
  double wall_ms = 0.0;
};

struct TrainReport {
  std::vector<IterationRecord> iterations;
  DenseMatrix item_embeddings;
  DenseMatrix feature_embeddings;
  // Retained in non-private modes only; private runs never release it.
  std::optional<DenseMatrix> user_embeddings;
  TrainConfig config;
  std::optional<PrivacyBudget> budget;
  std::size_t negatives_clamped = 0;
  std::vector<std::string> warnings;
};

// Verifies release discipline: private reports must not carry user
// embeddings or anything derived from raw, un-noised statistics.
void audit_release(const TrainReport& report);

// Random item embeddings with entry variance init_scale²/dim; user and
// feature embeddings start at zero since the first half-step overwrites
// them. Row j draws from stream (seed, 0, j).
EmbeddingSet init_embeddings(std::size_t num_users, std::size_t num_items,
                             std::size_t num_features, std::size_t dim,
                             double init_scale, std::uint64_t seed,
                             std::vector<std::string>* warnings = nullptr);

struct ItemUpdateResult {
  DenseMatrix items;
  std::size_t negatives_clamped = 0;
};

// One noisy item half-step: clips ratings and user rows, then solves every
// item from its noisy rating statistics plus (alpha-scaled) exact feature
// statistics. Noise streams are keyed (seed, iteration, item), so the
// result is schedule-independent and reproducible. `scales` defaults to the
// calibrated values; NoiseScales::zero() is the test seam.
ItemUpdateResult dp_item_update(const RatingDataset& ratings,
                                const DenseMatrix& users,
                                const DenseMatrix& features,
                                const FeatureDataset& feature_data,
                                const WeightAssignment& w,
                                const CmfHyperparams& hp,
                                const ClipParams& clip, int iteration,
                                std::uint64_t seed,
                                const NoiseScales& scales);

using ProgressFn = std::function<void(const IterationRecord&)>;

// Runs the configured number of alternating iterations and returns the
// released embeddings plus per-iteration metrics. Private modes derive the
// per-user weight cap, build uniform weights, and refuse to start if any
// user exceeds the cap.
TrainReport train(const TrainConfig& config, const RatingDataset& train_data,
                  const RatingDataset* validation,
                  const FeatureDataset& features,
                  const ProgressFn& progress = nullptr);

// Client-side evaluation embeddings: each user's ridge solve from their own
// raw ratings against released item embeddings. No clipping, no noise, no
// budget cost.
DenseMatrix evaluate_user_embeddings(const DenseMatrix& item_embeddings,
                                     const RatingDataset& train_data,
                                     double lambda);

struct Checkpoint {
  int iteration = 0;
  std::uint64_t seed = 0;
  std::string mode;
  DenseMatrix item_embeddings;
  DenseMatrix feature_embeddings;
  std::optional<DenseMatrix> user_embeddings;
  std::vector<std::pair<std::string, std::string>> config_echo;
};

void save_checkpoint(const std::string& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::string& path);
Checkpoint checkpoint_from_report(const TrainReport& report);

}  // namespace dpcmf
