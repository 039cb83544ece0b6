#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "dpcmf/dataset.hpp"
#include "dpcmf/linalg.hpp"
#include "dpcmf/trainer.hpp"

namespace dpcmf {

// Root mean squared error of raw inner-product predictions over the test
// observations. Predictions are not clamped. Throws on an empty test set.
double rmse(const DenseMatrix& user_embeddings,
            const DenseMatrix& item_embeddings, const RatingDataset& test);

struct SlicedRmse {
  double global = 0.0;
  std::vector<std::optional<double>> per_bucket;  // absent when no test entries
  std::vector<std::size_t> counts;
};

// RMSE restricted to test entries whose item falls in each popularity
// bucket. Per-bucket squared errors recombine exactly to the global value:
// global = sqrt(Σ_b count_b · rmse_b² / Σ_b count_b).
SlicedRmse sliced_rmse(const DenseMatrix& user_embeddings,
                       const DenseMatrix& item_embeddings,
                       const RatingDataset& test,
                       const PopularityBuckets& buckets);

struct MetricReport {
  double global_rmse = 0.0;
  std::size_t test_size = 0;
  std::vector<std::optional<double>> bucket_rmse;
  std::vector<std::size_t> bucket_counts;
  std::size_t users_without_train = 0;
  std::uint64_t train_fingerprint = 0;
  std::uint64_t test_fingerprint = 0;
  std::vector<std::pair<std::string, std::string>> config_echo;
};

// Scores released embeddings: client-side user solves from the training
// ratings, then global and bucket-sliced RMSE on the test set. Optional
// clamp bounds apply to predictions when both are given (off by default).
MetricReport evaluate_model(const DenseMatrix& item_embeddings,
                            const RatingDataset& train,
                            const RatingDataset& test,
                            const PopularityBuckets& buckets, double lambda,
                            std::optional<double> clamp_low = std::nullopt,
                            std::optional<double> clamp_high = std::nullopt);

// One self-describing key=value record per report.
std::string to_kv_record(const MetricReport& report);
// Flat CSV: a global row followed by one row per bucket.
std::string to_csv(const MetricReport& report);

struct CurvePoint {
  std::optional<double> epsilon;  // absent = non-private reference
  double test_rmse = 0.0;
};

// Privacy-utility trade-off: one private run per epsilon on a shared seed
// policy, plus a non-private reference row first.
std::vector<CurvePoint> privacy_utility_curve(
    const TrainConfig& base, std::span<const double> epsilons,
    const RatingDataset& train, const RatingDataset& validation,
    const RatingDataset& test, const FeatureDataset& features);

std::string curve_to_csv(const std::vector<CurvePoint>& curve);

}  // namespace dpcmf
