#include "dpcmf/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "dpcmf/errors.hpp"
#include "dpcmf/parallel.hpp"

namespace dpcmf {

namespace {

double predict(const DenseMatrix& users, const DenseMatrix& items,
               const Rating& r, std::optional<double> clamp_low,
               std::optional<double> clamp_high) {
  double p = dot(users.row(r.user), items.row(r.item));
  if (clamp_low && p < *clamp_low) {
    p = *clamp_low;
  }
  if (clamp_high && p > *clamp_high) {
    p = *clamp_high;
  }
  return p;
}

std::string format_double(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

}  // namespace

double rmse(const DenseMatrix& user_embeddings,
            const DenseMatrix& item_embeddings, const RatingDataset& test) {
  if (test.size() == 0) {
    throw DataError("empty-metric", "test set has no observations");
  }
  const auto& entries = test.entries();
  const double sse = deterministic_sum(entries.size(), [&](std::size_t k) {
    const Rating& r = entries[k];
    const double err =
        r.value - dot(user_embeddings.row(r.user),
                      item_embeddings.row(r.item));
    return err * err;
  });
  return std::sqrt(sse / static_cast<double>(test.size()));
}

SlicedRmse sliced_rmse(const DenseMatrix& user_embeddings,
                       const DenseMatrix& item_embeddings,
                       const RatingDataset& test,
                       const PopularityBuckets& buckets) {
  if (test.num_items() > buckets.bucket_of_item.size()) {
    throw ContractViolationError("bucket-assignment-incomplete",
                                 "sliced_rmse");
  }
  const std::size_t nb = buckets.num_buckets;
  std::vector<double> sse(nb, 0.0);
  std::vector<std::size_t> counts(nb, 0);
  for (const Rating& r : test.entries()) {
    const std::uint32_t b = buckets.bucket_of_item[r.item];
    const double err = r.value - dot(user_embeddings.row(r.user),
                                     item_embeddings.row(r.item));
    sse[b] += err * err;
    ++counts[b];
  }
  SlicedRmse out;
  out.counts = counts;
  out.per_bucket.resize(nb);
  double total_sse = 0.0;
  std::size_t total_count = 0;
  for (std::size_t b = 0; b < nb; ++b) {
    total_sse += sse[b];
    total_count += counts[b];
    if (counts[b] > 0) {
      out.per_bucket[b] =
          std::sqrt(sse[b] / static_cast<double>(counts[b]));
    }
  }
  if (total_count == 0) {
    throw DataError("empty-metric", "test set has no observations");
  }
  // Global computed from the same per-bucket accumulators so the weighted
  // recombination identity holds to rounding.
  out.global = std::sqrt(total_sse / static_cast<double>(total_count));
  return out;
}

MetricReport evaluate_model(const DenseMatrix& item_embeddings,
                            const RatingDataset& train,
                            const RatingDataset& test,
                            const PopularityBuckets& buckets, double lambda,
                            std::optional<double> clamp_low,
                            std::optional<double> clamp_high) {
  if (test.size() == 0) {
    throw DataError("empty-metric", "test set has no observations");
  }
  const DenseMatrix user_eval =
      evaluate_user_embeddings(item_embeddings, train, lambda);

  MetricReport report;
  report.test_size = test.size();
  report.train_fingerprint = train.fingerprint();
  report.test_fingerprint = test.fingerprint();

  const std::size_t nb = buckets.num_buckets;
  std::vector<double> sse(nb, 0.0);
  std::vector<std::size_t> counts(nb, 0);
  for (const Rating& r : test.entries()) {
    const std::uint32_t b = buckets.bucket_of_item[r.item];
    const double err =
        r.value - predict(user_eval, item_embeddings, r, clamp_low,
                          clamp_high);
    sse[b] += err * err;
    ++counts[b];
  }
  report.bucket_rmse.resize(nb);
  report.bucket_counts = counts;
  double total_sse = 0.0;
  for (std::size_t b = 0; b < nb; ++b) {
    total_sse += sse[b];
    if (counts[b] > 0) {
      report.bucket_rmse[b] =
          std::sqrt(sse[b] / static_cast<double>(counts[b]));
    }
  }
  report.global_rmse =
      std::sqrt(total_sse / static_cast<double>(test.size()));

  for (std::uint32_t u = 0; u < test.num_users(); ++u) {
    if (!test.by_user(u).empty() && train.by_user(u).empty()) {
      ++report.users_without_train;
    }
  }
  return report;
}

std::string to_kv_record(const MetricReport& report) {
  std::ostringstream os;
  os << "record=metrics global_rmse=" << format_double(report.global_rmse)
     << " test_size=" << report.test_size
     << " users_without_train=" << report.users_without_train
     << " train_fingerprint=" << report.train_fingerprint
     << " test_fingerprint=" << report.test_fingerprint;
  for (std::size_t b = 0; b < report.bucket_rmse.size(); ++b) {
    os << " bucket" << b << "_count=" << report.bucket_counts[b];
    if (report.bucket_rmse[b]) {
      os << " bucket" << b << "_rmse=" << format_double(*report.bucket_rmse[b]);
    }
  }
  return os.str();
}

std::string to_csv(const MetricReport& report) {
  std::ostringstream os;
  os << "slice,count,rmse\n";
  os << "global," << report.test_size << ','
     << format_double(report.global_rmse) << '\n';
  for (std::size_t b = 0; b < report.bucket_rmse.size(); ++b) {
    os << "bucket" << b << ',' << report.bucket_counts[b] << ',';
    if (report.bucket_rmse[b]) {
      os << format_double(*report.bucket_rmse[b]);
    } else {
      os << "absent";
    }
    os << '\n';
  }
  return os.str();
}

std::vector<CurvePoint> privacy_utility_curve(
    const TrainConfig& base, std::span<const double> epsilons,
    const RatingDataset& train, const RatingDataset& validation,
    const RatingDataset& test, const FeatureDataset& features) {
  if (!is_private(base.mode)) {
    throw ConfigError("curve-requires-private-mode", to_string(base.mode));
  }
  std::vector<CurvePoint> curve;

  TrainConfig reference = base;
  reference.mode = base.mode == TrainMode::kDpCmf ? TrainMode::kNonprivateCmf
                                                  : TrainMode::kNonprivateAls;
  reference.weighting = WeightingMode::kUnweighted;
  reference.epsilon.reset();
  reference.delta.reset();
  {
    const TrainReport report =
        dpcmf::train(reference, train, &validation, features);
    const DenseMatrix user_eval = evaluate_user_embeddings(
        report.item_embeddings, train, reference.lambda);
    curve.push_back(
        {std::nullopt, rmse(user_eval, report.item_embeddings, test)});
  }

  for (const double eps : epsilons) {
    TrainConfig cfg = base;
    cfg.epsilon = eps;
    const TrainReport report = dpcmf::train(cfg, train, &validation, features);
    const DenseMatrix user_eval =
        evaluate_user_embeddings(report.item_embeddings, train, cfg.lambda);
    curve.push_back({eps, rmse(user_eval, report.item_embeddings, test)});
  }
  return curve;
}

std::string curve_to_csv(const std::vector<CurvePoint>& curve) {
  std::ostringstream os;
  os << "epsilon,test_rmse\n";
  for (const CurvePoint& p : curve) {
    if (p.epsilon) {
      os << format_double(*p.epsilon);
    } else {
      os << "inf";
    }
    os << ',' << format_double(p.test_rmse) << '\n';
  }
  return os.str();
}

}  // namespace dpcmf
