#include "dpcmf/privacy.hpp"

#include <algorithm>
#include <cmath>

#include "dpcmf/errors.hpp"

namespace dpcmf {

double per_user_weight_cap(double epsilon, double delta, int iterations) {
  if (!(epsilon > 0.0)) {
    throw ConfigError("invalid-epsilon", std::to_string(epsilon));
  }
  if (!(delta > 0.0 && delta < 1.0)) {
    throw ConfigError("invalid-delta", std::to_string(delta));
  }
  if (iterations < 1) {
    throw ConfigError("invalid-iterations", std::to_string(iterations));
  }
  const double single_step =
      epsilon * epsilon / (4.0 * (std::log(1.0 / delta) + epsilon));
  return single_step / iterations;
}

PrivacyBudget PrivacyBudget::derive(double epsilon, double delta,
                                    int iterations) {
  PrivacyBudget b;
  b.epsilon = epsilon;
  b.delta = delta;
  b.iterations = iterations;
  b.weight_cap = per_user_weight_cap(epsilon, delta, iterations);
  return b;
}

WeightAssignment uniform_weights(const RatingDataset& ratings,
                                 double weight_cap) {
  if (!(weight_cap >= 0.0)) {
    throw ConfigError("invalid-weight-cap", std::to_string(weight_cap));
  }
  std::vector<double> weights(ratings.size(), 0.0);
  const auto& entries = ratings.entries();
  for (std::size_t k = 0; k < entries.size(); ++k) {
    const std::size_t degree = ratings.user_degree(entries[k].user);
    weights[k] = std::sqrt(weight_cap / static_cast<double>(degree));
  }
  return WeightAssignment(std::move(weights));
}

WeightValidation validate_weights(const WeightAssignment& w,
                                  const RatingDataset& ratings,
                                  double weight_cap) {
  if (w.size() != ratings.size()) {
    throw ContractViolationError("weight-alignment-mismatch",
                                 "validate_weights");
  }
  WeightValidation report;
  report.users_checked = ratings.num_users();
  const double tolerance = weight_cap * 1e-12;
  // Compensated per-user summation: the pass/fail boundary is 1e-12
  // relative, below the drift of a naive sum over long user rows. Entries
  // are sorted by user, so weights for one user are contiguous.
  std::size_t k = 0;
  for (std::uint32_t user = 0; user < ratings.num_users(); ++user) {
    const std::size_t degree = ratings.user_degree(user);
    double sum = 0.0;
    double carry = 0.0;
    for (std::size_t t = 0; t < degree; ++t, ++k) {
      const double term = w[k] * w[k] - carry;
      const double next = sum + term;
      carry = (next - sum) - term;
      sum = next;
    }
    if (sum > weight_cap + tolerance) {
      report.all_passed = false;
      report.failed_users.push_back(user);
    }
  }
  return report;
}

void ClipParams::validate() const {
  if (!(max_rating > 0.0)) {
    throw ConfigError("invalid-clip-parameter",
                      "max_rating = " + std::to_string(max_rating));
  }
  if (!(max_user_norm > 0.0)) {
    throw ConfigError("invalid-clip-parameter",
                      "max_user_norm = " + std::to_string(max_user_norm));
  }
}

ClippedRatings clip_ratings(const RatingDataset& ratings, double max_rating) {
  if (!(max_rating > 0.0)) {
    throw ConfigError("invalid-clip-parameter",
                      "max_rating = " + std::to_string(max_rating));
  }
  std::size_t negatives = 0;
  RatingDataset clipped =
      ratings.with_transformed_values([&](double value) {
        if (value < 0.0) {
          ++negatives;
          return 0.0;
        }
        return std::min(value, max_rating);
      });
  return {std::move(clipped), negatives};
}

namespace {

// Vectors whose norm is within roundoff of the bound count as inside, so
// re-clipping an already clipped vector is an exact no-op.
constexpr double kClipSlack = 1e-12;

}  // namespace

DenseVector clip_user_embedding(const DenseVector& u, double max_norm) {
  const double norm = euclidean_norm(u.entries());
  if (norm <= max_norm * (1.0 + kClipSlack)) {
    return u;
  }
  DenseVector out(u.size());
  const double scale = max_norm / norm;
  for (std::size_t i = 0; i < u.size(); ++i) {
    out[i] = scale * u[i];
  }
  return out;
}

DenseMatrix clip_user_rows(const DenseMatrix& users, double max_norm) {
  DenseMatrix out = users;
  for (std::size_t i = 0; i < out.rows(); ++i) {
    auto row = out.row(i);
    const double norm = euclidean_norm(row);
    if (norm > max_norm * (1.0 + kClipSlack)) {
      const double scale = max_norm / norm;
      for (double& x : row) {
        x *= scale;
      }
    }
  }
  return out;
}

NoiseScales NoiseScales::from_clip(const ClipParams& clip) {
  return {clip.max_user_norm * clip.max_user_norm,
          clip.max_user_norm * clip.max_rating};
}

NoisyStatistics noisy_item_statistics(std::uint32_t item,
                                      const DenseMatrix& clipped_users,
                                      const RatingDataset& clipped_ratings,
                                      const WeightAssignment& w,
                                      double lambda, const ClipParams& clip,
                                      RngStream& rng,
                                      const NoiseScales& scales) {
  if (w.size() != clipped_ratings.size()) {
    throw ContractViolationError("weight-alignment-mismatch",
                                 "noisy_item_statistics");
  }
  constexpr double kSlack = 1e-9;
  const std::size_t dim = clipped_users.cols();
  DenseMatrix a(dim, dim);
  DenseVector b(dim);
  const auto& entries = clipped_ratings.entries();
  for (const std::uint32_t idx : clipped_ratings.by_item(item)) {
    const Rating& r = entries[idx];
    const auto user_row = clipped_users.row(r.user);
    if (euclidean_norm(user_row) > clip.max_user_norm + kSlack) {
      throw SensitivityViolationError(
          "unclipped-user-embedding",
          "user " + std::to_string(r.user) + " exceeds the norm bound");
    }
    if (r.value < -kSlack || r.value > clip.max_rating + kSlack) {
      throw SensitivityViolationError(
          "unclipped-rating",
          "rating of user " + std::to_string(r.user) + " outside [0, cap]");
    }
    add_weighted_outer(a, w[idx], user_row);
    add_scaled(b.entries(), w[idx] * r.value, user_row);
  }
  const DenseMatrix noise =
      sample_symmetric_gaussian(dim, scales.gramian_stddev, rng);
  const DenseVector vector_noise =
      sample_gaussian_vector(dim, scales.moment_stddev, rng);
  add_scaled_matrix(a, 1.0, noise);
  add_diagonal(a, lambda);
  NoisyStatistics out;
  out.a_hat = project_psd(a);
  add_scaled(b.entries(), 1.0, vector_noise.entries());
  out.b_hat = std::move(b);
  return out;
}

ExactStatistics exact_feature_statistics(std::uint32_t item,
                                         const DenseMatrix& features,
                                         const FeatureDataset& feature_data,
                                         double lambda_f) {
  const std::size_t dim = features.cols();
  ExactStatistics out;
  out.a_prime = DenseMatrix(dim, dim);
  out.b_prime = DenseVector(dim);
  if (item < feature_data.num_items()) {
    const auto& entries = feature_data.entries();
    for (const std::uint32_t idx : feature_data.by_item(item)) {
      const FeatureEntry& e = entries[idx];
      add_weighted_outer(out.a_prime, 1.0, features.row(e.feature));
      add_scaled(out.b_prime.entries(), e.value, features.row(e.feature));
    }
  }
  add_diagonal(out.a_prime, lambda_f);
  return out;
}

}  // namespace dpcmf
