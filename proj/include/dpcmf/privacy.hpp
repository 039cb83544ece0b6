#pragma once

#include <cstdint>
#include <vector>

#include "dpcmf/cmf.hpp"
#include "dpcmf/dataset.hpp"
#include "dpcmf/linalg.hpp"
#include "dpcmf/rng.hpp"

namespace dpcmf {

// Per-user cap on the squared-weight sum that guarantees (epsilon, delta)
// user-level privacy across `iterations` noisy item updates:
//   epsilon² / (4 · iterations · (ln(1/delta) + epsilon)).
// Computed as the one-iteration cap divided by the iteration count, so the
// cap·iterations product is constant in floating point, not just on paper.
double per_user_weight_cap(double epsilon, double delta, int iterations);

struct PrivacyBudget {
  double epsilon = 0.0;
  double delta = 0.0;
  int iterations = 0;
  double weight_cap = 0.0;  // cap on Σ_j W_ij² for every user i

  static PrivacyBudget derive(double epsilon, double delta, int iterations);
};

// W_ij = sqrt(cap / |user i's observations|): more ratings, lower weight,
// equal total squared weight per user.
WeightAssignment uniform_weights(const RatingDataset& ratings,
                                 double weight_cap);

struct WeightValidation {
  bool all_passed = true;
  std::vector<std::uint32_t> failed_users;
  std::size_t users_checked = 0;
};

// Flags every user whose squared-weight sum exceeds the cap by more than
// 1e-12 relative. Training must refuse to start on any failure.
WeightValidation validate_weights(const WeightAssignment& w,
                                  const RatingDataset& ratings,
                                  double weight_cap);

struct ClipParams {
  double max_rating = 0.0;     // magnitude cap on rating values
  double max_user_norm = 0.0;  // cap on user embedding norms
  void validate() const;
};

struct ClippedRatings {
  RatingDataset data;
  std::size_t negatives_clamped = 0;
};

// Clamps every value into [0, max_rating]. Negative inputs clamp to zero
// and are tallied; the noise calibration assumes nonnegative ratings.
ClippedRatings clip_ratings(const RatingDataset& ratings, double max_rating);

// u · min(1, max_norm / |u|); the zero vector maps to itself.
DenseVector clip_user_embedding(const DenseVector& u, double max_norm);
// Row-wise clip of a whole embedding table.
DenseMatrix clip_user_rows(const DenseMatrix& users, double max_norm);

struct NoisyStatistics {
  DenseMatrix a_hat;  // PSD projection of Σ W u⊗u + noise + lambda·I
  DenseVector b_hat;  // Σ W·value·u + noise
};

struct ExactStatistics {
  DenseMatrix a_prime;  // Σ f⊗f + lambda_f·I
  DenseVector b_prime;  // Σ value·f
};

// Noise standard deviations for the sufficient statistics. The defaults are
// fixed multiples of the clip bounds; zero() is the test seam that turns the
// mechanism into the exact clipped statistics.
struct NoiseScales {
  double gramian_stddev = 0.0;
  double moment_stddev = 0.0;

  static NoiseScales from_clip(const ClipParams& clip);
  static NoiseScales zero() { return {0.0, 0.0}; }
};

// The per-item noisy sufficient statistics. Inputs must already be clipped:
// any user row with norm beyond max_user_norm (or rating outside
// [0, max_rating]) is a hard SensitivityViolationError, since the noise
// scale assumes those bounds. The stream must be keyed (iteration, item);
// the matrix noise is drawn before the vector noise.
NoisyStatistics noisy_item_statistics(std::uint32_t item,
                                      const DenseMatrix& clipped_users,
                                      const RatingDataset& clipped_ratings,
                                      const WeightAssignment& w,
                                      double lambda, const ClipParams& clip,
                                      RngStream& rng,
                                      const NoiseScales& scales);

// Feature-side statistics are exact: they depend only on public data and on
// already-released item embeddings, so no noise is required.
ExactStatistics exact_feature_statistics(std::uint32_t item,
                                         const DenseMatrix& features,
                                         const FeatureDataset& feature_data,
                                         double lambda_f);

}  // namespace dpcmf
