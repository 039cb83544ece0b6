#pragma once

#include <cstdint>
#include <vector>

#include "dpcmf/dataset.hpp"
#include "dpcmf/linalg.hpp"

namespace dpcmf {

// Shared low-rank state: users × dim, items × dim, features × dim. Item
// embeddings are shared between the rating and feature factorizations.
struct EmbeddingSet {
  DenseMatrix users;
  DenseMatrix items;
  DenseMatrix features;
  std::size_t dim = 0;

  static EmbeddingSet zeros(std::size_t num_users, std::size_t num_items,
                            std::size_t num_features, std::size_t dim);
};

// Per-observation nonnegative weights aligned with RatingDataset::entries().
class WeightAssignment {
 public:
  WeightAssignment() = default;
  explicit WeightAssignment(std::vector<double> weights);
  static WeightAssignment ones(std::size_t count);

  std::size_t size() const { return weights_.size(); }
  double operator[](std::size_t k) const { return weights_[k]; }
  std::span<const double> values() const { return weights_; }

 private:
  std::vector<double> weights_;
};

struct CmfHyperparams {
  double lambda = 0.0;           // user/item regularization
  double lambda_f = 0.0;         // feature regularization
  double alpha = 0.0;            // relative weight of the feature matrix fit
  double implicit_weight = 0.0;  // unobserved-entry weight; 0 = explicit mode
};

// Weighted joint objective: the weighted rating fit, the feature fit scaled
// by alpha, and Frobenius regularizers. In implicit mode the unobserved
// penalty implicit_weight · (|UVᵀ|² + |FVᵀ|²) is added via the Gramian
// identity, never by materializing dense products.
double cmf_loss(const EmbeddingSet& emb, const RatingDataset& ratings,
                const FeatureDataset& features, const WeightAssignment& w,
                const CmfHyperparams& hp);

// Closed-form row solves. Rows with empty support (and no implicit term
// driving them) return the zero vector instead of erroring, so cold users,
// features, and items never abort a sweep. The optional Gramian pointer
// supplies the implicit-mode extension; implicit_weight = 0 reproduces the
// explicit update bit for bit.

// Unweighted ridge fit of one user against fixed item embeddings.
DenseVector user_update(std::uint32_t user, const DenseMatrix& items,
                        const RatingDataset& ratings, double lambda,
                        double implicit_weight = 0.0,
                        const DenseMatrix* item_gramian = nullptr);

DenseVector feature_update(std::uint32_t feature, const DenseMatrix& items,
                           const FeatureDataset& features, double lambda_f,
                           double implicit_weight = 0.0,
                           const DenseMatrix* item_gramian = nullptr);

// Weighted item solve combining rating rows and (scaled by alpha) feature
// rows under a single lambda·I regularizer.
DenseVector item_update_nonprivate(
    std::uint32_t item, const DenseMatrix& users, const DenseMatrix& features,
    const RatingDataset& ratings, const FeatureDataset& feature_data,
    const WeightAssignment& w, const CmfHyperparams& hp,
    const DenseMatrix* user_gramian = nullptr,
    const DenseMatrix* feature_gramian = nullptr);

// One full alternating sweep: all user and feature rows against the previous
// item embeddings, then all item rows. Each half-step is an exact blockwise
// minimizer of cmf_loss, so with unit weights the loss never increases; the
// feature half-step therefore folds alpha into its effective regularizer.
void nonprivate_sweep(EmbeddingSet& emb, const RatingDataset& ratings,
                      const FeatureDataset& features,
                      const WeightAssignment& w, const CmfHyperparams& hp);

}  // namespace dpcmf
