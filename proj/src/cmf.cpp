#include "dpcmf/cmf.hpp"

#include <cmath>

#include "dpcmf/errors.hpp"
#include "dpcmf/parallel.hpp"

namespace dpcmf {

EmbeddingSet EmbeddingSet::zeros(std::size_t num_users, std::size_t num_items,
                                 std::size_t num_features, std::size_t dim) {
  EmbeddingSet e;
  e.users = DenseMatrix(num_users, dim);
  e.items = DenseMatrix(num_items, dim);
  e.features = DenseMatrix(num_features, dim);
  e.dim = dim;
  return e;
}

WeightAssignment::WeightAssignment(std::vector<double> weights)
    : weights_(std::move(weights)) {
  for (double w : weights_) {
    if (!(w >= 0.0) || !std::isfinite(w)) {
      throw ContractViolationError("invalid-weight", std::to_string(w));
    }
  }
}

WeightAssignment WeightAssignment::ones(std::size_t count) {
  return WeightAssignment(std::vector<double>(count, 1.0));
}

namespace {

void require_alignment(const WeightAssignment& w,
                       const RatingDataset& ratings) {
  if (w.size() != ratings.size()) {
    throw ContractViolationError(
        "weight-alignment-mismatch",
        std::to_string(w.size()) + " weights for " +
            std::to_string(ratings.size()) + " observations");
  }
}

}  // namespace

double cmf_loss(const EmbeddingSet& emb, const RatingDataset& ratings,
                const FeatureDataset& features, const WeightAssignment& w,
                const CmfHyperparams& hp) {
  require_alignment(w, ratings);
  const auto& entries = ratings.entries();
  const double rating_fit = deterministic_sum(entries.size(), [&](std::size_t k) {
    const Rating& r = entries[k];
    const double err =
        dot(emb.users.row(r.user), emb.items.row(r.item)) - r.value;
    return w[k] * err * err;
  });

  double feature_fit = 0.0;
  if (hp.alpha > 0.0 && features.size() > 0) {
    const auto& fentries = features.entries();
    feature_fit =
        hp.alpha * deterministic_sum(fentries.size(), [&](std::size_t k) {
          const FeatureEntry& e = fentries[k];
          const double err =
              dot(emb.features.row(e.feature), emb.items.row(e.item)) -
              e.value;
          return err * err;
        });
  }

  const double reg =
      hp.lambda * (frobenius_sq(emb.users) + frobenius_sq(emb.items)) +
      hp.lambda_f * frobenius_sq(emb.features);

  double implicit = 0.0;
  if (hp.implicit_weight > 0.0) {
    const DenseMatrix item_gram = gramian(emb.items);
    implicit = hp.implicit_weight *
               (frobenius_inner(gramian(emb.users), item_gram) +
                frobenius_inner(gramian(emb.features), item_gram));
  }

  return rating_fit + feature_fit + reg + implicit;
}

DenseVector user_update(std::uint32_t user, const DenseMatrix& items,
                        const RatingDataset& ratings, double lambda,
                        double implicit_weight,
                        const DenseMatrix* item_gramian) {
  const std::size_t dim = items.cols();
  const auto row = ratings.by_user(user);
  if (row.empty()) {
    // b = 0, so the ridge solution is the zero vector.
    return DenseVector(dim);
  }
  DenseMatrix a(dim, dim);
  DenseVector b(dim);
  for (const Rating& r : row) {
    add_weighted_outer(a, 1.0, items.row(r.item));
    add_scaled(b.entries(), r.value, items.row(r.item));
  }
  if (implicit_weight > 0.0) {
    add_scaled_matrix(a, implicit_weight, *item_gramian);
  }
  return ridge_solve(a, b, lambda);
}

DenseVector feature_update(std::uint32_t feature, const DenseMatrix& items,
                           const FeatureDataset& features, double lambda_f,
                           double implicit_weight,
                           const DenseMatrix* item_gramian) {
  const std::size_t dim = items.cols();
  const auto row = features.by_feature(feature);
  if (row.empty()) {
    return DenseVector(dim);
  }
  DenseMatrix a(dim, dim);
  DenseVector b(dim);
  for (const FeatureEntry& e : row) {
    add_weighted_outer(a, 1.0, items.row(e.item));
    add_scaled(b.entries(), e.value, items.row(e.item));
  }
  if (implicit_weight > 0.0) {
    add_scaled_matrix(a, implicit_weight, *item_gramian);
  }
  return ridge_solve(a, b, lambda_f);
}

DenseVector item_update_nonprivate(
    std::uint32_t item, const DenseMatrix& users, const DenseMatrix& features,
    const RatingDataset& ratings, const FeatureDataset& feature_data,
    const WeightAssignment& w, const CmfHyperparams& hp,
    const DenseMatrix* user_gramian, const DenseMatrix* feature_gramian) {
  require_alignment(w, ratings);
  const std::size_t dim = users.cols();
  const auto rating_rows = ratings.by_item(item);
  const bool has_features = hp.alpha > 0.0 &&
                            item < feature_data.num_items() &&
                            !feature_data.by_item(item).empty();
  if (rating_rows.empty() && !has_features) {
    // b = 0, so the solution is the zero vector even in implicit mode.
    return DenseVector(dim);
  }

  DenseMatrix a(dim, dim);
  DenseVector b(dim);
  const auto& entries = ratings.entries();
  for (const std::uint32_t idx : rating_rows) {
    const Rating& r = entries[idx];
    add_weighted_outer(a, w[idx], users.row(r.user));
    add_scaled(b.entries(), w[idx] * r.value, users.row(r.user));
  }
  if (has_features) {
    const auto& fentries = feature_data.entries();
    for (const std::uint32_t idx : feature_data.by_item(item)) {
      const FeatureEntry& e = fentries[idx];
      add_weighted_outer(a, hp.alpha, features.row(e.feature));
      add_scaled(b.entries(), hp.alpha * e.value, features.row(e.feature));
    }
  }
  if (hp.implicit_weight > 0.0) {
    add_scaled_matrix(a, hp.implicit_weight, *user_gramian);
    add_scaled_matrix(a, hp.implicit_weight, *feature_gramian);
  }
  return ridge_solve(a, b, hp.lambda);
}

void nonprivate_sweep(EmbeddingSet& emb, const RatingDataset& ratings,
                      const FeatureDataset& features,
                      const WeightAssignment& w, const CmfHyperparams& hp) {
  require_alignment(w, ratings);
  const DenseMatrix previous_items = emb.items;
  const bool implicit = hp.implicit_weight > 0.0;
  DenseMatrix item_gram;
  if (implicit) {
    item_gram = gramian(previous_items);
  }
  const DenseMatrix* item_gram_ptr = implicit ? &item_gram : nullptr;

  parallel_for(emb.users.rows(), [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      const DenseVector u =
          user_update(static_cast<std::uint32_t>(i), previous_items, ratings,
                      hp.lambda, hp.implicit_weight, item_gram_ptr);
      std::copy(u.entries().begin(), u.entries().end(),
                emb.users.row(i).begin());
    }
  });

  if (emb.features.rows() > 0) {
    if (hp.alpha > 0.0) {
      // The feature rows enter the loss scaled by alpha, so the exact
      // blockwise minimizer solves with regularizer lambda_f / alpha (and
      // implicit weight scaled the same way).
      const double eff_lambda_f = hp.lambda_f / hp.alpha;
      const double eff_implicit = hp.implicit_weight / hp.alpha;
      parallel_for(emb.features.rows(), [&](std::size_t begin,
                                            std::size_t end) {
        for (std::size_t k = begin; k < end; ++k) {
          const DenseVector f = feature_update(
              static_cast<std::uint32_t>(k), previous_items, features,
              eff_lambda_f, eff_implicit, item_gram_ptr);
          std::copy(f.entries().begin(), f.entries().end(),
                    emb.features.row(k).begin());
        }
      });
    } else {
      // With alpha = 0 the only feature terms left in the loss are
      // penalties, minimized by the zero row.
      emb.features = DenseMatrix(emb.features.rows(), emb.features.cols());
    }
  }

  DenseMatrix user_gram;
  DenseMatrix feature_gram;
  if (implicit) {
    user_gram = gramian(emb.users);
    feature_gram = gramian(emb.features);
  }
  parallel_for(emb.items.rows(), [&](std::size_t begin, std::size_t end) {
    for (std::size_t j = begin; j < end; ++j) {
      const DenseVector v = item_update_nonprivate(
          static_cast<std::uint32_t>(j), emb.users, emb.features, ratings,
          features, w, hp, implicit ? &user_gram : nullptr,
          implicit ? &feature_gram : nullptr);
      std::copy(v.entries().begin(), v.entries().end(),
                emb.items.row(j).begin());
    }
  });
}

}  // namespace dpcmf
