#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "dpcmf/linalg.hpp"

namespace dpcmf {

// External id ↔ dense index map, indices assigned in first-appearance order.
class Vocabulary {
 public:
  std::uint32_t intern(const std::string& token);
  std::optional<std::uint32_t> find(const std::string& token) const;
  const std::string& token(std::uint32_t index) const {
    return tokens_[index];
  }
  std::size_t size() const { return tokens_.size(); }

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, std::uint32_t> index_;
};

struct Rating {
  std::uint32_t user;
  std::uint32_t item;
  double value;
};

struct FeatureEntry {
  std::uint32_t feature;
  std::uint32_t item;
  double value;
};

// Sparse user-item matrix over an observation set, with adjacency in both
// directions. Entries are kept sorted by (user, item); duplicates are
// resolved keeping the last occurrence in construction order. Immutable
// after construction.
class RatingDataset {
 public:
  RatingDataset() = default;
  RatingDataset(std::size_t num_users, std::size_t num_items,
                std::vector<Rating> entries, Vocabulary user_vocab,
                Vocabulary item_vocab);

  std::size_t num_users() const { return num_users_; }
  std::size_t num_items() const { return num_items_; }
  std::size_t size() const { return entries_.size(); }

  const std::vector<Rating>& entries() const { return entries_; }
  std::span<const Rating> by_user(std::uint32_t user) const;
  // Indices into entries() of the ratings of one item, user-ascending.
  std::span<const std::uint32_t> by_item(std::uint32_t item) const;
  std::size_t user_degree(std::uint32_t user) const;
  std::size_t item_degree(std::uint32_t item) const;

  const Vocabulary& user_vocab() const { return user_vocab_; }
  const Vocabulary& item_vocab() const { return item_vocab_; }

  // Same vocabulary and dimensions, new observation set.
  RatingDataset with_entries(std::vector<Rating> entries) const;
  // Transforms values in place without touching the observation set; the
  // adjacency structure (and hence any aligned weight vector) is preserved.
  RatingDataset with_transformed_values(
      const std::function<double(double)>& fn) const;

  std::uint64_t fingerprint() const;

 private:
  void build_index();

  std::size_t num_users_ = 0;
  std::size_t num_items_ = 0;
  std::vector<Rating> entries_;
  std::vector<std::size_t> user_offsets_;
  std::vector<std::uint32_t> item_index_;
  std::vector<std::size_t> item_offsets_;
  Vocabulary user_vocab_;
  Vocabulary item_vocab_;
};

// Sparse feature-item matrix; mirrors RatingDataset with features in the
// role of rows. One ingestion path serves every public-data modality
// (metadata tokens, item-item similarity, public users).
class FeatureDataset {
 public:
  FeatureDataset() = default;
  FeatureDataset(std::size_t num_features, std::size_t num_items,
                 std::vector<FeatureEntry> entries, Vocabulary feature_vocab,
                 Vocabulary item_vocab);

  static FeatureDataset empty(std::size_t num_items);

  std::size_t num_features() const { return num_features_; }
  std::size_t num_items() const { return num_items_; }
  std::size_t size() const { return entries_.size(); }

  const std::vector<FeatureEntry>& entries() const { return entries_; }
  std::span<const FeatureEntry> by_feature(std::uint32_t feature) const;
  std::span<const std::uint32_t> by_item(std::uint32_t item) const;
  std::size_t feature_degree(std::uint32_t feature) const;
  std::size_t item_degree(std::uint32_t item) const;

  const Vocabulary& feature_vocab() const { return feature_vocab_; }
  const Vocabulary& item_vocab() const { return item_vocab_; }

  std::uint64_t fingerprint() const;

 private:
  void build_index();

  std::size_t num_features_ = 0;
  std::size_t num_items_ = 0;
  std::vector<FeatureEntry> entries_;
  std::vector<std::size_t> feature_offsets_;
  std::vector<std::uint32_t> item_index_;
  std::vector<std::size_t> item_offsets_;
  Vocabulary feature_vocab_;
  Vocabulary item_vocab_;
};

// Delimited-triplet loader: user_id, item_id, rating per line, trailing
// fields ignored, delimiter auto-detected among "::", tab, comma.
RatingDataset load_ratings(const std::string& path);

// feature_id, item_id[, value] per line; a missing value defaults to 1.
// With an item vocabulary, unknown items error in strict mode and are
// dropped (with a tally) otherwise; without one, items are indexed
// standalone in first-appearance order. An empty file yields an empty
// dataset.
struct FeatureLoadResult {
  FeatureDataset data;
  std::size_t unknown_items_dropped = 0;
};
FeatureLoadResult load_features(const std::string& path);
FeatureLoadResult load_features(const std::string& path,
                                const Vocabulary& item_vocab, bool strict);

void write_vocabulary(const std::string& path, const Vocabulary& vocab);
Vocabulary read_vocabulary(const std::string& path);

struct SplitSpec {
  double train_fraction = 0.8;
  double validation_fraction = 0.1;
  double test_fraction = 0.1;
  std::uint64_t seed = 0;
  void validate() const;
};

struct SplitResult {
  RatingDataset train;
  RatingDataset validation;
  RatingDataset test;
};

// Assigns every observation to exactly one partition by a seeded uniform
// draw keyed on the observation's position in canonical order. All three
// partitions share the parent vocabulary and dimensions.
SplitResult split(const RatingDataset& ds, const SplitSpec& spec);

// Keeps entries with value ≥ threshold, rewriting them to 1.
RatingDataset binarize(const RatingDataset& ds, double threshold);

struct PopularityBuckets {
  std::size_t num_buckets = 0;
  std::vector<std::uint32_t> bucket_of_item;
  std::vector<std::size_t> item_counts;
  std::vector<std::size_t> rating_counts;
  std::vector<double> rating_share;
};

// Items sorted by descending training rating count (ties by ascending item
// index), partitioned into contiguous groups whose sizes differ by at most
// one. Bucket 0 holds the most popular items; items with zero ratings sort
// last but are always assigned.
PopularityBuckets popularity_buckets(const RatingDataset& train,
                                     std::size_t num_buckets);

// Fraction of feature-item observations per bucket; sums to 1 when the
// feature set is nonempty.
std::vector<double> feature_density_by_bucket(const FeatureDataset& fs,
                                              const PopularityBuckets& b);

struct FeaturePopularity {
  bool has_occurrences = false;
  double top_bucket_fraction = 0.0;
};

// Per feature, the fraction of its occurrences that fall in the top bucket.
std::vector<FeaturePopularity> fraction_popular_per_feature(
    const FeatureDataset& fs, const PopularityBuckets& b);

struct SyntheticSpec {
  std::size_t num_users = 0;
  std::size_t num_items = 0;
  std::size_t num_features = 0;
  std::size_t dim = 0;
  double rating_noise = 0.0;
  double feature_noise = 0.0;
  double feature_informativeness = 1.0;  // in [0, 1]
  std::size_t ratings_per_user = 0;      // capped at num_items
  std::size_t items_per_feature = 0;     // capped at num_items
  std::uint64_t seed = 0;
};

struct SyntheticData {
  RatingDataset ratings;
  FeatureDataset features;
  DenseMatrix true_users;
  DenseMatrix true_items;
  DenseMatrix true_features;
};

// Rank-dim planted model: M_ij = <u*_i, v*_j> + noise on a per-user uniform
// item sample; each feature row is, with probability
// feature_informativeness, a noisy linear probe of the true item embeddings
// and pure noise otherwise. Ground truth is returned for oracle checks.
SyntheticData generate_synthetic(const SyntheticSpec& spec);

}  // namespace dpcmf
