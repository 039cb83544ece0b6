#include "dpcmf/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <numeric>
#include <sstream>

#include "dpcmf/errors.hpp"
#include "dpcmf/rng.hpp"

namespace dpcmf {

namespace {

constexpr std::uint64_t kFnvOffset = 1469598103934665603ULL;
constexpr std::uint64_t kFnvPrime = 1099511628211ULL;

void fnv_mix(std::uint64_t& h, std::uint64_t word) {
  for (int i = 0; i < 8; ++i) {
    h ^= (word >> (8 * i)) & 0xFF;
    h *= kFnvPrime;
  }
}

std::string trim(const std::string& s) {
  const auto begin = s.find_first_not_of(" \t\r\n");
  if (begin == std::string::npos) {
    return "";
  }
  const auto end = s.find_last_not_of(" \t\r\n");
  return s.substr(begin, end - begin + 1);
}

// Delimiter auto-detection from the first non-blank line: "::" wins over
// tab, tab over comma.
std::string detect_delimiter(const std::string& line, const std::string& path,
                             std::size_t line_number) {
  if (line.find("::") != std::string::npos) {
    return "::";
  }
  if (line.find('\t') != std::string::npos) {
    return "\t";
  }
  if (line.find(',') != std::string::npos) {
    return ",";
  }
  throw ParseError("unrecognized-delimiter",
                   path + ":" + std::to_string(line_number));
}

std::vector<std::string> split_fields(const std::string& line,
                                      const std::string& delimiter) {
  std::vector<std::string> fields;
  std::size_t pos = 0;
  while (true) {
    const std::size_t next = line.find(delimiter, pos);
    if (next == std::string::npos) {
      fields.push_back(trim(line.substr(pos)));
      break;
    }
    fields.push_back(trim(line.substr(pos, next - pos)));
    pos = next + delimiter.size();
  }
  return fields;
}

double parse_value(const std::string& field, const std::string& path,
                   std::size_t line_number) {
  if (field.empty()) {
    throw ParseError("malformed-record",
                     path + ":" + std::to_string(line_number) +
                         " missing numeric field");
  }
  char* end = nullptr;
  const double value = std::strtod(field.c_str(), &end);
  if (end != field.c_str() + field.size() || !std::isfinite(value)) {
    throw ParseError("malformed-record",
                     path + ":" + std::to_string(line_number) +
                         " non-numeric value '" + field + "'");
  }
  return value;
}

template <typename Entry>
void dedup_last_wins(std::vector<Entry>& entries,
                     const std::function<std::pair<std::uint32_t,
                                                   std::uint32_t>(
                         const Entry&)>& key) {
  std::vector<std::uint32_t> order(entries.size());
  std::iota(order.begin(), order.end(), 0u);
  std::sort(order.begin(), order.end(),
            [&](std::uint32_t a, std::uint32_t b) {
              const auto ka = key(entries[a]);
              const auto kb = key(entries[b]);
              if (ka != kb) {
                return ka < kb;
              }
              return a < b;
            });
  std::vector<Entry> out;
  out.reserve(entries.size());
  for (std::size_t i = 0; i < order.size(); ++i) {
    const bool last_of_key =
        i + 1 == order.size() ||
        key(entries[order[i]]) != key(entries[order[i + 1]]);
    if (last_of_key) {
      out.push_back(entries[order[i]]);
    }
  }
  entries = std::move(out);
}

}  // namespace

std::uint32_t Vocabulary::intern(const std::string& token) {
  const auto it = index_.find(token);
  if (it != index_.end()) {
    return it->second;
  }
  const auto idx = static_cast<std::uint32_t>(tokens_.size());
  tokens_.push_back(token);
  index_.emplace(token, idx);
  return idx;
}

std::optional<std::uint32_t> Vocabulary::find(const std::string& token) const {
  const auto it = index_.find(token);
  if (it == index_.end()) {
    return std::nullopt;
  }
  return it->second;
}

RatingDataset::RatingDataset(std::size_t num_users, std::size_t num_items,
                             std::vector<Rating> entries,
                             Vocabulary user_vocab, Vocabulary item_vocab)
    : num_users_(num_users),
      num_items_(num_items),
      entries_(std::move(entries)),
      user_vocab_(std::move(user_vocab)),
      item_vocab_(std::move(item_vocab)) {
  for (const Rating& r : entries_) {
    if (r.user >= num_users_ || r.item >= num_items_) {
      throw ContractViolationError("index-out-of-range", "rating entry");
    }
    if (!std::isfinite(r.value)) {
      throw DataError("non-finite-value", "rating entry");
    }
  }
  dedup_last_wins<Rating>(entries_, [](const Rating& r) {
    return std::make_pair(r.user, r.item);
  });
  build_index();
}

void RatingDataset::build_index() {
  user_offsets_.assign(num_users_ + 1, 0);
  for (const Rating& r : entries_) {
    ++user_offsets_[r.user + 1];
  }
  for (std::size_t i = 0; i < num_users_; ++i) {
    user_offsets_[i + 1] += user_offsets_[i];
  }

  item_offsets_.assign(num_items_ + 1, 0);
  for (const Rating& r : entries_) {
    ++item_offsets_[r.item + 1];
  }
  for (std::size_t j = 0; j < num_items_; ++j) {
    item_offsets_[j + 1] += item_offsets_[j];
  }
  item_index_.assign(entries_.size(), 0);
  std::vector<std::size_t> cursor(item_offsets_.begin(),
                                  item_offsets_.end() - 1);
  for (std::size_t k = 0; k < entries_.size(); ++k) {
    item_index_[cursor[entries_[k].item]++] = static_cast<std::uint32_t>(k);
  }
}

std::span<const Rating> RatingDataset::by_user(std::uint32_t user) const {
  return {entries_.data() + user_offsets_[user],
          user_offsets_[user + 1] - user_offsets_[user]};
}

std::span<const std::uint32_t> RatingDataset::by_item(
    std::uint32_t item) const {
  return {item_index_.data() + item_offsets_[item],
          item_offsets_[item + 1] - item_offsets_[item]};
}

std::size_t RatingDataset::user_degree(std::uint32_t user) const {
  return user_offsets_[user + 1] - user_offsets_[user];
}

std::size_t RatingDataset::item_degree(std::uint32_t item) const {
  return item_offsets_[item + 1] - item_offsets_[item];
}

RatingDataset RatingDataset::with_entries(std::vector<Rating> entries) const {
  return RatingDataset(num_users_, num_items_, std::move(entries),
                       user_vocab_, item_vocab_);
}

RatingDataset RatingDataset::with_transformed_values(
    const std::function<double(double)>& fn) const {
  RatingDataset out = *this;
  for (Rating& r : out.entries_) {
    r.value = fn(r.value);
    if (!std::isfinite(r.value)) {
      throw NumericalError("non-finite-value", "value transform");
    }
  }
  return out;
}

std::uint64_t RatingDataset::fingerprint() const {
  std::uint64_t h = kFnvOffset;
  fnv_mix(h, num_users_);
  fnv_mix(h, num_items_);
  for (const Rating& r : entries_) {
    fnv_mix(h, r.user);
    fnv_mix(h, r.item);
    std::uint64_t bits;
    static_assert(sizeof(bits) == sizeof(r.value));
    std::memcpy(&bits, &r.value, sizeof(bits));
    fnv_mix(h, bits);
  }
  return h;
}

FeatureDataset::FeatureDataset(std::size_t num_features,
                               std::size_t num_items,
                               std::vector<FeatureEntry> entries,
                               Vocabulary feature_vocab,
                               Vocabulary item_vocab)
    : num_features_(num_features),
      num_items_(num_items),
      entries_(std::move(entries)),
      feature_vocab_(std::move(feature_vocab)),
      item_vocab_(std::move(item_vocab)) {
  for (const FeatureEntry& e : entries_) {
    if (e.feature >= num_features_ || e.item >= num_items_) {
      throw ContractViolationError("index-out-of-range", "feature entry");
    }
    if (!std::isfinite(e.value)) {
      throw DataError("non-finite-value", "feature entry");
    }
  }
  dedup_last_wins<FeatureEntry>(entries_, [](const FeatureEntry& e) {
    return std::make_pair(e.feature, e.item);
  });
  build_index();
}

FeatureDataset FeatureDataset::empty(std::size_t num_items) {
  return FeatureDataset(0, num_items, {}, Vocabulary(), Vocabulary());
}

void FeatureDataset::build_index() {
  feature_offsets_.assign(num_features_ + 1, 0);
  for (const FeatureEntry& e : entries_) {
    ++feature_offsets_[e.feature + 1];
  }
  for (std::size_t k = 0; k < num_features_; ++k) {
    feature_offsets_[k + 1] += feature_offsets_[k];
  }

  item_offsets_.assign(num_items_ + 1, 0);
  for (const FeatureEntry& e : entries_) {
    ++item_offsets_[e.item + 1];
  }
  for (std::size_t j = 0; j < num_items_; ++j) {
    item_offsets_[j + 1] += item_offsets_[j];
  }
  item_index_.assign(entries_.size(), 0);
  std::vector<std::size_t> cursor(item_offsets_.begin(),
                                  item_offsets_.end() - 1);
  for (std::size_t k = 0; k < entries_.size(); ++k) {
    item_index_[cursor[entries_[k].item]++] = static_cast<std::uint32_t>(k);
  }
}

std::span<const FeatureEntry> FeatureDataset::by_feature(
    std::uint32_t feature) const {
  return {entries_.data() + feature_offsets_[feature],
          feature_offsets_[feature + 1] - feature_offsets_[feature]};
}

std::span<const std::uint32_t> FeatureDataset::by_item(
    std::uint32_t item) const {
  return {item_index_.data() + item_offsets_[item],
          item_offsets_[item + 1] - item_offsets_[item]};
}

std::size_t FeatureDataset::feature_degree(std::uint32_t feature) const {
  return feature_offsets_[feature + 1] - feature_offsets_[feature];
}

std::size_t FeatureDataset::item_degree(std::uint32_t item) const {
  return item_offsets_[item + 1] - item_offsets_[item];
}

std::uint64_t FeatureDataset::fingerprint() const {
  std::uint64_t h = kFnvOffset;
  fnv_mix(h, num_features_);
  fnv_mix(h, num_items_);
  for (const FeatureEntry& e : entries_) {
    fnv_mix(h, e.feature);
    fnv_mix(h, e.item);
    std::uint64_t bits;
    std::memcpy(&bits, &e.value, sizeof(bits));
    fnv_mix(h, bits);
  }
  return h;
}

RatingDataset load_ratings(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    throw DataError("cannot-open-file", path);
  }
  Vocabulary users;
  Vocabulary items;
  std::vector<Rating> entries;
  std::string delimiter;
  std::string line;
  std::size_t line_number = 0;
  while (std::getline(in, line)) {
    ++line_number;
    if (trim(line).empty()) {
      continue;
    }
    if (delimiter.empty()) {
      delimiter = detect_delimiter(line, path, line_number);
    }
    const auto fields = split_fields(line, delimiter);
    if (fields.size() < 3) {
      throw ParseError("malformed-record",
                       path + ":" + std::to_string(line_number) +
                           " expected user, item, rating");
    }
    if (fields[0].empty() || fields[1].empty()) {
      throw ParseError("malformed-record",
                       path + ":" + std::to_string(line_number) +
                           " empty id field");
    }
    const double value = parse_value(fields[2], path, line_number);
    entries.push_back({users.intern(fields[0]), items.intern(fields[1]),
                       value});
  }
  if (entries.empty()) {
    throw DataError("empty-dataset", path);
  }
  const std::size_t num_users = users.size();
  const std::size_t num_items = items.size();
  return RatingDataset(num_users, num_items, std::move(entries),
                       std::move(users), std::move(items));
}

namespace {

FeatureLoadResult load_features_impl(const std::string& path,
                                     const Vocabulary* item_vocab,
                                     bool strict) {
  std::ifstream in(path);
  if (!in) {
    throw DataError("cannot-open-file", path);
  }
  Vocabulary features;
  Vocabulary standalone_items;
  std::vector<FeatureEntry> entries;
  std::string delimiter;
  std::string line;
  std::size_t line_number = 0;
  std::size_t dropped = 0;
  while (std::getline(in, line)) {
    ++line_number;
    if (trim(line).empty()) {
      continue;
    }
    if (delimiter.empty()) {
      delimiter = detect_delimiter(line, path, line_number);
    }
    const auto fields = split_fields(line, delimiter);
    if (fields.size() < 2 || fields[0].empty() || fields[1].empty()) {
      throw ParseError("malformed-record",
                       path + ":" + std::to_string(line_number) +
                           " expected feature, item[, value]");
    }
    const double value =
        fields.size() >= 3 && !fields[2].empty()
            ? parse_value(fields[2], path, line_number)
            : 1.0;
    std::uint32_t item_index;
    if (item_vocab != nullptr) {
      const auto found = item_vocab->find(fields[1]);
      if (!found) {
        if (strict) {
          throw DataError("unknown-item",
                          path + ":" + std::to_string(line_number) + " '" +
                              fields[1] + "'");
        }
        ++dropped;
        continue;
      }
      item_index = *found;
    } else {
      item_index = standalone_items.intern(fields[1]);
    }
    entries.push_back({features.intern(fields[0]), item_index, value});
  }
  const std::size_t num_items =
      item_vocab != nullptr ? item_vocab->size() : standalone_items.size();
  const std::size_t num_features = features.size();
  Vocabulary items =
      item_vocab != nullptr ? *item_vocab : std::move(standalone_items);
  FeatureLoadResult out{FeatureDataset(num_features, num_items,
                                       std::move(entries),
                                       std::move(features), std::move(items)),
                        dropped};
  return out;
}

}  // namespace

FeatureLoadResult load_features(const std::string& path) {
  return load_features_impl(path, nullptr, false);
}

FeatureLoadResult load_features(const std::string& path,
                                const Vocabulary& item_vocab, bool strict) {
  return load_features_impl(path, &item_vocab, strict);
}

void write_vocabulary(const std::string& path, const Vocabulary& vocab) {
  std::ofstream out(path);
  if (!out) {
    throw DataError("cannot-open-file", path);
  }
  for (std::size_t i = 0; i < vocab.size(); ++i) {
    out << vocab.token(static_cast<std::uint32_t>(i)) << '\t' << i << '\n';
  }
}

Vocabulary read_vocabulary(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    throw DataError("cannot-open-file", path);
  }
  Vocabulary vocab;
  std::string line;
  std::size_t line_number = 0;
  while (std::getline(in, line)) {
    ++line_number;
    if (trim(line).empty()) {
      continue;
    }
    const auto fields = split_fields(line, "\t");
    if (fields.size() != 2) {
      throw ParseError("malformed-record",
                       path + ":" + std::to_string(line_number));
    }
    const auto idx = vocab.intern(fields[0]);
    if (idx != static_cast<std::uint32_t>(
                   std::strtoul(fields[1].c_str(), nullptr, 10))) {
      throw ParseError("vocabulary-index-mismatch",
                       path + ":" + std::to_string(line_number));
    }
  }
  return vocab;
}

void SplitSpec::validate() const {
  const double fractions[] = {train_fraction, validation_fraction,
                              test_fraction};
  double sum = 0.0;
  for (double f : fractions) {
    if (!(f >= 0.0 && f <= 1.0)) {
      throw ConfigError("invalid-split-fraction", std::to_string(f));
    }
    sum += f;
  }
  if (std::abs(sum - 1.0) > 1e-12) {
    throw ConfigError("split-fractions-must-sum-to-one", std::to_string(sum));
  }
}

SplitResult split(const RatingDataset& ds, const SplitSpec& spec) {
  spec.validate();
  std::vector<Rating> train;
  std::vector<Rating> validation;
  std::vector<Rating> test;
  const auto& entries = ds.entries();
  for (std::size_t k = 0; k < entries.size(); ++k) {
    RngStream stream(spec.seed, 0, static_cast<std::uint32_t>(k));
    const double u = stream.next_uniform();
    if (u < spec.train_fraction) {
      train.push_back(entries[k]);
    } else if (u < spec.train_fraction + spec.validation_fraction) {
      validation.push_back(entries[k]);
    } else {
      test.push_back(entries[k]);
    }
  }
  return {ds.with_entries(std::move(train)),
          ds.with_entries(std::move(validation)),
          ds.with_entries(std::move(test))};
}

RatingDataset binarize(const RatingDataset& ds, double threshold) {
  std::vector<Rating> kept;
  for (const Rating& r : ds.entries()) {
    if (r.value >= threshold) {
      kept.push_back({r.user, r.item, 1.0});
    }
  }
  return ds.with_entries(std::move(kept));
}

PopularityBuckets popularity_buckets(const RatingDataset& train,
                                     std::size_t num_buckets) {
  if (num_buckets < 1) {
    throw ConfigError("invalid-bucket-count", std::to_string(num_buckets));
  }
  const std::size_t n = train.num_items();
  std::vector<std::size_t> counts(n, 0);
  for (const Rating& r : train.entries()) {
    ++counts[r.item];
  }
  std::vector<std::uint32_t> order(n);
  std::iota(order.begin(), order.end(), 0u);
  std::sort(order.begin(), order.end(),
            [&](std::uint32_t a, std::uint32_t b) {
              if (counts[a] != counts[b]) {
                return counts[a] > counts[b];
              }
              return a < b;
            });

  PopularityBuckets out;
  out.num_buckets = std::min(num_buckets, std::max<std::size_t>(n, 1));
  out.bucket_of_item.assign(n, 0);
  out.item_counts.assign(out.num_buckets, 0);
  out.rating_counts.assign(out.num_buckets, 0);
  const std::size_t base = n / out.num_buckets;
  const std::size_t extra = n % out.num_buckets;
  std::size_t pos = 0;
  for (std::size_t b = 0; b < out.num_buckets; ++b) {
    const std::size_t len = base + (b < extra ? 1 : 0);
    for (std::size_t i = 0; i < len; ++i, ++pos) {
      const std::uint32_t item = order[pos];
      out.bucket_of_item[item] = static_cast<std::uint32_t>(b);
      ++out.item_counts[b];
      out.rating_counts[b] += counts[item];
    }
  }
  const std::size_t total = train.size();
  out.rating_share.assign(out.num_buckets, 0.0);
  if (total > 0) {
    for (std::size_t b = 0; b < out.num_buckets; ++b) {
      out.rating_share[b] =
          static_cast<double>(out.rating_counts[b]) / total;
    }
  }
  return out;
}

std::vector<double> feature_density_by_bucket(const FeatureDataset& fs,
                                              const PopularityBuckets& b) {
  if (fs.num_items() > b.bucket_of_item.size()) {
    throw ContractViolationError("bucket-assignment-incomplete",
                                 "feature items exceed bucketed items");
  }
  std::vector<double> density(b.num_buckets, 0.0);
  if (fs.size() == 0) {
    return density;
  }
  std::vector<std::size_t> counts(b.num_buckets, 0);
  for (const FeatureEntry& e : fs.entries()) {
    ++counts[b.bucket_of_item[e.item]];
  }
  for (std::size_t i = 0; i < b.num_buckets; ++i) {
    density[i] = static_cast<double>(counts[i]) / fs.size();
  }
  return density;
}

std::vector<FeaturePopularity> fraction_popular_per_feature(
    const FeatureDataset& fs, const PopularityBuckets& b) {
  if (fs.num_items() > b.bucket_of_item.size()) {
    throw ContractViolationError("bucket-assignment-incomplete",
                                 "feature items exceed bucketed items");
  }
  std::vector<FeaturePopularity> out(fs.num_features());
  for (std::uint32_t k = 0; k < fs.num_features(); ++k) {
    const auto row = fs.by_feature(k);
    if (row.empty()) {
      continue;
    }
    std::size_t top = 0;
    for (const FeatureEntry& e : row) {
      if (b.bucket_of_item[e.item] == 0) {
        ++top;
      }
    }
    out[k].has_occurrences = true;
    out[k].top_bucket_fraction = static_cast<double>(top) / row.size();
  }
  return out;
}

namespace {

DenseMatrix sample_embedding_rows(std::size_t rows, std::size_t dim,
                                  std::uint64_t seed, std::uint32_t epoch) {
  DenseMatrix m(rows, dim);
  const double scale = 1.0 / std::sqrt(static_cast<double>(dim));
  for (std::size_t r = 0; r < rows; ++r) {
    RngStream stream(seed, epoch, static_cast<std::uint32_t>(r));
    for (std::size_t c = 0; c < dim; ++c) {
      m(r, c) = scale * stream.next_normal();
    }
  }
  return m;
}

// Distinct uniform picks from [0, n) by partial Fisher–Yates.
std::vector<std::uint32_t> sample_distinct(std::size_t count, std::size_t n,
                                           RngStream& stream) {
  std::vector<std::uint32_t> pool(n);
  std::iota(pool.begin(), pool.end(), 0u);
  const std::size_t k = std::min(count, n);
  for (std::size_t t = 0; t < k; ++t) {
    const std::size_t pick =
        t + static_cast<std::size_t>(stream.next_below(n - t));
    std::swap(pool[t], pool[pick]);
  }
  pool.resize(k);
  return pool;
}

Vocabulary numeric_vocab(std::size_t n) {
  Vocabulary v;
  for (std::size_t i = 0; i < n; ++i) {
    v.intern(std::to_string(i));
  }
  return v;
}

}  // namespace

SyntheticData generate_synthetic(const SyntheticSpec& spec) {
  if (spec.num_users < 1 || spec.num_items < 1 || spec.dim < 1) {
    throw ConfigError("invalid-synthetic-dimensions", "");
  }
  if (spec.feature_informativeness < 0.0 ||
      spec.feature_informativeness > 1.0) {
    throw ConfigError("invalid-informativeness",
                      std::to_string(spec.feature_informativeness));
  }

  SyntheticData out;
  out.true_users =
      sample_embedding_rows(spec.num_users, spec.dim, spec.seed, 1);
  out.true_items =
      sample_embedding_rows(spec.num_items, spec.dim, spec.seed, 2);
  out.true_features =
      sample_embedding_rows(spec.num_features, spec.dim, spec.seed, 3);

  std::vector<Rating> ratings;
  const std::size_t per_user = std::min(
      spec.ratings_per_user == 0 ? spec.num_items : spec.ratings_per_user,
      spec.num_items);
  ratings.reserve(spec.num_users * per_user);
  for (std::uint32_t i = 0; i < spec.num_users; ++i) {
    RngStream stream(spec.seed, 4, i);
    const auto picks = sample_distinct(per_user, spec.num_items, stream);
    for (const std::uint32_t j : picks) {
      const double mean =
          dot(out.true_users.row(i), out.true_items.row(j));
      const double value = mean + spec.rating_noise * stream.next_normal();
      ratings.push_back({i, j, value});
    }
  }
  out.ratings = RatingDataset(spec.num_users, spec.num_items,
                              std::move(ratings),
                              numeric_vocab(spec.num_users),
                              numeric_vocab(spec.num_items));

  std::vector<FeatureEntry> features;
  const std::size_t per_feature = std::min(
      spec.items_per_feature == 0 ? spec.num_items : spec.items_per_feature,
      spec.num_items);
  const double pure_noise_scale =
      1.0 / std::sqrt(static_cast<double>(spec.dim));
  for (std::uint32_t k = 0; k < spec.num_features; ++k) {
    RngStream stream(spec.seed, 5, k);
    const bool informative =
        stream.next_uniform() < spec.feature_informativeness;
    const auto picks = sample_distinct(per_feature, spec.num_items, stream);
    for (const std::uint32_t j : picks) {
      double value;
      if (informative) {
        value = dot(out.true_features.row(k), out.true_items.row(j)) +
                spec.feature_noise * stream.next_normal();
      } else {
        value = pure_noise_scale * stream.next_normal();
      }
      features.push_back({k, j, value});
    }
  }
  out.features = FeatureDataset(spec.num_features, spec.num_items,
                                std::move(features),
                                numeric_vocab(spec.num_features),
                                numeric_vocab(spec.num_items));
  return out;
}

}  // namespace dpcmf
