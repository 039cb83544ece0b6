#include "dpcmf/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "dpcmf/errors.hpp"

namespace dpcmf {

namespace {

namespace fs = std::filesystem;

std::string trim(const std::string& s) {
  const auto begin = s.find_first_not_of(" \t\r\n");
  if (begin == std::string::npos) {
    return "";
  }
  const auto end = s.find_last_not_of(" \t\r\n");
  return s.substr(begin, end - begin + 1);
}

double parse_double(const std::string& key, const std::string& value) {
  char* end = nullptr;
  const double v = std::strtod(value.c_str(), &end);
  if (end != value.c_str() + value.size() || value.empty() ||
      !std::isfinite(v)) {
    throw ConfigError("invalid-config-value", key + " = " + value);
  }
  return v;
}

long parse_long(const std::string& key, const std::string& value) {
  char* end = nullptr;
  const long v = std::strtol(value.c_str(), &end, 10);
  if (end != value.c_str() + value.size() || value.empty()) {
    throw ConfigError("invalid-config-value", key + " = " + value);
  }
  return v;
}

std::uint64_t parse_u64(const std::string& key, const std::string& value) {
  char* end = nullptr;
  const unsigned long long v = std::strtoull(value.c_str(), &end, 10);
  if (end != value.c_str() + value.size() || value.empty()) {
    throw ConfigError("invalid-config-value", key + " = " + value);
  }
  return v;
}

bool parse_bool(const std::string& key, const std::string& value) {
  if (value == "true" || value == "1") {
    return true;
  }
  if (value == "false" || value == "0") {
    return false;
  }
  throw ConfigError("invalid-config-value", key + " = " + value);
}

std::vector<double> parse_double_list(const std::string& key,
                                      const std::string& value) {
  std::vector<double> out;
  std::istringstream is(value);
  std::string token;
  while (is >> token) {
    out.push_back(parse_double(key, token));
  }
  return out;
}

std::string format_double(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

const std::set<std::string>& known_keys() {
  static const std::set<std::string> keys = {
      "data.ratings",
      "data.features",
      "data.strict_features",
      "data.binarize_threshold",
      "split.train",
      "split.validation",
      "split.test",
      "split.seed",
      "train.mode",
      "train.dim",
      "train.iters",
      "train.lambda",
      "train.lambda_f",
      "train.alpha",
      "train.implicit_weight",
      "train.init_scale",
      "train.gamma_m",
      "train.gamma_u",
      "train.epsilon",
      "train.delta",
      "train.seed",
      "train.weighting",
      "sweep.alpha_grid",
      "sweep.lambda_f_grid",
      "eval.buckets",
      "eval.clamp_low",
      "eval.clamp_high",
      "output.dir",
  };
  return keys;
}

void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) {
    throw DataError("cannot-open-file", path);
  }
  out << text;
}

std::size_t count_lines(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    throw DataError("cannot-open-file", path);
  }
  std::size_t lines = 0;
  std::string line;
  while (std::getline(in, line)) {
    ++lines;
  }
  return lines;
}

}  // namespace

ConfigDoc ConfigDoc::parse_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    throw ConfigError("cannot-open-config", path);
  }
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return parse_string(buffer.str(), path);
}

ConfigDoc ConfigDoc::parse_string(const std::string& text,
                                  const std::string& origin) {
  ConfigDoc doc;
  std::istringstream in(text);
  std::string line;
  std::string section;
  std::size_t line_number = 0;
  while (std::getline(in, line)) {
    ++line_number;
    const std::string stripped = trim(line);
    if (stripped.empty() || stripped[0] == '#') {
      continue;
    }
    if (stripped.front() == '[') {
      if (stripped.back() != ']' || stripped.size() < 3) {
        throw ConfigError("malformed-config-section",
                          origin + ":" + std::to_string(line_number));
      }
      section = trim(stripped.substr(1, stripped.size() - 2));
      continue;
    }
    const auto eq = stripped.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("malformed-config-line",
                        origin + ":" + std::to_string(line_number));
    }
    const std::string key = trim(stripped.substr(0, eq));
    const std::string value = trim(stripped.substr(eq + 1));
    if (key.empty()) {
      throw ConfigError("malformed-config-line",
                        origin + ":" + std::to_string(line_number));
    }
    doc.set(section.empty() ? key : section + "." + key, value);
  }
  return doc;
}

void ConfigDoc::set(const std::string& dotted_key, const std::string& value) {
  items_.emplace_back(dotted_key, value);
  values_[dotted_key] = value;
}

std::optional<std::string> ConfigDoc::get(
    const std::string& dotted_key) const {
  const auto it = values_.find(dotted_key);
  if (it == values_.end()) {
    return std::nullopt;
  }
  return it->second;
}

std::vector<std::pair<std::string, std::string>> ExperimentPlan::resolved()
    const {
  std::vector<std::pair<std::string, std::string>> kv;
  kv.emplace_back("data.ratings", ratings_path);
  kv.emplace_back("data.features", features_path);
  kv.emplace_back("data.strict_features", strict_features ? "true" : "false");
  kv.emplace_back("data.binarize_threshold",
                  binarize_threshold ? format_double(*binarize_threshold)
                                     : "none");
  kv.emplace_back("split.train", format_double(split.train_fraction));
  kv.emplace_back("split.validation",
                  format_double(split.validation_fraction));
  kv.emplace_back("split.test", format_double(split.test_fraction));
  kv.emplace_back("split.seed", std::to_string(split.seed));
  for (const auto& [key, value] : train.resolved()) {
    kv.emplace_back("train." + key, value);
  }
  std::ostringstream alphas;
  for (std::size_t i = 0; i < sweep_alpha.size(); ++i) {
    alphas << (i ? " " : "") << format_double(sweep_alpha[i]);
  }
  std::ostringstream lambdas;
  for (std::size_t i = 0; i < sweep_lambda_f.size(); ++i) {
    lambdas << (i ? " " : "") << format_double(sweep_lambda_f[i]);
  }
  kv.emplace_back("sweep.alpha_grid", alphas.str());
  kv.emplace_back("sweep.lambda_f_grid", lambdas.str());
  kv.emplace_back("eval.buckets", std::to_string(eval_buckets));
  kv.emplace_back("eval.clamp_low",
                  clamp_low ? format_double(*clamp_low) : "none");
  kv.emplace_back("eval.clamp_high",
                  clamp_high ? format_double(*clamp_high) : "none");
  kv.emplace_back("output.dir", output_dir);
  return kv;
}

ExperimentPlan resolve_plan(const ConfigDoc& doc) {
  for (const auto& [key, value] : doc.items()) {
    if (known_keys().find(key) == known_keys().end()) {
      throw ConfigError("unknown-config-key", key);
    }
  }

  ExperimentPlan plan;
  if (const auto v = doc.get("data.ratings")) {
    plan.ratings_path = *v;
  }
  if (const auto v = doc.get("data.features")) {
    plan.features_path = *v;
  }
  if (const auto v = doc.get("data.strict_features")) {
    plan.strict_features = parse_bool("data.strict_features", *v);
  }
  if (const auto v = doc.get("data.binarize_threshold")) {
    plan.binarize_threshold = parse_double("data.binarize_threshold", *v);
  }
  if (const auto v = doc.get("split.train")) {
    plan.split.train_fraction = parse_double("split.train", *v);
  }
  if (const auto v = doc.get("split.validation")) {
    plan.split.validation_fraction = parse_double("split.validation", *v);
  }
  if (const auto v = doc.get("split.test")) {
    plan.split.test_fraction = parse_double("split.test", *v);
  }
  if (const auto v = doc.get("split.seed")) {
    plan.split.seed = parse_u64("split.seed", *v);
  }

  if (const auto v = doc.get("train.mode")) {
    plan.train.mode = parse_train_mode(*v);
  }
  if (const auto v = doc.get("train.dim")) {
    const long dim = parse_long("train.dim", *v);
    if (dim < 1) {
      throw ConfigError("invalid-dim", *v);
    }
    plan.train.dim = static_cast<std::size_t>(dim);
  }
  if (const auto v = doc.get("train.iters")) {
    plan.train.iterations = static_cast<int>(parse_long("train.iters", *v));
  }
  if (const auto v = doc.get("train.lambda")) {
    plan.train.lambda = parse_double("train.lambda", *v);
  }
  if (const auto v = doc.get("train.lambda_f")) {
    plan.train.lambda_f = parse_double("train.lambda_f", *v);
  }
  if (const auto v = doc.get("train.alpha")) {
    plan.train.alpha = parse_double("train.alpha", *v);
  }
  if (const auto v = doc.get("train.implicit_weight")) {
    plan.train.implicit_weight = parse_double("train.implicit_weight", *v);
  }
  if (const auto v = doc.get("train.init_scale")) {
    plan.train.init_scale = parse_double("train.init_scale", *v);
  }
  if (const auto v = doc.get("train.gamma_m")) {
    plan.train.max_rating = parse_double("train.gamma_m", *v);
  }
  if (const auto v = doc.get("train.gamma_u")) {
    plan.train.max_user_norm = parse_double("train.gamma_u", *v);
  }
  if (const auto v = doc.get("train.epsilon")) {
    plan.train.epsilon = parse_double("train.epsilon", *v);
  }
  if (const auto v = doc.get("train.delta")) {
    plan.train.delta = parse_double("train.delta", *v);
  }
  if (const auto v = doc.get("train.seed")) {
    plan.train.seed = parse_u64("train.seed", *v);
  }
  if (const auto v = doc.get("train.weighting")) {
    plan.train.weighting = parse_weighting_mode(*v);
  } else if (is_private(plan.train.mode)) {
    plan.train.weighting = WeightingMode::kUniform;
  }

  if (const auto v = doc.get("sweep.alpha_grid")) {
    plan.sweep_alpha = parse_double_list("sweep.alpha_grid", *v);
  }
  if (const auto v = doc.get("sweep.lambda_f_grid")) {
    plan.sweep_lambda_f = parse_double_list("sweep.lambda_f_grid", *v);
  }
  if (const auto v = doc.get("eval.buckets")) {
    const long buckets = parse_long("eval.buckets", *v);
    if (buckets < 1) {
      throw ConfigError("invalid-bucket-count", *v);
    }
    plan.eval_buckets = static_cast<std::size_t>(buckets);
  }
  if (const auto v = doc.get("eval.clamp_low")) {
    plan.clamp_low = parse_double("eval.clamp_low", *v);
  }
  if (const auto v = doc.get("eval.clamp_high")) {
    plan.clamp_high = parse_double("eval.clamp_high", *v);
  }
  if (const auto v = doc.get("output.dir")) {
    plan.output_dir = *v;
  }

  if (plan.ratings_path.empty()) {
    throw ConfigError("missing-config-key", "data.ratings");
  }
  if (!fs::exists(plan.ratings_path)) {
    throw ConfigError("missing-data-file", plan.ratings_path);
  }
  if (!plan.features_path.empty() && !fs::exists(plan.features_path)) {
    throw ConfigError("missing-data-file", plan.features_path);
  }
  plan.split.validate();
  plan.train.validate();
  return plan;
}

LoadedData load_experiment_data(const ExperimentPlan& plan) {
  RatingDataset full = load_ratings(plan.ratings_path);
  if (plan.binarize_threshold) {
    full = binarize(full, *plan.binarize_threshold);
  }
  if (!plan.output_dir.empty()) {
    fs::create_directories(plan.output_dir);
    write_vocabulary(plan.output_dir + "/user_vocab.tsv", full.user_vocab());
    write_vocabulary(plan.output_dir + "/item_vocab.tsv", full.item_vocab());
  }
  SplitResult parts = split(full, plan.split);
  FeatureDataset features = FeatureDataset::empty(full.num_items());
  if (!plan.features_path.empty()) {
    features = load_features(plan.features_path, full.item_vocab(),
                             plan.strict_features)
                   .data;
  }
  return {std::move(parts.train), std::move(parts.validation),
          std::move(parts.test), std::move(features)};
}

void run_synth(const SynthCommandArgs& args) {
  fs::create_directories(args.output_dir);
  const SyntheticData data = generate_synthetic(args.spec);

  std::ostringstream ratings;
  ratings.precision(17);
  for (const Rating& r : data.ratings.entries()) {
    ratings << data.ratings.user_vocab().token(r.user) << '\t'
            << data.ratings.item_vocab().token(r.item) << '\t' << r.value
            << '\n';
  }
  write_text_file(args.output_dir + "/ratings.tsv", ratings.str());

  std::ostringstream features;
  features.precision(17);
  for (const FeatureEntry& e : data.features.entries()) {
    features << data.features.feature_vocab().token(e.feature) << '\t'
             << data.features.item_vocab().token(e.item) << '\t' << e.value
             << '\n';
  }
  write_text_file(args.output_dir + "/features.tsv", features.str());

  std::ostringstream truth;
  truth.precision(17);
  const auto dump_rows = [&truth](const char* tag, const DenseMatrix& m) {
    for (std::size_t r = 0; r < m.rows(); ++r) {
      truth << tag << '\t' << r;
      for (std::size_t c = 0; c < m.cols(); ++c) {
        truth << '\t' << m(r, c);
      }
      truth << '\n';
    }
  };
  dump_rows("user", data.true_users);
  dump_rows("item", data.true_items);
  dump_rows("feature", data.true_features);
  write_text_file(args.output_dir + "/truth_embeddings.tsv", truth.str());

  std::ostringstream cfg;
  cfg << "[synth]\n"
      << "users = " << args.spec.num_users << '\n'
      << "items = " << args.spec.num_items << '\n'
      << "features = " << args.spec.num_features << '\n'
      << "dim = " << args.spec.dim << '\n'
      << "rating_noise = " << format_double(args.spec.rating_noise) << '\n'
      << "feature_noise = " << format_double(args.spec.feature_noise) << '\n'
      << "informativeness = "
      << format_double(args.spec.feature_informativeness) << '\n'
      << "ratings_per_user = " << args.spec.ratings_per_user << '\n'
      << "items_per_feature = " << args.spec.items_per_feature << '\n'
      << "seed = " << args.spec.seed << '\n';
  write_text_file(args.output_dir + "/synth.cfg", cfg.str());

  std::ostringstream manifest;
  for (const char* name :
       {"ratings.tsv", "features.tsv", "truth_embeddings.tsv", "synth.cfg"}) {
    manifest << name << '\t'
             << count_lines(args.output_dir + "/" + name) << '\n';
  }
  manifest << "users\t" << args.spec.num_users << '\n';
  manifest << "items\t" << args.spec.num_items << '\n';
  manifest << "feature_rows\t" << args.spec.num_features << '\n';
  write_text_file(args.output_dir + "/manifest.txt", manifest.str());
}

namespace {

std::string kv_lines(
    const std::vector<std::pair<std::string, std::string>>& kv) {
  std::ostringstream os;
  for (const auto& [key, value] : kv) {
    os << key << " = " << value << '\n';
  }
  return os.str();
}

std::string iteration_record_line(const IterationRecord& r) {
  std::ostringstream os;
  os.precision(17);
  os << "record=iteration iter=" << r.iteration << " train_loss="
     << r.train_loss;
  if (r.validation_rmse) {
    os << " val_rmse=" << *r.validation_rmse;
  }
  os << " wall_ms=" << r.wall_ms;
  return os.str();
}

void write_matrix_tsv(const std::string& path, const DenseMatrix& m) {
  std::ostringstream os;
  os.precision(17);
  for (std::size_t r = 0; r < m.rows(); ++r) {
    for (std::size_t c = 0; c < m.cols(); ++c) {
      if (c > 0) {
        os << '\t';
      }
      os << m(r, c);
    }
    os << '\n';
  }
  write_text_file(path, os.str());
}

}  // namespace

TrainCommandResult run_train(const ExperimentPlan& plan,
                             const ProgressFn& progress) {
  const LoadedData data = load_experiment_data(plan);
  TrainReport report = train(plan.train, data.train, &data.validation,
                             data.features, progress);

  if (!plan.output_dir.empty()) {
    fs::create_directories(plan.output_dir);
    write_text_file(plan.output_dir + "/resolved_config.cfg",
                    kv_lines(plan.resolved()));

    std::ostringstream metrics_txt;
    for (const IterationRecord& r : report.iterations) {
      metrics_txt << iteration_record_line(r) << '\n';
    }
    write_text_file(plan.output_dir + "/metrics.txt", metrics_txt.str());

    std::ostringstream metrics_csv;
    metrics_csv << "iteration,train_loss,val_rmse,wall_ms\n";
    metrics_csv.precision(17);
    for (const IterationRecord& r : report.iterations) {
      metrics_csv << r.iteration << ',' << r.train_loss << ',';
      if (r.validation_rmse) {
        metrics_csv << *r.validation_rmse;
      }
      metrics_csv << ',' << r.wall_ms << '\n';
    }
    write_text_file(plan.output_dir + "/metrics.csv", metrics_csv.str());

    write_matrix_tsv(plan.output_dir + "/V.tsv", report.item_embeddings);
    write_matrix_tsv(plan.output_dir + "/F.tsv", report.feature_embeddings);
    if (report.user_embeddings) {
      write_matrix_tsv(plan.output_dir + "/U.tsv", *report.user_embeddings);
    }
    save_checkpoint(plan.output_dir + "/checkpoint.txt",
                    checkpoint_from_report(report));
  }
  return {std::move(report)};
}

EvalCommandResult run_eval(const ExperimentPlan& plan,
                           const std::string& checkpoint_path) {
  const LoadedData data = load_experiment_data(plan);
  const Checkpoint ckpt = load_checkpoint(checkpoint_path);
  if (ckpt.item_embeddings.rows() != data.train.num_items()) {
    throw DataError("checkpoint-data-mismatch",
                    "item count differs from the checkpoint");
  }
  const PopularityBuckets buckets =
      popularity_buckets(data.train, plan.eval_buckets);
  MetricReport report =
      evaluate_model(ckpt.item_embeddings, data.train, data.test, buckets,
                     plan.train.lambda, plan.clamp_low, plan.clamp_high);
  report.config_echo = plan.resolved();

  if (!plan.output_dir.empty()) {
    fs::create_directories(plan.output_dir);
    std::ostringstream txt;
    txt << to_kv_record(report) << '\n';
    txt << kv_lines(report.config_echo);
    write_text_file(plan.output_dir + "/report.txt", txt.str());
    write_text_file(plan.output_dir + "/report.csv", to_csv(report));
  }
  return {std::move(report)};
}

SweepCommandResult run_sweep(const ExperimentPlan& plan) {
  if (plan.sweep_alpha.empty() || plan.sweep_lambda_f.empty()) {
    throw ConfigError("empty-sweep-grid",
                      "sweep.alpha_grid and sweep.lambda_f_grid required");
  }
  const LoadedData data = load_experiment_data(plan);
  std::vector<double> alphas = plan.sweep_alpha;
  std::vector<double> lambdas = plan.sweep_lambda_f;
  std::sort(alphas.begin(), alphas.end());
  std::sort(lambdas.begin(), lambdas.end());

  SweepCommandResult result;
  for (const double alpha : alphas) {
    for (const double lambda_f : lambdas) {
      TrainConfig cfg = plan.train;
      cfg.alpha = alpha;
      cfg.lambda_f = lambda_f;
      const TrainReport report =
          train(cfg, data.train, nullptr, data.features);
      const DenseMatrix user_eval = evaluate_user_embeddings(
          report.item_embeddings, data.train, cfg.lambda);
      SweepRow row;
      row.alpha = alpha;
      row.lambda_f = lambda_f;
      row.validation_rmse =
          rmse(user_eval, report.item_embeddings, data.validation);
      row.test_rmse = rmse(user_eval, report.item_embeddings, data.test);
      result.rows.push_back(row);
    }
  }
  // Grid points were visited in ascending (alpha, lambda_f) order, so the
  // first strict minimum realizes the tie-break rule.
  std::size_t best = 0;
  for (std::size_t i = 1; i < result.rows.size(); ++i) {
    if (result.rows[i].validation_rmse <
        result.rows[best].validation_rmse) {
      best = i;
    }
  }
  result.selected_index = best;
  result.rows[best].selected = true;

  if (!plan.output_dir.empty()) {
    fs::create_directories(plan.output_dir);
    std::ostringstream csv;
    csv << "alpha,lambda_f,val_rmse,test_rmse,selected\n";
    csv.precision(17);
    for (const SweepRow& row : result.rows) {
      csv << row.alpha << ',' << row.lambda_f << ',' << row.validation_rmse
          << ',' << row.test_rmse << ',' << (row.selected ? 1 : 0) << '\n';
    }
    write_text_file(plan.output_dir + "/sweep.csv", csv.str());

    std::ostringstream selection;
    selection.precision(17);
    const SweepRow& sel = result.rows[best];
    selection << "selected_alpha = " << sel.alpha << '\n'
              << "selected_lambda_f = " << sel.lambda_f << '\n'
              << "selected_val_rmse = " << sel.validation_rmse << '\n'
              << "selected_test_rmse = " << sel.test_rmse << '\n';
    selection << kv_lines(plan.resolved());
    write_text_file(plan.output_dir + "/selection.txt", selection.str());
  }
  return result;
}

StatsCommandResult run_stats(const ExperimentPlan& plan) {
  RatingDataset ratings = load_ratings(plan.ratings_path);
  if (plan.binarize_threshold) {
    ratings = binarize(ratings, *plan.binarize_threshold);
  }
  FeatureDataset features = FeatureDataset::empty(ratings.num_items());
  if (!plan.features_path.empty()) {
    features = load_features(plan.features_path, ratings.item_vocab(),
                             plan.strict_features)
                   .data;
  }
  StatsCommandResult result;
  result.buckets = popularity_buckets(ratings, plan.eval_buckets);
  result.density_by_bucket =
      feature_density_by_bucket(features, result.buckets);
  result.popular_fraction =
      fraction_popular_per_feature(features, result.buckets);

  if (!plan.output_dir.empty()) {
    fs::create_directories(plan.output_dir);
    std::ostringstream density;
    density << "bucket,item_count,rating_share,feature_density\n";
    density.precision(17);
    for (std::size_t b = 0; b < result.buckets.num_buckets; ++b) {
      density << b << ',' << result.buckets.item_counts[b] << ','
              << result.buckets.rating_share[b] << ','
              << result.density_by_bucket[b] << '\n';
    }
    write_text_file(plan.output_dir + "/density_by_bucket.csv",
                    density.str());

    std::ostringstream popular;
    popular << "feature,occurrences,top_bucket_fraction\n";
    popular.precision(17);
    for (std::size_t k = 0; k < result.popular_fraction.size(); ++k) {
      const FeaturePopularity& fp = result.popular_fraction[k];
      if (!fp.has_occurrences) {
        continue;
      }
      popular << features.feature_vocab().token(
                     static_cast<std::uint32_t>(k))
              << ',' << features.feature_degree(static_cast<std::uint32_t>(k))
              << ',' << fp.top_bucket_fraction << '\n';
    }
    write_text_file(plan.output_dir + "/fraction_popular_per_feature.csv",
                    popular.str());
  }
  return result;
}

}  // namespace dpcmf
