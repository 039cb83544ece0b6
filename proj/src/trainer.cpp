#include "dpcmf/trainer.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <fstream>
#include <sstream>

#include "dpcmf/errors.hpp"
#include "dpcmf/metrics.hpp"
#include "dpcmf/parallel.hpp"
#include "dpcmf/rng.hpp"

namespace dpcmf {

std::string to_string(TrainMode mode) {
  switch (mode) {
    case TrainMode::kNonprivateAls:
      return "nonprivate-als";
    case TrainMode::kNonprivateCmf:
      return "nonprivate-cmf";
    case TrainMode::kDpAls:
      return "dpals";
    case TrainMode::kDpCmf:
      return "dpcmf";
  }
  return "unknown";
}

std::string to_string(WeightingMode mode) {
  return mode == WeightingMode::kUniform ? "uniform" : "unweighted";
}

TrainMode parse_train_mode(const std::string& name) {
  if (name == "nonprivate-als") return TrainMode::kNonprivateAls;
  if (name == "nonprivate-cmf") return TrainMode::kNonprivateCmf;
  if (name == "dpals") return TrainMode::kDpAls;
  if (name == "dpcmf") return TrainMode::kDpCmf;
  throw ConfigError("unknown-mode", name);
}

WeightingMode parse_weighting_mode(const std::string& name) {
  if (name == "uniform") return WeightingMode::kUniform;
  if (name == "unweighted") return WeightingMode::kUnweighted;
  throw ConfigError("unknown-weighting", name);
}

bool is_private(TrainMode mode) {
  return mode == TrainMode::kDpAls || mode == TrainMode::kDpCmf;
}

void TrainConfig::validate() const {
  if (dim < 1) {
    throw ConfigError("invalid-dim", std::to_string(dim));
  }
  if (iterations < 1) {
    throw ConfigError("invalid-iterations", std::to_string(iterations));
  }
  if (lambda < 0.0 || lambda_f < 0.0 || alpha < 0.0 || implicit_weight < 0.0 ||
      init_scale < 0.0) {
    throw ConfigError("negative-hyperparameter", "");
  }
  if (mode == TrainMode::kNonprivateAls || mode == TrainMode::kDpAls) {
    if (alpha != 0.0) {
      throw ConfigError("alpha-requires-cmf-mode",
                        "alpha = " + std::to_string(alpha) + " in mode " +
                            to_string(mode));
    }
  }
  if (is_private(mode)) {
    if (!epsilon.has_value() || !delta.has_value()) {
      throw ConfigError("missing-privacy-parameter",
                        "mode " + to_string(mode) +
                            " requires epsilon and delta");
    }
    if (!(*epsilon > 0.0)) {
      throw ConfigError("invalid-epsilon", std::to_string(*epsilon));
    }
    if (!(*delta > 0.0 && *delta < 1.0)) {
      throw ConfigError("invalid-delta", std::to_string(*delta));
    }
    clip().validate();
    if (weighting != WeightingMode::kUniform) {
      // The weight-cap precondition must hold by construction.
      throw ConfigError("weighting-must-be-uniform",
                        "private modes force uniform weights");
    }
    if (implicit_weight != 0.0) {
      // The implicit extension adds a Gramian over all user rows, a raw
      // sensitive statistic with no noise calibration here.
      throw ConfigError("implicit-mode-not-private",
                        "implicit_weight > 0 requires a non-private mode");
    }
  }
}

namespace {

std::string format_double(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

}  // namespace

std::vector<std::pair<std::string, std::string>> TrainConfig::resolved()
    const {
  std::vector<std::pair<std::string, std::string>> kv;
  kv.emplace_back("mode", to_string(mode));
  kv.emplace_back("dim", std::to_string(dim));
  kv.emplace_back("iters", std::to_string(iterations));
  kv.emplace_back("lambda", format_double(lambda));
  kv.emplace_back("lambda_f", format_double(lambda_f));
  kv.emplace_back("alpha", format_double(alpha));
  kv.emplace_back("implicit_weight", format_double(implicit_weight));
  kv.emplace_back("init_scale", format_double(init_scale));
  kv.emplace_back("gamma_m", format_double(max_rating));
  kv.emplace_back("gamma_u", format_double(max_user_norm));
  kv.emplace_back("epsilon", epsilon ? format_double(*epsilon) : "none");
  kv.emplace_back("delta", delta ? format_double(*delta) : "none");
  kv.emplace_back("seed", std::to_string(seed));
  kv.emplace_back("weighting", to_string(weighting));
  if (is_private(mode) && epsilon && delta) {
    kv.emplace_back("beta", format_double(per_user_weight_cap(
                                *epsilon, *delta, iterations)));
  }
  return kv;
}

void audit_release(const TrainReport& report) {
  if (is_private(report.config.mode) && report.user_embeddings.has_value()) {
    throw ContractViolationError("release-audit-failed",
                                 "user embeddings in a private report");
  }
}

EmbeddingSet init_embeddings(std::size_t num_users, std::size_t num_items,
                             std::size_t num_features, std::size_t dim,
                             double init_scale, std::uint64_t seed,
                             std::vector<std::string>* warnings) {
  if (dim < 1 || num_items < 1) {
    throw ConfigError("invalid-dimensions", "init_embeddings");
  }
  if (init_scale == 0.0 && warnings != nullptr) {
    warnings->push_back("init_scale is zero; item embeddings start at zero");
  }
  EmbeddingSet emb = EmbeddingSet::zeros(num_users, num_items, num_features,
                                         dim);
  const double scale = init_scale / std::sqrt(static_cast<double>(dim));
  for (std::size_t j = 0; j < num_items; ++j) {
    RngStream stream(seed, 0, static_cast<std::uint32_t>(j));
    for (std::size_t c = 0; c < dim; ++c) {
      emb.items(j, c) = scale * stream.next_normal();
    }
  }
  return emb;
}

ItemUpdateResult dp_item_update(const RatingDataset& ratings,
                                const DenseMatrix& users,
                                const DenseMatrix& features,
                                const FeatureDataset& feature_data,
                                const WeightAssignment& w,
                                const CmfHyperparams& hp,
                                const ClipParams& clip, int iteration,
                                std::uint64_t seed,
                                const NoiseScales& scales) {
  clip.validate();
  ClippedRatings clipped = clip_ratings(ratings, clip.max_rating);
  const DenseMatrix clipped_users = clip_user_rows(users, clip.max_user_norm);

  const std::size_t num_items = ratings.num_items();
  const std::size_t dim = users.cols();
  DenseMatrix items(num_items, dim);
  parallel_for(num_items, [&](std::size_t begin, std::size_t end) {
    for (std::size_t j = begin; j < end; ++j) {
      RngStream stream(seed, static_cast<std::uint32_t>(iteration),
                       static_cast<std::uint32_t>(j));
      const NoisyStatistics noisy = noisy_item_statistics(
          static_cast<std::uint32_t>(j), clipped_users, clipped.data, w,
          hp.lambda, clip, stream, scales);
      DenseMatrix a = noisy.a_hat;
      DenseVector b = noisy.b_hat;
      if (hp.alpha > 0.0) {
        const ExactStatistics exact = exact_feature_statistics(
            static_cast<std::uint32_t>(j), features, feature_data,
            hp.lambda_f);
        add_scaled_matrix(a, hp.alpha, exact.a_prime);
        add_scaled(b.entries(), hp.alpha, exact.b_prime.entries());
      }
      // The projected statistics can be exactly singular when the noise
      // dominates; the solve then drops directions whose eigenvalue fell
      // far below the configured ridge and equals the plain inverse
      // whenever the system is definite.
      const DenseVector v = solve_psd_system(a, b, 1e-4 * hp.lambda);
      std::copy(v.entries().begin(), v.entries().end(), items.row(j).begin());
    }
  });
  return {std::move(items), clipped.negatives_clamped};
}

DenseMatrix evaluate_user_embeddings(const DenseMatrix& item_embeddings,
                                     const RatingDataset& train_data,
                                     double lambda) {
  const std::size_t num_users = train_data.num_users();
  DenseMatrix users(num_users, item_embeddings.cols());
  parallel_for(num_users, [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      const DenseVector u = user_update(static_cast<std::uint32_t>(i),
                                        item_embeddings, train_data, lambda);
      std::copy(u.entries().begin(), u.entries().end(),
                users.row(i).begin());
    }
  });
  return users;
}

TrainReport train(const TrainConfig& config, const RatingDataset& train_data,
                  const RatingDataset* validation,
                  const FeatureDataset& features,
                  const ProgressFn& progress) {
  config.validate();
  const bool priv = is_private(config.mode);
  const bool use_features = (config.mode == TrainMode::kNonprivateCmf ||
                             config.mode == TrainMode::kDpCmf) &&
                            config.alpha > 0.0;

  TrainReport report;
  report.config = config;

  WeightAssignment weights;
  if (priv) {
    const PrivacyBudget budget = PrivacyBudget::derive(
        *config.epsilon, *config.delta, config.iterations);
    weights = uniform_weights(train_data, budget.weight_cap);
    const WeightValidation check =
        validate_weights(weights, train_data, budget.weight_cap);
    if (!check.all_passed) {
      throw ContractViolationError(
          "weight-cap-violated",
          std::to_string(check.failed_users.size()) + " users over cap");
    }
    report.budget = budget;
  } else if (config.weighting == WeightingMode::kUniform) {
    if (!config.epsilon.has_value() || !config.delta.has_value()) {
      throw ConfigError("missing-privacy-parameter",
                        "uniform weighting derives its cap from epsilon and "
                        "delta");
    }
    weights = uniform_weights(
        train_data, per_user_weight_cap(*config.epsilon, *config.delta,
                                        config.iterations));
  } else {
    weights = WeightAssignment::ones(train_data.size());
  }

  CmfHyperparams hp;
  hp.lambda = config.lambda;
  hp.lambda_f = config.lambda_f;
  hp.alpha = config.alpha;
  hp.implicit_weight = config.implicit_weight;

  EmbeddingSet emb = init_embeddings(
      train_data.num_users(), train_data.num_items(),
      use_features ? features.num_features() : 0, config.dim,
      config.init_scale, config.seed, &report.warnings);

  const FeatureDataset empty_features =
      FeatureDataset::empty(train_data.num_items());
  const FeatureDataset& active_features =
      use_features ? features : empty_features;

  for (int t = 1; t <= config.iterations; ++t) {
    const auto start = std::chrono::steady_clock::now();
    if (priv) {
      const DenseMatrix previous_items = emb.items;
      parallel_for(emb.users.rows(), [&](std::size_t begin, std::size_t end) {
        for (std::size_t i = begin; i < end; ++i) {
          const DenseVector u =
              user_update(static_cast<std::uint32_t>(i), previous_items,
                          train_data, config.lambda);
          std::copy(u.entries().begin(), u.entries().end(),
                    emb.users.row(i).begin());
        }
      });
      if (use_features) {
        parallel_for(emb.features.rows(),
                     [&](std::size_t begin, std::size_t end) {
                       for (std::size_t k = begin; k < end; ++k) {
                         const DenseVector f = feature_update(
                             static_cast<std::uint32_t>(k), previous_items,
                             active_features, config.lambda_f);
                         std::copy(f.entries().begin(), f.entries().end(),
                                   emb.features.row(k).begin());
                       }
                     });
      }
      ItemUpdateResult updated = dp_item_update(
          train_data, emb.users, emb.features, active_features, weights, hp,
          config.clip(), t, config.seed, NoiseScales::from_clip(config.clip()));
      emb.items = std::move(updated.items);
      report.negatives_clamped = updated.negatives_clamped;
    } else {
      nonprivate_sweep(emb, train_data, active_features, weights, hp);
    }

    IterationRecord record;
    record.iteration = t;
    record.train_loss = cmf_loss(emb, train_data, active_features, weights,
                                 hp);
    if (validation != nullptr && validation->size() > 0) {
      const DenseMatrix user_eval =
          evaluate_user_embeddings(emb.items, train_data, config.lambda);
      record.validation_rmse = rmse(user_eval, emb.items, *validation);
    }
    record.wall_ms = std::chrono::duration<double, std::milli>(
                         std::chrono::steady_clock::now() - start)
                         .count();
    report.iterations.push_back(record);
    if (progress) {
      progress(record);
    }
  }

  report.item_embeddings = std::move(emb.items);
  report.feature_embeddings = std::move(emb.features);
  if (!priv) {
    report.user_embeddings = std::move(emb.users);
  }
  audit_release(report);
  return report;
}

namespace {

void write_matrix(std::ostream& out, const std::string& name,
                  const DenseMatrix& m) {
  out << name << ' ' << m.rows() << ' ' << m.cols() << '\n';
  out.precision(17);
  for (std::size_t r = 0; r < m.rows(); ++r) {
    for (std::size_t c = 0; c < m.cols(); ++c) {
      if (c > 0) {
        out << ' ';
      }
      out << m(r, c);
    }
    out << '\n';
  }
}

DenseMatrix read_matrix(std::istream& in, const std::string& expected_name,
                        const std::string& path) {
  std::string name;
  std::size_t rows = 0;
  std::size_t cols = 0;
  if (!(in >> name >> rows >> cols) || name != expected_name) {
    throw ParseError("malformed-checkpoint", path + " (" + expected_name +
                                                 " section)");
  }
  DenseMatrix m(rows, cols);
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < cols; ++c) {
      if (!(in >> m(r, c))) {
        throw ParseError("malformed-checkpoint", path);
      }
    }
  }
  if (!all_finite(m.data())) {
    throw DataError("non-finite-value", path);
  }
  return m;
}

}  // namespace

void save_checkpoint(const std::string& path, const Checkpoint& ckpt) {
  std::ofstream out(path);
  if (!out) {
    throw DataError("cannot-open-file", path);
  }
  out << "dpcmf-checkpoint 1\n";
  out << "iteration " << ckpt.iteration << '\n';
  out << "seed " << ckpt.seed << '\n';
  out << "mode " << ckpt.mode << '\n';
  out << "config " << ckpt.config_echo.size() << '\n';
  for (const auto& [key, value] : ckpt.config_echo) {
    out << key << '=' << value << '\n';
  }
  write_matrix(out, "items", ckpt.item_embeddings);
  write_matrix(out, "features", ckpt.feature_embeddings);
  if (ckpt.user_embeddings) {
    write_matrix(out, "users", *ckpt.user_embeddings);
  }
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    throw DataError("cannot-open-file", path);
  }
  std::string magic;
  int version = 0;
  if (!(in >> magic >> version) || magic != "dpcmf-checkpoint" ||
      version != 1) {
    throw ParseError("unsupported-checkpoint-version", path);
  }
  Checkpoint ckpt;
  std::string tag;
  if (!(in >> tag >> ckpt.iteration) || tag != "iteration") {
    throw ParseError("malformed-checkpoint", path);
  }
  if (!(in >> tag >> ckpt.seed) || tag != "seed") {
    throw ParseError("malformed-checkpoint", path);
  }
  if (!(in >> tag >> ckpt.mode) || tag != "mode") {
    throw ParseError("malformed-checkpoint", path);
  }
  std::size_t config_lines = 0;
  if (!(in >> tag >> config_lines) || tag != "config") {
    throw ParseError("malformed-checkpoint", path);
  }
  std::string line;
  std::getline(in, line);
  for (std::size_t i = 0; i < config_lines; ++i) {
    if (!std::getline(in, line)) {
      throw ParseError("malformed-checkpoint", path);
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ParseError("malformed-checkpoint", path);
    }
    ckpt.config_echo.emplace_back(line.substr(0, eq), line.substr(eq + 1));
  }
  ckpt.item_embeddings = read_matrix(in, "items", path);
  ckpt.feature_embeddings = read_matrix(in, "features", path);
  std::string next;
  if (in >> next) {
    if (next != "users") {
      throw ParseError("malformed-checkpoint", path);
    }
    std::size_t rows = 0;
    std::size_t cols = 0;
    if (!(in >> rows >> cols)) {
      throw ParseError("malformed-checkpoint", path);
    }
    DenseMatrix m(rows, cols);
    for (std::size_t r = 0; r < rows; ++r) {
      for (std::size_t c = 0; c < cols; ++c) {
        if (!(in >> m(r, c))) {
          throw ParseError("malformed-checkpoint", path);
        }
      }
    }
    ckpt.user_embeddings = std::move(m);
  }
  return ckpt;
}

Checkpoint checkpoint_from_report(const TrainReport& report) {
  Checkpoint ckpt;
  ckpt.iteration = report.config.iterations;
  ckpt.seed = report.config.seed;
  ckpt.mode = to_string(report.config.mode);
  ckpt.item_embeddings = report.item_embeddings;
  ckpt.feature_embeddings = report.feature_embeddings;
  ckpt.user_embeddings = report.user_embeddings;
  ckpt.config_echo = report.config.resolved();
  return ckpt;
}

}  // namespace dpcmf
