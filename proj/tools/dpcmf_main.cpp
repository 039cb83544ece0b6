#include <cstdio>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "dpcmf/errors.hpp"
#include "dpcmf/experiment.hpp"
#include "dpcmf/metrics.hpp"

namespace {

using dpcmf::ConfigDoc;
using dpcmf::ExperimentPlan;

struct TrainFlags {
  std::string config_path;
  std::string out_dir;
  std::optional<std::string> mode;
  std::optional<double> epsilon;
  std::optional<double> delta;
  std::optional<int> iters;
  std::optional<int> dim;
  std::optional<double> alpha;
  std::optional<double> lambda;
  std::optional<double> lambda_f;
  std::optional<double> gamma_m;
  std::optional<double> gamma_u;
  std::optional<std::uint64_t> seed;
  std::vector<std::string> overrides;
};

void apply_overrides(ConfigDoc& doc, const std::vector<std::string>& sets) {
  for (const std::string& assignment : sets) {
    const auto eq = assignment.find('=');
    if (eq == std::string::npos || eq == 0) {
      throw dpcmf::ConfigError("malformed-override", assignment);
    }
    doc.set(assignment.substr(0, eq), assignment.substr(eq + 1));
  }
}

ExperimentPlan plan_from_flags(const TrainFlags& flags) {
  ConfigDoc doc = flags.config_path.empty()
                      ? ConfigDoc()
                      : ConfigDoc::parse_file(flags.config_path);
  const auto set_if = [&doc](const char* key, const auto& opt) {
    if (opt.has_value()) {
      if constexpr (std::is_same_v<std::decay_t<decltype(*opt)>,
                                   std::string>) {
        doc.set(key, *opt);
      } else {
        std::ostringstream os;
        os.precision(17);
        os << *opt;
        doc.set(key, os.str());
      }
    }
  };
  set_if("train.mode", flags.mode);
  set_if("train.epsilon", flags.epsilon);
  set_if("train.delta", flags.delta);
  set_if("train.iters", flags.iters);
  set_if("train.dim", flags.dim);
  set_if("train.alpha", flags.alpha);
  set_if("train.lambda", flags.lambda);
  set_if("train.lambda_f", flags.lambda_f);
  set_if("train.gamma_m", flags.gamma_m);
  set_if("train.gamma_u", flags.gamma_u);
  set_if("train.seed", flags.seed);
  if (!flags.out_dir.empty()) {
    doc.set("output.dir", flags.out_dir);
  }
  apply_overrides(doc, flags.overrides);
  return dpcmf::resolve_plan(doc);
}

int dispatch(CLI::App& app, const TrainFlags& train_flags,
             const dpcmf::SynthCommandArgs& synth_args,
             const std::string& eval_checkpoint) {
  if (app.got_subcommand("synth")) {
    dpcmf::run_synth(synth_args);
    std::cout << "wrote " << synth_args.output_dir << '\n';
    return 0;
  }
  if (app.got_subcommand("train")) {
    const ExperimentPlan plan = plan_from_flags(train_flags);
    const auto result = dpcmf::run_train(plan, [](const auto& record) {
      std::ostringstream os;
      os.precision(17);
      os << "record=iteration iter=" << record.iteration
         << " train_loss=" << record.train_loss;
      if (record.validation_rmse) {
        os << " val_rmse=" << *record.validation_rmse;
      }
      os << " wall_ms=" << record.wall_ms;
      std::cout << os.str() << '\n';
    });
    for (const auto& [key, value] : result.report.config.resolved()) {
      if (key == "beta") {
        std::cout << "beta=" << value << '\n';
      }
    }
    for (const std::string& warning : result.report.warnings) {
      std::cerr << "warning: " << warning << '\n';
    }
    return 0;
  }
  if (app.got_subcommand("eval")) {
    const ExperimentPlan plan = plan_from_flags(train_flags);
    const auto result = dpcmf::run_eval(plan, eval_checkpoint);
    std::cout << dpcmf::to_kv_record(result.report) << '\n';
    return 0;
  }
  if (app.got_subcommand("sweep")) {
    const ExperimentPlan plan = plan_from_flags(train_flags);
    const auto result = dpcmf::run_sweep(plan);
    const auto& sel = result.rows[result.selected_index];
    std::ostringstream os;
    os.precision(17);
    os << "record=selection alpha=" << sel.alpha
       << " lambda_f=" << sel.lambda_f << " val_rmse=" << sel.validation_rmse
       << " test_rmse=" << sel.test_rmse;
    std::cout << os.str() << '\n';
    return 0;
  }
  if (app.got_subcommand("stats")) {
    const ExperimentPlan plan = plan_from_flags(train_flags);
    const auto result = dpcmf::run_stats(plan);
    std::ostringstream os;
    os.precision(17);
    os << "record=stats buckets=" << result.buckets.num_buckets;
    for (std::size_t b = 0; b < result.density_by_bucket.size(); ++b) {
      os << " density" << b << '=' << result.density_by_bucket[b];
    }
    std::cout << os.str() << '\n';
    return 0;
  }
  std::cerr << app.help() << '\n';
  return 2;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Differentially private collective matrix factorization"};
  app.require_subcommand(0, 1);

  dpcmf::SynthCommandArgs synth_args;
  auto* synth = app.add_subcommand("synth", "Generate a synthetic dataset");
  synth->add_option("--users", synth_args.spec.num_users)->required();
  synth->add_option("--items", synth_args.spec.num_items)->required();
  synth->add_option("--features", synth_args.spec.num_features)
      ->default_val(0);
  synth->add_option("--dim", synth_args.spec.dim)->required();
  synth->add_option("--seed", synth_args.spec.seed)->required();
  synth->add_option("--rating-noise", synth_args.spec.rating_noise);
  synth->add_option("--feature-noise", synth_args.spec.feature_noise);
  synth->add_option("--informativeness",
                    synth_args.spec.feature_informativeness);
  synth->add_option("--ratings-per-user", synth_args.spec.ratings_per_user);
  synth->add_option("--items-per-feature",
                    synth_args.spec.items_per_feature);
  synth->add_option("--out", synth_args.output_dir)->required();

  TrainFlags flags;
  std::string eval_checkpoint;
  const auto add_common = [&flags](CLI::App* cmd, bool config_required) {
    auto* opt = cmd->add_option("--config", flags.config_path,
                                "Experiment config file");
    if (config_required) {
      opt->required();
    }
    cmd->add_option("--out", flags.out_dir);
    cmd->add_option("--set", flags.overrides,
                    "Override config entries as section.key=value");
  };

  auto* train = app.add_subcommand("train", "Train a model");
  add_common(train, true);
  train->add_option("--mode", flags.mode);
  train->add_option("--epsilon", flags.epsilon);
  train->add_option("--delta", flags.delta);
  train->add_option("--iters", flags.iters);
  train->add_option("--dim", flags.dim);
  train->add_option("--alpha", flags.alpha);
  train->add_option("--lambda", flags.lambda);
  train->add_option("--lambda-f", flags.lambda_f);
  train->add_option("--gamma-m", flags.gamma_m);
  train->add_option("--gamma-u", flags.gamma_u);
  train->add_option("--seed", flags.seed);

  auto* eval = app.add_subcommand("eval", "Evaluate a checkpoint");
  add_common(eval, true);
  eval->add_option("--checkpoint", eval_checkpoint)->required();

  auto* sweep = app.add_subcommand("sweep", "Grid-search alpha and lambda_f");
  add_common(sweep, true);

  std::optional<int> stats_buckets;
  auto* stats = app.add_subcommand("stats", "Popularity-bias diagnostics");
  add_common(stats, true);
  stats->add_option("--buckets", stats_buckets);

  try {
    app.parse(argc, argv);
    if (stats_buckets) {
      flags.overrides.push_back("eval.buckets=" +
                                std::to_string(*stats_buckets));
    }
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) {
      return app.exit(e);
    }
    std::cerr << "error: invalid-arguments: " << e.what() << '\n';
    return 2;
  }

  try {
    return dispatch(app, flags, synth_args, eval_checkpoint);
  } catch (const dpcmf::ConfigError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const dpcmf::DataError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 3;
  } catch (const dpcmf::NumericalError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 4;
  } catch (const std::exception& e) {
    std::cerr << "error: internal: " << e.what() << '\n';
    return 4;
  }
}
