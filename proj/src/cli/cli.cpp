#include "grounding/cli.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>

#include "CLI11.hpp"

#include "grounding/core/errors.hpp"
#include "grounding/data/dataset_io.hpp"
#include "grounding/eval/evaluate.hpp"
#include "grounding/io/config_io.hpp"
#include "grounding/toy.hpp"
#include "grounding/training/trainer.hpp"

namespace grounding {
namespace {

namespace fs = std::filesystem;
using nlohmann::ordered_json;

std::string fixed(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*f", digits, v);
  return buf;
}

struct TrainArgs {
  std::string config;
  bool resume = false;
};

int run_train(const TrainArgs& args, std::ostream& out) {
  const RunConfig run = load_run_config(args.config);
  const auto train_set = parse_dataset(run.train_data);
  const auto dev_set = parse_dataset(run.dev_data);
  out << "train: " << train_set.size() << " samples, dev: " << dev_set.size()
      << " samples, image branch " << run_label(run.model.image) << '\n';

  Rng init(run.train.seed);
  GroundingModel<float> model(run.model, init);

  std::optional<Checkpoint> last;
  std::optional<Checkpoint> best;
  FitOptions options;
  options.checkpoint_dir = run.output_dir;
  if (args.resume) {
    last = load_checkpoint(run.output_dir / "last.gckp");
    best = load_checkpoint(run.output_dir / "best.gckp");
    options.resume = &*last;
    options.resume_best = &*best;
    out << "resuming after epoch " << last->epoch << '\n';
  }
  options.on_epoch = [&](const EpochRecord& r) {
    out << "epoch " << r.epoch << "  loss " << fixed(r.train_loss, 6)
        << "  dev R@1 " << fixed(r.dev_recall_at_1, 2) << '\n';
  };

  const FitResult result = fit<float>(train_set, dev_set, model, run.train, options);

  ordered_json history = ordered_json::array();
  for (const auto& h : result.history) {
    history.push_back({{"epoch", h.epoch},
                       {"train_loss", h.train_loss},
                       {"dev_recall_at_1", h.dev_recall_at_1}});
  }
  write_json_file(history, run.output_dir / "history.json");
  out << "best dev R@1 " << fixed(result.best.best_metric, 2) << " at epoch "
      << result.best.best_epoch << (result.early_stopped ? " (early stop)" : "")
      << "; checkpoints in " << run.output_dir.string() << '\n';
  return 0;
}

struct EvalArgs {
  std::string checkpoint;
  std::string data;
  std::string out;
  std::string format = "json";
  std::string split = "dev";
};

int run_eval(const EvalArgs& args, std::ostream& out) {
  const ReportFormat format = parse_report_format(args.format);
  validate_split_tag(args.split);
  const Checkpoint ckpt = load_checkpoint(args.checkpoint);
  Rng init(0);
  GroundingModel<float> model(ckpt.model, init);
  model.import_parameters(ckpt.parameters);
  const auto records = parse_dataset(args.data);

  EvalOptions options;
  options.split = args.split;
  const EvalReport report = evaluate(model, std::span<const SampleRecord>(records), options);
  if (args.out.empty()) {
    if (format == ReportFormat::kJson) {
      out << report_to_json(report).dump(2) << '\n';
    } else {
      out << render_csv(report);
    }
  } else {
    emit_report(report, format, args.out);
    out << "R@1 " << fixed(report.recall_at_1, 2) << "  R@5 "
        << fixed(report.recall_at_5, 2) << "  R@10 " << fixed(report.recall_at_10, 2)
        << "  upper bound " << fixed(report.upper_bound, 2) << "  -> " << args.out
        << '\n';
  }
  return 0;
}

struct SynthArgs {
  std::string spec;
  std::string out;
};

int run_synth(const SynthArgs& args, std::ostream& out) {
  const SyntheticSpec spec = args.spec.empty()
                                 ? SyntheticSpec{}
                                 : synthetic_spec_from_json(read_json_file(args.spec));
  const auto records = generate_synthetic(spec);
  fs::create_directories(args.out);
  const fs::path path = fs::path(args.out) / "data.jsonl";
  write_dataset(records, path, FeatureStorage::kFiles);
  out << "wrote " << records.size() << " samples to " << path.string() << '\n';
  return 0;
}

struct GradcheckArgs {
  std::uint64_t seed = 11;
  double tolerance = 1e-4;
  bool verbose = false;
};

int run_gradcheck(const GradcheckArgs& args, std::ostream& out) {
  const GradcheckSummary summary = run_model_gradcheck(args.seed);
  if (args.verbose) {
    for (const auto& [name, error] : summary.per_parameter) {
      char line[160];
      std::snprintf(line, sizeof(line), "  %-48s %.3e\n", name.c_str(), error);
      out << line;
    }
  }
  char line[160];
  std::snprintf(line, sizeof(line), "max relative error %.3e (%s) over %zu parameters\n",
                summary.max_relative_error, summary.worst_parameter.c_str(),
                summary.per_parameter.size());
  out << line;
  if (!(summary.max_relative_error < args.tolerance)) {
    throw NumericError("gradient check exceeds tolerance " + fixed(args.tolerance, 6));
  }
  return 0;
}

}  // namespace

int cli_main(const std::vector<std::string>& args, std::ostream& out,
             std::ostream& err) {
  CLI::App app{"Contextual phrase grounding: training, evaluation and checks",
               "grounding"};
  app.require_subcommand(1);

  TrainArgs train;
  auto* train_cmd = app.add_subcommand("train", "train a model from a run config");
  train_cmd->add_option("--config", train.config, "run config JSON")->required();
  train_cmd->add_flag("--resume", train.resume,
                      "continue from last.gckp/best.gckp in the output directory");

  EvalArgs eval;
  auto* eval_cmd = app.add_subcommand("eval", "score a checkpoint on a dataset");
  eval_cmd->add_option("--checkpoint", eval.checkpoint, "checkpoint file")->required();
  eval_cmd->add_option("--data", eval.data, "JSONL dataset")->required();
  eval_cmd->add_option("--out", eval.out, "report path (default: stdout)");
  eval_cmd->add_option("--format", eval.format, "json or csv");
  eval_cmd->add_option("--split", eval.split, "dev, test or synthetic");

  SynthArgs synth;
  auto* synth_cmd = app.add_subcommand("synth", "write a synthetic dataset");
  synth_cmd->add_option("--spec", synth.spec, "generator spec JSON (default spec if omitted)");
  synth_cmd->add_option("--out", synth.out, "output directory")->required();

  GradcheckArgs gradcheck;
  auto* gradcheck_cmd =
      app.add_subcommand("gradcheck", "finite differences against backprop on a toy model");
  gradcheck_cmd->add_option("--seed", gradcheck.seed, "data and init seed");
  gradcheck_cmd->add_option("--tolerance", gradcheck.tolerance, "max relative error");
  gradcheck_cmd->add_flag("--verbose", gradcheck.verbose, "print every parameter");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : 2;
  }

  try {
    if (*train_cmd) return run_train(train, out);
    if (*eval_cmd) return run_eval(eval, out);
    if (*synth_cmd) return run_synth(synth, out);
    if (*gradcheck_cmd) return run_gradcheck(gradcheck, out);
  } catch (const UsageError& e) {
    err << "usage error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
  return 2;
}

int cli_main(int argc, const char* const* argv) {
  std::vector<std::string> args;
  for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
  return cli_main(args, std::cout, std::cerr);
}

}  // namespace grounding
