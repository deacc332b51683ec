#include <exception>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "qarwarn/pipeline.hpp"

using namespace qarwarn;

int main(int argc, char** argv) {
  CLI::App app{"qarwarn: over-limit warning pipeline for 1 Hz flight-recorder tables"};
  app.require_subcommand(1);
  app.set_config("--config", "", "INI configuration file; [section] per subcommand");

  RunContext ctx;
  ctx.log = &std::cout;
  std::string run_dir;
  app.add_option("--seed", ctx.seed, "Seed for data generation, splitting and training")
      ->capture_default_str();
  app.add_flag("--verbose", ctx.verbose, "Print extra progress detail");

  const auto add_run_dir = [&](CLI::App* sub) {
    sub->add_option("--run-dir", run_dir, "Directory holding the run's artifacts")->required();
  };

  SynthOptions synth;
  auto* synth_cmd = app.add_subcommand("synth", "Generate a synthetic recording with injected G spikes");
  add_run_dir(synth_cmd);
  synth_cmd->add_option("--seconds", synth.seconds, "Seconds per flight")->capture_default_str();
  synth_cmd->add_option("--attributes", synth.attributes, "Attribute columns including G")
      ->capture_default_str();
  synth_cmd->add_option("--overlimit-rate", synth.overlimit_rate, "Spike probability per second")
      ->capture_default_str();
  synth_cmd->add_option("--flights", synth.flights, "Number of flights")->capture_default_str();

  IngestOptions ingest;
  std::string ingest_input, ingest_schema, ingest_codebook;
  auto* ingest_cmd = app.add_subcommand("ingest", "Convert text labels and resample to 1 Hz");
  add_run_dir(ingest_cmd);
  ingest_cmd->add_option("--input", ingest_input, "Raw table (default <run-dir>/raw.csv)");
  ingest_cmd->add_option("--schema", ingest_schema, "Column kinds (default <run-dir>/schema.txt)");
  ingest_cmd->add_option("--codebook", ingest_codebook, "Extra attribute/label = code entries");

  LabelOptions label;
  auto* label_cmd = app.add_subcommand("label", "Mark 3-sigma G exceedances");
  add_run_dir(label_cmd);
  label_cmd->add_option("--g-column", label.g_column, "Column holding the G value")->capture_default_str();

  SelectOptions select;
  auto* select_cmd = app.add_subcommand("select", "Rank attributes by Spearman correlation with the labels");
  add_run_dir(select_cmd);
  select_cmd->add_option("--g-column", select.g_column, "Column excluded from selection")
      ->capture_default_str();
  select_cmd->add_option("--threshold", select.threshold, "Keep attributes with |r_s| above this")
      ->capture_default_str();

  TrainOptions train_opts;
  std::string cost_mode = "cost-sensitive";
  std::string normalization = "all-rows";
  std::string activation = "identity";
  double clip_norm = 0.0;
  bool serial = false;
  auto* train_cmd = app.add_subcommand("train", "Train the network on the selected features");
  add_run_dir(train_cmd);
  train_cmd->add_option("--time-step", train_opts.time_step, "Window length T")->capture_default_str();
  train_cmd->add_option("--units", train_opts.config.units, "Units per recurrent layer")->capture_default_str();
  train_cmd->add_option("--learning-rate", train_opts.config.learning_rate, "Adam step size")
      ->capture_default_str();
  train_cmd->add_option("--epochs", train_opts.config.epochs, "Training epochs")->capture_default_str();
  train_cmd->add_option("--batch-size", train_opts.config.batch_size, "Mini-batch size")->capture_default_str();
  train_cmd->add_option("--cost-mode", cost_mode, "cost-sensitive or plain")->capture_default_str();
  train_cmd->add_option("--decision-threshold", train_opts.config.threshold,
                        "Probability at or above which an instant is over-limit")
      ->capture_default_str();
  train_cmd->add_option("--clip-norm", clip_norm, "Clip gradients to this global norm (0 = off)")
      ->capture_default_str();
  train_cmd->add_option("--normalization", normalization, "all-rows or leak-free")
      ->capture_default_str();
  train_cmd->add_option("--output-activation", activation, "identity or tanh")->capture_default_str();
  train_cmd->add_flag("--from-grid", train_opts.from_grid, "Use the top row of <run-dir>/grid.tsv");
  train_cmd->add_flag("--serial", serial, "Use the single-threaded reference gradient path");

  GridOptions grid;
  std::string grid_cost_mode = "cost-sensitive";
  std::string grid_normalization = "all-rows";
  auto* grid_cmd = app.add_subcommand("gridsearch", "Cross-validated search over T, units and learning rate");
  add_run_dir(grid_cmd);
  grid_cmd->add_option("--time-steps", grid.spec.time_steps, "Candidate T values")->delimiter(',')
      ->capture_default_str();
  grid_cmd->add_option("--units", grid.spec.units, "Candidate unit counts")->delimiter(',')
      ->capture_default_str();
  grid_cmd->add_option("--learning-rates", grid.spec.learning_rates, "Candidate learning rates")
      ->delimiter(',')->capture_default_str();
  grid_cmd->add_option("--epochs", grid.spec.epochs, "Epochs per fit")->capture_default_str();
  grid_cmd->add_option("--folds", grid.spec.folds, "Cross-validation folds")->capture_default_str();
  grid_cmd->add_option("--batch-size", grid.spec.batch_size, "Mini-batch size")->capture_default_str();
  grid_cmd->add_option("--cost-mode", grid_cost_mode, "cost-sensitive or plain")->capture_default_str();
  grid_cmd->add_option("--normalization", grid_normalization, "all-rows or leak-free")
      ->capture_default_str();
  grid_cmd->add_flag("--parallel", grid.spec.parallel, "Run combinations concurrently");

  EvaluateOptions eval;
  std::string eval_model;
  auto* eval_cmd = app.add_subcommand("evaluate", "Re-score the saved model on the test split");
  add_run_dir(eval_cmd);
  eval_cmd->add_option("--model", eval_model, "Model file (default <run-dir>/model.json)");

  WarnCommandOptions warn;
  std::string warn_model, warn_input, warn_output;
  double warn_threshold = 0.0;
  auto* warn_cmd = app.add_subcommand("warn", "Replay a table as a stream and emit one alert line per instant");
  add_run_dir(warn_cmd);
  warn_cmd->add_option("--model", warn_model, "Model file (default <run-dir>/model.json)");
  warn_cmd->add_option("--input", warn_input, "Numeric table to replay (default <run-dir>/table.csv)");
  warn_cmd->add_option("--output", warn_output, "Alert file (default standard output)");
  warn_cmd->add_option("--threshold", warn_threshold, "Override the model's decision threshold");
  warn_cmd->add_flag("--realtime", warn.realtime, "Pace the replay at one row per second");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : exit_code(ErrorKind::Argument);
  }

  const auto path_opt = [](const std::string& s) -> std::optional<std::filesystem::path> {
    if (s.empty()) return std::nullopt;
    return std::filesystem::path(s);
  };

  try {
    ctx.run_dir = run_dir;
    if (synth_cmd->parsed()) {
      cmd_synth(ctx, synth);
    } else if (ingest_cmd->parsed()) {
      ingest.input = path_opt(ingest_input);
      ingest.schema = path_opt(ingest_schema);
      ingest.codebook = path_opt(ingest_codebook);
      cmd_ingest(ctx, ingest);
    } else if (label_cmd->parsed()) {
      cmd_label(ctx, label);
    } else if (select_cmd->parsed()) {
      cmd_select(ctx, select);
    } else if (train_cmd->parsed()) {
      train_opts.config.cost_mode = parse_cost_mode(cost_mode);
      train_opts.normalization = parse_normalization_mode(normalization);
      train_opts.config.squash = parse_output_squash(activation);
      if (clip_norm > 0.0) {
        train_opts.config.clip_gradients = true;
        train_opts.config.clip_norm = clip_norm;
      }
      require(clip_norm >= 0.0, ErrorKind::Argument, "clip norm must not be negative");
      train_opts.config.parallel = !serial;
      cmd_train(ctx, train_opts);
    } else if (grid_cmd->parsed()) {
      grid.spec.cost_mode = parse_cost_mode(grid_cost_mode);
      grid.spec.normalization = parse_normalization_mode(grid_normalization);
      cmd_gridsearch(ctx, grid);
    } else if (eval_cmd->parsed()) {
      eval.model = path_opt(eval_model);
      if (!cmd_evaluate(ctx, eval)) {
        std::cerr << "qarwarn: evaluation differs from the training-time confusion matrix\n";
        return exit_code(ErrorKind::State);
      }
    } else if (warn_cmd->parsed()) {
      warn.model = path_opt(warn_model);
      warn.input = path_opt(warn_input);
      warn.output = path_opt(warn_output);
      if (warn_cmd->count("--threshold") > 0) warn.threshold = warn_threshold;
      if (warn.threshold) {
        require(*warn.threshold > 0.0 && *warn.threshold < 1.0, ErrorKind::Argument,
                "threshold must lie in (0, 1)");
      }
      // Alert lines own stdout; progress goes to stderr.
      ctx.log = &std::cerr;
      cmd_warn(ctx, warn, std::cout);
    }
  } catch (const Error& e) {
    std::cerr << "qarwarn: " << to_string(e.kind()) << " error: " << e.what() << '\n';
    return exit_code(e.kind());
  } catch (const std::exception& e) {
    std::cerr << "qarwarn: " << e.what() << '\n';
    return kExitUnknownError;
  }
  return 0;
}
