#include "qarwarn/pipeline.hpp"

#include <fstream>
#include <ostream>
#include <sstream>

#include "qarwarn/dataset.hpp"
#include "qarwarn/labeling.hpp"
#include "qarwarn/loss_metrics.hpp"
#include "qarwarn/lstm.hpp"
#include "qarwarn/qar_table.hpp"
#include "qarwarn/text_io.hpp"
#include "qarwarn/warn.hpp"

namespace qarwarn {

int exit_code(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::Argument: return 2;
    case ErrorKind::Parse: return 3;
    case ErrorKind::Schema: return 4;
    case ErrorKind::Numeric: return 5;
    case ErrorKind::Io: return 6;
    case ErrorKind::Conversion:
    case ErrorKind::State:
    case ErrorKind::Domain:
    case ErrorKind::DegenerateData:
    case ErrorKind::UndefinedCorrelation: return 7;
  }
  return kExitUnknownError;
}

namespace {

namespace fs = std::filesystem;

std::istringstream open_text(const fs::path& path) {
  require(fs::exists(path), ErrorKind::Io, "missing input file: " + path.string());
  return std::istringstream(read_file(path));
}

std::istringstream open_binary(const fs::path& path) {
  require(fs::exists(path), ErrorKind::Io, "missing input file: " + path.string());
  std::ifstream in(path, std::ios::binary);
  require(static_cast<bool>(in), ErrorKind::Io, "cannot open " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return std::istringstream(buf.str(), std::ios::binary);
}

fs::path in_run(const RunContext& ctx, const char* name) { return ctx.run_dir / name; }

std::ostream& log(const RunContext& ctx) {
  static std::ostringstream sink;
  if (ctx.log) return *ctx.log;
  sink.str({});
  return sink;
}

void ensure_run_dir(const RunContext& ctx) {
  require(!ctx.run_dir.empty(), ErrorKind::Argument, "a run directory is required");
  std::error_code ec;
  fs::create_directories(ctx.run_dir, ec);
  require(!ec && fs::is_directory(ctx.run_dir), ErrorKind::Io,
          "cannot create run directory " + ctx.run_dir.string());
}

QarTable drop_column(const QarTable& table, const std::string& name) {
  std::vector<Column> kept;
  for (const auto& c : table.columns()) {
    if (c.name != name) kept.push_back(c);
  }
  return QarTable(std::move(kept), table.timestamps(), table.flights());
}

std::vector<std::uint8_t> label_vector(const QarTable& labeled) {
  const auto values = labeled.column(kLabelColumn).numeric_values();
  std::vector<std::uint8_t> labels(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) {
    require(values[i] == 0.0 || values[i] == 1.0, ErrorKind::Parse, "LABEL column holds a non-binary value");
    labels[i] = values[i] == 1.0 ? 1 : 0;
  }
  return labels;
}

std::vector<std::string> load_selected(const RunContext& ctx) {
  auto in = open_text(in_run(ctx, artifact::kSelected));
  auto selected = read_selected(in);
  require(!selected.empty(), ErrorKind::DegenerateData,
          "no features passed selection; nothing to train on");
  return selected;
}

Model load_model_file(const fs::path& path) {
  auto in = open_text(path);
  return load_model(in);
}

}  // namespace

QarTable load_labeled(const fs::path& run_dir) {
  auto schema_in = open_text(run_dir / artifact::kLabeledSchema);
  const auto schema = read_schema(schema_in);
  auto in = open_text(run_dir / artifact::kLabeled);
  return parse_table(in, schema);
}

void cmd_synth(const RunContext& ctx, const SynthOptions& options) {
  ensure_run_dir(ctx);
  require(options.flights >= 1, ErrorKind::Argument, "flights must be at least 1");
  require(options.seconds >= 2, ErrorKind::Argument, "seconds must be at least 2");
  require(options.attributes >= 2, ErrorKind::Argument, "attributes must be at least 2");
  require(options.overlimit_rate > 0.0 && options.overlimit_rate < 1.0, ErrorKind::Argument,
          "over-limit rate must lie in (0, 1)");
  std::vector<QarTable> flights;
  std::ostringstream spikes;
  spikes << "# flight second\n";
  for (std::size_t f = 0; f < options.flights; ++f) {
    SyntheticSpec spec{ctx.seed + f, options.seconds, options.attributes, options.overlimit_rate};
    flights.push_back(generate_synthetic(spec));
    for (const auto s : synthetic_spike_seconds(spec)) spikes << f << ' ' << s << '\n';
  }
  const auto table = concat_flights(flights);
  write_file_atomic(in_run(ctx, artifact::kRaw), [&](std::ostream& o) { write_table(o, table); });
  write_file_atomic(in_run(ctx, artifact::kRawSchema),
                    [&](std::ostream& o) { write_schema(o, synthetic_schema(options.attributes)); });
  write_file_atomic(in_run(ctx, artifact::kSpikes), spikes.str());
  log(ctx) << "synth: " << table.row_count() << " rows, " << table.column_count() << " attributes, "
           << options.flights << " flight(s) -> " << in_run(ctx, artifact::kRaw).string() << '\n';
}

void cmd_ingest(const RunContext& ctx, const IngestOptions& options) {
  ensure_run_dir(ctx);
  auto schema_in = open_text(options.schema.value_or(in_run(ctx, artifact::kRawSchema)));
  const auto schema = read_schema(schema_in);
  TextCodebook codebook = TextCodebook::defaults();
  if (options.codebook) {
    auto cb_in = open_text(*options.codebook);
    codebook = read_codebook(cb_in, codebook);
  }
  auto raw_in = open_text(options.input.value_or(in_run(ctx, artifact::kRaw)));
  const auto raw = parse_table(raw_in, schema);
  const auto table = resample_1hz(convert_text_labels(raw, codebook));
  write_file_atomic(in_run(ctx, artifact::kTable), [&](std::ostream& o) { write_table(o, table); });
  write_file_atomic(in_run(ctx, artifact::kTableSchema), [&](std::ostream& o) { write_schema(o, schema); });
  log(ctx) << "ingest: " << raw.row_count() << " raw rows -> " << table.row_count()
           << " rows at 1 Hz\n";
}

void cmd_label(const RunContext& ctx, const LabelOptions& options) {
  ensure_run_dir(ctx);
  auto schema_in = open_text(in_run(ctx, artifact::kTableSchema));
  auto schema = read_schema(schema_in);
  auto in = open_text(in_run(ctx, artifact::kTable));
  const auto table = parse_table(in, schema);
  require(!table.find_column(kLabelColumn), ErrorKind::Schema, "table already has a LABEL column");
  const auto g = table.column(options.g_column).numeric_values();
  const auto stats = g_stats(g);
  const auto labels = label_overlimit(g);

  Column label_col{kLabelColumn, ColumnKind::Binary, {}};
  for (const auto l : labels.labels) label_col.cells.emplace_back(static_cast<double>(l));
  const auto labeled = with_column(table, std::move(label_col));
  schema.add(kLabelColumn, ColumnKind::Binary);

  write_file_atomic(in_run(ctx, artifact::kLabeled), [&](std::ostream& o) { write_table(o, labeled); });
  write_file_atomic(in_run(ctx, artifact::kLabeledSchema), [&](std::ostream& o) { write_schema(o, schema); });
  write_file_atomic(in_run(ctx, artifact::kLabelStats), [&](std::ostream& o) {
    o << "g_column=" << options.g_column << "\nn=" << stats.n << "\nmean=" << format_double(stats.mean)
      << "\nsigma=" << format_double(stats.sigma) << "\nthreshold=" << format_double(labels.threshold)
      << "\npositives=" << labels.positives() << '\n';
  });
  log(ctx) << "label: threshold " << format_double(labels.threshold) << ", " << labels.positives()
           << " of " << labels.size() << " instants over-limit\n";
}

void cmd_select(const RunContext& ctx, const SelectOptions& options) {
  ensure_run_dir(ctx);
  const auto labeled = load_labeled(ctx.run_dir);
  LabelSeries labels;
  labels.labels = label_vector(labeled);
  const auto candidates = drop_column(labeled, kLabelColumn);
  require(candidates.find_column(options.g_column).has_value(), ErrorKind::Schema,
          "no column named '" + options.g_column + "'");
  const auto report = select_features(candidates, labels, options.threshold, options.g_column);
  write_file_atomic(in_run(ctx, artifact::kCorrelation), [&](std::ostream& o) { print_report(o, report); });
  write_file_atomic(in_run(ctx, artifact::kSelected), [&](std::ostream& o) { write_selected(o, report); });
  print_report(log(ctx), report);
}

namespace {

struct PreparedData {
  std::vector<std::string> features;
  WindowSet windows;
  SplitIndices split;
  NormalizationStats stats;
};

PreparedData prepare_training_data(const RunContext& ctx, std::size_t time_step,
                                   NormalizationMode mode) {
  const auto labeled = load_labeled(ctx.run_dir);
  PreparedData d;
  d.features = load_selected(ctx);
  const auto rows = extract_features(labeled, d.features);
  const auto labels = label_vector(labeled);
  d.windows = build_windows(rows, labels, time_step, labeled.flights());
  require(d.windows.count >= 2, ErrorKind::DegenerateData, "fewer than 2 windows at this time step");
  d.split = split_80_20(d.windows.count, ctx.seed);
  require(!d.split.test.empty(), ErrorKind::DegenerateData, "test split is empty");
  d.stats = mode == NormalizationMode::LeakFree
                ? fit_minmax(rows, covered_rows(d.windows, d.split.train))
                : fit_minmax(rows);
  normalize_windows(d.windows, d.stats);
  return d;
}

GridRow top_grid_row(const RunContext& ctx) {
  auto in = open_text(in_run(ctx, artifact::kGridTsv));
  for (const auto& row : read_grid_tsv(in)) {
    if (row.feasible) return row;
  }
  fail(ErrorKind::DegenerateData, "grid has no feasible row");
}

}  // namespace

void cmd_train(const RunContext& ctx, const TrainOptions& options) {
  ensure_run_dir(ctx);
  auto config = options.config;
  config.seed = ctx.seed;
  std::size_t time_step = options.time_step;
  if (options.from_grid) {
    const auto top = top_grid_row(ctx);
    time_step = top.time_step;
    config.units = top.units;
    config.learning_rate = top.learning_rate;
    log(ctx) << "train: using grid top row T=" << time_step << " n=" << config.units
             << " alpha=" << format_double(config.learning_rate) << '\n';
  }
  config.validate();
  require(time_step >= 1, ErrorKind::Argument, "time step must be at least 1");

  const auto data = prepare_training_data(ctx, time_step, options.normalization);
  log(ctx) << "train: " << data.windows.count << " windows (T=" << time_step << ", k="
           << data.features.size() << "), " << data.split.train.size() << " train / "
           << data.split.test.size() << " test, " << to_string(config.cost_mode) << " loss\n"
           << "epoch\ttrain_loss\ttrain_accuracy\ttest_accuracy\n";
  auto& out = log(ctx);
  const auto result = train(data.windows, data.split, config,
                            [&](const EpochRecord& r) { out << format_epoch(r) << '\n' << std::flush; });

  Model model{result.params, time_step, data.features, data.stats, config.threshold};
  const auto cm = evaluate(result.params, data.windows, data.split.test, config.threshold);
  const auto m = metrics(cm);

  write_file_atomic(in_run(ctx, artifact::kWindows), [&](std::ostream& o) { write_windows(o, data.windows); });
  write_file_atomic(in_run(ctx, artifact::kSplitTrain),
                    [&](std::ostream& o) { write_index_list(o, data.split.train); });
  write_file_atomic(in_run(ctx, artifact::kSplitTest),
                    [&](std::ostream& o) { write_index_list(o, data.split.test); });
  write_file_atomic(in_run(ctx, artifact::kModel), [&](std::ostream& o) { save_model(o, model); });
  write_file_atomic(in_run(ctx, artifact::kHistory), [&](std::ostream& o) { write_history(o, result.history); });
  write_file_atomic(in_run(ctx, artifact::kConfusion), [&](std::ostream& o) { write_metrics_kv(o, cm, m); });
  write_file_atomic(in_run(ctx, artifact::kMetrics), [&](std::ostream& o) { print_metrics(o, cm, m); });
  out << "test set:\n";
  print_metrics(out, cm, m);
}

void cmd_gridsearch(const RunContext& ctx, const GridOptions& options) {
  ensure_run_dir(ctx);
  auto spec = options.spec;
  spec.seed = ctx.seed;
  spec.validate();
  const auto labeled = load_labeled(ctx.run_dir);
  const auto features = load_selected(ctx);
  GridSource source{extract_features(labeled, features), label_vector(labeled), labeled.flights()};
  log(ctx) << "gridsearch: " << spec.cardinality() << " combinations, " << spec.folds
           << "-fold CV, " << spec.epochs << " epochs per fit\n";
  const auto result = grid_search(source, spec);
  write_file_atomic(in_run(ctx, artifact::kGridText), [&](std::ostream& o) { print_grid(o, result); });
  write_file_atomic(in_run(ctx, artifact::kGridTsv), [&](std::ostream& o) { write_grid_tsv(o, result); });
  print_grid(log(ctx), result);
}

bool cmd_evaluate(const RunContext& ctx, const EvaluateOptions& options) {
  ensure_run_dir(ctx);
  const auto model = load_model_file(options.model.value_or(in_run(ctx, artifact::kModel)));
  auto win_in = open_binary(in_run(ctx, artifact::kWindows));
  const auto windows = read_windows(win_in);
  auto test_in = open_text(in_run(ctx, artifact::kSplitTest));
  const auto test = read_index_list(test_in);
  require(windows.time_step == model.time_step && windows.features == model.features.size(),
          ErrorKind::Schema, "window file does not match the model shape");
  const auto cm = evaluate(model.params, windows, test, model.threshold);
  const auto m = metrics(cm);
  write_file_atomic(in_run(ctx, artifact::kEvaluation), [&](std::ostream& o) { write_metrics_kv(o, cm, m); });

  bool matches = false;
  const auto saved_path = in_run(ctx, artifact::kConfusion);
  if (fs::exists(saved_path)) {
    auto saved_in = open_text(saved_path);
    matches = read_confusion_kv(saved_in) == cm;
  }
  auto& out = log(ctx);
  print_metrics(out, cm, m);
  out << "matches training-time confusion matrix: " << (matches ? "yes" : "no") << '\n';
  return matches;
}

std::size_t cmd_warn(const RunContext& ctx, const WarnCommandOptions& options, std::ostream& out) {
  const auto model = load_model_file(options.model.value_or(in_run(ctx, artifact::kModel)));
  auto in = open_text(options.input.value_or(in_run(ctx, artifact::kTable)));
  WarnOptions warn_options{options.threshold, options.realtime};
  if (!options.output) return run_warn(in, out, model, warn_options);
  std::ofstream file(*options.output);
  require(static_cast<bool>(file), ErrorKind::Io, "cannot open " + options.output->string());
  const auto n = run_warn(in, file, model, warn_options);
  require(static_cast<bool>(file.flush()), ErrorKind::Io, "write failed: " + options.output->string());
  return n;
}

}  // namespace qarwarn
