#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "qarwarn/error.hpp"
#include "qarwarn/feature_select.hpp"
#include "qarwarn/hyperopt.hpp"
#include "qarwarn/trainer.hpp"

namespace qarwarn {

// Process exit status for each error kind; 0 is success.
int exit_code(ErrorKind kind) noexcept;
inline constexpr int kExitUnknownError = 1;

// File names inside a run directory.
namespace artifact {
inline constexpr const char* kRaw = "raw.csv";
inline constexpr const char* kRawSchema = "schema.txt";
inline constexpr const char* kSpikes = "spikes.txt";
inline constexpr const char* kTable = "table.csv";
inline constexpr const char* kTableSchema = "table.schema";
inline constexpr const char* kLabeled = "labeled.csv";
inline constexpr const char* kLabeledSchema = "labeled.schema";
inline constexpr const char* kLabelStats = "labels.txt";
inline constexpr const char* kCorrelation = "correlation.txt";
inline constexpr const char* kSelected = "selected.txt";
inline constexpr const char* kWindows = "windows.bin";
inline constexpr const char* kSplitTrain = "split_train.txt";
inline constexpr const char* kSplitTest = "split_test.txt";
inline constexpr const char* kModel = "model.json";
inline constexpr const char* kHistory = "history.txt";
inline constexpr const char* kConfusion = "confusion.txt";
inline constexpr const char* kMetrics = "metrics.txt";
inline constexpr const char* kGridText = "grid.txt";
inline constexpr const char* kGridTsv = "grid.tsv";
inline constexpr const char* kEvaluation = "evaluation.txt";
}  // namespace artifact

struct RunContext {
  std::filesystem::path run_dir;
  std::uint64_t seed = 42;
  bool verbose = false;
  std::ostream* log = nullptr;  // progress and reports; nullptr silences
};

struct SynthOptions {
  std::size_t seconds = 2000;
  std::size_t attributes = 6;
  double overlimit_rate = 0.02;
  std::size_t flights = 1;
};

struct IngestOptions {
  std::optional<std::filesystem::path> input;     // default <run>/raw.csv
  std::optional<std::filesystem::path> schema;    // default <run>/schema.txt
  std::optional<std::filesystem::path> codebook;  // layered over the built-in table
};

struct LabelOptions {
  std::string g_column = "G";
};

struct SelectOptions {
  std::string g_column = "G";
  double threshold = kDefaultCorrelationThreshold;
};

struct TrainOptions {
  std::size_t time_step = 10;
  TrainConfig config;  // seed is taken from the run context
  NormalizationMode normalization = NormalizationMode::AllRows;
  bool from_grid = false;  // take T, n, alpha from the top feasible grid row
};

struct GridOptions {
  GridSpec spec;  // seed is taken from the run context
};

struct EvaluateOptions {
  std::optional<std::filesystem::path> model;  // default <run>/model.json
};

struct WarnCommandOptions {
  std::optional<std::filesystem::path> model;   // default <run>/model.json
  std::optional<std::filesystem::path> input;   // default <run>/table.csv
  std::optional<std::filesystem::path> output;  // default standard output
  std::optional<double> threshold;
  bool realtime = false;
};

void cmd_synth(const RunContext& ctx, const SynthOptions& options);
void cmd_ingest(const RunContext& ctx, const IngestOptions& options);
void cmd_label(const RunContext& ctx, const LabelOptions& options);
void cmd_select(const RunContext& ctx, const SelectOptions& options);
void cmd_train(const RunContext& ctx, const TrainOptions& options);
void cmd_gridsearch(const RunContext& ctx, const GridOptions& options);
// Returns true when the test-set confusion matrix equals the one saved by train.
bool cmd_evaluate(const RunContext& ctx, const EvaluateOptions& options);
// `out` receives the alert lines when no output path is given.
std::size_t cmd_warn(const RunContext& ctx, const WarnCommandOptions& options, std::ostream& out);

// Labeled table of a run directory (after `label`).
QarTable load_labeled(const std::filesystem::path& run_dir);

}  // namespace qarwarn
