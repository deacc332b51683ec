#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "qarwarn/dataset.hpp"
#include "qarwarn/trainer.hpp"

namespace qarwarn {

struct GridSpec {
  std::vector<std::size_t> time_steps{3, 5, 7, 10, 30, 50, 70, 90};
  std::vector<std::size_t> units{10, 20, 30, 40, 50, 60, 70};
  std::vector<double> learning_rates{0.001, 0.003, 0.005, 0.007, 0.01, 0.03};
  std::size_t epochs = 5;
  std::size_t folds = 4;
  std::uint64_t seed = 42;
  std::size_t batch_size = 32;
  CostMode cost_mode = CostMode::CostSensitive;
  double threshold = kDefaultDecisionThreshold;
  NormalizationMode normalization = NormalizationMode::AllRows;
  // Run combinations concurrently; results do not depend on this.
  bool parallel = false;

  void validate() const;
  std::size_t cardinality() const;
};

/// Un-windowed source rows: raw feature values, one label per row and
/// optional flight tags (windows never straddle flights).
struct GridSource {
  RowMatrix rows;
  std::vector<std::uint8_t> labels;
  std::vector<std::int32_t> flights;
};

struct GridRow {
  std::size_t time_step = 0;
  std::size_t units = 0;
  double learning_rate = 0.0;
  bool feasible = true;
  std::string note;  // reason when infeasible
  std::vector<double> fold_accuracies;
  double mean_accuracy = 0.0;
  double mean_fit_seconds = 0.0;
};

struct GridResult {
  std::vector<GridRow> rows;  // ranked
};

/// k-fold cross-validated search over every (T, n, alpha). Windows are
/// rebuilt per T; folds are drawn from the 80% training portion only. A
/// combination that cannot be evaluated stays in the result, flagged.
GridResult grid_search(const GridSource& source, const GridSpec& spec);

/// Feasible rows first; then mean accuracy descending, fit time ascending,
/// and smaller T, n, alpha. Stable.
std::vector<GridRow> rank_results(std::vector<GridRow> rows);

// Training seed of one combination; independent of evaluation order.
std::uint64_t combination_seed(std::uint64_t seed, std::size_t time_step, std::size_t units,
                               double learning_rate);

void print_grid(std::ostream& out, const GridResult& result);
// Tab-separated, one header line, rows in rank order.
void write_grid_tsv(std::ostream& out, const GridResult& result);
std::vector<GridRow> read_grid_tsv(std::istream& in);

}  // namespace qarwarn
