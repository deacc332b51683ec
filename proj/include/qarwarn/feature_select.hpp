#pragma once

#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "qarwarn/labeling.hpp"
#include "qarwarn/qar_table.hpp"

namespace qarwarn {

/// Ascending 1-based ranks; tied values share the average of their ranks.
std::vector<double> rank_with_ties(std::span<const double> values);

/// Pearson correlation of the tied-average rank vectors.
///
/// The shortcut 1 - 6 sum d^2 / (n (n^2 - 1)) is only exact without ties,
/// so the rank vectors are correlated directly. A constant argument has no
/// rank spread and raises ErrorKind::UndefinedCorrelation.
double spearman(std::span<const double> x, std::span<const double> y);

// nullopt when x is constant.
std::optional<double> try_spearman(std::span<const double> x, std::span<const double> y);

struct CorrelationRow {
  std::string attribute;
  std::optional<double> r_s;  // nullopt: constant column, correlation undefined
};

struct CorrelationReport {
  std::vector<CorrelationRow> rows;  // by |r_s| descending, undefined rows last
  double threshold = 0.05;
  std::vector<std::string> selected;  // |r_s| > threshold, in row order
};

inline constexpr double kDefaultCorrelationThreshold = 0.05;

/// Screens every attribute except `g_column` against the labels. The
/// per-attribute correlations run in parallel; row order is a deterministic
/// sort independent of scheduling.
CorrelationReport select_features(const QarTable& table, const LabelSeries& labels,
                                  double threshold = kDefaultCorrelationThreshold,
                                  const std::string& g_column = "G");

// Single-threaded reference for select_features.
CorrelationReport select_features_serial(const QarTable& table, const LabelSeries& labels,
                                         double threshold = kDefaultCorrelationThreshold,
                                         const std::string& g_column = "G");

void print_report(std::ostream& out, const CorrelationReport& report);
void write_selected(std::ostream& out, const CorrelationReport& report);
std::vector<std::string> read_selected(std::istream& in);

}  // namespace qarwarn
