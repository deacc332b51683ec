#include "qarwarn/feature_select.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <istream>
#include <numeric>
#include <ostream>

#include "qarwarn/error.hpp"
#include "qarwarn/text_io.hpp"

namespace qarwarn {

std::vector<double> rank_with_ties(std::span<const double> values) {
  require(!values.empty(), ErrorKind::Argument, "cannot rank an empty sequence");
  std::vector<std::size_t> order(values.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
  std::vector<double> ranks(values.size());
  std::size_t i = 0;
  while (i < order.size()) {
    std::size_t j = i + 1;
    while (j < order.size() && values[order[j]] == values[order[i]]) ++j;
    // Positions i..j-1 hold ranks i+1..j; their mean is (i+1+j)/2.
    const double shared = 0.5 * static_cast<double>(i + 1 + j);
    for (std::size_t k = i; k < j; ++k) ranks[order[k]] = shared;
    i = j;
  }
  return ranks;
}

namespace {

std::optional<double> pearson(const std::vector<double>& p, const std::vector<double>& q) {
  const auto n = static_cast<double>(p.size());
  const double p_mean = std::accumulate(p.begin(), p.end(), 0.0) / n;
  const double q_mean = std::accumulate(q.begin(), q.end(), 0.0) / n;
  double cov = 0.0;
  double p_ss = 0.0;
  double q_ss = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double dp = p[i] - p_mean;
    const double dq = q[i] - q_mean;
    cov += dp * dq;
    p_ss += dp * dp;
    q_ss += dq * dq;
  }
  if (p_ss == 0.0 || q_ss == 0.0) return std::nullopt;
  return std::clamp(cov / (std::sqrt(p_ss) * std::sqrt(q_ss)), -1.0, 1.0);
}

bool is_constant(std::span<const double> v) {
  return std::all_of(v.begin(), v.end(), [&](double x) { return x == v.front(); });
}

void check_pair(std::span<const double> x, std::span<const double> y) {
  require(x.size() == y.size(), ErrorKind::Argument, "sequences differ in length");
  require(x.size() >= 2, ErrorKind::Argument, "need at least 2 observations");
}

}  // namespace

std::optional<double> try_spearman(std::span<const double> x, std::span<const double> y) {
  check_pair(x, y);
  if (is_constant(x) || is_constant(y)) return std::nullopt;
  return pearson(rank_with_ties(x), rank_with_ties(y));
}

double spearman(std::span<const double> x, std::span<const double> y) {
  const auto r = try_spearman(x, y);
  if (!r) fail(ErrorKind::UndefinedCorrelation, "a constant sequence has no rank correlation");
  return *r;
}

namespace {

struct Candidates {
  std::vector<std::string> names;
  std::vector<std::vector<double>> values;
  std::vector<double> labels;
  std::vector<double> label_ranks;
};

Candidates gather(const QarTable& table, const LabelSeries& labels, double threshold,
                  const std::string& g_column) {
  require(table.row_count() == labels.size(), ErrorKind::Argument,
          "table has " + std::to_string(table.row_count()) + " rows but " +
              std::to_string(labels.size()) + " labels");
  require(threshold >= 0.0 && threshold < 1.0, ErrorKind::Argument,
          "correlation threshold must lie in [0, 1)");
  require(table.row_count() >= 2, ErrorKind::Argument, "need at least 2 rows");
  Candidates c;
  for (const auto& col : table.columns()) {
    if (col.name == g_column) continue;
    c.names.push_back(col.name);
    c.values.push_back(col.numeric_values());
  }
  c.labels.assign(labels.labels.begin(), labels.labels.end());
  if (!is_constant(c.labels)) c.label_ranks = rank_with_ties(c.labels);
  return c;
}

std::optional<double> correlate(const Candidates& c, std::size_t a) {
  if (c.label_ranks.empty() || is_constant(c.values[a])) return std::nullopt;
  return pearson(rank_with_ties(c.values[a]), c.label_ranks);
}

CorrelationReport assemble(Candidates c, std::vector<std::optional<double>> r, double threshold) {
  CorrelationReport report;
  report.threshold = threshold;
  for (std::size_t a = 0; a < c.names.size(); ++a) {
    report.rows.push_back(CorrelationRow{std::move(c.names[a]), r[a]});
  }
  std::sort(report.rows.begin(), report.rows.end(),
            [](const CorrelationRow& a, const CorrelationRow& b) {
              if (a.r_s.has_value() != b.r_s.has_value()) return a.r_s.has_value();
              if (a.r_s && std::fabs(*a.r_s) != std::fabs(*b.r_s)) {
                return std::fabs(*a.r_s) > std::fabs(*b.r_s);
              }
              return a.attribute < b.attribute;
            });
  for (const auto& row : report.rows) {
    if (row.r_s && std::fabs(*row.r_s) > threshold) report.selected.push_back(row.attribute);
  }
  return report;
}

}  // namespace

CorrelationReport select_features(const QarTable& table, const LabelSeries& labels,
                                  double threshold, const std::string& g_column) {
  auto c = gather(table, labels, threshold, g_column);
  const auto count = static_cast<std::ptrdiff_t>(c.names.size());
  std::vector<std::optional<double>> r(c.names.size());
#pragma omp parallel for schedule(dynamic)
  for (std::ptrdiff_t a = 0; a < count; ++a) {
    r[static_cast<std::size_t>(a)] = correlate(c, static_cast<std::size_t>(a));
  }
  return assemble(std::move(c), std::move(r), threshold);
}

CorrelationReport select_features_serial(const QarTable& table, const LabelSeries& labels,
                                         double threshold, const std::string& g_column) {
  auto c = gather(table, labels, threshold, g_column);
  std::vector<std::optional<double>> r(c.names.size());
  for (std::size_t a = 0; a < c.names.size(); ++a) r[a] = correlate(c, a);
  return assemble(std::move(c), std::move(r), threshold);
}

void print_report(std::ostream& out, const CorrelationReport& report) {
  std::size_t width = 9;
  for (const auto& row : report.rows) width = std::max(width, row.attribute.size());
  out << std::left << std::setw(static_cast<int>(width)) << "attribute" << "  "
      << std::right << std::setw(10) << "r_s" << "  selected\n";
  for (const auto& row : report.rows) {
    out << std::left << std::setw(static_cast<int>(width)) << row.attribute << "  " << std::right
        << std::setw(10);
    if (row.r_s) {
      out << std::fixed << std::setprecision(6) << *row.r_s;
    } else {
      out << "undefined";
    }
    const bool chosen = row.r_s && std::fabs(*row.r_s) > report.threshold;
    out << "  " << (chosen ? "yes" : "no") << '\n';
  }
  out << std::defaultfloat;
  out << "threshold |r_s| > " << format_double(report.threshold) << ", selected "
      << report.selected.size() << " of " << report.rows.size() << '\n';
}

void write_selected(std::ostream& out, const CorrelationReport& report) {
  for (const auto& name : report.selected) out << name << '\n';
}

std::vector<std::string> read_selected(std::istream& in) {
  std::vector<std::string> out;
  std::string line;
  while (std::getline(in, line)) {
    const auto name = trim(line);
    if (!name.empty()) out.emplace_back(name);
  }
  return out;
}

}  // namespace qarwarn
