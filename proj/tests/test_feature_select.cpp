#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <sstream>

#include "oracles.hpp"
#include "qarwarn/error.hpp"
#include "qarwarn/feature_select.hpp"

using namespace qarwarn;

namespace {

ErrorKind kind_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.kind();
  }
  ADD_FAILURE() << "no error raised";
  return ErrorKind::Argument;
}

QarTable numeric_table(const std::vector<std::pair<std::string, std::vector<double>>>& cols) {
  std::vector<Column> columns;
  for (const auto& [name, values] : cols) {
    Column c{name, ColumnKind::Continuous, {}};
    for (const double v : values) c.cells.emplace_back(v);
    columns.push_back(std::move(c));
  }
  const auto n = cols.front().second.size();
  std::vector<std::int64_t> ts(n);
  std::iota(ts.begin(), ts.end(), 0);
  return QarTable(std::move(columns), ts, std::vector<std::int32_t>(n, 0));
}

}  // namespace

TEST(Rank, Examples) {
  EXPECT_EQ(rank_with_ties(std::vector<double>{10, 20, 30}), (std::vector<double>{1, 2, 3}));
  EXPECT_EQ(rank_with_ties(std::vector<double>{5, 5, 5}), (std::vector<double>{2, 2, 2}));
  EXPECT_EQ(rank_with_ties(std::vector<double>{1, 2, 2, 3}), (std::vector<double>{1, 2.5, 2.5, 4}));
  EXPECT_EQ(kind_of([] { rank_with_ties(std::vector<double>{}); }), ErrorKind::Argument);
}

TEST(Rank, MatchesOracleAndSumsToTriangle) {
  std::mt19937_64 rng(1);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<double> v(1 + rng() % 30);
    for (auto& x : v) x = static_cast<double>(rng() % 5);
    const auto r = rank_with_ties(v);
    EXPECT_EQ(r, oracle::ranks(v));
    const double n = static_cast<double>(v.size());
    EXPECT_DOUBLE_EQ(std::accumulate(r.begin(), r.end(), 0.0), n * (n + 1) / 2);
  }
}

TEST(Spearman, Examples) {
  EXPECT_NEAR(spearman(std::vector<double>{1, 2, 3}, std::vector<double>{2, 4, 6}), 1.0, 1e-15);
  EXPECT_NEAR(spearman(std::vector<double>{1, 2, 3}, std::vector<double>{3, 2, 1}), -1.0, 1e-15);
  const std::vector<double> x{1, 2, 2, 3}, y{0, 1, 1, 1};
  EXPECT_NEAR(spearman(x, y), oracle::spearman(x, y), 1e-12);
  EXPECT_NEAR(spearman(x, y), 0.8165, 5e-5);
}

TEST(Spearman, Errors) {
  EXPECT_EQ(kind_of([] { spearman(std::vector<double>{1, 2}, std::vector<double>{1, 2, 3}); }),
            ErrorKind::Argument);
  EXPECT_EQ(kind_of([] { spearman(std::vector<double>{1}, std::vector<double>{1}); }),
            ErrorKind::Argument);
  EXPECT_EQ(kind_of([] { spearman(std::vector<double>{4, 4, 4}, std::vector<double>{1, 2, 3}); }),
            ErrorKind::UndefinedCorrelation);
  EXPECT_FALSE(try_spearman(std::vector<double>{1, 2, 3}, std::vector<double>{0, 0, 0}));
}

TEST(Spearman, SymmetricAndMonotoneInvariant) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(0.1, 10);
  for (int trial = 0; trial < 300; ++trial) {
    std::vector<double> x(2 + rng() % 15), y(x.size());
    for (auto& v : x) v = trial % 2 ? std::round(u(rng)) : u(rng);
    for (auto& v : y) v = u(rng);
    if (!try_spearman(x, y)) continue;
    EXPECT_NEAR(spearman(x, y), spearman(y, x), 1e-12);
    std::vector<double> cubed(x);
    for (auto& v : cubed) v = v * v * v;
    EXPECT_NEAR(spearman(cubed, y), spearman(x, y), 1e-12);
    const double r = spearman(x, y);
    EXPECT_LE(std::fabs(r), 1.0);
  }
}

TEST(Spearman, SmallAlphabetExhaustiveUpToLengthSix) {
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> u(-1, 1);
  for (std::size_t len = 2; len <= 6; ++len) {
    std::size_t combos = 1;
    for (std::size_t i = 0; i < len; ++i) combos *= 3;
    for (std::size_t code = 0; code < combos; ++code) {
      std::vector<double> x(len), y(len);
      auto c = code;
      for (auto& v : x) {
        v = static_cast<double>(c % 3);
        c /= 3;
      }
      for (auto& v : y) v = u(rng);
      const auto r = try_spearman(x, y);
      const double o = oracle::spearman(x, y);
      if (std::isnan(o)) {
        EXPECT_FALSE(r);
      } else {
        ASSERT_TRUE(r);
        EXPECT_NEAR(*r, o, 1e-12);
      }
    }
  }
}

TEST(SelectFeatures, ConstantColumnExcludedEvenAtZeroThreshold) {
  LabelSeries labels;
  labels.labels = {0, 0, 1, 0, 1, 1};
  const auto t = numeric_table({{"G", {1, 1, 2, 1, 2, 2}},
                                {"INFO", {0.1, 0.2, 0.9, 0.3, 0.8, 0.7}},
                                {"FLAT", {3, 3, 3, 3, 3, 3}}});
  const auto r = select_features(t, labels, 0.0);
  ASSERT_EQ(r.rows.size(), 2u);  // G is not a candidate
  EXPECT_EQ(r.rows[0].attribute, "INFO");
  EXPECT_EQ(r.rows[1].attribute, "FLAT");
  EXPECT_FALSE(r.rows[1].r_s);
  EXPECT_EQ(r.selected, std::vector<std::string>{"INFO"});
}

TEST(SelectFeatures, ThresholdIsStrict) {
  LabelSeries labels;
  labels.labels = {0, 1, 0, 1};
  const auto t = numeric_table({{"G", {0, 1, 0, 1}}, {"A", {1, 2, 3, 4}}});
  const auto r = select_features(t, labels, 0.0);
  const double r_a = std::fabs(*r.rows[0].r_s);
  EXPECT_TRUE(select_features(t, labels, std::nextafter(r_a, 0.0)).selected.size() == 1);
  EXPECT_TRUE(select_features(t, labels, r_a).selected.empty());
}

TEST(SelectFeatures, Errors) {
  LabelSeries labels;
  labels.labels = {0, 1};
  const auto t = numeric_table({{"G", {0, 1, 2}}, {"A", {1, 2, 3}}});
  EXPECT_EQ(kind_of([&] { select_features(t, labels); }), ErrorKind::Argument);
  labels.labels = {0, 1, 1};
  EXPECT_EQ(kind_of([&] { select_features(t, labels, 1.0); }), ErrorKind::Argument);
  EXPECT_EQ(kind_of([&] { select_features(t, labels, -0.1); }), ErrorKind::Argument);
}

TEST(SelectFeatures, SyntheticLeadsRankAboveNoiseAndMatchOracle) {
  const auto raw = convert_text_labels(generate_synthetic({42, 2000, 6, 0.02}), TextCodebook::defaults());
  const auto labels = label_overlimit(raw.column("G").numeric_values());
  const auto report = select_features(raw, labels);
  std::vector<double> y(labels.labels.begin(), labels.labels.end());
  double weakest_lead = 1.0, strongest_noise = 0.0;
  for (const auto& row : report.rows) {
    ASSERT_TRUE(row.r_s);
    EXPECT_NEAR(*row.r_s, oracle::spearman(raw.column(row.attribute).numeric_values(), y), 1e-12);
    if (row.attribute.rfind("LEAD", 0) == 0) weakest_lead = std::min(weakest_lead, std::fabs(*row.r_s));
    if (row.attribute.rfind("NOISE", 0) == 0) strongest_noise = std::max(strongest_noise, std::fabs(*row.r_s));
  }
  EXPECT_GT(weakest_lead, strongest_noise);
}

TEST(SelectFeatures, ParallelMatchesSerialAndRowPermutationInvariant) {
  const auto raw = convert_text_labels(generate_synthetic({9, 800, 8, 0.03}), TextCodebook::defaults());
  const auto labels = label_overlimit(raw.column("G").numeric_values());
  const auto a = select_features(raw, labels);
  const auto b = select_features_serial(raw, labels);
  ASSERT_EQ(a.rows.size(), b.rows.size());
  for (std::size_t i = 0; i < a.rows.size(); ++i) {
    EXPECT_EQ(a.rows[i].attribute, b.rows[i].attribute);
    EXPECT_EQ(a.rows[i].r_s, b.rows[i].r_s);
  }

  std::vector<std::size_t> perm(raw.row_count());
  std::iota(perm.begin(), perm.end(), 0);
  std::mt19937_64 rng(4);
  std::shuffle(perm.begin(), perm.end(), rng);
  std::vector<Column> cols;
  for (const auto& c : raw.columns()) {
    Column p{c.name, c.kind, {}};
    for (const auto i : perm) p.cells.push_back(c.cells[i]);
    cols.push_back(std::move(p));
  }
  const QarTable shuffled(std::move(cols), raw.timestamps(), raw.flights());
  LabelSeries permuted;
  for (const auto i : perm) permuted.labels.push_back(labels.labels[i]);
  const auto c = select_features(shuffled, permuted);
  EXPECT_EQ(c.selected, a.selected);
  for (std::size_t i = 0; i < a.rows.size(); ++i) EXPECT_NEAR(*c.rows[i].r_s, *a.rows[i].r_s, 1e-12);
}

TEST(SelectFeatures, ReportAndSelectedFileRoundTrip) {
  LabelSeries labels;
  labels.labels = {0, 0, 1, 1};
  const auto t = numeric_table({{"G", {0, 0, 1, 1}}, {"A", {1, 2, 3, 4}}, {"B", {4, 1, 3, 2}}});
  const auto r = select_features(t, labels);
  std::ostringstream text;
  print_report(text, r);
  EXPECT_NE(text.str().find("A"), std::string::npos);
  std::ostringstream sel;
  write_selected(sel, r);
  std::istringstream in(sel.str());
  EXPECT_EQ(read_selected(in), r.selected);
}
