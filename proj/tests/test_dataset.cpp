#include <gtest/gtest.h>

#include <algorithm>
#include <set>
#include <sstream>

#include "qarwarn/dataset.hpp"
#include "qarwarn/error.hpp"

using namespace qarwarn;

namespace {

RowMatrix column_matrix(const std::vector<std::vector<double>>& rows) {
  RowMatrix m(rows.size(), rows.front().size());
  for (std::size_t r = 0; r < rows.size(); ++r) {
    for (std::size_t c = 0; c < m.cols; ++c) m.at(r, c) = rows[r][c];
  }
  return m;
}

RowMatrix ramp(std::size_t rows, std::size_t cols) {
  RowMatrix m(rows, cols);
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < cols; ++c) m.at(r, c) = static_cast<double>(r * 10 + c);
  }
  return m;
}

}  // namespace

TEST(MinMax, FitExamples) {
  const auto s = fit_minmax(column_matrix({{0, 7}, {5, 7}, {10, 7}}));
  EXPECT_EQ(s.min, (std::vector<double>{0, 7}));
  EXPECT_EQ(s.max, (std::vector<double>{10, 7}));
  const auto one = fit_minmax(column_matrix({{3, -2}}));
  EXPECT_EQ(one.min, one.max);
}

TEST(MinMax, ApplyExamples) {
  NormalizationStats s{{0, 7}, {10, 7}};
  const auto out = apply_minmax(column_matrix({{0, 7}, {5, 7}, {10, 7}}), s);
  EXPECT_EQ(out.at(0, 0), 0.0);
  EXPECT_EQ(out.at(1, 0), 0.5);
  EXPECT_EQ(out.at(2, 0), 1.0);
  EXPECT_EQ(out.at(1, 1), 0.0);  // constant feature
  std::vector<double> row{12, 7}, dst(2);
  apply_minmax_row(row, dst, s);
  EXPECT_EQ(dst[0], 1.0);  // clamp
  std::vector<double> low{-3, 7};
  apply_minmax_row(low, dst, s);
  EXPECT_EQ(dst[0], 0.0);
  EXPECT_THROW(apply_minmax(column_matrix({{1, 2, 3}}), s), Error);
}

TEST(MinMax, SubsetFitUsesOnlyListedRows) {
  const auto m = column_matrix({{0}, {5}, {10}});
  const std::vector<std::size_t> idx{0, 1};
  EXPECT_EQ(fit_minmax(m, idx).max[0], 5.0);
}

TEST(Windows, CountingAndLabelAlignment) {
  const auto rows = ramp(10, 2);
  std::vector<std::uint8_t> labels{0, 0, 0, 1, 0, 0, 1, 0, 0, 1};
  const auto w = build_windows(rows, labels, 3);
  ASSERT_EQ(w.count, 7u);
  const auto w0 = w.window(0);
  EXPECT_EQ(std::vector<double>(w0.begin(), w0.end()), (std::vector<double>{0, 1, 10, 11, 20, 21}));
  EXPECT_EQ(w.labels[0], 1);  // label of row 3
  for (std::size_t i = 0; i < w.count; ++i) EXPECT_EQ(w.labels[i], labels[i + 3]);
}

TEST(Windows, Boundaries) {
  const auto rows = ramp(4, 1);
  std::vector<std::uint8_t> labels(4, 0);
  EXPECT_EQ(build_windows(rows, labels, 3).count, 1u);
  EXPECT_EQ(build_windows(rows, labels, 1).count, 3u);
  EXPECT_THROW(build_windows(rows, labels, 4), Error);
}

TEST(Windows, OverlappingWindowsReconstructRows) {
  const auto rows = ramp(12, 3);
  const std::vector<std::uint8_t> labels(12, 0);
  const auto w = build_windows(rows, labels, 4);
  for (std::size_t i = 0; i < w.count; ++i) {
    for (std::size_t t = 0; t < 4; ++t) {
      for (std::size_t f = 0; f < 3; ++f) EXPECT_EQ(w.window(i)[t * 3 + f], rows.at(i + t, f));
    }
  }
}

TEST(Windows, NeverCrossFlights) {
  const auto rows = ramp(10, 1);
  const std::vector<std::uint8_t> labels(10, 0);
  const std::vector<std::int32_t> flights{0, 0, 0, 0, 0, 1, 1, 1, 1, 1};
  const auto w = build_windows(rows, labels, 2, flights);
  EXPECT_EQ(w.count, 6u);  // 3 per flight
  for (std::size_t i = 0; i < w.count; ++i) {
    EXPECT_EQ(flights[w.origins[i]], flights[w.origins[i] + 2]);
  }
  EXPECT_EQ(build_windows(rows, labels, 2, flights, false).count, 8u);
}

TEST(Windows, NormalizedEntriesInUnitInterval) {
  auto rows = ramp(30, 3);
  rows.at(4, 1) = -100;
  const std::vector<std::uint8_t> labels(30, 0);
  auto w = build_windows(rows, labels, 5);
  const auto train = std::vector<std::size_t>{0, 1, 2};
  normalize_windows(w, fit_minmax(rows, covered_rows(w, train)));
  for (const double v : w.inputs) {
    EXPECT_GE(v, 0.0);
    EXPECT_LE(v, 1.0);
  }
}

TEST(Split, SizesAndDeterminism) {
  const auto a = split_80_20(10, 1);
  EXPECT_EQ(a.train.size(), 8u);
  EXPECT_EQ(a.test.size(), 2u);
  EXPECT_EQ(split_80_20(5, 1).train.size(), 4u);
  EXPECT_EQ(split_80_20(10, 1).train, a.train);
  EXPECT_NE(split_80_20(1000, 1).train, split_80_20(1000, 2).train);
  EXPECT_THROW(split_80_20(1, 1), Error);

  const auto big = split_80_20(997, 3);
  std::set<std::size_t> all(big.train.begin(), big.train.end());
  for (const auto t : big.test) EXPECT_TRUE(all.insert(t).second) << "overlap";
  EXPECT_EQ(all.size(), 997u);
  EXPECT_EQ(big.train.size(), 798u);  // round(797.6)
}

TEST(Folds, SizesPartitionAndErrors) {
  std::vector<std::size_t> eight{0, 1, 2, 3, 4, 5, 6, 7};
  for (const auto& f : make_folds(eight, 4, 1).folds) EXPECT_EQ(f.size(), 2u);

  std::vector<std::size_t> ten{10, 11, 12, 13, 14, 15, 16, 17, 18, 19};
  const auto plan = make_folds(ten, 4, 2);
  std::multiset<std::size_t> sizes;
  std::vector<std::size_t> seen;
  for (const auto& f : plan.folds) {
    sizes.insert(f.size());
    seen.insert(seen.end(), f.begin(), f.end());
  }
  EXPECT_EQ(sizes, (std::multiset<std::size_t>{2, 2, 3, 3}));
  std::sort(seen.begin(), seen.end());
  EXPECT_EQ(seen, ten);
  EXPECT_EQ(plan.training_indices(0).size(), 10 - plan.folds[0].size());

  EXPECT_THROW(make_folds(ten, 1, 0), Error);
  EXPECT_THROW(make_folds(ten, 11, 0), Error);
}

TEST(WindowFile, RoundTripAndCorruption) {
  const auto w = make_separable_windows(3, 20, 4, 2);
  std::ostringstream out;
  write_windows(out, w);
  std::istringstream in(out.str());
  const auto back = read_windows(in);
  EXPECT_EQ(back.count, w.count);
  EXPECT_EQ(back.time_step, w.time_step);
  EXPECT_EQ(back.features, w.features);
  EXPECT_EQ(back.inputs, w.inputs);
  EXPECT_EQ(back.labels, w.labels);

  std::istringstream truncated(out.str().substr(0, out.str().size() - 5));
  EXPECT_THROW(read_windows(truncated), Error);
  std::istringstream garbage("NOPE....");
  EXPECT_THROW(read_windows(garbage), Error);
}

TEST(SeparableWindows, ConstructionContract) {
  const auto w = make_separable_windows(42);
  EXPECT_EQ(w.count, 500u);
  EXPECT_EQ(std::count(w.labels.begin(), w.labels.end(), 1), 25);
  for (std::size_t i = 0; i < w.count; ++i) {
    for (std::size_t t = 7; t < 10; ++t) {
      const double v = w.window(i)[t * 3];
      if (w.labels[i]) {
        EXPECT_GE(v, 0.8);
      } else {
        EXPECT_LE(v, 0.5);
      }
    }
  }
}
