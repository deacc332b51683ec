#include "qarwarn/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <istream>
#include <numeric>
#include <ostream>
#include <random>

#include "qarwarn/error.hpp"

namespace qarwarn {

RowMatrix extract_features(const QarTable& table, const std::vector<std::string>& features) {
  RowMatrix m(table.row_count(), features.size());
  for (std::size_t f = 0; f < features.size(); ++f) {
    const auto values = table.column(features[f]).numeric_values();
    for (std::size_t r = 0; r < m.rows; ++r) m.at(r, f) = values[r];
  }
  return m;
}

NormalizationMode parse_normalization_mode(const std::string& text) {
  if (text == "all-rows") return NormalizationMode::AllRows;
  if (text == "leak-free") return NormalizationMode::LeakFree;
  fail(ErrorKind::Argument, "normalization mode must be all-rows or leak-free");
}

const char* to_string(NormalizationMode mode) noexcept {
  return mode == NormalizationMode::LeakFree ? "leak-free" : "all-rows";
}

NormalizationStats fit_minmax(const RowMatrix& rows) {
  std::vector<std::size_t> all(rows.rows);
  std::iota(all.begin(), all.end(), std::size_t{0});
  return fit_minmax(rows, all);
}

NormalizationStats fit_minmax(const RowMatrix& rows, std::span<const std::size_t> row_indices) {
  require(!row_indices.empty(), ErrorKind::Argument, "cannot fit normalization on zero rows");
  NormalizationStats stats;
  const auto first = rows.row(row_indices.front());
  stats.min.assign(first.begin(), first.end());
  stats.max.assign(first.begin(), first.end());
  for (const auto r : row_indices) {
    require(r < rows.rows, ErrorKind::Argument, "row index out of range");
    const auto row = rows.row(r);
    for (std::size_t f = 0; f < rows.cols; ++f) {
      stats.min[f] = std::min(stats.min[f], row[f]);
      stats.max[f] = std::max(stats.max[f], row[f]);
    }
  }
  return stats;
}

void apply_minmax_row(std::span<const double> in, std::span<double> out,
                      const NormalizationStats& stats) {
  require(in.size() == stats.features() && out.size() == in.size(), ErrorKind::Argument,
          "row has " + std::to_string(in.size()) + " features, normalization expects " +
              std::to_string(stats.features()));
  for (std::size_t f = 0; f < in.size(); ++f) {
    const double span = stats.max[f] - stats.min[f];
    out[f] = span > 0.0 ? std::clamp((in[f] - stats.min[f]) / span, 0.0, 1.0) : 0.0;
  }
}

RowMatrix apply_minmax(const RowMatrix& rows, const NormalizationStats& stats) {
  require(rows.cols == stats.features(), ErrorKind::Argument,
          "feature count does not match normalization stats");
  RowMatrix out(rows.rows, rows.cols);
  for (std::size_t r = 0; r < rows.rows; ++r) apply_minmax_row(rows.row(r), out.row(r), stats);
  return out;
}

WindowSet build_windows(const RowMatrix& rows, std::span<const std::uint8_t> labels,
                        std::size_t time_step, std::span<const std::int32_t> flights,
                        bool reset_per_flight) {
  require(time_step >= 1, ErrorKind::Argument, "time step must be at least 1");
  require(labels.size() == rows.rows, ErrorKind::Argument, "label count differs from row count");
  require(flights.empty() || flights.size() == rows.rows, ErrorKind::Argument,
          "flight tags differ from row count");
  require(rows.rows >= time_step + 1, ErrorKind::Argument,
          "need at least " + std::to_string(time_step + 1) + " rows for time step " +
              std::to_string(time_step) + ", have " + std::to_string(rows.rows));

  const bool segmented = reset_per_flight && !flights.empty();
  std::vector<std::size_t> starts;
  for (std::size_t w = 0; w + time_step < rows.rows; ++w) {
    if (segmented && flights[w] != flights[w + time_step]) continue;
    starts.push_back(w);
  }

  WindowSet ws;
  ws.count = starts.size();
  ws.time_step = time_step;
  ws.features = rows.cols;
  ws.inputs.resize(ws.count * time_step * rows.cols);
  ws.labels.resize(ws.count);
  ws.origins = starts;
  const auto stride = time_step * rows.cols;
  const auto count = static_cast<std::ptrdiff_t>(ws.count);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < count; ++i) {
    const auto w = static_cast<std::size_t>(i);
    const auto src = rows.data.begin() + static_cast<std::ptrdiff_t>(starts[w] * rows.cols);
    std::copy(src, src + static_cast<std::ptrdiff_t>(stride),
              ws.inputs.begin() + static_cast<std::ptrdiff_t>(w * stride));
    ws.labels[w] = labels[starts[w] + time_step];
  }
  return ws;
}

void normalize_windows(WindowSet& windows, const NormalizationStats& stats) {
  require(windows.features == stats.features(), ErrorKind::Argument,
          "feature count does not match normalization stats");
  const auto steps = windows.count * windows.time_step;
  for (std::size_t s = 0; s < steps; ++s) {
    std::span<double> row(windows.inputs.data() + s * windows.features, windows.features);
    apply_minmax_row(row, row, stats);
  }
}

std::vector<std::size_t> covered_rows(const WindowSet& windows,
                                      std::span<const std::size_t> window_indices) {
  require(windows.origins.size() == windows.count, ErrorKind::State,
          "window set carries no source-row origins");
  std::vector<std::size_t> rows;
  for (const auto w : window_indices) {
    for (std::size_t t = 0; t < windows.time_step; ++t) rows.push_back(windows.origins[w] + t);
  }
  std::sort(rows.begin(), rows.end());
  rows.erase(std::unique(rows.begin(), rows.end()), rows.end());
  return rows;
}

SplitIndices split_80_20(std::size_t count, std::uint64_t seed) {
  require(count >= 2, ErrorKind::Argument, "need at least 2 windows to split");
  std::vector<std::size_t> order(count);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);
  // round(0.8 * count) without floating point.
  const auto n_train = (8 * count + 5) / 10;
  SplitIndices split;
  split.seed = seed;
  split.train.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_train));
  split.test.assign(order.begin() + static_cast<std::ptrdiff_t>(n_train), order.end());
  return split;
}

std::vector<std::size_t> FoldPlan::training_indices(std::size_t held_out) const {
  std::vector<std::size_t> out;
  for (std::size_t f = 0; f < folds.size(); ++f) {
    if (f != held_out) out.insert(out.end(), folds[f].begin(), folds[f].end());
  }
  return out;
}

FoldPlan make_folds(std::span<const std::size_t> train, std::size_t k, std::uint64_t seed) {
  require(k >= 2 && k <= train.size(), ErrorKind::Argument,
          "fold count " + std::to_string(k) + " must lie in [2, " + std::to_string(train.size()) + "]");
  std::vector<std::size_t> order(train.begin(), train.end());
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);
  FoldPlan plan;
  plan.k = k;
  const auto base = order.size() / k;
  const auto extra = order.size() % k;
  std::size_t pos = 0;
  for (std::size_t f = 0; f < k; ++f) {
    const auto size = base + (f < extra ? 1 : 0);
    plan.folds.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(pos),
                            order.begin() + static_cast<std::ptrdiff_t>(pos + size));
    pos += size;
  }
  return plan;
}

namespace {

constexpr char kMagic[4] = {'Q', 'W', 'I', 'N'};
constexpr std::uint32_t kWindowVersion = 1;

template <typename T>
void put(std::ostream& out, T value) {
  char buf[sizeof(T)];
  std::memcpy(buf, &value, sizeof(T));
  out.write(buf, sizeof(T));
}

template <typename T>
T get(std::istream& in) {
  char buf[sizeof(T)];
  if (!in.read(buf, sizeof(T))) fail(ErrorKind::Parse, "window file truncated");
  T value;
  std::memcpy(&value, buf, sizeof(T));
  return value;
}

}  // namespace

void write_windows(std::ostream& out, const WindowSet& windows) {
  out.write(kMagic, 4);
  put<std::uint32_t>(out, kWindowVersion);
  put<std::uint64_t>(out, windows.count);
  put<std::uint64_t>(out, windows.time_step);
  put<std::uint64_t>(out, windows.features);
  out.write(reinterpret_cast<const char*>(windows.inputs.data()),
            static_cast<std::streamsize>(windows.inputs.size() * sizeof(double)));
  out.write(reinterpret_cast<const char*>(windows.labels.data()),
            static_cast<std::streamsize>(windows.labels.size()));
}

WindowSet read_windows(std::istream& in) {
  char magic[4];
  if (!in.read(magic, 4) || std::memcmp(magic, kMagic, 4) != 0) {
    fail(ErrorKind::Parse, "not a window file (bad magic)");
  }
  const auto version = get<std::uint32_t>(in);
  require(version == kWindowVersion, ErrorKind::Parse,
          "unsupported window file version " + std::to_string(version));
  WindowSet ws;
  ws.count = get<std::uint64_t>(in);
  ws.time_step = get<std::uint64_t>(in);
  ws.features = get<std::uint64_t>(in);
  ws.inputs.resize(ws.count * ws.time_step * ws.features);
  ws.labels.resize(ws.count);
  const auto bytes = static_cast<std::streamsize>(ws.inputs.size() * sizeof(double));
  if (!in.read(reinterpret_cast<char*>(ws.inputs.data()), bytes) ||
      !in.read(reinterpret_cast<char*>(ws.labels.data()), static_cast<std::streamsize>(ws.count))) {
    fail(ErrorKind::Parse, "window file truncated");
  }
  for (const auto l : ws.labels) require(l <= 1, ErrorKind::Parse, "window file holds a non-binary label");
  return ws;
}

WindowSet make_separable_windows(std::uint64_t seed, std::size_t count, std::size_t time_step,
                                 std::size_t features, double positive_rate) {
  require(count >= 2 && time_step >= 1 && features >= 1, ErrorKind::Argument,
          "separable set needs count >= 2, time_step >= 1, features >= 1");
  require(positive_rate > 0.0 && positive_rate < 1.0, ErrorKind::Argument,
          "positive rate must lie in (0, 1)");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  const auto positives = std::max<std::size_t>(
      1, static_cast<std::size_t>(std::llround(positive_rate * static_cast<double>(count))));
  std::vector<std::uint8_t> labels(count, 0);
  std::fill(labels.begin(), labels.begin() + static_cast<std::ptrdiff_t>(positives), 1);
  std::shuffle(labels.begin(), labels.end(), rng);

  WindowSet ws;
  ws.count = count;
  ws.time_step = time_step;
  ws.features = features;
  ws.labels = labels;
  ws.inputs.resize(count * time_step * features);
  const auto marked = std::min<std::size_t>(3, time_step);
  for (std::size_t w = 0; w < count; ++w) {
    auto win = ws.window(w);
    for (std::size_t t = 0; t < time_step; ++t) {
      for (std::size_t f = 0; f < features; ++f) {
        double v = unit(rng);
        if (f == 0 && t >= time_step - marked) {
          v = labels[w] ? 0.8 + 0.2 * v : 0.5 * v;
        }
        win[t * features + f] = v;
      }
    }
  }
  return ws;
}

}  // namespace qarwarn
