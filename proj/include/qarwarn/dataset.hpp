#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "qarwarn/qar_table.hpp"

namespace qarwarn {

/// Dense row-major matrix of source rows x features.
struct RowMatrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  RowMatrix() = default;
  RowMatrix(std::size_t r, std::size_t c) : rows(r), cols(c), data(r * c, 0.0) {}

  std::span<double> row(std::size_t r) { return {data.data() + r * cols, cols}; }
  std::span<const double> row(std::size_t r) const { return {data.data() + r * cols, cols}; }
  double& at(std::size_t r, std::size_t c) { return data[r * cols + c]; }
  double at(std::size_t r, std::size_t c) const { return data[r * cols + c]; }
};

// Columns `features` of a numeric table, in the given order.
RowMatrix extract_features(const QarTable& table, const std::vector<std::string>& features);

struct NormalizationStats {
  std::vector<double> min;
  std::vector<double> max;

  std::size_t features() const { return min.size(); }
};

enum class NormalizationMode { AllRows, LeakFree };

NormalizationMode parse_normalization_mode(const std::string& text);
const char* to_string(NormalizationMode mode) noexcept;

NormalizationStats fit_minmax(const RowMatrix& rows);
// Extrema over the listed rows only.
NormalizationStats fit_minmax(const RowMatrix& rows, std::span<const std::size_t> row_indices);

/// (v - min) / (max - min) clamped to [0, 1]; a constant feature maps to 0.
RowMatrix apply_minmax(const RowMatrix& rows, const NormalizationStats& stats);
void apply_minmax_row(std::span<const double> in, std::span<double> out,
                      const NormalizationStats& stats);

/// Model input tensor: count windows x time_step x features, row-major.
struct WindowSet {
  std::size_t count = 0;
  std::size_t time_step = 0;
  std::size_t features = 0;
  std::vector<double> inputs;
  std::vector<std::uint8_t> labels;
  // Source row of each window's first timestep. Not persisted.
  std::vector<std::size_t> origins;

  std::span<const double> window(std::size_t w) const {
    return {inputs.data() + w * time_step * features, time_step * features};
  }
  std::span<double> window(std::size_t w) {
    return {inputs.data() + w * time_step * features, time_step * features};
  }
};

/// Stride-1 windows: window w covers rows [w, w + time_step) and carries
/// the label of row w + time_step. With `flights` given and
/// `reset_per_flight`, windows never cross a change of flight tag.
WindowSet build_windows(const RowMatrix& rows, std::span<const std::uint8_t> labels,
                        std::size_t time_step,
                        std::span<const std::int32_t> flights = {},
                        bool reset_per_flight = true);

// Normalizes every timestep of every window in place.
void normalize_windows(WindowSet& windows, const NormalizationStats& stats);

// Source rows read by the listed windows.
std::vector<std::size_t> covered_rows(const WindowSet& windows,
                                      std::span<const std::size_t> window_indices);

struct SplitIndices {
  std::vector<std::size_t> train;
  std::vector<std::size_t> test;
  std::uint64_t seed = 0;
};

// Random permutation; the first round(0.8 * count) entries train.
SplitIndices split_80_20(std::size_t count, std::uint64_t seed);

struct FoldPlan {
  std::size_t k = 0;
  std::vector<std::vector<std::size_t>> folds;

  // All folds except `held_out`, concatenated in fold order.
  std::vector<std::size_t> training_indices(std::size_t held_out) const;
};

FoldPlan make_folds(std::span<const std::size_t> train, std::size_t k, std::uint64_t seed);

// Binary container: "QWIN", u32 version, u64 count, time_step, features,
// row-major f64 inputs, then one byte per label. Little-endian.
void write_windows(std::ostream& out, const WindowSet& windows);
WindowSet read_windows(std::istream& in);

/// Linearly separable stand-in: feature 0 over the last three timesteps is
/// high (>= 0.8) exactly in class-1 windows and low (<= 0.5) otherwise; the
/// rest is uniform noise. round(positive_rate * count) windows are class 1.
WindowSet make_separable_windows(std::uint64_t seed, std::size_t count = 500,
                                 std::size_t time_step = 10, std::size_t features = 3,
                                 double positive_rate = 0.05);

}  // namespace qarwarn
