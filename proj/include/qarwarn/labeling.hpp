#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace qarwarn {

struct GStats {
  double mean = 0.0;
  double sigma = 0.0;  // population standard deviation (divisor n)
  std::size_t n = 0;
};

struct LabelSeries {
  std::vector<std::uint8_t> labels;
  double threshold = 0.0;  // mean + 3 sigma

  std::size_t size() const { return labels.size(); }
  std::size_t positives() const;
};

// Requires a non-empty, non-negative sequence.
GStats g_stats(std::span<const double> g);

/// Three-sigma exceedance labels: 1 where G >= mean + 3 sigma. A series with
/// zero spread has no exceedances and is labelled all 0.
LabelSeries label_overlimit(std::span<const double> g);

}  // namespace qarwarn
