#include "qarwarn/labeling.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "qarwarn/error.hpp"

namespace qarwarn {

std::size_t LabelSeries::positives() const {
  return static_cast<std::size_t>(std::count(labels.begin(), labels.end(), std::uint8_t{1}));
}

GStats g_stats(std::span<const double> g) {
  require(!g.empty(), ErrorKind::Argument, "G sequence is empty");
  double sum = 0.0;
  for (std::size_t i = 0; i < g.size(); ++i) {
    require(std::isfinite(g[i]), ErrorKind::Domain, "G value at " + std::to_string(i) + " is not finite");
    require(g[i] >= 0.0, ErrorKind::Domain, "G value at " + std::to_string(i) + " is negative");
    sum += g[i];
  }
  const auto n = static_cast<double>(g.size());
  const double mean = sum / n;
  double ss = 0.0;
  for (const double v : g) ss += (v - mean) * (v - mean);
  return GStats{mean, std::sqrt(ss / n), g.size()};
}

LabelSeries label_overlimit(std::span<const double> g) {
  const auto stats = g_stats(g);
  LabelSeries out;
  out.threshold = stats.mean + 3.0 * stats.sigma;
  out.labels.assign(g.size(), 0);
  if (stats.sigma > 0.0) {
    for (std::size_t i = 0; i < g.size(); ++i) out.labels[i] = g[i] >= out.threshold ? 1 : 0;
  }
  return out;
}

}  // namespace qarwarn
