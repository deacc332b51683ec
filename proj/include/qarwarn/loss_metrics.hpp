#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <vector>

namespace qarwarn {

// Class convention throughout: class 0 (normal) is the POSITIVE class and
// class 1 (over-limit) the negative one.

/// Off-diagonal costs; the diagonal is fixed at 0.
struct CostMatrix {
  double cost_01 = 1.0;  // weight on the y = 1 term of the loss
  double cost_10 = 1.0;  // weight on the y = 0 term of the loss
};

inline constexpr double kProbabilityClip = 1e-12;

// cost_01 = fraction of class-0 labels, cost_10 = fraction of class-1 labels.
CostMatrix derive_costs(std::span<const std::uint8_t> labels);

double bce(std::span<const std::uint8_t> y, std::span<const double> p);

/// -(1/n) sum [ y log p * cost_01 + (1 - y) log(1 - p) * cost_10 ], with p
/// clipped to [1e-12, 1 - 1e-12]. With unit costs this is bce() exactly.
double cs_bce(std::span<const std::uint8_t> y, std::span<const double> p, const CostMatrix& costs);

// d loss / d p_i, over the clipped probabilities.
std::vector<double> cs_bce_grad(std::span<const std::uint8_t> y, std::span<const double> p,
                                const CostMatrix& costs);

// d loss / d z_i for p_i = sigmoid(z_i).
std::vector<double> cs_bce_grad_logit(std::span<const std::uint8_t> y, std::span<const double> p,
                                      const CostMatrix& costs);

// Singleton-sample forms used inside backpropagation.
double cs_bce_single(std::uint8_t y, double p, const CostMatrix& costs);
double cs_bce_logit_grad_single(std::uint8_t y, double p, const CostMatrix& costs);

inline constexpr double kDefaultDecisionThreshold = 0.5;

// 1 (over-limit) iff p >= threshold.
std::vector<std::uint8_t> classify(std::span<const double> p,
                                   double threshold = kDefaultDecisionThreshold);

struct ConfusionMatrix {
  std::uint64_t tp = 0;  // y = 0, predicted 0
  std::uint64_t fp = 0;  // y = 1, predicted 0
  std::uint64_t tn = 0;  // y = 1, predicted 1
  std::uint64_t fn = 0;  // y = 0, predicted 1

  std::uint64_t total() const { return tp + fp + tn + fn; }
  bool operator==(const ConfusionMatrix&) const = default;
};

ConfusionMatrix confusion(std::span<const std::uint8_t> y, std::span<const std::uint8_t> predicted);

/// Metrics with class 0 as positive. A metric whose denominator is zero is
/// nullopt, never a silent 0.
struct Metrics {
  double accuracy = 0.0;
  std::optional<double> precision;
  std::optional<double> recall;
  std::optional<double> f1;
  // Recall of the over-limit class: tn / (tn + fp).
  std::optional<double> overlimit_recall;
};

Metrics metrics(const ConfusionMatrix& cm);
std::optional<double> f1_score(std::optional<double> precision, std::optional<double> recall);

void print_metrics(std::ostream& out, const ConfusionMatrix& cm, const Metrics& m);
// One `key=value` per line.
void write_metrics_kv(std::ostream& out, const ConfusionMatrix& cm, const Metrics& m);
ConfusionMatrix read_confusion_kv(std::istream& in);

}  // namespace qarwarn
