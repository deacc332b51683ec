#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "qarwarn/dataset.hpp"
#include "qarwarn/loss_metrics.hpp"
#include "qarwarn/lstm.hpp"

namespace qarwarn {

enum class CostMode { CostSensitive, Plain };

CostMode parse_cost_mode(const std::string& text);
const char* to_string(CostMode mode) noexcept;

struct TrainConfig {
  std::size_t units = 30;
  double learning_rate = 0.005;
  std::size_t epochs = 200;
  std::size_t batch_size = 32;
  std::uint64_t seed = 42;
  CostMode cost_mode = CostMode::CostSensitive;
  double threshold = kDefaultDecisionThreshold;
  bool clip_gradients = false;
  double clip_norm = 5.0;
  OutputSquash squash = OutputSquash::Identity;
  // false runs the single-threaded reference gradient path.
  bool parallel = true;

  void validate() const;
};

// Splitmix64 finalizer over (seed, salt); used to derive independent streams.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t salt);

struct AdamState {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::uint64_t step = 0;
  NetworkParams m;
  NetworkParams v;

  AdamState() = default;
  explicit AdamState(const NetworkParams& shape) : m(shape.zeros_like()), v(shape.zeros_like()) {}
};

void adam_step(NetworkParams& params, const NetworkParams& grads, AdamState& state,
               double learning_rate);

/// Reverse-mode gradient of the single-sample cost-sensitive loss with
/// respect to every parameter. `tape` must come from forward() on the same
/// params and window.
NetworkParams backward(const NetworkParams& params, std::span<const double> window,
                       std::uint8_t label, const CostMatrix& costs, const Tape& tape);

struct BatchGradient {
  NetworkParams gradient;  // mean over the batch
  double loss = 0.0;       // mean loss over the batch
};

/// Per-sample gradients run in parallel, then are summed in index order,
/// so the result is bitwise equal to batch_gradient_serial.
BatchGradient batch_gradient(const NetworkParams& params, const WindowSet& windows,
                             std::span<const std::size_t> indices, const CostMatrix& costs);
BatchGradient batch_gradient_serial(const NetworkParams& params, const WindowSet& windows,
                                    std::span<const std::size_t> indices, const CostMatrix& costs);

double global_norm(const NetworkParams& grads);
// Rescales so the global norm is at most max_norm. Returns the norm before.
double clip_global_norm(NetworkParams& grads, double max_norm);

struct EpochRecord {
  std::size_t epoch = 0;  // 1-based
  double train_loss = 0.0;
  double train_accuracy = 0.0;
  std::optional<double> test_accuracy;  // nullopt with an empty test set
};

struct TrainHistory {
  std::vector<EpochRecord> epochs;
};

struct TrainResult {
  NetworkParams params;
  TrainHistory history;
  CostMatrix costs;
};

using EpochCallback = std::function<void(const EpochRecord&)>;

/// Shuffled mini-batch Adam over split.train; after each epoch the loss and
/// accuracy over split.train and the accuracy over split.test are recorded.
TrainResult train(const WindowSet& windows, const SplitIndices& split, const TrainConfig& config,
                  const EpochCallback& on_epoch = {});

// Confusion matrix of the thresholded predictions over the listed windows.
ConfusionMatrix evaluate(const NetworkParams& params, const WindowSet& windows,
                         std::span<const std::size_t> indices, double threshold);

void write_history(std::ostream& out, const TrainHistory& history);
std::string format_epoch(const EpochRecord& record);

}  // namespace qarwarn
