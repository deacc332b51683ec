#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "qarwarn/dataset.hpp"

namespace qarwarn {

enum class OutputSquash { Identity, Tanh };

OutputSquash parse_output_squash(const std::string& text);
const char* to_string(OutputSquash squash) noexcept;

// Row blocks of the stacked gate matrices.
enum Gate : std::size_t { kGateIn = 0, kGateForget = 1, kGateOut = 2, kGateCell = 3 };

/// One recurrent layer of single-cell memory blocks.
///
/// Gate nets are stacked in rows [in | forget | out | cell], n rows each.
/// Peepholes are diagonal (one cell per block) and stored [in | forget | out].
struct LayerParams {
  std::size_t input_size = 0;
  std::size_t units = 0;
  std::vector<double> w_input;      // 4n x input_size
  std::vector<double> w_recurrent;  // 4n x n
  std::vector<double> peephole;     // 3n
  std::vector<double> bias;         // 4n

  LayerParams() = default;
  LayerParams(std::size_t input, std::size_t n);
};

struct TensorRef {
  std::string name;
  std::span<double> values;
  std::size_t rows = 0;
  std::size_t cols = 0;
};

struct ConstTensorRef {
  std::string name;
  std::span<const double> values;
  std::size_t rows = 0;
  std::size_t cols = 0;
};

/// Two stacked recurrent layers and a dense unit producing one logit.
/// Gradients use the same type.
struct NetworkParams {
  LayerParams layer1;
  LayerParams layer2;
  std::vector<double> w_out;  // layer2.units
  std::vector<double> b_out;  // 1
  OutputSquash squash = OutputSquash::Identity;

  NetworkParams() = default;
  NetworkParams(std::size_t features, std::size_t units,
                OutputSquash squash = OutputSquash::Identity);

  std::size_t features() const { return layer1.input_size; }
  std::size_t units() const { return layer1.units; }
  std::size_t parameter_count() const;

  std::vector<TensorRef> tensors();
  std::vector<ConstTensorRef> tensors() const;

  // Same shapes, all zero.
  NetworkParams zeros_like() const;
};

/// Glorot-uniform weights, one bound per gate block; biases 0 except the
/// forget gate at 1.
NetworkParams init_params(std::size_t features, std::size_t units, std::uint64_t seed,
                          OutputSquash squash = OutputSquash::Identity);

// Bound used for a block with the given fan in/out.
double glorot_bound(std::size_t fan_in, std::size_t fan_out);

struct CellStep {
  std::vector<double> in_gate;
  std::vector<double> forget_gate;
  std::vector<double> out_gate;
  std::vector<double> cell_input;  // g(net_c)
  std::vector<double> state;
  std::vector<double> output;
};

/// One timestep. The in and forget peepholes read prev_state; the out
/// peephole reads the freshly updated state.
CellStep cell_step(const LayerParams& layer, std::span<const double> input,
                   std::span<const double> prev_output, std::span<const double> prev_state,
                   OutputSquash squash = OutputSquash::Identity);

/// Per-timestep activations of one layer, each T x n row-major.
struct LayerTape {
  std::vector<double> in_gate;
  std::vector<double> forget_gate;
  std::vector<double> out_gate;
  std::vector<double> cell_input;
  std::vector<double> state;
  std::vector<double> output;
};

struct Tape {
  std::size_t time_step = 0;
  LayerTape layer1;
  LayerTape layer2;
  double logit = 0.0;
  double probability = 0.5;
};

double sigmoid(double x);

// window: time_step x features, row-major. States start at zero.
double forward(const NetworkParams& params, std::span<const double> window, std::size_t time_step,
               Tape& tape);
double forward(const NetworkParams& params, std::span<const double> window, std::size_t time_step);

/// Probabilities for the listed windows (all windows when `indices` is
/// empty). Windows run in parallel; each result equals forward() bitwise.
std::vector<double> forward_batch(const NetworkParams& params, const WindowSet& windows,
                                  std::span<const std::size_t> indices = {});
std::vector<double> forward_batch_serial(const NetworkParams& params, const WindowSet& windows,
                                         std::span<const std::size_t> indices = {});

/// Everything needed to run a trained network on raw rows.
struct Model {
  NetworkParams params;
  std::size_t time_step = 0;
  std::vector<std::string> features;
  NormalizationStats normalization;
  double threshold = 0.5;
};

// JSON document; doubles are written in shortest round-trip form.
void save_model(std::ostream& out, const Model& model);
Model load_model(std::istream& in);

}  // namespace qarwarn
