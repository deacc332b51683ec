#include "qarwarn/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <numeric>
#include <ostream>
#include <random>

#include "qarwarn/error.hpp"
#include "qarwarn/text_io.hpp"

namespace qarwarn {

CostMode parse_cost_mode(const std::string& text) {
  if (text == "cost-sensitive") return CostMode::CostSensitive;
  if (text == "plain") return CostMode::Plain;
  fail(ErrorKind::Argument, "cost mode must be cost-sensitive or plain, got '" + text + "'");
}

const char* to_string(CostMode mode) noexcept {
  return mode == CostMode::Plain ? "plain" : "cost-sensitive";
}

void TrainConfig::validate() const {
  require(units >= 1, ErrorKind::Argument, "units must be at least 1");
  require(std::isfinite(learning_rate) && learning_rate > 0.0, ErrorKind::Argument,
          "learning rate must be positive");
  require(epochs >= 1, ErrorKind::Argument, "epochs must be at least 1");
  require(batch_size >= 1, ErrorKind::Argument, "batch size must be at least 1");
  require(threshold > 0.0 && threshold < 1.0, ErrorKind::Argument, "threshold must lie in (0, 1)");
  require(!clip_gradients || clip_norm > 0.0, ErrorKind::Argument, "clip norm must be positive");
}

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t salt) {
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (salt + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

void adam_step(NetworkParams& params, const NetworkParams& grads, AdamState& state,
               double learning_rate) {
  auto p = params.tensors();
  const auto g = grads.tensors();
  auto m = state.m.tensors();
  auto v = state.v.tensors();
  require(p.size() == g.size() && p.size() == m.size() && p.size() == v.size(), ErrorKind::Argument,
          "Adam state does not match the parameters");
  state.step += 1;
  const double c1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));
  for (std::size_t t = 0; t < p.size(); ++t) {
    require(p[t].values.size() == g[t].values.size() && p[t].values.size() == m[t].values.size() &&
                p[t].values.size() == v[t].values.size(),
            ErrorKind::Argument, "Adam shape mismatch in " + p[t].name);
    for (std::size_t i = 0; i < p[t].values.size(); ++i) {
      const double gi = g[t].values[i];
      double& mi = m[t].values[i];
      double& vi = v[t].values[i];
      mi = state.beta1 * mi + (1.0 - state.beta1) * gi;
      vi = state.beta2 * vi + (1.0 - state.beta2) * gi * gi;
      p[t].values[i] -= learning_rate * (mi / c1) / (std::sqrt(vi / c2) + state.epsilon);
    }
  }
}

namespace {

// Reverse pass of one layer. dh_ext holds the loss gradient reaching each
// timestep's output from above; dx (optional) receives d loss / d input.
void backward_layer(const LayerParams& L, const LayerTape& tape, const double* inputs,
                    std::size_t input_stride, std::size_t T, OutputSquash squash,
                    const std::vector<double>& dh_ext, LayerParams& grad, std::vector<double>* dx) {
  const auto n = L.units;
  const auto in = L.input_size;
  std::vector<double> dh_next(n, 0.0);
  std::vector<double> ds_next(n, 0.0);
  std::vector<double> dnet(4 * n, 0.0);
  if (dx) dx->assign(T * in, 0.0);
  const double* p = L.peephole.data();

  for (std::size_t step = T; step-- > 0;) {
    const auto off = step * n;
    const double* s_prev = step > 0 ? tape.state.data() + off - n : nullptr;
    const double* h_prev = step > 0 ? tape.output.data() + off - n : nullptr;
    for (std::size_t u = 0; u < n; ++u) {
      const double i = tape.in_gate[off + u];
      const double f = tape.forget_gate[off + u];
      const double o = tape.out_gate[off + u];
      const double g = tape.cell_input[off + u];
      const double s = tape.state[off + u];
      const double sp = s_prev ? s_prev[u] : 0.0;
      const double act = squash == OutputSquash::Tanh ? std::tanh(s) : s;
      const double act_d = squash == OutputSquash::Tanh ? 1.0 - act * act : 1.0;

      const double dh = dh_ext[off + u] + dh_next[u];
      const double dno = dh * act * o * (1.0 - o);
      const double ds = ds_next[u] + dh * o * act_d + dno * p[kGateOut * n + u];
      const double dni = ds * g * i * (1.0 - i);
      const double dnf = ds * sp * f * (1.0 - f);
      const double dnc = ds * i * (1.0 - g * g);
      ds_next[u] = ds * f + dni * p[kGateIn * n + u] + dnf * p[kGateForget * n + u];

      grad.peephole[kGateIn * n + u] += dni * sp;
      grad.peephole[kGateForget * n + u] += dnf * sp;
      grad.peephole[kGateOut * n + u] += dno * s;
      dnet[kGateIn * n + u] = dni;
      dnet[kGateForget * n + u] = dnf;
      dnet[kGateOut * n + u] = dno;
      dnet[kGateCell * n + u] = dnc;
    }

    const double* x = inputs + step * input_stride;
    std::fill(dh_next.begin(), dh_next.end(), 0.0);
    for (std::size_t r = 0; r < 4 * n; ++r) {
      const double d = dnet[r];
      grad.bias[r] += d;
      double* gw = grad.w_input.data() + r * in;
      const double* w = L.w_input.data() + r * in;
      for (std::size_t c = 0; c < in; ++c) gw[c] += d * x[c];
      if (dx) {
        double* dxt = dx->data() + step * in;
        for (std::size_t c = 0; c < in; ++c) dxt[c] += w[c] * d;
      }
      if (h_prev) {
        double* gu = grad.w_recurrent.data() + r * n;
        const double* uw = L.w_recurrent.data() + r * n;
        for (std::size_t c = 0; c < n; ++c) {
          gu[c] += d * h_prev[c];
          dh_next[c] += uw[c] * d;
        }
      }
    }
  }
}

void require_finite(const NetworkParams& grads) {
  for (const auto& t : grads.tensors()) {
    for (const auto v : t.values) {
      require(std::isfinite(v), ErrorKind::Numeric, "non-finite gradient in " + t.name);
    }
  }
}

}  // namespace

NetworkParams backward(const NetworkParams& params, std::span<const double> window,
                       std::uint8_t label, const CostMatrix& costs, const Tape& tape) {
  const auto T = tape.time_step;
  const auto n = params.units();
  const auto k = params.features();
  require(T >= 1 && window.size() == T * k, ErrorKind::Argument,
          "window shape does not match the tape");
  require(tape.layer1.state.size() == T * n && tape.layer2.state.size() == T * n,
          ErrorKind::Argument, "tape shape does not match the parameters");

  NetworkParams grad = params.zeros_like();
  const double dz = cs_bce_logit_grad_single(label, tape.probability, costs);
  const double* h_last = tape.layer2.output.data() + (T - 1) * n;
  for (std::size_t u = 0; u < n; ++u) grad.w_out[u] = dz * h_last[u];
  grad.b_out[0] = dz;

  std::vector<double> dh2(T * n, 0.0);
  for (std::size_t u = 0; u < n; ++u) dh2[(T - 1) * n + u] = dz * params.w_out[u];
  std::vector<double> dh1;
  backward_layer(params.layer2, tape.layer2, tape.layer1.output.data(), n, T, params.squash, dh2,
                 grad.layer2, &dh1);
  backward_layer(params.layer1, tape.layer1, window.data(), k, T, params.squash, dh1, grad.layer1,
                 nullptr);
  require_finite(grad);
  return grad;
}

namespace {

struct SampleResult {
  NetworkParams gradient;
  double loss = 0.0;
};

SampleResult sample_gradient(const NetworkParams& params, const WindowSet& windows, std::size_t w,
                             const CostMatrix& costs, Tape& tape) {
  const auto win = windows.window(w);
  const double p = forward(params, win, windows.time_step, tape);
  return {backward(params, win, windows.labels[w], costs, tape),
          cs_bce_single(windows.labels[w], p, costs)};
}

BatchGradient reduce(const NetworkParams& shape, const std::vector<SampleResult>& samples) {
  BatchGradient out{shape.zeros_like(), 0.0};
  auto acc = out.gradient.tensors();
  for (const auto& s : samples) {
    const auto g = s.gradient.tensors();
    for (std::size_t t = 0; t < acc.size(); ++t) {
      for (std::size_t i = 0; i < acc[t].values.size(); ++i) acc[t].values[i] += g[t].values[i];
    }
    out.loss += s.loss;
  }
  const auto count = static_cast<double>(samples.size());
  for (auto& t : acc) {
    for (auto& v : t.values) v /= count;
  }
  out.loss /= count;
  return out;
}

void check_batch(const NetworkParams& params, const WindowSet& windows,
                 std::span<const std::size_t> indices) {
  require(!indices.empty(), ErrorKind::Argument, "empty batch");
  require(windows.features == params.features(), ErrorKind::Argument,
          "window feature count does not match the network");
  for (const auto w : indices) require(w < windows.count, ErrorKind::Argument, "window index out of range");
}

}  // namespace

BatchGradient batch_gradient(const NetworkParams& params, const WindowSet& windows,
                             std::span<const std::size_t> indices, const CostMatrix& costs) {
  check_batch(params, windows, indices);
  std::vector<SampleResult> samples(indices.size());
  const auto count = static_cast<std::ptrdiff_t>(indices.size());
  std::exception_ptr error;
#pragma omp parallel
  {
    Tape tape;
#pragma omp for schedule(static)
    for (std::ptrdiff_t i = 0; i < count; ++i) {
      try {
        const auto s = static_cast<std::size_t>(i);
        samples[s] = sample_gradient(params, windows, indices[s], costs, tape);
      } catch (...) {
#pragma omp critical(qarwarn_gradient_error)
        if (!error) error = std::current_exception();
      }
    }
  }
  if (error) std::rethrow_exception(error);
  return reduce(params, samples);
}

BatchGradient batch_gradient_serial(const NetworkParams& params, const WindowSet& windows,
                                    std::span<const std::size_t> indices, const CostMatrix& costs) {
  check_batch(params, windows, indices);
  std::vector<SampleResult> samples;
  samples.reserve(indices.size());
  Tape tape;
  for (const auto w : indices) samples.push_back(sample_gradient(params, windows, w, costs, tape));
  return reduce(params, samples);
}

double global_norm(const NetworkParams& grads) {
  double sum = 0.0;
  for (const auto& t : grads.tensors()) {
    for (const auto v : t.values) sum += v * v;
  }
  return std::sqrt(sum);
}

double clip_global_norm(NetworkParams& grads, double max_norm) {
  const double norm = global_norm(grads);
  if (norm > max_norm) {
    const double scale = max_norm / norm;
    for (auto& t : grads.tensors()) {
      for (auto& v : t.values) v *= scale;
    }
  }
  return norm;
}

ConfusionMatrix evaluate(const NetworkParams& params, const WindowSet& windows,
                         std::span<const std::size_t> indices, double threshold) {
  require(!indices.empty(), ErrorKind::Argument, "nothing to evaluate");
  const auto p = forward_batch(params, windows, indices);
  std::vector<std::uint8_t> y(indices.size());
  for (std::size_t i = 0; i < indices.size(); ++i) y[i] = windows.labels[indices[i]];
  return confusion(y, classify(p, threshold));
}

namespace {

double accuracy_of(std::span<const std::uint8_t> y, std::span<const std::uint8_t> pred) {
  std::size_t hits = 0;
  for (std::size_t i = 0; i < y.size(); ++i) hits += y[i] == pred[i] ? 1 : 0;
  return static_cast<double>(hits) / static_cast<double>(y.size());
}

std::vector<std::uint8_t> gather_labels(const WindowSet& windows, std::span<const std::size_t> idx) {
  std::vector<std::uint8_t> y(idx.size());
  for (std::size_t i = 0; i < idx.size(); ++i) y[i] = windows.labels[idx[i]];
  return y;
}

}  // namespace

TrainResult train(const WindowSet& windows, const SplitIndices& split, const TrainConfig& config,
                  const EpochCallback& on_epoch) {
  config.validate();
  require(!split.train.empty(), ErrorKind::Argument, "training split is empty");
  require(windows.count >= 1 && windows.features >= 1, ErrorKind::Argument, "no windows to train on");
  for (const auto w : split.train) require(w < windows.count, ErrorKind::Argument, "train index out of range");
  for (const auto w : split.test) require(w < windows.count, ErrorKind::Argument, "test index out of range");

  const auto train_labels = gather_labels(windows, split.train);
  const auto test_labels = gather_labels(windows, split.test);
  TrainResult result;
  result.costs = config.cost_mode == CostMode::CostSensitive ? derive_costs(train_labels) : CostMatrix{};
  result.params = init_params(windows.features, config.units, config.seed, config.squash);
  AdamState adam(result.params);
  std::mt19937_64 shuffle_rng(derive_seed(config.seed, 1));
  std::vector<std::size_t> order(split.train.begin(), split.train.end());

  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), shuffle_rng);
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      const auto stop = std::min(order.size(), start + config.batch_size);
      const std::span<const std::size_t> batch(order.data() + start, stop - start);
      auto bg = config.parallel ? batch_gradient(result.params, windows, batch, result.costs)
                                : batch_gradient_serial(result.params, windows, batch, result.costs);
      if (config.clip_gradients) clip_global_norm(bg.gradient, config.clip_norm);
      adam_step(result.params, bg.gradient, adam, config.learning_rate);
    }

    EpochRecord record;
    record.epoch = epoch;
    const auto p_train = config.parallel ? forward_batch(result.params, windows, split.train)
                                         : forward_batch_serial(result.params, windows, split.train);
    record.train_loss = cs_bce(train_labels, p_train, result.costs);
    record.train_accuracy = accuracy_of(train_labels, classify(p_train, config.threshold));
    if (!split.test.empty()) {
      const auto p_test = config.parallel ? forward_batch(result.params, windows, split.test)
                                          : forward_batch_serial(result.params, windows, split.test);
      record.test_accuracy = accuracy_of(test_labels, classify(p_test, config.threshold));
    }
    result.history.epochs.push_back(record);
    if (on_epoch) on_epoch(record);
  }
  return result;
}

std::string format_epoch(const EpochRecord& r) {
  return std::to_string(r.epoch) + '\t' + format_double(r.train_loss) + '\t' +
         format_double(r.train_accuracy) + '\t' +
         (r.test_accuracy ? format_double(*r.test_accuracy) : std::string("-"));
}

void write_history(std::ostream& out, const TrainHistory& history) {
  out << "epoch\ttrain_loss\ttrain_accuracy\ttest_accuracy\n";
  for (const auto& r : history.epochs) out << format_epoch(r) << '\n';
}

}  // namespace qarwarn
