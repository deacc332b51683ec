#include "qarwarn/lstm.hpp"

#include <cmath>
#include <exception>
#include <istream>
#include <ostream>
#include <random>

#include <json.hpp>

#include "qarwarn/error.hpp"

namespace qarwarn {

OutputSquash parse_output_squash(const std::string& text) {
  if (text == "identity") return OutputSquash::Identity;
  if (text == "tanh") return OutputSquash::Tanh;
  fail(ErrorKind::Argument, "output activation must be identity or tanh, got '" + text + "'");
}

const char* to_string(OutputSquash squash) noexcept {
  return squash == OutputSquash::Tanh ? "tanh" : "identity";
}

LayerParams::LayerParams(std::size_t input, std::size_t n)
    : input_size(input),
      units(n),
      w_input(4 * n * input, 0.0),
      w_recurrent(4 * n * n, 0.0),
      peephole(3 * n, 0.0),
      bias(4 * n, 0.0) {}

NetworkParams::NetworkParams(std::size_t features, std::size_t units, OutputSquash sq)
    : layer1(features, units), layer2(units, units), w_out(units, 0.0), b_out(1, 0.0), squash(sq) {
  require(features >= 1 && units >= 1, ErrorKind::Argument,
          "network needs at least one feature and one unit");
}

std::size_t NetworkParams::parameter_count() const {
  std::size_t total = 0;
  for (const auto& t : tensors()) total += t.values.size();
  return total;
}

namespace {

template <typename Ref, typename Layer, typename Vec>
void push_layer(std::vector<Ref>& out, const std::string& prefix, Layer& layer) {
  const auto n = layer.units;
  out.push_back(Ref{prefix + ".w_input", Vec(layer.w_input), 4 * n, layer.input_size});
  out.push_back(Ref{prefix + ".w_recurrent", Vec(layer.w_recurrent), 4 * n, n});
  out.push_back(Ref{prefix + ".peephole", Vec(layer.peephole), 3, n});
  out.push_back(Ref{prefix + ".bias", Vec(layer.bias), 4, n});
}

}  // namespace

std::vector<TensorRef> NetworkParams::tensors() {
  std::vector<TensorRef> out;
  push_layer<TensorRef, LayerParams, std::span<double>>(out, "layer1", layer1);
  push_layer<TensorRef, LayerParams, std::span<double>>(out, "layer2", layer2);
  out.push_back(TensorRef{"output.w", std::span<double>(w_out), 1, w_out.size()});
  out.push_back(TensorRef{"output.b", std::span<double>(b_out), 1, 1});
  return out;
}

std::vector<ConstTensorRef> NetworkParams::tensors() const {
  std::vector<ConstTensorRef> out;
  push_layer<ConstTensorRef, const LayerParams, std::span<const double>>(out, "layer1", layer1);
  push_layer<ConstTensorRef, const LayerParams, std::span<const double>>(out, "layer2", layer2);
  out.push_back(ConstTensorRef{"output.w", std::span<const double>(w_out), 1, w_out.size()});
  out.push_back(ConstTensorRef{"output.b", std::span<const double>(b_out), 1, 1});
  return out;
}

NetworkParams NetworkParams::zeros_like() const { return NetworkParams(features(), units(), squash); }

double glorot_bound(std::size_t fan_in, std::size_t fan_out) {
  return std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
}

namespace {

void fill_uniform(std::span<double> values, double bound, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> dist(-bound, bound);
  for (auto& v : values) v = dist(rng);
}

void init_layer(LayerParams& layer, std::mt19937_64& rng) {
  const auto n = layer.units;
  const auto in = layer.input_size;
  const auto in_bound = glorot_bound(in, n);
  const auto rec_bound = glorot_bound(n, n);
  for (std::size_t g = 0; g < 4; ++g) {
    fill_uniform(std::span<double>(layer.w_input).subspan(g * n * in, n * in), in_bound, rng);
  }
  for (std::size_t g = 0; g < 4; ++g) {
    fill_uniform(std::span<double>(layer.w_recurrent).subspan(g * n * n, n * n), rec_bound, rng);
  }
  // Diagonal peepholes: one scalar per unit, fan (1, n).
  fill_uniform(layer.peephole, glorot_bound(1, n), rng);
  std::fill(layer.bias.begin(), layer.bias.end(), 0.0);
  std::fill(layer.bias.begin() + static_cast<std::ptrdiff_t>(kGateForget * n),
            layer.bias.begin() + static_cast<std::ptrdiff_t>((kGateForget + 1) * n), 1.0);
}

}  // namespace

NetworkParams init_params(std::size_t features, std::size_t units, std::uint64_t seed,
                          OutputSquash squash) {
  NetworkParams p(features, units, squash);
  std::mt19937_64 rng(seed);
  init_layer(p.layer1, rng);
  init_layer(p.layer2, rng);
  fill_uniform(p.w_out, glorot_bound(units, 1), rng);
  p.b_out[0] = 0.0;
  return p;
}

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

namespace {

double squash_fn(double s, OutputSquash sq) { return sq == OutputSquash::Tanh ? std::tanh(s) : s; }

// Pointers to one timestep's slots in a tape (or in a CellStep).
struct StepSlots {
  double* i;
  double* f;
  double* o;
  double* g;
  double* s;
  double* h;
};

void layer_step(const LayerParams& L, const double* x, const double* h_prev, const double* s_prev,
                OutputSquash sq, std::vector<double>& net, StepSlots out) {
  const auto n = L.units;
  const auto in = L.input_size;
  net.resize(4 * n);
  for (std::size_t r = 0; r < 4 * n; ++r) {
    double acc = L.bias[r];
    const double* wx = L.w_input.data() + r * in;
    for (std::size_t c = 0; c < in; ++c) acc += wx[c] * x[c];
    const double* wh = L.w_recurrent.data() + r * n;
    for (std::size_t c = 0; c < n; ++c) acc += wh[c] * h_prev[c];
    net[r] = acc;
  }
  const double* p = L.peephole.data();
  for (std::size_t u = 0; u < n; ++u) {
    const double i = sigmoid(net[kGateIn * n + u] + p[kGateIn * n + u] * s_prev[u]);
    const double f = sigmoid(net[kGateForget * n + u] + p[kGateForget * n + u] * s_prev[u]);
    const double g = std::tanh(net[kGateCell * n + u]);
    const double s = f * s_prev[u] + i * g;
    const double o = sigmoid(net[kGateOut * n + u] + p[kGateOut * n + u] * s);
    const double h = o * squash_fn(s, sq);
    if (!std::isfinite(s) || !std::isfinite(h)) {
      fail(ErrorKind::Numeric, "non-finite LSTM state in unit " + std::to_string(u));
    }
    out.i[u] = i;
    out.f[u] = f;
    out.o[u] = o;
    out.g[u] = g;
    out.s[u] = s;
    out.h[u] = h;
  }
}

void resize_tape(LayerTape& t, std::size_t size) {
  for (auto* v : {&t.in_gate, &t.forget_gate, &t.out_gate, &t.cell_input, &t.state, &t.output}) {
    v->assign(size, 0.0);
  }
}

StepSlots slots(LayerTape& t, std::size_t offset) {
  return {t.in_gate.data() + offset, t.forget_gate.data() + offset, t.out_gate.data() + offset,
          t.cell_input.data() + offset, t.state.data() + offset, t.output.data() + offset};
}

void run_layer(const LayerParams& L, const double* inputs, std::size_t input_stride, std::size_t T,
               OutputSquash sq, LayerTape& tape, std::vector<double>& net,
               const std::vector<double>& zeros) {
  const auto n = L.units;
  resize_tape(tape, T * n);
  for (std::size_t t = 0; t < T; ++t) {
    const double* h_prev = t == 0 ? zeros.data() : tape.output.data() + (t - 1) * n;
    const double* s_prev = t == 0 ? zeros.data() : tape.state.data() + (t - 1) * n;
    layer_step(L, inputs + t * input_stride, h_prev, s_prev, sq, net, slots(tape, t * n));
  }
}

}  // namespace

CellStep cell_step(const LayerParams& layer, std::span<const double> input,
                   std::span<const double> prev_output, std::span<const double> prev_state,
                   OutputSquash squash) {
  require(input.size() == layer.input_size && prev_output.size() == layer.units &&
              prev_state.size() == layer.units,
          ErrorKind::Argument, "cell_step vector lengths do not match the layer shape");
  const auto n = layer.units;
  CellStep out;
  for (auto* v : {&out.in_gate, &out.forget_gate, &out.out_gate, &out.cell_input, &out.state,
                  &out.output}) {
    v->assign(n, 0.0);
  }
  std::vector<double> net;
  layer_step(layer, input.data(), prev_output.data(), prev_state.data(), squash, net,
             {out.in_gate.data(), out.forget_gate.data(), out.out_gate.data(),
              out.cell_input.data(), out.state.data(), out.output.data()});
  return out;
}

double forward(const NetworkParams& params, std::span<const double> window, std::size_t time_step,
               Tape& tape) {
  const auto k = params.features();
  const auto n = params.units();
  require(time_step >= 1 && window.size() == time_step * k, ErrorKind::Argument,
          "window has " + std::to_string(window.size()) + " values, expected " +
              std::to_string(time_step) + " x " + std::to_string(k));
  require(params.layer2.input_size == n && params.w_out.size() == params.layer2.units &&
              params.b_out.size() == 1,
          ErrorKind::Argument, "inconsistent network shapes");
  const std::vector<double> zeros(n, 0.0);
  std::vector<double> net;
  tape.time_step = time_step;
  run_layer(params.layer1, window.data(), k, time_step, params.squash, tape.layer1, net, zeros);
  run_layer(params.layer2, tape.layer1.output.data(), n, time_step, params.squash, tape.layer2, net,
            zeros);
  const double* h_last = tape.layer2.output.data() + (time_step - 1) * n;
  double z = params.b_out[0];
  for (std::size_t u = 0; u < n; ++u) z += params.w_out[u] * h_last[u];
  require(std::isfinite(z), ErrorKind::Numeric, "non-finite output logit");
  tape.logit = z;
  tape.probability = sigmoid(z);
  return tape.probability;
}

double forward(const NetworkParams& params, std::span<const double> window, std::size_t time_step) {
  Tape tape;
  return forward(params, window, time_step, tape);
}

namespace {

std::vector<std::size_t> resolve(const WindowSet& windows, std::span<const std::size_t> indices) {
  std::vector<std::size_t> idx(indices.begin(), indices.end());
  if (idx.empty()) {
    idx.resize(windows.count);
    for (std::size_t w = 0; w < windows.count; ++w) idx[w] = w;
  }
  for (const auto w : idx) require(w < windows.count, ErrorKind::Argument, "window index out of range");
  return idx;
}

}  // namespace

std::vector<double> forward_batch(const NetworkParams& params, const WindowSet& windows,
                                  std::span<const std::size_t> indices) {
  const auto idx = resolve(windows, indices);
  std::vector<double> out(idx.size());
  const auto count = static_cast<std::ptrdiff_t>(idx.size());
  // Exceptions may not escape an OpenMP region; capture the first one.
  std::exception_ptr error;
#pragma omp parallel
  {
    Tape tape;
#pragma omp for schedule(static)
    for (std::ptrdiff_t i = 0; i < count; ++i) {
      try {
        const auto w = idx[static_cast<std::size_t>(i)];
        out[static_cast<std::size_t>(i)] =
            forward(params, windows.window(w), windows.time_step, tape);
      } catch (...) {
#pragma omp critical(qarwarn_forward_error)
        if (!error) error = std::current_exception();
      }
    }
  }
  if (error) std::rethrow_exception(error);
  return out;
}

std::vector<double> forward_batch_serial(const NetworkParams& params, const WindowSet& windows,
                                         std::span<const std::size_t> indices) {
  const auto idx = resolve(windows, indices);
  std::vector<double> out(idx.size());
  Tape tape;
  for (std::size_t i = 0; i < idx.size(); ++i) {
    out[i] = forward(params, windows.window(idx[i]), windows.time_step, tape);
  }
  return out;
}

namespace {

constexpr const char* kModelFormat = "qarwarn-model";
constexpr int kModelVersion = 1;

using nlohmann::json;

template <typename T>
T field(const json& doc, const char* key) {
  if (!doc.contains(key)) fail(ErrorKind::Parse, std::string("model file lacks '") + key + "'");
  try {
    return doc.at(key).get<T>();
  } catch (const json::exception&) {
    fail(ErrorKind::Parse, std::string("model file field '") + key + "' has the wrong type");
  }
}

}  // namespace

void save_model(std::ostream& out, const Model& model) {
  json doc;
  doc["format"] = kModelFormat;
  doc["version"] = kModelVersion;
  doc["time_step"] = model.time_step;
  doc["units"] = model.params.units();
  doc["output_activation"] = to_string(model.params.squash);
  doc["features"] = model.features;
  doc["normalization"] = {{"min", model.normalization.min}, {"max", model.normalization.max}};
  doc["threshold"] = model.threshold;
  json tensors = json::array();
  for (const auto& t : model.params.tensors()) {
    tensors.push_back({{"name", t.name},
                       {"rows", t.rows},
                       {"cols", t.cols},
                       {"values", std::vector<double>(t.values.begin(), t.values.end())}});
  }
  doc["tensors"] = std::move(tensors);
  out << doc.dump(1) << '\n';
}

Model load_model(std::istream& in) {
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::exception& e) {
    fail(ErrorKind::Parse, std::string("model file is not valid JSON: ") + e.what());
  }
  require(doc.is_object() && field<std::string>(doc, "format") == kModelFormat, ErrorKind::Parse,
          "not a model file");
  require(field<int>(doc, "version") == kModelVersion, ErrorKind::Parse,
          "unsupported model file version");
  Model model;
  model.time_step = field<std::size_t>(doc, "time_step");
  const auto units = field<std::size_t>(doc, "units");
  model.features = field<std::vector<std::string>>(doc, "features");
  const auto norm = field<json>(doc, "normalization");
  model.normalization.min = field<std::vector<double>>(norm, "min");
  model.normalization.max = field<std::vector<double>>(norm, "max");
  model.threshold = field<double>(doc, "threshold");
  require(model.time_step >= 1 && units >= 1 && !model.features.empty(), ErrorKind::Parse,
          "model file has an empty shape");
  require(model.normalization.min.size() == model.features.size() &&
              model.normalization.max.size() == model.features.size(),
          ErrorKind::Parse, "normalization stats do not match the feature list");
  require(model.threshold > 0.0 && model.threshold < 1.0, ErrorKind::Parse,
          "model threshold must lie in (0, 1)");

  model.params = NetworkParams(model.features.size(), units,
                               parse_output_squash(field<std::string>(doc, "output_activation")));
  const auto stored = field<json>(doc, "tensors");
  auto refs = model.params.tensors();
  require(stored.is_array() && stored.size() == refs.size(), ErrorKind::Parse,
          "model file has the wrong number of tensors");
  for (std::size_t i = 0; i < refs.size(); ++i) {
    const auto& t = stored[i];
    const auto name = field<std::string>(t, "name");
    const auto rows = field<std::size_t>(t, "rows");
    const auto cols = field<std::size_t>(t, "cols");
    const auto values = field<std::vector<double>>(t, "values");
    require(name == refs[i].name && rows == refs[i].rows && cols == refs[i].cols &&
                values.size() == refs[i].values.size(),
            ErrorKind::Parse, "tensor '" + name + "' does not match the declared network shape");
    for (std::size_t v = 0; v < values.size(); ++v) {
      require(std::isfinite(values[v]), ErrorKind::Parse, "tensor '" + name + "' holds a non-finite value");
      refs[i].values[v] = values[v];
    }
  }
  return model;
}

}  // namespace qarwarn
