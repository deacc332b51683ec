#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

#include "oracles.hpp"
#include "qarwarn/error.hpp"
#include "qarwarn/lstm.hpp"

using namespace qarwarn;

namespace {

std::vector<double> random_window(std::size_t T, std::size_t k, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0, 1);
  std::vector<double> w(T * k);
  for (auto& v : w) v = u(rng);
  return w;
}

}  // namespace

TEST(InitParams, DeterministicBoundedForgetBiasOne) {
  const auto a = init_params(4, 6, 11);
  const auto b = init_params(4, 6, 11);
  const auto c = init_params(4, 6, 12);
  const auto ta = a.tensors();
  const auto tb = b.tensors();
  const auto tc = c.tensors();
  bool differs = false;
  for (std::size_t t = 0; t < ta.size(); ++t) {
    EXPECT_TRUE(std::equal(ta[t].values.begin(), ta[t].values.end(), tb[t].values.begin()));
    differs |= !std::equal(ta[t].values.begin(), ta[t].values.end(), tc[t].values.begin());
  }
  EXPECT_TRUE(differs);

  for (const auto* layer : {&a.layer1, &a.layer2}) {
    const auto n = layer->units;
    const auto in_bound = glorot_bound(layer->input_size, n);
    const auto rec_bound = glorot_bound(n, n);
    for (const double w : layer->w_input) EXPECT_LE(std::fabs(w), in_bound);
    for (const double w : layer->w_recurrent) EXPECT_LE(std::fabs(w), rec_bound);
    for (const double w : layer->peephole) EXPECT_LE(std::fabs(w), glorot_bound(1, n));
    for (std::size_t r = 0; r < 4 * n; ++r) {
      EXPECT_EQ(layer->bias[r], r / n == kGateForget ? 1.0 : 0.0);
    }
  }
  for (const double w : a.w_out) EXPECT_LE(std::fabs(w), glorot_bound(6, 1));
  EXPECT_EQ(a.b_out[0], 0.0);
  EXPECT_EQ(a.parameter_count(), 2 * (4 * 6 * 4 + 0) + 4 * 6 * 6 * 2 - 4 * 6 * 4 + 4 * 6 * 6 + 2 * (3 * 6 + 4 * 6) + 6 + 1);
}

TEST(CellStep, ZeroParamsFixedPoint) {
  LayerParams layer(2, 3);
  const std::vector<double> x{0.7, -0.2}, zero(3, 0.0);
  const auto s = cell_step(layer, x, zero, zero);
  for (std::size_t u = 0; u < 3; ++u) {
    EXPECT_EQ(s.in_gate[u], 0.5);
    EXPECT_EQ(s.forget_gate[u], 0.5);
    EXPECT_EQ(s.out_gate[u], 0.5);
    EXPECT_EQ(s.cell_input[u], 0.0);
    EXPECT_EQ(s.state[u], 0.0);
    EXPECT_EQ(s.output[u], 0.0);
  }
}

TEST(CellStep, CarryWhenForgetOpenAndInputClosed) {
  LayerParams layer(1, 1);
  layer.bias[kGateForget] = 40.0;
  layer.bias[kGateIn] = -40.0;
  layer.w_input[kGateCell] = 1.0;
  std::vector<double> state{0.37}, out{0.0};
  for (int t = 0; t < 20; ++t) {
    const std::vector<double> x{std::sin(t)};
    const auto s = cell_step(layer, x, out, state);
    EXPECT_NEAR(s.state[0], 0.37, 1e-15);
    state = s.state;
    out = s.output;
  }
}

// Gates forced exactly: with i = 0 and f = 1 bitwise, the state never moves.
TEST(CellStep, ConstantErrorCarouselExact) {
  LayerParams layer(1, 1);
  layer.bias[kGateForget] = 1000.0;  // sigmoid rounds to exactly 1
  layer.bias[kGateIn] = -1000.0;     // exactly 0
  layer.w_input[kGateCell] = 3.0;
  std::vector<double> state{-0.81}, out{0.0};
  for (int t = 0; t < 10; ++t) {
    const std::vector<double> x{1.0 + t};
    const auto s = cell_step(layer, x, out, state);
    EXPECT_EQ(s.in_gate[0], 0.0);
    EXPECT_EQ(s.forget_gate[0], 1.0);
    EXPECT_EQ(s.state[0], -0.81);
    state = s.state;
    out = s.output;
  }
}

TEST(CellStep, HandEvaluatedSingleUnitTrace) {
  oracle::ScalarCell c{0.3, -0.2, 0.5, 0.8, 0.1, 0.4, -0.3, 0.2, 0.25, -0.15, 0.35, 0.05, 0.6, -0.1, 0.02};
  LayerParams layer(1, 1);
  layer.w_input = {c.wi, c.wf, c.wo, c.wc};
  layer.w_recurrent = {c.ui, c.uf, c.uo, c.uc};
  layer.peephole = {c.pi, c.pf, c.po};
  layer.bias = {c.bi, c.bf, c.bo, c.bc};
  const double x = 0.9, h0 = 0.2, s0 = -0.4;
  const auto want = oracle::scalar_step(c, x, h0, s0);
  const auto got = cell_step(layer, std::vector<double>{x}, std::vector<double>{h0}, std::vector<double>{s0});
  EXPECT_NEAR(got.in_gate[0], want.i, 1e-15);
  EXPECT_NEAR(got.forget_gate[0], want.f, 1e-15);
  EXPECT_NEAR(got.out_gate[0], want.o, 1e-15);
  EXPECT_NEAR(got.cell_input[0], want.g, 1e-15);
  EXPECT_NEAR(got.state[0], want.s, 1e-15);
  EXPECT_NEAR(got.output[0], want.h, 1e-15);
}

TEST(CellStep, TanhOutputOption) {
  auto p = init_params(1, 1, 3, OutputSquash::Tanh);
  const auto s = cell_step(p.layer1, std::vector<double>{0.5}, std::vector<double>{0.1},
                           std::vector<double>{0.9}, OutputSquash::Tanh);
  EXPECT_NEAR(s.output[0], s.out_gate[0] * std::tanh(s.state[0]), 1e-15);
}

TEST(CellStep, ErrorsOnShapeAndNonFinite) {
  LayerParams layer(2, 2);
  try {
    cell_step(layer, std::vector<double>{1.0}, std::vector<double>(2), std::vector<double>(2));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::Argument);
  }
  try {
    cell_step(layer, std::vector<double>{1.0, 0.0}, std::vector<double>(2),
              std::vector<double>{std::numeric_limits<double>::infinity(), 0.0});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::Numeric);
  }
}

TEST(CellStep, GateRanges) {
  const auto p = init_params(3, 8, 21);
  std::mt19937_64 rng(2);
  std::normal_distribution<double> n(0, 2);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<double> x(3), h(8), s(8);
    for (auto& v : x) v = n(rng);
    for (auto& v : h) v = n(rng);
    for (auto& v : s) v = n(rng);
    const auto r = cell_step(p.layer1, x, h, s);
    for (std::size_t u = 0; u < 8; ++u) {
      for (const double g : {r.in_gate[u], r.forget_gate[u], r.out_gate[u]}) {
        EXPECT_GT(g, 0.0);
        EXPECT_LT(g, 1.0);
      }
      EXPECT_GT(r.cell_input[u], -1.0);
      EXPECT_LT(r.cell_input[u], 1.0);
    }
  }
}

TEST(Forward, ZeroParamsGiveOneHalf) {
  const NetworkParams p(3, 4);
  EXPECT_EQ(forward(p, random_window(5, 3, 1), 5), 0.5);
}

TEST(Forward, SingleStepComposesCellSteps) {
  const auto p = init_params(2, 3, 5);
  const auto w = random_window(1, 2, 9);
  const std::vector<double> zero(3, 0.0);
  const auto l1 = cell_step(p.layer1, w, zero, zero);
  const auto l2 = cell_step(p.layer2, l1.output, zero, zero);
  double z = p.b_out[0];
  for (std::size_t u = 0; u < 3; ++u) z += p.w_out[u] * l2.output[u];
  EXPECT_EQ(forward(p, w, 1), 1.0 / (1.0 + std::exp(-z)));
}

TEST(Forward, RangeDeterminismAndShapeError) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto p = init_params(3, 5, seed);
    const auto w = random_window(6, 3, seed + 100);
    const double a = forward(p, w, 6);
    EXPECT_GT(a, 0.0);
    EXPECT_LT(a, 1.0);
    EXPECT_EQ(a, forward(p, w, 6));
  }
  const auto p = init_params(3, 5, 0);
  EXPECT_THROW(forward(p, random_window(6, 2, 0), 6), Error);
}

TEST(ForwardBatch, EqualsIndividualForwardsAndPermutes) {
  const auto ws = make_separable_windows(4, 40, 6, 3);
  const auto p = init_params(3, 7, 8);
  const auto all = forward_batch(p, ws);
  const auto serial = forward_batch_serial(p, ws);
  ASSERT_EQ(all.size(), 40u);
  for (std::size_t i = 0; i < ws.count; ++i) {
    EXPECT_EQ(all[i], forward(p, ws.window(i), 6));
    EXPECT_EQ(all[i], serial[i]);
  }
  const std::vector<std::size_t> three{5, 17, 2};
  const auto sub = forward_batch(p, ws, three);
  for (std::size_t j = 0; j < 3; ++j) EXPECT_NEAR(sub[j], all[three[j]], 1e-12);
  const std::vector<std::size_t> one{9};
  EXPECT_EQ(forward_batch(p, ws, one)[0], forward(p, ws.window(9), 6));
  const std::vector<std::size_t> bad{40};
  EXPECT_THROW(forward_batch(p, ws, bad), Error);
}

TEST(ModelFile, RoundTripIsExact) {
  Model m{init_params(3, 4, 77, OutputSquash::Tanh), 6, {"A", "B", "C"}, {{0, 1, 2}, {1, 3, 5.5}}, 0.4};
  std::ostringstream out;
  save_model(out, m);
  std::istringstream in(out.str());
  const auto back = load_model(in);
  EXPECT_EQ(back.time_step, 6u);
  EXPECT_EQ(back.features, m.features);
  EXPECT_EQ(back.normalization.max, m.normalization.max);
  EXPECT_EQ(back.threshold, 0.4);
  EXPECT_EQ(back.params.squash, OutputSquash::Tanh);
  const auto a = m.params.tensors();
  const auto b = back.params.tensors();
  for (std::size_t t = 0; t < a.size(); ++t) {
    EXPECT_EQ(a[t].name, b[t].name);
    EXPECT_TRUE(std::equal(a[t].values.begin(), a[t].values.end(), b[t].values.begin()));
  }
  std::ostringstream again;
  save_model(again, back);
  EXPECT_EQ(again.str(), out.str());
}

TEST(ModelFile, RejectsMalformed) {
  for (const char* text : {"", "{}", "[1,2]", "{\"format\":\"qarwarn-model\",\"version\":99}"}) {
    std::istringstream in(text);
    try {
      load_model(in);
      FAIL() << text;
    } catch (const Error& e) {
      EXPECT_EQ(e.kind(), ErrorKind::Parse) << text;
    }
  }
  Model m{init_params(2, 2, 1), 3, {"A", "B"}, {{0, 0}, {1, 1}}, 0.5};
  std::ostringstream out;
  save_model(out, m);
  auto text = out.str();
  text.replace(text.find("\"units\": 2"), 10, "\"units\": 3");
  std::istringstream in(text);
  EXPECT_THROW(load_model(in), Error);
}
