// Parallel kernels against their serial reference paths.

#include <benchmark/benchmark.h>

#include <numeric>

#include "qarwarn/feature_select.hpp"
#include "qarwarn/labeling.hpp"
#include "qarwarn/qar_table.hpp"
#include "qarwarn/trainer.hpp"

using namespace qarwarn;

namespace {

const WindowSet& windows() {
  static const WindowSet ws = make_separable_windows(42, 512, 10, 3, 0.05);
  return ws;
}

std::vector<std::size_t> all_indices() {
  std::vector<std::size_t> idx(windows().count);
  std::iota(idx.begin(), idx.end(), 0);
  return idx;
}

void BM_ForwardBatch(benchmark::State& state) {
  const auto p = init_params(3, static_cast<std::size_t>(state.range(0)), 1);
  for (auto _ : state) benchmark::DoNotOptimize(forward_batch(p, windows()));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(windows().count));
}

void BM_ForwardBatchSerial(benchmark::State& state) {
  const auto p = init_params(3, static_cast<std::size_t>(state.range(0)), 1);
  for (auto _ : state) benchmark::DoNotOptimize(forward_batch_serial(p, windows()));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(windows().count));
}

void BM_BatchGradient(benchmark::State& state) {
  const auto p = init_params(3, static_cast<std::size_t>(state.range(0)), 1);
  const auto idx = all_indices();
  for (auto _ : state) benchmark::DoNotOptimize(batch_gradient(p, windows(), idx, {0.95, 0.05}));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(idx.size()));
}

void BM_BatchGradientSerial(benchmark::State& state) {
  const auto p = init_params(3, static_cast<std::size_t>(state.range(0)), 1);
  const auto idx = all_indices();
  for (auto _ : state) benchmark::DoNotOptimize(batch_gradient_serial(p, windows(), idx, {0.95, 0.05}));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(idx.size()));
}

struct SelectionInput {
  QarTable table;
  LabelSeries labels;
};

const SelectionInput& selection_input() {
  static const SelectionInput in = [] {
    auto t = convert_text_labels(generate_synthetic({7, 20000, 24, 0.02}), TextCodebook::defaults());
    auto l = label_overlimit(t.column("G").numeric_values());
    return SelectionInput{std::move(t), std::move(l)};
  }();
  return in;
}

void BM_SelectFeatures(benchmark::State& state) {
  const auto& in = selection_input();
  for (auto _ : state) benchmark::DoNotOptimize(select_features(in.table, in.labels));
}

void BM_SelectFeaturesSerial(benchmark::State& state) {
  const auto& in = selection_input();
  for (auto _ : state) benchmark::DoNotOptimize(select_features_serial(in.table, in.labels));
}

}  // namespace

BENCHMARK(BM_ForwardBatch)->Arg(10)->Arg(30)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_ForwardBatchSerial)->Arg(10)->Arg(30)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_BatchGradient)->Arg(10)->Arg(30)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_BatchGradientSerial)->Arg(10)->Arg(30)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_SelectFeatures)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_SelectFeaturesSerial)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
