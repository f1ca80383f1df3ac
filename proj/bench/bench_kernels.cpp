// Serial reference vs OpenMP batch gradient, and batched inference.
// Dimensions follow the default recurrent encoder; the batch is synthetic.

#include <random>

#include <benchmark/benchmark.h>

#include "htc/kernels.hpp"

namespace {

using namespace htc;

ModelSpec bench_spec(EncoderFamily family) {
  ModelSpec spec;
  spec.encoder.family = family;
  spec.encoder.embedding_dim = 300;
  spec.encoder.hidden_size = 72;
  spec.encoder.max_length = 120;
  spec.head = HeadKind::kFlat;
  spec.outputs = 12;
  spec.fc_size = family == EncoderFamily::kRecurrent ? 72 : 0;
  spec.vocab_size = 2000;
  return spec;
}

std::vector<Sample> bench_batch(std::size_t n, int outputs, int vocab) {
  std::mt19937_64 rng(11);
  std::vector<Sample> out(n);
  for (auto& s : out) {
    const int len = 40 + static_cast<int>(rng() % 40);
    for (int i = 0; i < len; ++i) s.tokens.push_back(1 + static_cast<int>(rng() % (vocab - 1)));
    for (int j = 0; j < outputs; ++j) s.y.push_back(static_cast<std::uint8_t>(rng() % 5 == 0));
  }
  return out;
}

template <bool Parallel>
void BM_BatchGradient(benchmark::State& state) {
  const auto family = static_cast<EncoderFamily>(state.range(0));
  const Model model(bench_spec(family), 1);
  const auto batch = bench_batch(static_cast<std::size_t>(state.range(1)), 12, 2000);
  std::vector<const Sample*> ptrs;
  for (const auto& s : batch) ptrs.push_back(&s);
  GradientSet grads = model.make_gradients();
  for (auto _ : state) {
    const auto loss = Parallel ? batch_gradient_parallel(model, ptrs, {}, grads)
                               : batch_gradient_serial(model, ptrs, {}, grads);
    benchmark::DoNotOptimize(loss.topic_sum);
  }
  state.SetItemsProcessed(state.iterations() * state.range(1));
}

void BM_PredictAll(benchmark::State& state) {
  const Model model(bench_spec(EncoderFamily::kRecurrent), 1);
  const auto samples = bench_batch(128, 12, 2000);
  const bool parallel = state.range(0) != 0;
  for (auto _ : state) benchmark::DoNotOptimize(predict_all(model, samples, parallel).size());
  state.SetItemsProcessed(state.iterations() * 128);
}

void gradient_args(benchmark::internal::Benchmark* b) {
  for (auto family : {EncoderFamily::kRecurrent, EncoderFamily::kConvolutional})
    for (int batch : {32, 128}) b->Args({static_cast<long>(family), batch});
  b->Unit(benchmark::kMillisecond);
}

}  // namespace

BENCHMARK(BM_BatchGradient<false>)->Name("batch_gradient/serial")->Apply(gradient_args);
BENCHMARK(BM_BatchGradient<true>)->Name("batch_gradient/parallel")->Apply(gradient_args);
BENCHMARK(BM_PredictAll)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
