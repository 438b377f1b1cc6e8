#include <benchmark/benchmark.h>

#include <random>

#include "tcdc/conv3d.hpp"
#include "tcdc/optflow.hpp"
#include "tcdc/rankpool.hpp"

namespace {

using namespace tcdc;

Tensor random_tensor(const Shape& dims, std::uint64_t seed) {
  std::mt19937 rng(static_cast<std::uint32_t>(seed));
  std::uniform_real_distribution<float> u(-1.0f, 1.0f);
  Tensor t(dims);
  for (auto& v : t.data()) v = u(rng);
  return t;
}

// Desk-net conv layers: {in, out, L, S}.
constexpr std::size_t kLayers[][4] = {{5, 16, 16, 112}, {16, 32, 16, 56}, {32, 64, 8, 28}, {64, 64, 4, 14}};

ConvSpec layer_spec(std::size_t i, double theta) {
  ConvSpec s;
  s.in_channels = kLayers[i][0];
  s.out_channels = kLayers[i][1];
  s.theta = theta;
  return s;
}

double macs(std::size_t i) {
  const auto& l = kLayers[i];
  return 27.0 * static_cast<double>(l[0] * l[1] * l[2] * l[3] * l[3]);
}

void BM_TcdcForward(benchmark::State& state) {
  const auto i = static_cast<std::size_t>(state.range(0));
  const ConvSpec spec = layer_spec(i, 0.7);
  const auto& l = kLayers[i];
  const Tensor x = random_tensor({1, l[0], l[2], l[3], l[3]}, 1);
  ConvParams<float> p = conv_params_zero<float>(spec);
  p.weights = random_tensor(p.weights.dims(), 2);
  for (auto _ : state) benchmark::DoNotOptimize(tcdc_forward(x, p, spec));
  state.counters["GFLOP/s"] = benchmark::Counter(2.0 * macs(i), benchmark::Counter::kIsIterationInvariantRate,
                                                 benchmark::Counter::kIs1000);
}
BENCHMARK(BM_TcdcForward)->DenseRange(0, 3)->Unit(benchmark::kMillisecond);

void BM_TcdcBackward(benchmark::State& state) {
  const auto i = static_cast<std::size_t>(state.range(0));
  const ConvSpec spec = layer_spec(i, 0.7);
  const auto& l = kLayers[i];
  const Tensor x = random_tensor({1, l[0], l[2], l[3], l[3]}, 1);
  ConvParams<float> p = conv_params_zero<float>(spec);
  p.weights = random_tensor(p.weights.dims(), 2);
  const Tensor g = random_tensor({1, l[1], l[2], l[3], l[3]}, 3);
  for (auto _ : state) benchmark::DoNotOptimize(tcdc_backward(x, p, spec, g, i != 0));
  state.counters["GFLOP/s"] = benchmark::Counter((i != 0 ? 4.0 : 2.0) * macs(i),
                                                 benchmark::Counter::kIsIterationInvariantRate,
                                                 benchmark::Counter::kIs1000);
}
BENCHMARK(BM_TcdcBackward)->DenseRange(0, 3)->Unit(benchmark::kMillisecond);

void BM_RankSvm(benchmark::State& state) {
  std::vector<Tensor> frames;
  for (std::size_t t = 0; t < 7; ++t) frames.push_back(random_tensor({3, 128, 128}, 10 + t));
  const RankPoolProblem problem = RankPoolProblem::from_frames(frames, 1.0);
  for (auto _ : state) benchmark::DoNotOptimize(rank_svm_solve(problem));
}
BENCHMARK(BM_RankSvm)->Unit(benchmark::kMillisecond);

void BM_HornSchunck(benchmark::State& state) {
  const auto iters = static_cast<std::size_t>(state.range(0));
  const Tensor a = random_tensor({128, 128}, 4), b = random_tensor({128, 128}, 5);
  for (auto _ : state) benchmark::DoNotOptimize(horn_schunck(a, b, 1.0, iters));
}
BENCHMARK(BM_HornSchunck)->Arg(100)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
