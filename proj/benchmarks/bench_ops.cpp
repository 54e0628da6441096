#include <benchmark/benchmark.h>

#include <vector>

#include "darcn/fft.hpp"
#include "darcn/ops.hpp"
#include "darcn/rng.hpp"
#include "darcn/stft.hpp"
#include "darcn/tensor.hpp"

using namespace darcn;

static void BM_Fft320(benchmark::State& state) {
  Rng rng(1);
  std::vector<cplx> x(320);
  for (auto& v : x) v = cplx{rng.normal(), rng.normal()};
  for (auto _ : state) benchmark::DoNotOptimize(fft(x));
}
BENCHMARK(BM_Fft320);

static void BM_StftOneSecond(benchmark::State& state) {
  Rng rng(2);
  std::vector<double> x(16000);
  for (double& v : x) v = rng.normal();
  StftConfig cfg;
  for (auto _ : state) benchmark::DoNotOptimize(stft(x, cfg));
}
BENCHMARK(BM_StftOneSecond);

static void BM_IstftOneSecond(benchmark::State& state) {
  Rng rng(3);
  std::vector<double> x(16000);
  for (double& v : x) v = rng.normal();
  StftConfig cfg;
  Spectrogram spec = stft(x, cfg);
  for (auto _ : state) benchmark::DoNotOptimize(istft(spec, cfg));
}
BENCHMARK(BM_IstftOneSecond);

static void BM_Conv2dForward(benchmark::State& state) {
  Rng rng(4);
  NoGradGuard guard;
  Tensor x = Tensor::randn({1, 16, 100, 81}, rng);
  Tensor w = Tensor::randn({32, 16, 2, 5}, rng);
  Tensor b = Tensor::randn({32}, rng);
  for (auto _ : state) benchmark::DoNotOptimize(conv2d(x, w, b, 1, 2, Pad2{1, 0, 2, 2}));
}
BENCHMARK(BM_Conv2dForward);

static void BM_Conv2dBackward(benchmark::State& state) {
  Rng rng(5);
  Tensor x = Tensor::randn({1, 16, 100, 81}, rng);
  Tensor w = Tensor::randn({32, 16, 2, 5}, rng);
  x.set_requires_grad(true);
  w.set_requires_grad(true);
  for (auto _ : state) {
    Tensor loss = sum(conv2d(x, w, Tensor(), 1, 2, Pad2{1, 0, 2, 2}));
    loss.backward();
    x.zero_grad();
    w.zero_grad();
  }
}
BENCHMARK(BM_Conv2dBackward);

BENCHMARK_MAIN();
