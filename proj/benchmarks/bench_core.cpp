// Microbenchmarks for the training hot path: convolution, batch norm, the
// full network forward/backward, SSIM, and one optimizer step. Sizes mirror
// the desk-scale training runs (small slices, wide channels).

#include <benchmark/benchmark.h>

#include <cstdint>

#include "nexrl/layers.hpp"
#include "nexrl/metrics.hpp"
#include "nexrl/network.hpp"
#include "nexrl/noise_stats.hpp"
#include "nexrl/optimizer.hpp"
#include "nexrl/phantom.hpp"
#include "nexrl/rng.hpp"

namespace {

using nexrl::Tensor;

Tensor random_tensor(int n, int c, int h, int w, std::uint64_t seed) {
  nexrl::Rng rng(seed);
  Tensor t(n, c, h, w);
  for (float& v : t) v = static_cast<float>(rng.uniform(-1.0, 1.0));
  return t;
}

nexrl::ConvParams random_conv(int out_ch, int in_ch, std::uint64_t seed) {
  nexrl::Rng rng(seed);
  nexrl::ConvParams p(out_ch, in_ch);
  for (float& v : p.kernels) v = static_cast<float>(rng.uniform(-0.1, 0.1));
  return p;
}

nexrl::NetworkParams random_network(std::uint64_t seed) {
  nexrl::NetworkConfig cfg;  // dual full model, 128/64 wide
  nexrl::NetworkParams params = nexrl::build_network<float>(cfg, seed);
  nexrl::Rng rng(seed + 1);
  for (const nexrl::ParamRef<float>& ref : nexrl::param_refs(params))
    for (std::size_t i = 0; i < ref.size; ++i)
      ref.data[i] = static_cast<float>(rng.uniform(-0.05, 0.05));
  return params;
}

void BM_Conv2dForward(benchmark::State& state) {
  const int ch = static_cast<int>(state.range(0));
  const Tensor x = random_tensor(2, ch, 20, 20, 1);
  const nexrl::ConvParams p = random_conv(ch, ch, 2);
  for (auto _ : state) benchmark::DoNotOptimize(nexrl::conv2d_forward(x, p));
  state.SetItemsProcessed(state.iterations() * 2 * 20 * 20);
}
BENCHMARK(BM_Conv2dForward)->Arg(64)->Arg(128);

void BM_Conv2dBackward(benchmark::State& state) {
  const int ch = static_cast<int>(state.range(0));
  const Tensor x = random_tensor(2, ch, 20, 20, 1);
  const nexrl::ConvParams p = random_conv(ch, ch, 2);
  const Tensor grad = random_tensor(2, ch, 20, 20, 3);
  for (auto _ : state)
    benchmark::DoNotOptimize(nexrl::conv2d_backward(grad, x, p));
  state.SetItemsProcessed(state.iterations() * 2 * 20 * 20);
}
BENCHMARK(BM_Conv2dBackward)->Arg(64)->Arg(128);

void BM_BatchNormForwardTrain(benchmark::State& state) {
  const Tensor x = random_tensor(2, 128, 20, 20, 4);
  nexrl::BatchNormParams bn(128);
  nexrl::BatchNormCache<float> cache;
  for (auto _ : state)
    benchmark::DoNotOptimize(
        nexrl::batchnorm_forward(x, bn, nexrl::Mode::kTrain, &cache));
}
BENCHMARK(BM_BatchNormForwardTrain);

void BM_NetworkForwardTrain(benchmark::State& state) {
  nexrl::NetworkParams params = random_network(7);
  const Tensor x = random_tensor(2, 4, 20, 20, 8);
  for (auto _ : state)
    benchmark::DoNotOptimize(
        nexrl::forward(params, x, nexrl::Mode::kTrain));
  state.SetItemsProcessed(state.iterations() * 2 * 20 * 20);
}
BENCHMARK(BM_NetworkForwardTrain);

void BM_NetworkForwardEval(benchmark::State& state) {
  nexrl::NetworkParams params = random_network(7);
  const Tensor x = random_tensor(2, 4, 20, 20, 8);
  for (auto _ : state)
    benchmark::DoNotOptimize(nexrl::forward_eval(params, x));
  state.SetItemsProcessed(state.iterations() * 2 * 20 * 20);
}
BENCHMARK(BM_NetworkForwardEval);

void BM_NetworkBackward(benchmark::State& state) {
  nexrl::NetworkParams params = random_network(7);
  const Tensor x = random_tensor(2, 4, 20, 20, 8);
  const auto trace =
      nexrl::forward(params, x, nexrl::Mode::kTrain);
  const Tensor grad = random_tensor(2, 2, 20, 20, 9);
  for (auto _ : state)
    benchmark::DoNotOptimize(nexrl::backward(params, trace, grad));
  state.SetItemsProcessed(state.iterations() * 2 * 20 * 20);
}
BENCHMARK(BM_NetworkBackward);

void BM_AdamStep(benchmark::State& state) {
  nexrl::NetworkParams params = random_network(7);
  nexrl::NetworkGrads grads = nexrl::zero_grads_like(params);
  nexrl::Rng rng(11);
  for (const nexrl::ParamRef<float>& ref : nexrl::grad_refs(grads, params))
    for (std::size_t i = 0; i < ref.size; ++i)
      ref.data[i] = static_cast<float>(rng.uniform(-1e-3, 1e-3));
  nexrl::AdamState adam = nexrl::AdamState::init(params);
  for (auto _ : state) {
    nexrl::adam_step(params, grads, adam, 1e-4);
    benchmark::ClobberMemory();
  }
}
BENCHMARK(BM_AdamStep);

void BM_Ssim(benchmark::State& state) {
  const int hw = static_cast<int>(state.range(0));
  nexrl::Rng rng(13);
  nexrl::Image f(hw, hw), g(hw, hw);
  for (std::size_t i = 0; i < f.size(); ++i) {
    f.data()[i] = rng.uniform(0.0, 255.0);
    g.data()[i] = f.data()[i] + rng.normal(0.0, 5.0);
  }
  for (auto _ : state) benchmark::DoNotOptimize(nexrl::ssim(f, g, {}));
}
BENCHMARK(BM_Ssim)->Arg(20)->Arg(64);

void BM_AcquireNex(benchmark::State& state) {
  const nexrl::PhantomSpec spec = nexrl::random_phantom_spec(3, 64, 64);
  const nexrl::ComplexImage clean = nexrl::generate_phantom(spec);
  const nexrl::Image gfactor = nexrl::default_gfactor(64, 64);
  std::uint64_t seed = 0;
  for (auto _ : state)
    benchmark::DoNotOptimize(
        nexrl::acquire_nex(clean, 0.05, gfactor, 2, ++seed));
}
BENCHMARK(BM_AcquireNex);

}  // namespace

BENCHMARK_MAIN();
