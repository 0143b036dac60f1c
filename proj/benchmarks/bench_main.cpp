// Microbenchmarks for the hot paths: dense/batched matmul, same-padding
// convolution, the motion-attention block, the fusion block, and a full
// forward+backward step of the assembled detector.

#include <benchmark/benchmark.h>

#include "listenlab/agm.hpp"
#include "listenlab/mam.hpp"
#include "listenlab/model.hpp"
#include "listenlab/ops.hpp"
#include "listenlab/rng.hpp"

using namespace listenlab;

namespace {

Tensor<float> rand_tensor(Shape s, uint64_t seed) {
  CounterRng rng(seed, 0xbe);
  Tensor<float> t(std::move(s));
  for (auto& v : t.data()) v = static_cast<float>(rng.uniform(-1.0, 1.0));
  return t;
}

void BM_Matmul(benchmark::State& state) {
  int64_t n = state.range(0);
  NoGradGuard guard;
  Var<float> a(rand_tensor({n, n}, 1));
  Var<float> b(rand_tensor({n, n}, 2));
  for (auto _ : state) benchmark::DoNotOptimize(matmul(a, b).value().data().data());
  state.SetItemsProcessed(state.iterations() * n * n * n);
}
BENCHMARK(BM_Matmul)->Arg(32)->Arg(64)->Arg(128);

void BM_BatchedMatmul(benchmark::State& state) {
  NoGradGuard guard;
  Var<float> a(rand_tensor({8, 24, 64}, 3));
  Var<float> b(rand_tensor({8, 64, 24}, 4));
  for (auto _ : state) benchmark::DoNotOptimize(matmul(a, b).value().data().data());
}
BENCHMARK(BM_BatchedMatmul);

void BM_Conv2dSame(benchmark::State& state) {
  int64_t hw = state.range(0);
  NoGradGuard guard;
  Var<float> x(rand_tensor({4, 8, hw, hw}, 5));
  Var<float> k(rand_tensor({8, 8, 3, 3}, 6));
  for (auto _ : state)
    benchmark::DoNotOptimize(conv2d(x, k, Padding::kSame, 1).value().data().data());
}
BENCHMARK(BM_Conv2dSame)->Arg(8)->Arg(16)->Arg(32);

void BM_MotionAttention(benchmark::State& state) {
  NoGradGuard guard;
  MamParams<float> p;
  p.init(16, 4, 4, 8, CounterRng(7));
  Var<float> v(rand_tensor({2, 16, 16, 8, 8}, 8));
  for (auto _ : state)
    benchmark::DoNotOptimize(apply_mam(v, AttentionVariant::kSca, p).value().data().data());
}
BENCHMARK(BM_MotionAttention);

void BM_FusionBlock(benchmark::State& state) {
  NoGradGuard guard;
  AgmParams<float> p;
  p.init(16, 8, 64, 4, 256, true, CounterRng(9));
  Var<float> v(rand_tensor({2, 16, 16, 8, 8}, 10));
  Var<float> a(rand_tensor({2, 24, 8}, 11));
  for (auto _ : state) benchmark::DoNotOptimize(agm_block(v, a, p).value().data().data());
}
BENCHMARK(BM_FusionBlock);

void BM_TrainStep(benchmark::State& state) {
  ModelConfig cfg;
  cfg.frame_h = 32;
  cfg.frame_w = 32;
  cfg.channels = 16;
  cfg.spa_hidden = 8;
  cfg.d_model = 64;
  cfg.heads = 4;
  cfg.ffn_hidden = 256;
  cfg.audio_dim_raw = 8;
  cfg.audio_dim = 32;
  ModelParams<float> params;
  params.init(cfg);
  Var<float> video(rand_tensor({4, 16, 3, 32, 32}, 12));
  Var<float> audio(rand_tensor({4, 24, 8}, 13));
  for (auto _ : state) {
    Var<float> loss = model_loss(model_forward(video, audio, params), {0, 1, 0, 1});
    backward(loss);
    for (auto& [name, p] : params.named_params()) p.zero_grad();
    benchmark::DoNotOptimize(loss.value()[0]);
  }
}
BENCHMARK(BM_TrainStep);

}  // namespace

BENCHMARK_MAIN();
