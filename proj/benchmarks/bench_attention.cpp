/* Copyright 2026 The Matrix Attention Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

#include <benchmark/benchmark.h>

#include "mattn/attention.hpp"
#include "mattn/blocks.hpp"
#include "mattn/rng.hpp"

namespace {

using namespace mattn;

BlockConfig bench_config(BlockVariant v) {
  BlockConfig c = preset_block_config("toy");
  c.variant = v;
  return c;
}

VideoTokens input(std::size_t T, const BlockConfig& c) {
  CounterRng rng(7);
  return VideoTokens(T, c.N, rng.normal_mat(T * c.N, c.D));
}

void BM_Model(benchmark::State& st, BlockVariant v) {
  const BlockConfig c = bench_config(v);
  const FrameDiT model(c);
  const ParamSet ps = model.init_params(1);
  const VideoTokens z = input(static_cast<std::size_t>(st.range(0)), c);
  for (auto _ : st) benchmark::DoNotOptimize(model.predict(ps, z, 500.0));
  st.SetComplexityN(st.range(0));
}

void BM_MatrixAttention(benchmark::State& st) {
  const BlockConfig c = bench_config(BlockVariant::kGlobal);
  CounterRng rng(3);
  MatrixAttnConfig mc = c.matrix;
  mc.heads_m = mc.heads_n = 1;
  const MatrixAttnParams p = init_matrix_attention(mc, rng);
  const VideoTokens z = input(static_cast<std::size_t>(st.range(0)), c);
  for (auto _ : st) benchmark::DoNotOptimize(matrix_attention(z, p));
  st.SetComplexityN(st.range(0));
}

void BM_Full3D(benchmark::State& st) {
  const BlockConfig c = bench_config(BlockVariant::kFull3D);
  CounterRng rng(4);
  const AttnParams p = init_attention(c.D, c.D, rng);
  const VideoTokens z = input(static_cast<std::size_t>(st.range(0)), c);
  for (auto _ : st) benchmark::DoNotOptimize(full3d_attention(z, p));
  st.SetComplexityN(st.range(0));
}

}  // namespace

BENCHMARK_CAPTURE(BM_Model, local, BlockVariant::kLocal)->RangeMultiplier(2)->Range(16, 128)->Complexity();
BENCHMARK_CAPTURE(BM_Model, global, BlockVariant::kGlobal)->RangeMultiplier(2)->Range(16, 128)->Complexity();
BENCHMARK_CAPTURE(BM_Model, hybrid, BlockVariant::kHybrid)->RangeMultiplier(2)->Range(16, 128)->Complexity();
BENCHMARK_CAPTURE(BM_Model, full3d, BlockVariant::kFull3D)->RangeMultiplier(2)->Range(16, 128)->Complexity();
BENCHMARK(BM_MatrixAttention)->RangeMultiplier(2)->Range(16, 128)->Complexity();
BENCHMARK(BM_Full3D)->RangeMultiplier(2)->Range(16, 64)->Complexity();
BENCHMARK_MAIN();
