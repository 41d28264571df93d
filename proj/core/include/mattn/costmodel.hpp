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

#ifndef MATTN_COSTMODEL_HPP_
#define MATTN_COSTMODEL_HPP_

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "mattn/blocks.hpp"

namespace mattn {

// Matmul FLOPs (2 m k p per product) of the attention sub-layers of a model
// forward pass. Softmax, normalization, activations, the timestep/AdaLN path,
// the MLPs and the input/output layers are not counted.
//   spatial  - spatial scores and weighted sums
//   temporal - temporal scores and weighted sums (local, Matrix Attention, 3D)
//   proj     - every Q/K/V/output projection and the concat fusion layer
struct FlopsReport {
  std::string variant;
  std::size_t T = 0, N = 0, D = 0, D_h = 0, depth = 0;
  std::size_t N_qk = 0, D_qk = 0, N_v = 0, D_v = 0, heads_m = 0, heads_n = 0;
  std::uint64_t flops_spatial = 0, flops_temporal = 0, flops_proj = 0, flops_total = 0;
};

FlopsReport flops_closed_form(const BlockConfig& cfg, std::size_t T);
// Runs FrameDiT::predict under the matmul counter.
FlopsReport flops_instrumented(const BlockConfig& cfg, std::size_t T, std::uint64_t seed = 0);

// Closed-form FLOPs of one Matrix Attention projection stack for T frames,
// contracting in the cheaper order as the implementation does.
std::uint64_t project_frames_flops(std::size_t T, std::size_t n, std::size_t d,
                                   std::size_t n_out, std::size_t d_out);

struct BenchRecord {
  std::string variant;
  std::size_t T = 0, N = 0, D = 0, N_qk = 0, N_v = 0, heads_m = 0, heads_n = 0;
  std::uint64_t flops_total = 0;
  double wall_ms = 0.0;  // median over repeats
  std::uint64_t peak_live_bytes = 0;
  std::uint64_t seed = 0;
};

struct BenchOptions {
  std::vector<BlockVariant> variants;
  std::vector<std::size_t> T_list;
  std::size_t repeats = 5;
  std::uint64_t seed = 0;
  bool measure_time = true;  // false: a single pass, wall_ms reported as 0
};

// For each variant and T: one discarded warmup, then `repeats` timed
// no-gradient forward passes. Peak bytes are the live-byte high-water mark of
// a forward pass, counting its inputs and parameters.
std::vector<BenchRecord> run_bench(const BlockConfig& base, const BenchOptions& opts);

inline constexpr const char* kBenchCsvHeader =
    "variant,T,N,D,N_qk,N_v,heads_m,heads_n,flops_total,wall_ms,peak_live_bytes,seed";

void write_bench_csv(std::ostream& os, const std::vector<BenchRecord>& records);
void write_flops_csv(std::ostream& os, const std::vector<FlopsReport>& reports);

// Second difference estimate of the T^2 coefficient of f from f(T), f(2T), f(4T).
double quadratic_coefficient(double f1, double f2, double f4, double T);

}  // namespace mattn

#endif  // MATTN_COSTMODEL_HPP_
