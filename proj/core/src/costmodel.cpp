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

#include "mattn/costmodel.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <ostream>

#include "mattn/counters.hpp"
#include "mattn/errors.hpp"
#include "mattn/rng.hpp"

namespace mattn {

namespace {

using u64 = std::uint64_t;

struct TokenCost {
  u64 scores = 0, proj = 0;
};

TokenCost token_attention_flops(u64 batch, u64 group, u64 D, u64 Dh) {
  const u64 L = batch * group;
  return {4 * batch * group * group * Dh, 8 * L * D * Dh};
}

void add_matrix(FlopsReport& r, const MatrixAttnConfig& m, u64 T) {
  r.flops_proj += project_frames_flops(T, m.N, m.D, m.N_qk, m.D_qk) * 2;
  r.flops_proj += project_frames_flops(T, m.N, m.D, m.N_v, m.D_v);
  r.flops_proj += project_frames_flops(T, m.N_v, m.D_v, m.N, m.D);
  r.flops_temporal += 2 * T * T * (u64{m.N_qk} * m.D_qk + u64{m.N_v} * m.D_v);
}

}  // namespace

u64 project_frames_flops(std::size_t T, std::size_t n, std::size_t d, std::size_t n_out,
                         std::size_t d_out) {
  const u64 cost_u = u64{n_out} * (u64{n} * d + u64{d} * d_out);
  const u64 cost_w = u64{n} * d * d_out + u64{n_out} * n * d_out;
  return 2 * T * std::min(cost_u, cost_w);
}

FlopsReport flops_closed_form(const BlockConfig& cfg, std::size_t T) {
  cfg.validate();
  if (T == 0) throw ConfigError("T must be positive", "T");
  FlopsReport r;
  r.variant = to_string(cfg.variant);
  r.T = T;
  r.N = cfg.N;
  r.D = cfg.D;
  r.D_h = cfg.head_dim();
  r.depth = cfg.depth;
  if (cfg.uses_matrix()) {
    r.N_qk = cfg.matrix.N_qk;
    r.D_qk = cfg.matrix.D_qk;
    r.N_v = cfg.matrix.N_v;
    r.D_v = cfg.matrix.D_v;
    r.heads_m = cfg.matrix.heads_m;
    r.heads_n = cfg.matrix.heads_n;
  }
  FlopsReport one = r;
  const u64 D = cfg.D, Dh = cfg.head_dim(), N = cfg.N;
  auto add_token = [&](u64& scores_slot, u64 batch, u64 group) {
    const TokenCost c = token_attention_flops(batch, group, D, Dh);
    scores_slot += c.scores;
    one.flops_proj += c.proj;
  };
  switch (cfg.variant) {
    case BlockVariant::kFull3D:
      add_token(one.flops_temporal, 1, T * N);
      break;
    case BlockVariant::kLocal:
      add_token(one.flops_spatial, T, N);
      add_token(one.flops_temporal, N, T);
      break;
    case BlockVariant::kGlobal:
      add_token(one.flops_spatial, T, N);
      add_matrix(one, cfg.matrix, T);
      break;
    case BlockVariant::kHybrid:
      add_token(one.flops_spatial, T, N);
      add_token(one.flops_temporal, N, T);
      add_matrix(one, cfg.matrix, T);
      if (cfg.fusion == FusionVariant::kConcatMlp) one.flops_proj += 2 * (T * N) * (2 * D) * D;
      break;
  }
  r.flops_spatial = one.flops_spatial * cfg.depth;
  r.flops_temporal = one.flops_temporal * cfg.depth;
  r.flops_proj = one.flops_proj * cfg.depth;
  r.flops_total = r.flops_spatial + r.flops_temporal + r.flops_proj;
  return r;
}

FlopsReport flops_instrumented(const BlockConfig& cfg, std::size_t T, std::uint64_t seed) {
  FlopsReport r = flops_closed_form(cfg, T);
  const FrameDiT model(cfg);
  const ParamSet ps = model.init_params(seed);
  CounterRng rng = CounterRng::derive(seed, "bench.input");
  const VideoTokens z(T, cfg.N, rng.normal_mat(T * cfg.N, cfg.D));
  flops::CountingScope scope;
  model.predict(ps, z, 500.0);
  const flops::Tally& t = scope.tally();
  r.flops_spatial = t[FlopCategory::kSpatial];
  r.flops_temporal = t[FlopCategory::kTemporal];
  r.flops_proj = t[FlopCategory::kProj];
  r.flops_total = r.flops_spatial + r.flops_temporal + r.flops_proj;
  return r;
}

std::vector<BenchRecord> run_bench(const BlockConfig& base, const BenchOptions& opts) {
  if (opts.measure_time && opts.repeats < 5) {
    throw ConfigError("repeats must be >= 5", "repeats");
  }
  std::vector<BenchRecord> out;
  for (BlockVariant v : opts.variants) {
    BlockConfig cfg = base;
    cfg.variant = v;
    cfg.validate();
    const FrameDiT model(cfg);
    for (std::size_t T : opts.T_list) {
      BenchRecord rec;
      rec.variant = to_string(v);
      rec.T = T;
      rec.N = cfg.N;
      rec.D = cfg.D;
      if (cfg.uses_matrix()) {
        rec.N_qk = cfg.matrix.N_qk;
        rec.N_v = cfg.matrix.N_v;
        rec.heads_m = cfg.matrix.heads_m;
        rec.heads_n = cfg.matrix.heads_n;
      }
      rec.seed = opts.seed;
      rec.flops_total = flops_closed_form(cfg, T).flops_total;
      {
        const ParamSet ps = model.init_params(opts.seed);
        CounterRng rng = CounterRng::derive(opts.seed, "bench.input");
        const VideoTokens z(T, cfg.N, rng.normal_mat(T * cfg.N, cfg.D));
        memory::reset_peak();
        model.predict(ps, z, 500.0);
        rec.peak_live_bytes = memory::peak_bytes();
        if (opts.measure_time) {
          std::vector<double> ms;
          for (std::size_t i = 0; i < opts.repeats; ++i) {
            const auto t0 = std::chrono::steady_clock::now();
            model.predict(ps, z, 500.0);
            const auto t1 = std::chrono::steady_clock::now();
            ms.push_back(std::chrono::duration<double, std::milli>(t1 - t0).count());
          }
          std::sort(ms.begin(), ms.end());
          rec.wall_ms = ms.size() % 2 ? ms[ms.size() / 2]
                                      : 0.5 * (ms[ms.size() / 2 - 1] + ms[ms.size() / 2]);
        }
      }
      out.push_back(rec);
    }
  }
  return out;
}

void write_bench_csv(std::ostream& os, const std::vector<BenchRecord>& records) {
  os << kBenchCsvHeader << '\n';
  char buf[512];
  for (const auto& r : records) {
    std::snprintf(buf, sizeof buf, "%s,%zu,%zu,%zu,%zu,%zu,%zu,%zu,%llu,%.6f,%llu,%llu\n",
                  r.variant.c_str(), r.T, r.N, r.D, r.N_qk, r.N_v, r.heads_m, r.heads_n,
                  static_cast<unsigned long long>(r.flops_total), r.wall_ms,
                  static_cast<unsigned long long>(r.peak_live_bytes),
                  static_cast<unsigned long long>(r.seed));
    os << buf;
  }
}

void write_flops_csv(std::ostream& os, const std::vector<FlopsReport>& reports) {
  os << "variant,T,N,D,D_h,depth,N_qk,D_qk,N_v,D_v,heads_m,heads_n,"
        "flops_spatial,flops_temporal,flops_proj,flops_total\n";
  for (const auto& r : reports) {
    os << r.variant << ',' << r.T << ',' << r.N << ',' << r.D << ',' << r.D_h << ','
       << r.depth << ',' << r.N_qk << ',' << r.D_qk << ',' << r.N_v << ',' << r.D_v << ','
       << r.heads_m << ',' << r.heads_n << ',' << r.flops_spatial << ',' << r.flops_temporal
       << ',' << r.flops_proj << ',' << r.flops_total << '\n';
  }
}

double quadratic_coefficient(double f1, double f2, double f4, double T) {
  return (f4 - 3.0 * f2 + 2.0 * f1) / (6.0 * T * T);
}

}  // namespace mattn
