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

#include "mattn/verify.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <functional>
#include <limits>
#include <map>

#include "mattn/blocks.hpp"
#include "mattn/costmodel.hpp"
#include "mattn/diffusion.hpp"
#include "mattn/errors.hpp"
#include "mattn/gradcheck.hpp"
#include "mattn/oracle.hpp"
#include "mattn/rng.hpp"

namespace mattn {

namespace {

VideoTokens random_video(std::size_t T, std::size_t N, std::size_t D, std::uint64_t seed) {
  CounterRng rng(seed);
  return VideoTokens(T, N, rng.normal_mat(T * N, D));
}

std::vector<Mat> random_maps(std::size_t count, std::size_t n, CounterRng& rng) {
  std::vector<Mat> v;
  for (std::size_t i = 0; i < count; ++i) v.push_back(rng.normal_mat(n, n));
  return v;
}

MatrixAttnConfig small_matrix(std::size_t N, std::size_t D, std::size_t N_qk, std::size_t N_v,
                              std::size_t m, std::size_t n) {
  MatrixAttnConfig c;
  c.N = N;
  c.D = D;
  c.N_qk = N_qk;
  c.D_qk = D;
  c.N_v = N_v;
  c.D_v = D;
  c.heads_m = m;
  c.heads_n = n;
  return c;
}

BlockConfig tiny_block(BlockVariant v, FusionVariant f = FusionVariant::kConcatMlp) {
  BlockConfig c;
  c.D = 4;
  c.N = 3;
  c.D_h = 3;
  c.mlp_hidden = 6;
  c.freq_dim = 4;
  c.variant = v;
  c.fusion = f;
  c.matrix = small_matrix(3, 4, 2, 4, 1, 2);
  c.matrix.set_all_norms(UNorm::kSoftmax);
  return c;
}

CheckResult exact(std::string name, const Mat& a, const Mat& b) {
  const double d = a.rows() == b.rows() && a.cols() == b.cols()
                       ? max_abs_diff(a, b)
                       : std::numeric_limits<double>::infinity();
  return {std::move(name), d, d == 0.0};
}

// ---------------------------------------------------------------- oracle

std::vector<CheckResult> oracle_suite(const VerifyOptions& o) {
  std::vector<CheckResult> out;
  const std::uint64_t base = o.seed * 1000;

  double zero_dev = 0.0;
  for (std::uint64_t s = 0; s < 20; ++s) {
    CounterRng rng(base + 300 + s);
    const std::size_t T = 1 + s % 4, N = 1 + (s / 4) % 4;
    const auto S = build_spatial_blockdiag(random_maps(T, N, rng));
    const auto H = build_local_temporal_map(random_maps(N, T, rng));
    for (std::size_t i = 0; i < T * N; ++i)
      for (std::size_t j = 0; j < T * N; ++j) {
        if (i / N != j / N) zero_dev = std::max(zero_dev, std::abs(S.A(i, j)));
        if (i % N != j % N) zero_dev = std::max(zero_dev, std::abs(H.A(i, j)));
      }
  }
  out.push_back({"oracle.structural_zeros", zero_dev, zero_dev == 0.0});

  double bdev = 0.0;
  bool bpass = true;
  std::size_t swapped_fail = 0;
  for (std::uint64_t s = 0; s < 20; ++s) {
    CounterRng rng(base + 100 + s);
    const std::size_t T = 1 + s % 4, N = 1 + (s / 4) % 4;
    auto H = build_local_temporal_map(random_maps(N, T, rng));
    const auto S = build_spatial_blockdiag(random_maps(T, N, rng));
    if (o.inject_fault && N > 1) H.A(0, 1) += 0.5;
    const auto r = bottleneck_identity_check(H, S);
    bdev = std::max(bdev, r.max_dev);
    bpass = bpass && r.pass;
    if (T > 1 && N > 1 && !bottleneck_identity_check(S, H).pass) ++swapped_fail;
  }
  out.push_back({"oracle.bottleneck_identity", bdev, bpass && bdev <= 1e-12});
  {
    std::size_t eligible = 0;
    for (std::uint64_t s = 0; s < 20; ++s)
      if (1 + s % 4 > 1 && 1 + (s / 4) % 4 > 1) ++eligible;
    out.push_back({"oracle.swapped_order_rejected", double(eligible - swapped_fail),
                   swapped_fail == eligible});
  }

  double mdev = 0.0;
  bool mpass = true;
  for (std::uint64_t s = 0; s < 20; ++s) {
    CounterRng rng(base + 200 + s);
    const std::size_t T = 1 + s % 4, N = 1 + (s / 4) % 4, Nr = 1 + s % 2;
    const auto S = build_spatial_blockdiag(random_maps(T, N, rng));
    const Mat G = rng.normal_mat(T * N, T * N);
    const auto r = matrix_map_expansion_check(rng.normal_mat(N, Nr), rng.normal_mat(N, Nr),
                                              rng.normal_mat(N, Nr), G, S);
    mdev = std::max(mdev, r.max_dev);
    mpass = mpass && r.pass;
  }
  out.push_back({"oracle.matrix_map_expansion", mdev, mpass && mdev <= 1e-12});

  double ddev = 0.0;
  for (std::uint64_t s = 0; s < 3; ++s) {
    const auto p = random_dual_path_params(3, 2, 2, 4, base + 10 + s);
    const auto r = dual_path_equivalence(random_video(4, 3, 2, base + 20 + s), p);
    ddev = std::max(ddev, r.max_dev);
  }
  out.push_back({"oracle.dual_path_equivalence", ddev, ddev <= 1e-10});

  {
    auto p = random_dual_path_params(3, 2, 3, 3, base + 30);
    for (MatrixLinear* l :
         {&p.matrix.proj_q, &p.matrix.proj_k, &p.matrix.proj_v, &p.matrix.proj_o}) {
      l->U = Mat::identity(3);
    }
    const VideoTokens z = random_video(3, 3, 2, base + 31);
    const auto r = dual_path_equivalence(z, p);
    const Mat local = shared_gram_local_path(z, p);
    const double d_exact = max_abs_diff(local, r.oracle);
    const double d_mod = max_abs_diff(local, r.modular);
    out.push_back({"oracle.identity_row_weights_exact", d_exact, d_exact == 0.0});
    out.push_back({"oracle.identity_row_weights_modular", d_mod, d_mod <= 1e-10});
  }
  return out;
}

// -------------------------------------------------------------- gradient

CheckResult grad_check(const std::string& name, const std::function<GradCheckResult(std::uint64_t)>& run,
                       std::uint64_t base) {
  double worst = 0.0;
  bool pass = true;
  for (std::uint64_t s = 0; s < 3; ++s) {
    const auto r = run(base + 100 * s);
    worst = std::max(worst, r.max_rel_err);
    pass = pass && r.pass && r.checked > 0;
  }
  return {name, worst, pass};
}

GradCheckResult attention_grad(const AttentionSpec& spec, std::size_t T, std::size_t N,
                               std::uint64_t seed) {
  ParamSet ps;
  init_params(spec, "a.", seed, ps);
  randomize_params(ps, seed + 1, 0.6);
  const VideoTokens z = random_video(T, N, spec.D, seed + 2);
  GradCheckOptions opts;
  opts.seed = seed + 3;
  return check_gradients(
      [&](ParamBinder& b, const Var& x) { return graph::apply(spec, b, "a.", x, T, N); }, ps,
      z.tokens, opts);
}

std::vector<CheckResult> gradient_suite(const VerifyOptions& o) {
  std::vector<CheckResult> out;
  const std::uint64_t base = o.seed * 1000;
  for (AttentionOp op :
       {AttentionOp::kSpatial, AttentionOp::kLocalTemporal, AttentionOp::kFull3D}) {
    AttentionSpec spec;
    spec.op = op;
    spec.D = 3;
    spec.D_h = 2;
    out.push_back(grad_check("gradient.attention." + to_string(op),
                             [&](std::uint64_t s) { return attention_grad(spec, 3, 2, s); },
                             base + 7));
  }
  for (UNorm u : {UNorm::kNone, UNorm::kSoftmax, UNorm::kL1, UNorm::kL2}) {
    AttentionSpec spec;
    spec.op = AttentionOp::kMatrix;
    spec.D = 4;
    spec.matrix = small_matrix(2, 4, 2, 4, 2, 2);
    spec.matrix.set_all_norms(u);
    out.push_back(grad_check("gradient.attention.matrix_" + to_string(u),
                             [&](std::uint64_t s) { return attention_grad(spec, 3, 2, s); },
                             base + 11));
  }
  for (FusionVariant f :
       {FusionVariant::kConcatMlp, FusionVariant::kSigmoidGate, FusionVariant::kSoftmaxGate}) {
    out.push_back(grad_check(
        "gradient.fusion." + to_string(f),
        [&](std::uint64_t s) {
          ParamSet ps;
          init_fusion_params(f, 3, "f.", s, ps);
          randomize_params(ps, s + 1, 0.8);
          const VideoTokens ab = random_video(2, 2, 6, s + 2);
          GradCheckOptions g;
          g.seed = s + 3;
          return check_gradients(
              [&](ParamBinder& b, const Var& x) {
                return graph::fuse(b, "f.", f, slice_cols(x, 0, 3), slice_cols(x, 3, 6));
              },
              ps, ab.tokens, g);
        },
        base));
  }
  {
    BlockConfig c = tiny_block(BlockVariant::kHybrid);
    c.N = 2;
    c.matrix = small_matrix(2, 4, 2, 2, 1, 2);
    c.matrix.set_all_norms(UNorm::kSoftmax);
    const FrameDiT model(c);
    out.push_back(grad_check(
        "gradient.model.hybrid_depth1",
        [&](std::uint64_t s) {
          ParamSet ps = model.init_params(s);
          randomize_params(ps, s + 10, 0.5);
          const VideoTokens z = random_video(2, 2, 4, s + 20);
          GradCheckOptions g;
          g.seed = s + 30;
          return check_gradients(
              [&](ParamBinder& b, const Var& x) { return model.forward(b, x, 2, 17.0); }, ps,
              z.tokens, g);
        },
        base));
  }
  return out;
}

// -------------------------------------------------------------- collapse

std::vector<CheckResult> collapse_suite(const VerifyOptions& o) {
  std::vector<CheckResult> out;
  const std::uint64_t base = o.seed * 1000;
  {
    const auto c = small_matrix(4, 4, 2, 4, 1, 1);
    CounterRng rng(base + 50);
    MatrixAttnParams p = init_matrix_attention(c, rng);
    for (MatrixLinear* l : {&p.proj_q, &p.proj_k, &p.proj_v, &p.proj_o})
      l->B = rng.normal_mat(l->B.rows(), l->B.cols(), 0.5);
    const VideoTokens z = random_video(3, 4, 4, base + 51);
    ParamSet ps;
    export_params(p, "m.", ps);
    AttentionSpec spec;
    spec.op = AttentionOp::kMatrix;
    spec.D = 4;
    spec.matrix = c;
    out.push_back(exact("collapse.multihead_1x1_single_head",
                        attention_forward(spec, ps, "m.", z).tokens,
                        matrix_attention(z, p).tokens));
  }
  {
    CounterRng rng(base + 90);
    AttnParams p = init_attention(2, 3, rng);
    const VideoTokens t1 = random_video(1, 4, 2, base + 92);
    out.push_back(exact("collapse.full3d_T1_spatial", full3d_attention(t1, p).tokens,
                        spatial_attention(t1, p).tokens));
    const VideoTokens n1 = random_video(4, 1, 2, base + 93);
    out.push_back(exact("collapse.full3d_N1_local_temporal", full3d_attention(n1, p).tokens,
                        local_temporal_attention(n1, p).tokens));
  }
  {
    const BlockConfig local = tiny_block(BlockVariant::kLocal);
    const BlockConfig hybrid = tiny_block(BlockVariant::kHybrid, FusionVariant::kSoftmaxGate);
    ParamSet pl, ph;
    init_block_params(local, "b.", base + 13, pl);
    init_block_params(hybrid, "b.", base + 13, ph);
    randomize_params(pl, base + 14, 0.5);
    randomize_params(ph, base + 14, 0.5);
    ph.set("b.fusion.logits", Mat::from_rows({{0.0, -1e4}}));
    const VideoTokens z = random_video(3, 3, 4, base + 15);
    CounterRng rng(base + 16);
    const Mat cond = rng.normal_mat(1, 4);
    out.push_back(exact("collapse.hybrid_weight_1_0_local",
                        framedit_h_block(hybrid, ph, "b.", z, cond).tokens,
                        framedit_block(local, pl, "b.", z, cond).tokens));
  }
  return out;
}

// ------------------------------------------------------------- diffusion

std::vector<CheckResult> diffusion_suite(const VerifyOptions& o) {
  std::vector<CheckResult> out;
  double vp = 0.0;
  bool mono = true;
  for (std::size_t K : {1u, 10u, 250u, 1000u}) {
    const NoiseSchedule s = make_schedule(K);
    for (std::size_t k = 0; k <= K; ++k)
      vp = std::max(vp, std::abs(s.a[k] * s.a[k] + s.sigma[k] * s.sigma[k] - 1.0));
    for (std::size_t k = 1; k < K; ++k) mono = mono && s.snr(k) > s.snr(k + 1);
  }
  out.push_back({"diffusion.vp_identity", vp, vp <= 1e-12});
  out.push_back({"diffusion.snr_monotone", mono ? 0.0 : 1.0, mono});

  const double mu = 1.5, sd = 0.5;
  const NoiseSchedule s = make_schedule(1000);
  auto oracle = [&](const Mat& x, std::size_t k) {
    const double a = s.a[k], sg = s.sigma[k];
    Mat e = x;
    for (std::size_t i = 0; i < e.size(); ++i)
      e[i] = sg / (a * a * sd * sd + sg * sg) * (x[i] - a * mu);
    return e;
  };
  {
    SamplerConfig cfg;
    cfg.eta = 0.0;
    cfg.steps = 50;
    cfg.seed = o.seed * 1000 + 7;
    const Mat a = sample(oracle, 64, 1, cfg, s);
    const Mat b = sample(oracle, 64, 1, cfg, s);
    const NoiseSchedule s50 = make_schedule(50);
    double omega = 0.0;
    for (std::size_t k = 2; k <= 50; ++k)
      omega = std::max(omega, transition_omega(k, k - 1, 0.0, s50));
    const double d = std::max(max_abs_diff(a, b), omega);
    out.push_back({"diffusion.eta0_deterministic", d, d == 0.0});
  }
  // Exact chain moments (mean / mu, var / sd^2) of the strided sampler under
  // the exact predictor, propagated in closed form.
  struct Expect {
    double eta;
    std::size_t steps;
    double mean, var;
  };
  const Expect table[] = {{0.0, 1000, 1.0, 1.0},
                          {1.0, 1000, 1.0, 1.0},
                          {0.0, 250, 0.996859986632, 0.977215048410},
                          {1.0, 250, 0.999989910120, 0.944062041550}};
  double worst = 0.0;
  for (const Expect& e : table) {
    SamplerConfig cfg;
    cfg.eta = e.eta;
    cfg.steps = e.steps;
    cfg.seed = o.seed * 1000 + 13;
    const Mat x = sample(oracle, 4096, 1, cfg, s);
    double m = 0, v = 0;
    for (std::size_t i = 0; i < x.size(); ++i) m += x[i];
    m /= x.size();
    for (std::size_t i = 0; i < x.size(); ++i) v += (x[i] - m) * (x[i] - m);
    v /= (x.size() - 1);
    worst = std::max({worst, std::abs(m / mu / e.mean - 1.0),
                      std::abs(v / (sd * sd) / e.var - 1.0)});
  }
  out.push_back({"diffusion.sampler_moments", worst, worst <= 0.05});
  return out;
}

// ------------------------------------------------------------------ cost

BlockConfig grid_config(std::size_t N, BlockVariant v) {
  BlockConfig c;
  c.D = 4;
  c.N = N;
  c.D_h = 3;
  c.variant = v;
  c.matrix = small_matrix(N, 4, std::max<std::size_t>(1, N / 2), 2 * N, 1, 2);
  c.matrix.set_all_norms(UNorm::kSoftmax);
  return c;
}

std::vector<CheckResult> cost_suite(const VerifyOptions& o) {
  std::vector<CheckResult> out;
  const BlockVariant all[] = {BlockVariant::kLocal, BlockVariant::kGlobal, BlockVariant::kHybrid,
                              BlockVariant::kFull3D};
  double mismatch = 0.0;
  for (BlockVariant v : all)
    for (FusionVariant f : {FusionVariant::kConcatMlp, FusionVariant::kSoftmaxGate})
      for (std::size_t T : {1u, 2u, 4u, 8u})
        for (std::size_t N : {1u, 4u, 16u})
          for (std::size_t depth : {0u, 1u, 2u}) {
            BlockConfig c = grid_config(N, v);
            c.fusion = f;
            c.depth = depth;
            const FlopsReport a = flops_closed_form(c, T);
            const FlopsReport b = flops_instrumented(c, T, o.seed);
            for (auto [x, y] : {std::pair{a.flops_spatial, b.flops_spatial},
                                {a.flops_temporal, b.flops_temporal},
                                {a.flops_proj, b.flops_proj},
                                {a.flops_total, b.flops_total}}) {
              mismatch = std::max(mismatch, std::abs(double(x) - double(y)));
            }
          }
  out.push_back({"cost.instrumented_equals_closed_form", mismatch, mismatch == 0.0});

  {
    const BlockConfig c = grid_config(16, BlockVariant::kFull3D);
    const double r = double(flops_closed_form(c, 128).flops_temporal) /
                     double(flops_closed_form(c, 16).flops_temporal);
    out.push_back({"cost.full3d_temporal_ratio_64", std::abs(r - 64.0), r == 64.0});
  }
  {
    const BlockConfig h = preset_block_config("p128");
    BlockConfig l = h;
    l.variant = BlockVariant::kLocal;
    const FlopsReport rh = flops_closed_form(h, 128), rl = flops_closed_form(l, 128);
    const FlopsReport ih = flops_instrumented(h, 128), il = flops_instrumented(l, 128);
    const double closed = double(rh.flops_total) / double(rl.flops_total);
    const double measured = double(ih.flops_total) / double(il.flops_total);
    const double pinned = 6710886400.0 / 2952790016.0;
    const double d = std::max(std::abs(measured - closed), std::abs(closed - pinned));
    out.push_back({"cost.hybrid_local_ratio_p128", d, d <= 1e-12});
  }
  {
    BlockConfig c = grid_config(8, BlockVariant::kHybrid);
    c.D = 8;
    c.D_h = 8;
    c.matrix = small_matrix(8, 8, 2, 8, 1, 2);
    c.matrix.set_all_norms(UNorm::kSoftmax);
    BenchOptions bo;
    bo.variants = {BlockVariant::kFull3D, BlockVariant::kGlobal, BlockVariant::kHybrid};
    bo.T_list = {32, 64, 128};
    bo.measure_time = false;
    bo.seed = o.seed;
    const auto r = run_bench(c, bo);
    auto coeff = [&](std::size_t i) {
      return quadratic_coefficient(double(r[i].peak_live_bytes), double(r[i + 1].peak_live_bytes),
                                   double(r[i + 2].peak_live_bytes), 32.0);
    };
    const double q3 = coeff(0), qg = coeff(3);
    const double N = 8.0;
    const bool super = q3 >= 8.0 * N * N && r[2].peak_live_bytes > 4 * r[0].peak_live_bytes;
    out.push_back({"cost.peak_full3d_superlinear", q3, super});
    const double bound = 16.0 * c.matrix.heads_m * c.matrix.heads_n;
    out.push_back({"cost.peak_framedit_g_score_term", qg, qg <= bound});
  }
  return out;
}

// ------------------------------------------------------------------ gate

std::vector<CheckResult> gate_suite(const VerifyOptions& o) {
  const BlockConfig c = tiny_block(BlockVariant::kHybrid);
  double worst = 0.0;
  bool positive = true;
  for (std::uint64_t s = 1; s <= 3; ++s) {
    const std::uint64_t seed = o.seed * 1000 + s;
    std::vector<std::pair<VideoTokens, VideoTokens>> batch;
    for (std::uint64_t i = 0; i < 4; ++i)
      batch.emplace_back(random_video(4, c.N, c.D, seed * 100 + 2 * i),
                         random_video(4, c.N, c.D, seed * 100 + 2 * i + 1));
    GateRatioOptions go;
    go.seed = seed;
    const double r = gate_gradient_ratio(batch, c, go);
    worst = std::max(worst, r);
    positive = positive && r > 0.0;
  }
  return {{"gate.softmax_gradient_ratio", worst, positive && worst < 0.2}};
}

using SuiteFn = std::vector<CheckResult> (*)(const VerifyOptions&);

const std::map<std::string, SuiteFn>& suite_table() {
  static const std::map<std::string, SuiteFn> t = {
      {"oracle", oracle_suite},       {"gradient", gradient_suite},
      {"collapse", collapse_suite},   {"diffusion", diffusion_suite},
      {"cost", cost_suite},           {"gate", gate_suite}};
  return t;
}

}  // namespace

const std::vector<std::string>& verify_suites() {
  static const std::vector<std::string> s = {"oracle", "gradient", "collapse",
                                             "diffusion", "cost", "gate"};
  return s;
}

std::vector<CheckResult> run_suite(const std::string& suite, const VerifyOptions& opts) {
  const auto it = suite_table().find(suite);
  if (it == suite_table().end()) throw ConfigError("unknown verify suite '" + suite + "'", "suite");
  return it->second(opts);
}

std::vector<CheckResult> run_all_checks(const VerifyOptions& opts) {
  std::vector<CheckResult> all;
  for (const auto& s : verify_suites()) {
    auto r = run_suite(s, opts);
    all.insert(all.end(), r.begin(), r.end());
  }
  return all;
}

void write_report(std::ostream& os, const std::vector<CheckResult>& results) {
  char buf[64];
  for (const auto& r : results) {
    std::snprintf(buf, sizeof buf, "%.17g", r.max_dev);
    os << r.name << ',' << buf << ',' << (r.pass ? "PASS" : "FAIL") << '\n';
  }
}

bool all_pass(const std::vector<CheckResult>& results) {
  return std::all_of(results.begin(), results.end(), [](const auto& r) { return r.pass; });
}

}  // namespace mattn
