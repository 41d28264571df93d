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

#include "mattn/blocks.hpp"

#include <cmath>

namespace mattn {

std::string to_string(BlockVariant v) {
  switch (v) {
    case BlockVariant::kLocal: return "local";
    case BlockVariant::kGlobal: return "global";
    case BlockVariant::kHybrid: return "hybrid";
    case BlockVariant::kFull3D: return "full3d";
  }
  return "?";
}

std::string to_string(FusionVariant v) {
  switch (v) {
    case FusionVariant::kConcatMlp: return "concat_mlp";
    case FusionVariant::kSigmoidGate: return "sigmoid_gate";
    case FusionVariant::kSoftmaxGate: return "softmax_gate";
  }
  return "?";
}

BlockVariant parse_block_variant(const std::string& s) {
  if (s == "local") return BlockVariant::kLocal;
  if (s == "global") return BlockVariant::kGlobal;
  if (s == "hybrid") return BlockVariant::kHybrid;
  if (s == "full3d") return BlockVariant::kFull3D;
  throw ConfigError("variant must be one of local|global|hybrid|full3d, got '" + s + "'",
                    "variant");
}

FusionVariant parse_fusion(const std::string& s) {
  if (s == "concat_mlp") return FusionVariant::kConcatMlp;
  if (s == "sigmoid_gate") return FusionVariant::kSigmoidGate;
  if (s == "softmax_gate") return FusionVariant::kSoftmaxGate;
  throw ConfigError(
      "fusion must be one of concat_mlp|sigmoid_gate|softmax_gate, got '" + s + "'",
      "fusion");
}

// ---- fusion ----------------------------------------------------------------------

namespace {

Mat kaiming_uniform(std::size_t fan_in, std::size_t fan_out, CounterRng& rng) {
  const double bound = std::sqrt(6.0 / static_cast<double>(fan_in));
  return rng.uniform_mat(fan_in, fan_out, -bound, bound);
}

Mat default_gate_logits() {
  return Mat::from_rows({{std::log(0.97), std::log(0.03)}});
}

}  // namespace

FusionMode FusionMode::concat_mlp(std::size_t D, std::uint64_t seed) {
  FusionMode m;
  m.variant = FusionVariant::kConcatMlp;
  CounterRng rng = CounterRng::derive(seed, "fusion.w");
  m.weight = kaiming_uniform(2 * D, D, rng);
  m.bias = Mat(1, D);
  return m;
}

FusionMode FusionMode::sigmoid_gate(double alpha) {
  FusionMode m;
  m.variant = FusionVariant::kSigmoidGate;
  m.alpha = alpha;
  return m;
}

FusionMode FusionMode::softmax_gate() {
  FusionMode m;
  m.variant = FusionVariant::kSoftmaxGate;
  const Mat l = default_gate_logits();
  m.logits = {l[0], l[1]};
  return m;
}

std::pair<double, double> FusionMode::gate_weights() const {
  if (variant == FusionVariant::kSigmoidGate) {
    const double w = sigmoid(Var::constant(Mat(1, 1, alpha))).value()[0];
    return {w, 1.0 - w};
  }
  if (variant == FusionVariant::kSoftmaxGate) {
    const Mat w = softmax_rows(Mat::from_rows({{logits[0], logits[1]}}));
    return {w[0], w[1]};
  }
  throw ConfigError("gate_weights: concat_mlp has no gate", "fusion");
}

namespace {

ParamSet fusion_param_set(const FusionMode& mode, const std::string& prefix) {
  ParamSet ps;
  switch (mode.variant) {
    case FusionVariant::kConcatMlp:
      ps.add(prefix + "w", mode.weight);
      ps.add(prefix + "b", mode.bias);
      break;
    case FusionVariant::kSigmoidGate:
      ps.add(prefix + "alpha", Mat(1, 1, mode.alpha));
      break;
    case FusionVariant::kSoftmaxGate:
      ps.add(prefix + "logits", Mat::from_rows({{mode.logits[0], mode.logits[1]}}));
      break;
  }
  return ps;
}

}  // namespace

VideoTokens fuse(const VideoTokens& e_local, const VideoTokens& e_global,
                 const FusionMode& mode) {
  if (!e_local.same_shape(e_global)) {
    throw DimensionError("fuse: branch shapes differ " +
                         shape_str(e_local.tokens.rows(), e_local.tokens.cols()) + " vs " +
                         shape_str(e_global.tokens.rows(), e_global.tokens.cols()));
  }
  ParamSet ps = fusion_param_set(mode, "");
  ParamBinder binder(ps, false);
  Var e = graph::fuse(binder, "", mode.variant, Var::constant(e_local.tokens),
                      Var::constant(e_global.tokens));
  return VideoTokens(e_local.T, e_local.N, e.value());
}

void init_fusion_params(FusionVariant v, std::size_t D, const std::string& prefix,
                        std::uint64_t seed, ParamSet& out) {
  switch (v) {
    case FusionVariant::kConcatMlp: {
      CounterRng rng = CounterRng::derive(seed, prefix + "w");
      out.add(prefix + "w", kaiming_uniform(2 * D, D, rng));
      out.add(prefix + "b", Mat(1, D));
      break;
    }
    case FusionVariant::kSigmoidGate:
      out.add(prefix + "alpha", Mat(1, 1, 0.0));
      break;
    case FusionVariant::kSoftmaxGate:
      out.add(prefix + "logits", default_gate_logits());
      break;
  }
}

// ---- config ----------------------------------------------------------------------

void BlockConfig::validate() const {
  if (D == 0) throw ConfigError("D must be positive", "D");
  if (N == 0) throw ConfigError("N must be positive", "N");
  if (freq_dim == 0 || freq_dim % 2) throw ConfigError("freq_dim must be even", "freq_dim");
  if (uses_matrix()) {
    if (matrix.N != N) throw ConfigError("matrix attention N must equal N", "N");
    if (matrix.D != D) throw ConfigError("matrix attention D must equal D", "D");
    matrix.validate();
  }
}

BlockConfig preset_block_config(const std::string& name) {
  BlockConfig c;
  c.preset = name;
  c.variant = BlockVariant::kHybrid;
  c.fusion = FusionVariant::kConcatMlp;
  c.depth = 1;
  if (name == "p128") {
    c.N = 64;
    c.D = 128;
    c.matrix.N_qk = 32;
    c.matrix.N_v = 256;
    c.matrix.heads_m = 1;
    c.matrix.heads_n = 32;
  } else if (name == "p256") {
    c.N = 256;
    c.D = 128;
    c.matrix.N_qk = 128;
    c.matrix.N_v = 512;
    c.matrix.heads_m = 1;
    c.matrix.heads_n = 128;
  } else if (name == "toy") {
    c.N = 16;
    c.D = 16;
    c.matrix.N_qk = 4;
    c.matrix.N_v = 16;
    c.matrix.heads_m = 1;
    c.matrix.heads_n = 4;
  } else {
    throw ConfigError("unknown preset '" + name + "' (p128|p256|toy)", "preset");
  }
  c.matrix.N = c.N;
  c.matrix.D = c.D;
  c.matrix.D_qk = c.D;
  c.matrix.D_v = c.D;
  c.matrix.set_all_norms(UNorm::kSoftmax);
  return c;
}

// ---- embeddings ------------------------------------------------------------------

Mat sinusoid_table(std::size_t positions, std::size_t dim) {
  Mat t(positions, dim);
  for (std::size_t p = 0; p < positions; ++p) {
    for (std::size_t i = 0; i < dim; ++i) {
      const double expo = static_cast<double>(2 * (i / 2)) / static_cast<double>(dim);
      const double ang = static_cast<double>(p) / std::pow(10000.0, expo);
      t(p, i) = (i % 2 == 0) ? std::sin(ang) : std::cos(ang);
    }
  }
  return t;
}

Mat positional_embedding(std::size_t T, std::size_t N, std::size_t D) {
  const Mat spatial = sinusoid_table(N, D);
  const Mat temporal = sinusoid_table(T, D);
  Mat pos(T * N, D);
  for (std::size_t t = 0; t < T; ++t)
    for (std::size_t n = 0; n < N; ++n)
      for (std::size_t d = 0; d < D; ++d)
        pos(t * N + n, d) = spatial(n, d) + temporal(t, d);
  return pos;
}

Mat timestep_features(double k, std::size_t dim) {
  const std::size_t half = dim / 2;
  Mat f(1, dim);
  for (std::size_t i = 0; i < half; ++i) {
    const double freq = std::exp(-std::log(10000.0) * static_cast<double>(i) /
                                 static_cast<double>(half));
    f[i] = std::cos(k * freq);
    f[half + i] = std::sin(k * freq);
  }
  return f;
}

// ---- graph -----------------------------------------------------------------------

namespace graph {

Var fuse(ParamBinder& params, const std::string& prefix, FusionVariant variant,
         const Var& e_local, const Var& e_global) {
  if (!e_local.value().same_shape(e_global.value())) {
    throw DimensionError("fuse: branch shapes differ " +
                         shape_str(e_local.rows(), e_local.cols()) + " vs " +
                         shape_str(e_global.rows(), e_global.cols()));
  }
  switch (variant) {
    case FusionVariant::kConcatMlp: {
      flops::Tag tag(FlopCategory::kProj);
      return add_row(matmul(concat_cols({e_local, e_global}), params(prefix + "w")),
                     params(prefix + "b"));
    }
    case FusionVariant::kSigmoidGate: {
      Var w = sigmoid(params(prefix + "alpha"));
      Var w_global = add_scalar(scale(w, -1.0), 1.0);
      return add(mul_scalar(e_local, w), mul_scalar(e_global, w_global));
    }
    case FusionVariant::kSoftmaxGate: {
      Var w = softmax_rows(params(prefix + "logits"));
      return add(mul_scalar(e_local, slice_cols(w, 0, 1)),
                 mul_scalar(e_global, slice_cols(w, 1, 2)));
    }
  }
  return e_local;
}

namespace {

AttentionSpec token_spec(AttentionOp op, const BlockConfig& cfg) {
  AttentionSpec s;
  s.op = op;
  s.D = cfg.D;
  s.D_h = cfg.head_dim();
  return s;
}

Var modulate(const Var& x, const Var& shift, const Var& scl) {
  return add_row(mul_row(layernorm_rows(x), add_scalar(scl, 1.0)), shift);
}

Var mlp(ParamBinder& params, const std::string& prefix, const Var& x) {
  Var h = gelu(add_row(matmul(x, params(prefix + "w1")), params(prefix + "b1")));
  return add_row(matmul(h, params(prefix + "w2")), params(prefix + "b2"));
}

}  // namespace

Var temporal_mix(ParamBinder& params, const std::string& prefix,
                 const BlockConfig& cfg, const Var& x, std::size_t T) {
  const std::size_t N = cfg.N;
  switch (cfg.variant) {
    case BlockVariant::kLocal:
      return token_attention(params, prefix + "temporal.local.",
                             AttentionOp::kLocalTemporal, x, T, N);
    case BlockVariant::kGlobal:
      return matrix_attention(params, prefix + "temporal.matrix.", cfg.matrix, x, T);
    case BlockVariant::kHybrid: {
      Var e_local = token_attention(params, prefix + "temporal.local.",
                                    AttentionOp::kLocalTemporal, x, T, N);
      Var e_global = matrix_attention(params, prefix + "temporal.matrix.", cfg.matrix, x, T);
      return fuse(params, prefix + "fusion.", cfg.fusion, e_local, e_global);
    }
    case BlockVariant::kFull3D:
      return token_attention(params, prefix + "attn3d.", AttentionOp::kFull3D, x, T, N);
  }
  return x;
}

Var block(ParamBinder& params, const std::string& prefix, const BlockConfig& cfg,
          const Var& x_in, const Var& cond, std::size_t T) {
  const std::size_t D = cfg.D;
  if (x_in.cols() != D || x_in.rows() != T * cfg.N) {
    throw ConfigError("block: tokens " + shape_str(x_in.rows(), x_in.cols()) +
                      " do not match config T*N x D = " + shape_str(T * cfg.N, D));
  }
  Var mod = add_row(matmul(silu(cond), params(prefix + "ada.w")), params(prefix + "ada.b"));
  auto chunk = [&](std::size_t j) { return slice_cols(mod, j * D, (j + 1) * D); };

  Var x = x_in;
  std::size_t sub = 0;
  auto residual = [&](auto&& layer) {
    Var h = modulate(x, chunk(3 * sub), chunk(3 * sub + 1));
    x = add(x, mul_row(layer(h), chunk(3 * sub + 2)));
    ++sub;
  };
  if (cfg.variant != BlockVariant::kFull3D) {
    residual([&](const Var& h) {
      return token_attention(params, prefix + "spatial.", AttentionOp::kSpatial, h, T, cfg.N);
    });
  }
  residual([&](const Var& h) { return temporal_mix(params, prefix, cfg, h, T); });
  residual([&](const Var& h) { return mlp(params, prefix + "mlp.", h); });
  return x;
}

Var timestep_embedding(ParamBinder& params, const BlockConfig& cfg, double k) {
  Var f = Var::constant(timestep_features(k, cfg.freq_dim));
  Var h = silu(add_row(matmul(f, params("t_embed.w1")), params("t_embed.b1")));
  return add_row(matmul(h, params("t_embed.w2")), params("t_embed.b2"));
}

}  // namespace graph

// ---- parameters --------------------------------------------------------------------

void init_block_params(const BlockConfig& cfg, const std::string& prefix,
                       std::uint64_t seed, ParamSet& out) {
  const std::size_t D = cfg.D, H = cfg.hidden();
  auto normal = [&](const std::string& name, std::size_t r, std::size_t c) {
    CounterRng rng = CounterRng::derive(seed, prefix + name);
    out.add(prefix + name, rng.normal_mat(r, c, 1.0 / std::sqrt(static_cast<double>(r))));
  };
  out.add(prefix + "ada.w", Mat(D, 3 * cfg.sublayers() * D));
  out.add(prefix + "ada.b", Mat(1, 3 * cfg.sublayers() * D));
  normal("mlp.w1", D, H);
  out.add(prefix + "mlp.b1", Mat(1, H));
  normal("mlp.w2", H, D);
  out.add(prefix + "mlp.b2", Mat(1, D));

  if (cfg.variant == BlockVariant::kFull3D) {
    init_params(graph::token_spec(AttentionOp::kFull3D, cfg), prefix + "attn3d.", seed, out);
    return;
  }
  init_params(graph::token_spec(AttentionOp::kSpatial, cfg), prefix + "spatial.", seed, out);
  if (cfg.variant == BlockVariant::kLocal || cfg.variant == BlockVariant::kHybrid) {
    init_params(graph::token_spec(AttentionOp::kLocalTemporal, cfg),
                prefix + "temporal.local.", seed, out);
  }
  if (cfg.uses_matrix()) {
    AttentionSpec ms;
    ms.op = AttentionOp::kMatrix;
    ms.D = D;
    ms.matrix = cfg.matrix;
    init_params(ms, prefix + "temporal.matrix.", seed, out);
  }
  if (cfg.variant == BlockVariant::kHybrid) {
    init_fusion_params(cfg.fusion, D, prefix + "fusion.", seed, out);
  }
}

FrameDiT::FrameDiT(BlockConfig cfg) : cfg_(std::move(cfg)) { cfg_.validate(); }

ParamSet FrameDiT::init_params(std::uint64_t seed) const {
  const std::size_t D = cfg_.D, F = cfg_.freq_dim;
  ParamSet ps;
  auto normal = [&](const std::string& name, std::size_t r, std::size_t c) {
    CounterRng rng = CounterRng::derive(seed, name);
    ps.add(name, rng.normal_mat(r, c, 1.0 / std::sqrt(static_cast<double>(r))));
  };
  normal("t_embed.w1", F, D);
  ps.add("t_embed.b1", Mat(1, D));
  normal("t_embed.w2", D, D);
  ps.add("t_embed.b2", Mat(1, D));
  normal("embed.w", D, D);
  ps.add("embed.b", Mat(1, D));
  for (std::size_t i = 0; i < cfg_.depth; ++i) {
    init_block_params(cfg_, "blocks." + std::to_string(i) + ".", seed, ps);
  }
  ps.add("final.ada.w", Mat(D, 2 * D));
  ps.add("final.ada.b", Mat(1, 2 * D));
  ps.add("final.w", Mat(D, D));
  ps.add("final.b", Mat(1, D));
  return ps;
}

Var FrameDiT::forward(ParamBinder& params, const Var& z_k, std::size_t T, double k) const {
  const std::size_t D = cfg_.D;
  if (z_k.rows() != T * cfg_.N || z_k.cols() != D) {
    throw ConfigError("model_forward: tokens " + shape_str(z_k.rows(), z_k.cols()) +
                      " do not match config T*N x D = " + shape_str(T * cfg_.N, D));
  }
  Var x = add_row(matmul(z_k, params("embed.w")), params("embed.b"));
  x = add(x, Var::constant(positional_embedding(T, cfg_.N, D)));
  Var c = graph::timestep_embedding(params, cfg_, k);
  for (std::size_t i = 0; i < cfg_.depth; ++i) {
    x = graph::block(params, "blocks." + std::to_string(i) + ".", cfg_, x, c, T);
  }
  Var mod = add_row(matmul(silu(c), params("final.ada.w")), params("final.ada.b"));
  Var h = add_row(mul_row(layernorm_rows(x), add_scalar(slice_cols(mod, D, 2 * D), 1.0)),
                  slice_cols(mod, 0, D));
  return add_row(matmul(h, params("final.w")), params("final.b"));
}

VideoTokens FrameDiT::predict(const ParamSet& params, const VideoTokens& z_k, double k) const {
  ParamBinder binder(params, false);
  Var y = forward(binder, Var::constant(z_k.tokens), z_k.T, k);
  return VideoTokens(z_k.T, z_k.N, y.value());
}

VideoTokens model_forward(const FrameDiT& model, const ParamSet& params,
                          const VideoTokens& z_k, double k) {
  return model.predict(params, z_k, k);
}

VideoTokens framedit_block(const BlockConfig& cfg, const ParamSet& params,
                           const std::string& prefix, const VideoTokens& z,
                           const Mat& cond) {
  cfg.validate();
  ParamBinder binder(params, false);
  Var y = graph::block(binder, prefix, cfg, Var::constant(z.tokens), Var::constant(cond), z.T);
  return VideoTokens(z.T, z.N, y.value());
}

VideoTokens framedit_g_block(const BlockConfig& cfg, const ParamSet& params,
                             const std::string& prefix, const VideoTokens& z,
                             const Mat& cond) {
  if (cfg.variant != BlockVariant::kGlobal) {
    throw ConfigError("framedit_g_block requires variant=global", "variant");
  }
  return framedit_block(cfg, params, prefix, z, cond);
}

VideoTokens framedit_h_block(const BlockConfig& cfg, const ParamSet& params,
                             const std::string& prefix, const VideoTokens& z,
                             const Mat& cond) {
  if (cfg.variant != BlockVariant::kHybrid) {
    throw ConfigError("framedit_h_block requires variant=hybrid", "variant");
  }
  return framedit_block(cfg, params, prefix, z, cond);
}

// ---- gate pathology --------------------------------------------------------------

double gate_gradient_ratio(const std::vector<std::pair<VideoTokens, VideoTokens>>& batch,
                           const BlockConfig& cfg_in, const GateRatioOptions& opts) {
  BlockConfig cfg = cfg_in;
  cfg.variant = BlockVariant::kHybrid;
  cfg.validate();
  const std::string prefix = "t.";
  const std::string global_prefix = prefix + "temporal.matrix.";

  auto global_grad_norm = [&](FusionVariant fusion) {
    BlockConfig c = cfg;
    c.fusion = fusion;
    ParamSet ps;
    init_block_params(c, prefix, opts.seed, ps);
    if (fusion == FusionVariant::kSoftmaxGate && opts.softmax_logits) {
      ps.set(prefix + "fusion.logits", *opts.softmax_logits);
    }
    if (fusion == FusionVariant::kConcatMlp && opts.concat_weight) {
      ps.set(prefix + "fusion.w", *opts.concat_weight);
    }
    ParamSet total = ps.zeros_like();
    for (const auto& [x, target] : batch) {
      ParamBinder binder(ps, true);
      Var e = graph::temporal_mix(binder, prefix, c, Var::constant(x.tokens), x.T);
      Var loss = scale(mse(e, target.tokens), opts.loss_scale);
      backward(loss);
      binder.accumulate_grads(total);
    }
    return global_norm(total.subset(global_prefix));
  };

  const double soft = global_grad_norm(FusionVariant::kSoftmaxGate);
  const double concat = global_grad_norm(FusionVariant::kConcatMlp);
  if (soft == 0.0 && concat == 0.0) return 1.0;
  return soft / concat;
}

}  // namespace mattn
