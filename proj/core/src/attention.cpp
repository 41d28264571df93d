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

#include "mattn/attention.hpp"

#include <cmath>
#include <memory>

namespace mattn {

std::string to_string(UNorm u) {
  switch (u) {
    case UNorm::kNone: return "none";
    case UNorm::kSoftmax: return "softmax";
    case UNorm::kL1: return "l1";
    case UNorm::kL2: return "l2";
  }
  return "none";
}

UNorm parse_unorm(const std::string& s) {
  if (s == "none") return UNorm::kNone;
  if (s == "softmax") return UNorm::kSoftmax;
  if (s == "l1") return UNorm::kL1;
  if (s == "l2") return UNorm::kL2;
  throw ConfigError("u_norm must be one of none|softmax|l1|l2, got '" + s + "'", "u_norm");
}

std::string to_string(AttentionOp op) {
  switch (op) {
    case AttentionOp::kSpatial: return "spatial";
    case AttentionOp::kLocalTemporal: return "local_temporal";
    case AttentionOp::kFull3D: return "full3d";
    case AttentionOp::kMatrix: return "matrix";
  }
  return "?";
}

void MatrixAttnConfig::validate() const {
  auto positive = [](std::size_t v, const char* key) {
    if (v == 0) throw ConfigError(std::string(key) + " must be positive", key);
  };
  positive(N, "N");
  positive(D, "D");
  positive(N_qk, "N_qk");
  positive(D_qk, "D_qk");
  positive(N_v, "N_v");
  positive(D_v, "D_v");
  positive(heads_m, "heads_m");
  positive(heads_n, "heads_n");
  if (N_qk % heads_m != 0)
    throw ConfigError("heads_m=" + std::to_string(heads_m) + " does not divide N_qk=" +
                          std::to_string(N_qk), "heads_m");
  if (N_v % heads_m != 0)
    throw ConfigError("heads_m=" + std::to_string(heads_m) + " does not divide N_v=" +
                          std::to_string(N_v), "heads_m");
  if (D_qk % heads_n != 0)
    throw ConfigError("heads_n=" + std::to_string(heads_n) + " does not divide D_qk=" +
                          std::to_string(D_qk), "heads_n");
  if (D_v % heads_n != 0)
    throw ConfigError("heads_n=" + std::to_string(heads_n) + " does not divide D_v=" +
                          std::to_string(D_v), "heads_n");
}

// ---- parameters ----------------------------------------------------------------

namespace {

double fan_in_std(std::size_t fan_in) { return 1.0 / std::sqrt(static_cast<double>(fan_in)); }

MatrixLinear init_linear(std::size_t n_in, std::size_t d_in, std::size_t n_out,
                         std::size_t d_out, UNorm norm, CounterRng& rng) {
  MatrixLinear p;
  p.U = rng.normal_mat(n_in, n_out, fan_in_std(n_in));
  p.W = rng.normal_mat(d_in, d_out, fan_in_std(d_in));
  p.B = Mat(n_out, d_out);
  p.u_norm = norm;
  return p;
}

void export_linear(const MatrixLinear& p, const std::string& prefix, ParamSet& out) {
  out.add(prefix + "U", p.U);
  out.add(prefix + "W", p.W);
  out.add(prefix + "B", p.B);
}

}  // namespace

AttnParams init_attention(std::size_t D, std::size_t D_h, CounterRng& rng) {
  AttnParams p;
  p.W_q = rng.normal_mat(D, D_h, fan_in_std(D));
  p.W_k = rng.normal_mat(D, D_h, fan_in_std(D));
  p.W_v = rng.normal_mat(D, D_h, fan_in_std(D));
  p.W_o = rng.normal_mat(D_h, D, fan_in_std(D_h));
  return p;
}

MatrixAttnParams init_matrix_attention(const MatrixAttnConfig& c, CounterRng& rng) {
  c.validate();
  MatrixAttnParams p;
  p.proj_q = init_linear(c.N, c.D, c.N_qk, c.D_qk, c.norm_q, rng);
  p.proj_k = init_linear(c.N, c.D, c.N_qk, c.D_qk, c.norm_k, rng);
  p.proj_v = init_linear(c.N, c.D, c.N_v, c.D_v, c.norm_v, rng);
  p.proj_o = init_linear(c.N_v, c.D_v, c.N, c.D, c.norm_o, rng);
  p.heads_m = c.heads_m;
  p.heads_n = c.heads_n;
  return p;
}

MatrixAttnConfig config_of(const MatrixAttnParams& p) {
  MatrixAttnConfig c;
  c.N = p.proj_q.U.rows();
  c.D = p.proj_q.W.rows();
  c.N_qk = p.proj_q.U.cols();
  c.D_qk = p.proj_q.W.cols();
  c.N_v = p.proj_v.U.cols();
  c.D_v = p.proj_v.W.cols();
  c.heads_m = p.heads_m;
  c.heads_n = p.heads_n;
  c.norm_q = p.proj_q.u_norm;
  c.norm_k = p.proj_k.u_norm;
  c.norm_v = p.proj_v.u_norm;
  c.norm_o = p.proj_o.u_norm;
  if (p.proj_k.U.rows() != c.N || p.proj_k.U.cols() != c.N_qk ||
      p.proj_k.W.cols() != c.D_qk || p.proj_o.U.rows() != c.N_v ||
      p.proj_o.U.cols() != c.N || p.proj_o.W.rows() != c.D_v || p.proj_o.W.cols() != c.D) {
    throw DimensionError("MatrixAttnParams: inconsistent projection shapes");
  }
  return c;
}

void export_params(const AttnParams& p, const std::string& prefix, ParamSet& out) {
  out.add(prefix + "wq", p.W_q);
  out.add(prefix + "wk", p.W_k);
  out.add(prefix + "wv", p.W_v);
  out.add(prefix + "wo", p.W_o);
}

void export_params(const MatrixAttnParams& p, const std::string& prefix, ParamSet& out) {
  export_linear(p.proj_q, prefix + "q.", out);
  export_linear(p.proj_k, prefix + "k.", out);
  export_linear(p.proj_v, prefix + "v.", out);
  export_linear(p.proj_o, prefix + "o.", out);
}

void init_params(const AttentionSpec& spec, const std::string& prefix,
                 std::uint64_t seed, ParamSet& out) {
  auto normal = [&](const std::string& name, std::size_t r, std::size_t c, double sd) {
    CounterRng rng = CounterRng::derive(seed, prefix + name);
    out.add(prefix + name, rng.normal_mat(r, c, sd));
  };
  if (spec.op != AttentionOp::kMatrix) {
    normal("wq", spec.D, spec.D_h, fan_in_std(spec.D));
    normal("wk", spec.D, spec.D_h, fan_in_std(spec.D));
    normal("wv", spec.D, spec.D_h, fan_in_std(spec.D));
    normal("wo", spec.D_h, spec.D, fan_in_std(spec.D_h));
    return;
  }
  const MatrixAttnConfig& c = spec.matrix;
  c.validate();
  auto linear = [&](const std::string& p, std::size_t n_in, std::size_t d_in,
                    std::size_t n_out, std::size_t d_out) {
    normal(p + "U", n_in, n_out, fan_in_std(n_in));
    normal(p + "W", d_in, d_out, fan_in_std(d_in));
    out.add(prefix + p + "B", Mat(n_out, d_out));
  };
  linear("q.", c.N, c.D, c.N_qk, c.D_qk);
  linear("k.", c.N, c.D, c.N_qk, c.D_qk);
  linear("v.", c.N, c.D, c.N_v, c.D_v);
  linear("o.", c.N_v, c.D_v, c.N, c.D);
}

// ---- graph -----------------------------------------------------------------------

namespace graph {

Var normalize_row_weights(const Var& U, UNorm mode) {
  switch (mode) {
    case UNorm::kNone: return U;
    case UNorm::kSoftmax: return softmax_cols(U);
    case UNorm::kL1: return normalize_cols_l1(U);
    case UNorm::kL2: return normalize_cols_l2(U);
  }
  return U;
}

Var project_frames(const Var& z, std::size_t T, const Var& U, const Var& W,
                   const Var& B, UNorm norm) {
  const std::size_t n = U.rows(), n_out = U.cols();
  const std::size_t d = W.rows(), d_out = W.cols();
  if (z.rows() != T * n || z.cols() != d || B.rows() != n_out || B.cols() != d_out) {
    throw DimensionError("project_frames: z " + shape_str(z.rows(), z.cols()) +
                         " (T=" + std::to_string(T) + "), U " + shape_str(n, n_out) +
                         ", W " + shape_str(d, d_out) + ", B " +
                         shape_str(B.rows(), B.cols()));
  }
  Var u_hat = normalize_row_weights(U, norm);
  // Contract the cheaper side first: U-first costs n_out*(n*d + d*d_out),
  // W-first costs n*d*d_out + n_out*n*d_out (per frame, times 2).
  const std::size_t cost_u = n_out * (n * d + d * d_out);
  const std::size_t cost_w = n * d * d_out + n_out * n * d_out;
  Var y;
  if (cost_u <= cost_w) {
    y = matmul(frame_left_mul_t(u_hat, z, T), W);
  } else {
    y = frame_left_mul_t(u_hat, matmul(z, W), T);
  }
  return add_tiled(y, B);
}

Var frame_similarity(const Var& q_flat, const Var& k_flat, double scale) {
  Var s = bmm_nt(q_flat, k_flat, 1);
  return scale == 1.0 ? s : mattn::scale(s, scale);
}

namespace {

using Index = std::shared_ptr<const std::vector<std::size_t>>;

// Flat indices of head block (i, j) for each of T frames of an R x C stack,
// each block flattened row-major into one row of the T x (R/m * C/n) output.
Index head_index(std::size_t T, std::size_t R, std::size_t C, std::size_t m,
                 std::size_t n, std::size_t i, std::size_t j) {
  const std::size_t hr = R / m, hc = C / n;
  auto idx = std::make_shared<std::vector<std::size_t>>();
  idx->reserve(T * hr * hc);
  for (std::size_t t = 0; t < T; ++t)
    for (std::size_t r = 0; r < hr; ++r)
      for (std::size_t c = 0; c < hc; ++c)
        idx->push_back((t * R + i * hr + r) * C + j * hc + c);
  return idx;
}

// Inverse layout: from T x (m*n*hr*hc) (heads concatenated in row-major head
// order) back to the (T*R) x C stack.
Index assemble_index(std::size_t T, std::size_t R, std::size_t C, std::size_t m,
                     std::size_t n) {
  const std::size_t hr = R / m, hc = C / n, hsz = hr * hc, width = m * n * hsz;
  auto idx = std::make_shared<std::vector<std::size_t>>();
  idx->reserve(T * R * C);
  for (std::size_t t = 0; t < T; ++t)
    for (std::size_t r = 0; r < R; ++r)
      for (std::size_t c = 0; c < C; ++c) {
        const std::size_t h = (r / hr) * n + c / hc;
        idx->push_back(t * width + h * hsz + (r % hr) * hc + (c % hc));
      }
  return idx;
}

// Row permutation (t, n) -> (n, t) over a (T*N) x C stack, and its inverse.
Index transpose_rows_index(std::size_t T, std::size_t N, std::size_t C) {
  auto idx = std::make_shared<std::vector<std::size_t>>();
  idx->reserve(T * N * C);
  for (std::size_t n = 0; n < N; ++n)
    for (std::size_t t = 0; t < T; ++t)
      for (std::size_t c = 0; c < C; ++c) idx->push_back((t * N + n) * C + c);
  return idx;
}

}  // namespace

Var matrix_attention(ParamBinder& params, const std::string& prefix,
                     const MatrixAttnConfig& cfg, const Var& z, std::size_t T) {
  cfg.validate();
  if (z.rows() != T * cfg.N || z.cols() != cfg.D) {
    throw DimensionError("matrix_attention: input " + shape_str(z.rows(), z.cols()) +
                         " vs T*N x D = " + shape_str(T * cfg.N, cfg.D));
  }
  Var q, k, v;
  {
    flops::Tag tag(FlopCategory::kProj);
    q = project_frames(z, T, params(prefix + "q.U"), params(prefix + "q.W"),
                       params(prefix + "q.B"), cfg.norm_q);
    k = project_frames(z, T, params(prefix + "k.U"), params(prefix + "k.W"),
                       params(prefix + "k.B"), cfg.norm_k);
    v = project_frames(z, T, params(prefix + "v.U"), params(prefix + "v.W"),
                       params(prefix + "v.B"), cfg.norm_v);
  }
  const std::size_t m = cfg.heads_m, n = cfg.heads_n;
  const std::size_t hq = (cfg.N_qk / m) * (cfg.D_qk / n);
  const std::size_t hv = (cfg.N_v / m) * (cfg.D_v / n);
  const double head_scale =
      cfg.mode.scaled ? 1.0 / std::sqrt(static_cast<double>(hq)) : 1.0;

  std::vector<Var> heads;
  heads.reserve(m * n);
  {
    flops::Tag tag(FlopCategory::kTemporal);
    for (std::size_t i = 0; i < m; ++i) {
      for (std::size_t j = 0; j < n; ++j) {
        Var qh = gather(q, T, hq, head_index(T, cfg.N_qk, cfg.D_qk, m, n, i, j));
        Var kh = gather(k, T, hq, head_index(T, cfg.N_qk, cfg.D_qk, m, n, i, j));
        Var vh = gather(v, T, hv, head_index(T, cfg.N_v, cfg.D_v, m, n, i, j));
        Var s = frame_similarity(qh, kh, head_scale);
        Var w = cfg.mode.softmax ? softmax_rows(s) : s;
        heads.push_back(bmm(w, vh, 1));
      }
    }
  }
  Var u = m * n == 1 ? heads.front() : concat_cols(heads);
  u = gather(u, T * cfg.N_v, cfg.D_v, assemble_index(T, cfg.N_v, cfg.D_v, m, n));
  flops::Tag tag(FlopCategory::kProj);
  return project_frames(u, T, params(prefix + "o.U"), params(prefix + "o.W"),
                        params(prefix + "o.B"), cfg.norm_o);
}

Var token_attention(ParamBinder& params, const std::string& prefix,
                    AttentionOp op, const Var& x, std::size_t T, std::size_t N,
                    AttentionMode mode) {
  if (op == AttentionOp::kMatrix) {
    throw ConfigError("token_attention: Matrix Attention has its own entry point");
  }
  if (x.rows() != T * N) {
    throw DimensionError("token_attention: input " + shape_str(x.rows(), x.cols()) +
                         " vs T*N = " + std::to_string(T * N));
  }
  const std::size_t C = x.cols();
  const bool temporal = op == AttentionOp::kLocalTemporal && N > 1 && T > 1;
  Var xs = temporal ? gather(x, T * N, C, transpose_rows_index(T, N, C)) : x;
  std::size_t batch = T;
  if (op == AttentionOp::kLocalTemporal) batch = N;
  if (op == AttentionOp::kFull3D) batch = 1;

  Var wq = params(prefix + "wq"), wk = params(prefix + "wk");
  Var wv = params(prefix + "wv"), wo = params(prefix + "wo");
  if (wq.rows() != C) {
    throw DimensionError("token_attention: W_q " + shape_str(wq.rows(), wq.cols()) +
                         " vs feature dim " + std::to_string(C));
  }
  Var q, k, v;
  {
    flops::Tag tag(FlopCategory::kProj);
    q = matmul(xs, wq);
    k = matmul(xs, wk);
    v = matmul(xs, wv);
  }
  Var o;
  {
    flops::Tag tag(op == AttentionOp::kSpatial ? FlopCategory::kSpatial
                                               : FlopCategory::kTemporal);
    Var s = bmm_nt(q, k, batch);
    if (mode.scaled) s = scale(s, 1.0 / std::sqrt(static_cast<double>(wq.cols())));
    Var w = mode.softmax ? softmax_rows(s) : s;
    o = bmm(w, v, batch);
  }
  Var y;
  {
    flops::Tag tag(FlopCategory::kProj);
    y = matmul(o, wo);
  }
  return temporal ? gather(y, T * N, C, transpose_rows_index(N, T, C)) : y;
}

Var apply(const AttentionSpec& spec, ParamBinder& params, const std::string& prefix,
          const Var& z, std::size_t T, std::size_t N) {
  if (spec.op == AttentionOp::kMatrix) {
    return matrix_attention(params, prefix, spec.matrix, z, T);
  }
  return token_attention(params, prefix, spec.op, z, T, N, spec.mode);
}

}  // namespace graph

// ---- value API ---------------------------------------------------------------------

Mat normalize_row_weights(const Mat& U, UNorm mode) {
  return graph::normalize_row_weights(Var::constant(U), mode).value();
}

Mat project_frame(const Mat& z_t, const MatrixLinear& p) {
  return graph::project_frames(Var::constant(z_t), 1, Var::constant(p.U),
                               Var::constant(p.W), Var::constant(p.B), p.u_norm)
      .value();
}

FrameSimilarity frame_similarity(std::span<const Mat> q, std::span<const Mat> k) {
  if (q.empty() || q.size() != k.size()) {
    throw DimensionError("frame_similarity: " + std::to_string(q.size()) +
                         " query frames vs " + std::to_string(k.size()) + " key frames");
  }
  const std::size_t r = q[0].rows(), c = q[0].cols();
  for (std::size_t t = 0; t < q.size(); ++t) {
    if (q[t].rows() != r || q[t].cols() != c || k[t].rows() != r || k[t].cols() != c) {
      throw DimensionError("frame_similarity: frame " + std::to_string(t) + " shape " +
                           shape_str(q[t].rows(), q[t].cols()) + " / " +
                           shape_str(k[t].rows(), k[t].cols()) + " vs " + shape_str(r, c));
    }
  }
  const std::size_t T = q.size();
  Mat qf = concat_rows(q).reshaped(T, r * c);
  Mat kf = concat_rows(k).reshaped(T, r * c);
  const double s = 1.0 / std::sqrt(static_cast<double>(r * c));
  return {graph::frame_similarity(Var::constant(std::move(qf)),
                                  Var::constant(std::move(kf)), s)
              .value()};
}

VideoTokens attention_forward(const AttentionSpec& spec, const ParamSet& params,
                              const std::string& prefix, const VideoTokens& z) {
  ParamBinder binder(params, false);
  Var y = graph::apply(spec, binder, prefix, Var::constant(z.tokens), z.T, z.N);
  return VideoTokens(z.T, z.N, y.value());
}

AttentionGrads attention_backward(const AttentionSpec& spec, const ParamSet& params,
                                  const std::string& prefix, const VideoTokens& z,
                                  const Mat& upstream) {
  ParamBinder binder(params, true);
  Var zin = Var::leaf(z.tokens);
  Var y = graph::apply(spec, binder, prefix, zin, z.T, z.N);
  backward(y, upstream);
  AttentionGrads g;
  g.dz = zin.grad().empty() ? Mat(z.tokens.rows(), z.tokens.cols()) : zin.grad();
  g.dparams = binder.grads().subset(prefix);
  return g;
}

namespace {

AttentionSpec matrix_spec(const MatrixAttnParams& p) {
  AttentionSpec s;
  s.op = AttentionOp::kMatrix;
  s.matrix = config_of(p);
  s.D = s.matrix.D;
  return s;
}

VideoTokens token_forward(AttentionOp op, const VideoTokens& z, const AttnParams& p) {
  ParamSet ps;
  export_params(p, "", ps);
  AttentionSpec s;
  s.op = op;
  s.D = z.D;
  s.D_h = p.W_q.cols();
  return attention_forward(s, ps, "", z);
}

}  // namespace

VideoTokens matrix_attention(const VideoTokens& z, const MatrixAttnParams& p) {
  ParamSet ps;
  export_params(p, "", ps);
  AttentionSpec s = matrix_spec(p);
  if (z.N != s.matrix.N || z.D != s.matrix.D) {
    throw DimensionError("matrix_attention: tokens (N=" + std::to_string(z.N) + ", D=" +
                         std::to_string(z.D) + ") vs params (N=" +
                         std::to_string(s.matrix.N) + ", D=" + std::to_string(s.matrix.D) + ")");
  }
  return attention_forward(s, ps, "", z);
}

VideoTokens spatial_attention(const VideoTokens& z, const SpatialParams& p) {
  return token_forward(AttentionOp::kSpatial, z, p);
}

VideoTokens local_temporal_attention(const VideoTokens& z, const LocalTemporalParams& p) {
  return token_forward(AttentionOp::kLocalTemporal, z, p);
}

VideoTokens full3d_attention(const VideoTokens& z, const Full3DParams& p) {
  return token_forward(AttentionOp::kFull3D, z, p);
}

}  // namespace mattn
