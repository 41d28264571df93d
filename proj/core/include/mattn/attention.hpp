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

#ifndef MATTN_ATTENTION_HPP_
#define MATTN_ATTENTION_HPP_

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "mattn/autograd.hpp"
#include "mattn/rng.hpp"
#include "mattn/tensor.hpp"

namespace mattn {

// Normalization of a row-weight matrix U along its token (row) axis.
enum class UNorm { kNone, kSoftmax, kL1, kL2 };
std::string to_string(UNorm u);
UNorm parse_unorm(const std::string& s);

// Linearized evaluation drops softmax and/or the 1/sqrt(d) scale.
struct AttentionMode {
  bool softmax = true;
  bool scaled = true;
};

// One (U, W, B) triple: frame z_t (N x D) -> Uhat^T z_t W + B.
struct MatrixLinear {
  Mat U;  // N x N_out
  Mat W;  // D x D_out
  Mat B;  // N_out x D_out
  UNorm u_norm = UNorm::kNone;
};

struct MatrixAttnParams {
  MatrixLinear proj_q, proj_k, proj_v, proj_o;
  std::size_t heads_m = 1;
  std::size_t heads_n = 1;
};

// Projection weights of scaled dot-product attention over tokens:
// W_q, W_k, W_v are D x D_h and W_o is D_h x D.
struct AttnParams {
  Mat W_q, W_k, W_v, W_o;
};
using SpatialParams = AttnParams;
using LocalTemporalParams = AttnParams;
using Full3DParams = AttnParams;

struct FrameSimilarity {
  Mat S;  // T x T
};

// Shapes and options of a Matrix Attention layer.
struct MatrixAttnConfig {
  std::size_t N = 0, D = 0;
  std::size_t N_qk = 0, D_qk = 0;
  std::size_t N_v = 0, D_v = 0;
  std::size_t heads_m = 1, heads_n = 1;
  UNorm norm_q = UNorm::kNone, norm_k = UNorm::kNone;
  UNorm norm_v = UNorm::kNone, norm_o = UNorm::kNone;
  AttentionMode mode;

  // Throws ConfigError naming the offending key.
  void validate() const;
  void set_all_norms(UNorm u) { norm_q = norm_k = norm_v = norm_o = u; }
};

enum class AttentionOp { kSpatial, kLocalTemporal, kFull3D, kMatrix };
std::string to_string(AttentionOp op);

// Describes one attention layer for the generic forward/backward entry points.
struct AttentionSpec {
  AttentionOp op = AttentionOp::kSpatial;
  std::size_t D = 0;
  std::size_t D_h = 0;  // standard attention head width
  MatrixAttnConfig matrix;  // used when op == kMatrix
  AttentionMode mode;       // standard attention only
};

// ---- parameter construction / conversion -----------------------------------

AttnParams init_attention(std::size_t D, std::size_t D_h, CounterRng& rng);
MatrixAttnParams init_matrix_attention(const MatrixAttnConfig& cfg, CounterRng& rng);
MatrixAttnConfig config_of(const MatrixAttnParams& p);

// Parameter names used under a prefix: standard attention "wq","wk","wv","wo";
// Matrix Attention "{q,k,v,o}.{U,W,B}".
void export_params(const AttnParams& p, const std::string& prefix, ParamSet& out);
void export_params(const MatrixAttnParams& p, const std::string& prefix, ParamSet& out);
void init_params(const AttentionSpec& spec, const std::string& prefix,
                 std::uint64_t seed, ParamSet& out);

// ---- value API ---------------------------------------------------------------

Mat normalize_row_weights(const Mat& U, UNorm mode);
Mat project_frame(const Mat& z_t, const MatrixLinear& p);
FrameSimilarity frame_similarity(std::span<const Mat> q, std::span<const Mat> k);

VideoTokens matrix_attention(const VideoTokens& z, const MatrixAttnParams& p);
VideoTokens spatial_attention(const VideoTokens& z, const SpatialParams& p);
VideoTokens local_temporal_attention(const VideoTokens& z, const LocalTemporalParams& p);
VideoTokens full3d_attention(const VideoTokens& z, const Full3DParams& p);

// Generic forward over parameters stored under `prefix` in `params`.
VideoTokens attention_forward(const AttentionSpec& spec, const ParamSet& params,
                              const std::string& prefix, const VideoTokens& z);

struct AttentionGrads {
  Mat dz;            // same shape as z.tokens
  ParamSet dparams;  // same names as the parameters under the prefix
};

// Reverse-mode gradients of <upstream, attention(z)> with respect to z and
// every parameter under `prefix`.
AttentionGrads attention_backward(const AttentionSpec& spec, const ParamSet& params,
                                  const std::string& prefix, const VideoTokens& z,
                                  const Mat& upstream);

// ---- graph API -----------------------------------------------------------------
namespace graph {

Var normalize_row_weights(const Var& U, UNorm mode);

// Frame-wise Uhat^T z_t W + B over a (T*N) x D stack; returns (T*N_out) x D_out.
Var project_frames(const Var& z, std::size_t T, const Var& U, const Var& W,
                   const Var& B, UNorm norm);

// Scaled Frobenius similarity between flattened frames: q, k are T x F.
Var frame_similarity(const Var& q_flat, const Var& k_flat, double scale);

Var matrix_attention(ParamBinder& params, const std::string& prefix,
                     const MatrixAttnConfig& cfg, const Var& z, std::size_t T);

// Scaled dot-product attention over the token grouping given by `op`
// (kSpatial: within each frame; kLocalTemporal: across frames per spatial
// index; kFull3D: all T*N tokens).
Var token_attention(ParamBinder& params, const std::string& prefix,
                    AttentionOp op, const Var& x, std::size_t T, std::size_t N,
                    AttentionMode mode = {});

Var apply(const AttentionSpec& spec, ParamBinder& params, const std::string& prefix,
          const Var& z, std::size_t T, std::size_t N);

}  // namespace graph
}  // namespace mattn

#endif  // MATTN_ATTENTION_HPP_
