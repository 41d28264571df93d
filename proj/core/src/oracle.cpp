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

#include "mattn/oracle.hpp"

#include <cmath>

#include "mattn/errors.hpp"
#include "mattn/rng.hpp"

namespace mattn {

DenseAttentionMap build_spatial_blockdiag(std::span<const Mat> S) {
  if (S.empty()) throw DimensionError("build_spatial_blockdiag: need T >= 1 maps");
  const std::size_t N = S[0].rows();
  for (const auto& s : S) {
    if (s.rows() != N || s.cols() != N) {
      throw DimensionError("build_spatial_blockdiag: map " + shape_str(s.rows(), s.cols()) +
                           " vs " + shape_str(N, N));
    }
  }
  return {S.size(), N, block_diag(S)};
}

DenseAttentionMap build_local_temporal_map(std::span<const Mat> H) {
  if (H.empty()) throw DimensionError("build_local_temporal_map: need N >= 1 maps");
  const std::size_t T = H[0].rows(), N = H.size();
  Mat A(T * N, T * N);
  for (std::size_t n = 0; n < N; ++n) {
    if (H[n].rows() != T || H[n].cols() != T) {
      throw DimensionError("build_local_temporal_map: map " +
                           shape_str(H[n].rows(), H[n].cols()) + " vs " + shape_str(T, T));
    }
    for (std::size_t t = 0; t < T; ++t)
      for (std::size_t u = 0; u < T; ++u) A(t * N + n, u * N + n) = H[n](t, u);
  }
  return {T, N, A};
}

OracleCheck bottleneck_identity_check(const DenseAttentionMap& H, const DenseAttentionMap& S,
                                      double tol) {
  if (H.T != S.T || H.N != S.N) {
    throw DimensionError("bottleneck_identity_check: map layouts differ");
  }
  const std::size_t T = H.T, N = H.N;
  const Mat HS = matmul(H.A, S.A);
  OracleCheck res;
  for (std::size_t t = 0; t < T; ++t)
    for (std::size_t n = 0; n < N; ++n)
      for (std::size_t u = 0; u < T; ++u)
        for (std::size_t m = 0; m < N; ++m) {
          const double via = H.A(t * N + n, u * N + n) * S.A(u * N + n, u * N + m);
          const double dev = std::abs(HS(t * N + n, u * N + m) - via);
          if (!(dev <= res.max_dev)) res.max_dev = std::isnan(dev) ? INFINITY : dev;
        }
  res.pass = res.max_dev <= tol;
  return res;
}

Mat lift(const Mat& U, std::size_t T) { return kron(Mat::identity(T), U); }

Mat lifted_matrix_map(const Mat& U_q, const Mat& U_k, const Mat& U_v, const Mat& G,
                      std::size_t T) {
  if (U_k.cols() != U_v.cols()) {
    throw ConfigError("matrix map expansion needs N_qk == N_v: U_k " +
                          shape_str(U_k.rows(), U_k.cols()) + ", U_v " +
                          shape_str(U_v.rows(), U_v.cols()),
                      "N_v");
  }
  const std::size_t TN = T * U_q.rows();
  if (G.rows() != TN || G.cols() != TN || U_k.rows() != U_q.rows() ||
      U_v.rows() != U_q.rows()) {
    throw ConfigError("matrix map expansion: G " + shape_str(G.rows(), G.cols()) +
                          " vs lifted U_q " + shape_str(TN, T * U_q.cols()),
                      "N");
  }
  const Mat M = matmul(matmul_tn(lift(U_q, T), G), lift(U_k, T));
  return matmul_nt(M, lift(U_v, T));
}

OracleCheck matrix_map_expansion_check(const Mat& U_q, const Mat& U_k, const Mat& U_v,
                                       const Mat& G, const DenseAttentionMap& S, double tol) {
  const std::size_t T = S.T, N = S.N;
  const Mat Hp = lifted_matrix_map(U_q, U_k, U_v, G, T);
  const Mat A = matmul(Hp, S.A);
  OracleCheck res;
  for (std::size_t r = 0; r < Hp.rows(); ++r)
    for (std::size_t u = 0; u < T; ++u)
      for (std::size_t m = 0; m < N; ++m) {
        double acc = 0.0;
        for (std::size_t j = 0; j < N; ++j) acc += Hp(r, u * N + j) * S.A(u * N + j, u * N + m);
        const double dev = std::abs(A(r, u * N + m) - acc);
        if (!(dev <= res.max_dev)) res.max_dev = std::isnan(dev) ? INFINITY : dev;
      }
  res.pass = res.max_dev <= tol;
  return res;
}

DualPathParams random_dual_path_params(std::size_t N, std::size_t D, std::size_t N_qk,
                                       std::size_t N_v, std::uint64_t seed) {
  CounterRng rng(seed);
  DualPathParams p;
  p.spatial = init_attention(D, D, rng);
  MatrixAttnConfig c;
  c.N = N;
  c.D = D;
  c.N_qk = N_qk;
  c.D_qk = D;
  c.N_v = N_v;
  c.D_v = D;
  p.matrix = init_matrix_attention(c, rng);
  return p;
}

namespace {

MatrixAttnConfig linearized(const MatrixAttnParams& m) {
  MatrixAttnConfig c = config_of(m);
  c.mode.softmax = false;
  c.mode.scaled = false;
  c.set_all_norms(UNorm::kNone);
  return c;
}

void require_linear(const MatrixAttnParams& m) {
  for (const MatrixLinear* l : {&m.proj_q, &m.proj_k, &m.proj_v, &m.proj_o}) {
    if (max_abs(l->B) != 0.0) throw ConfigError("dual path needs zero biases", "B");
  }
  if (m.heads_m != 1 || m.heads_n != 1) {
    throw ConfigError("dual path needs a single head", "heads_n");
  }
}

// Per-frame linear spatial maps S_t = (z_t W_q')(z_t W_k')^T.
DenseAttentionMap spatial_map(const VideoTokens& z, const AttnParams& p) {
  std::vector<Mat> S;
  for (std::size_t t = 0; t < z.T; ++t) {
    const Mat zt = z.frame(t);
    S.push_back(matmul_nt(matmul(zt, p.W_q), matmul(zt, p.W_k)));
  }
  return build_spatial_blockdiag(S);
}

// C[t,t'] = trace of block (t,t') of M, blocks of size n x n.
Mat block_traces(const Mat& M, std::size_t T, std::size_t n) {
  Mat C(T, T);
  for (std::size_t t = 0; t < T; ++t)
    for (std::size_t u = 0; u < T; ++u)
      for (std::size_t i = 0; i < n; ++i) C(t, u) += M(t * n + i, u * n + i);
  return C;
}

}  // namespace

DualPathResult dual_path_equivalence(const VideoTokens& z, const DualPathParams& p) {
  require_linear(p.matrix);
  const MatrixAttnParams& m = p.matrix;
  const std::size_t T = z.T, N = z.N;

  // Modular pipeline through the graph implementation.
  ParamSet ps;
  export_params(p.spatial, "s.", ps);
  export_params(m, "m.", ps);
  ParamBinder binder(ps, false);
  const AttentionMode lin{false, false};
  Var x = graph::token_attention(binder, "s.", AttentionOp::kSpatial,
                                 Var::constant(z.tokens), T, N, lin);
  Var y = graph::matrix_attention(binder, "m.", linearized(m), x, T);

  // Dense pipeline.
  const DenseAttentionMap S = spatial_map(z, p.spatial);
  const Mat Wv_sp = matmul(p.spatial.W_v, p.spatial.W_o);
  const Mat xd = matmul(matmul(S.A, z.tokens), Wv_sp);
  const Mat G = matmul_nt(matmul(xd, m.proj_q.W), matmul(xd, m.proj_k.W));
  const Mat M = matmul(matmul_tn(lift(m.proj_q.U, T), G), lift(m.proj_k.U, T));
  const Mat C = block_traces(M, T, m.proj_q.U.cols());
  const Mat Hp = kron(C, transpose(matmul(m.proj_v.U, m.proj_o.U)));
  const Mat A_mat = matmul(Hp, S.A);
  const Mat W_all = matmul(matmul(Wv_sp, m.proj_v.W), m.proj_o.W);

  DualPathResult r;
  r.modular = y.value();
  r.oracle = matmul(matmul(A_mat, z.tokens), W_all);
  r.max_dev = max_abs_diff(r.modular, r.oracle);
  return r;
}

Mat shared_gram_local_path(const VideoTokens& z, const DualPathParams& p) {
  require_linear(p.matrix);
  const MatrixAttnParams& m = p.matrix;
  const std::size_t T = z.T, N = z.N;
  const DenseAttentionMap S = spatial_map(z, p.spatial);
  const Mat Wv_sp = matmul(p.spatial.W_v, p.spatial.W_o);
  const Mat xd = matmul(matmul(S.A, z.tokens), Wv_sp);
  const Mat G = matmul_nt(matmul(xd, m.proj_q.W), matmul(xd, m.proj_k.W));
  const Mat C = block_traces(G, T, N);
  const std::vector<Mat> H(N, C);
  const DenseAttentionMap Hd = build_local_temporal_map(H);
  const Mat A_fact = matmul(Hd.A, S.A);
  return matmul(matmul(A_fact, z.tokens), matmul(matmul(Wv_sp, m.proj_v.W), m.proj_o.W));
}

}  // namespace mattn
