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

#ifndef MATTN_ORACLE_HPP_
#define MATTN_ORACLE_HPP_

#include <cstdint>
#include <span>

#include "mattn/attention.hpp"
#include "mattn/tensor.hpp"

namespace mattn {

// Explicit (T*N) x (T*N) attention operator; token (t, n) is index t*N + n.
struct DenseAttentionMap {
  std::size_t T = 0, N = 0;
  Mat A;
};

struct OracleCheck {
  bool pass = false;
  double max_dev = 0.0;
};

// Block-diagonal spatial map from T per-frame N x N maps.
DenseAttentionMap build_spatial_blockdiag(std::span<const Mat> S);
// H[(t,n),(t',n')] = H_n[t,t'] if n == n', else 0, from N per-position T x T maps.
DenseAttentionMap build_local_temporal_map(std::span<const Mat> H);

// Compares the dense product H*S with H[(t,n),(t',n)] * S[(t',n),(t',n')].
OracleCheck bottleneck_identity_check(const DenseAttentionMap& H, const DenseAttentionMap& S,
                                      double tol = 1e-12);

// kron(I_T, U): a per-frame operator applied on the flattened token axis.
Mat lift(const Mat& U, std::size_t T);

// H' = lift(U_q)^T G lift(U_k) lift(U_v)^T. Requires N_qk == N_v.
Mat lifted_matrix_map(const Mat& U_q, const Mat& U_k, const Mat& U_v, const Mat& G,
                      std::size_t T);

// Checks A_mat = H' S against the per-entry sum over the intermediate frame's
// tokens, sum_j H'[(t,i),(t',j)] S[(t',j),(t',n')].
OracleCheck matrix_map_expansion_check(const Mat& U_q, const Mat& U_k, const Mat& U_v,
                                       const Mat& G, const DenseAttentionMap& S,
                                       double tol = 1e-12);

// Parameters of the linearized two-stage pipeline: spatial attention
// (W_q', W_k', W_v', W_o'), then Matrix Attention with zero biases.
struct DualPathParams {
  AttnParams spatial;
  MatrixAttnParams matrix;
};

DualPathParams random_dual_path_params(std::size_t N, std::size_t D, std::size_t N_qk,
                                       std::size_t N_v, std::uint64_t seed);

struct DualPathResult {
  Mat modular;  // (T*N) x D
  Mat oracle;   // same, assembled from dense maps
  double max_dev = 0.0;
};

// (a) modular: linearized spatial attention followed by linearized Matrix
// Attention. (b) dense: A_mat z W_v' W_o' W_v W_o with A_mat = H' S,
// H' = kron(C, (U_v U_o)^T) and C[t,t'] the trace of block (t,t') of
// lift(U_q)^T G lift(U_k), G = x W_q W_k^T x^T.
DualPathResult dual_path_equivalence(const VideoTokens& z, const DualPathParams& p);

// With U = I everywhere: the dense path built from the local temporal map
// whose per-position maps all equal the shared gram C.
Mat shared_gram_local_path(const VideoTokens& z, const DualPathParams& p);

}  // namespace mattn

#endif  // MATTN_ORACLE_HPP_
