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

#include <cmath>

#include <gtest/gtest.h>

#include "mattn/attention.hpp"
#include "mattn/errors.hpp"
#include "mattn/gradcheck.hpp"
#include "test_util.hpp"

namespace mattn {
namespace {

using testing::loop_matrix_attention;
using testing::loop_token_attention;
using testing::random_video;
using testing::small_matrix_config;

MatrixAttnParams random_matrix_params(const MatrixAttnConfig& c, std::uint64_t seed,
                                      bool random_bias = true) {
  CounterRng rng(seed);
  MatrixAttnParams p = init_matrix_attention(c, rng);
  if (random_bias) {
    for (MatrixLinear* l : {&p.proj_q, &p.proj_k, &p.proj_v, &p.proj_o})
      l->B = rng.normal_mat(l->B.rows(), l->B.cols(), 0.5);
  }
  return p;
}

TEST(NormalizeRowWeightsTest, NoneIsIdentity) {
  CounterRng rng(1);
  const Mat U = rng.normal_mat(4, 3);
  EXPECT_EQ(normalize_row_weights(U, UNorm::kNone), U);
}

TEST(NormalizeRowWeightsTest, SoftmaxOfZeroColumnIsUniform) {
  const Mat u = normalize_row_weights(Mat(5, 2), UNorm::kSoftmax);
  for (std::size_t i = 0; i < u.size(); ++i) EXPECT_DOUBLE_EQ(u[i], 0.2);
}

TEST(NormalizeRowWeightsTest, L1Column) {
  const Mat u = normalize_row_weights(Mat::from_rows({{3}, {-1}}), UNorm::kL1);
  EXPECT_DOUBLE_EQ(u[0], 0.75);
  EXPECT_DOUBLE_EQ(u[1], -0.25);
}

TEST(NormalizeRowWeightsTest, L2ColumnAndGuard) {
  const Mat u = normalize_row_weights(Mat::from_rows({{3, 1e-14}, {4, 0}}), UNorm::kL2);
  EXPECT_DOUBLE_EQ(u(0, 0), 0.6);
  EXPECT_DOUBLE_EQ(u(1, 0), 0.8);
  EXPECT_DOUBLE_EQ(u(0, 1), 1e-14);
  const Mat z = normalize_row_weights(Mat(3, 1), UNorm::kL1);
  EXPECT_EQ(z, Mat(3, 1));
}

TEST(ParseUNormTest, RejectsUnknown) {
  EXPECT_EQ(parse_unorm("softmax"), UNorm::kSoftmax);
  try {
    parse_unorm("l3");
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_EQ(e.key(), "u_norm");
  }
}

TEST(ProjectFrameTest, IdentityAndBias) {
  CounterRng rng(2);
  const Mat z = rng.normal_mat(3, 2);
  MatrixLinear p{Mat::identity(3), Mat::identity(2), Mat(3, 2), UNorm::kNone};
  EXPECT_EQ(project_frame(z, p), z);
  p.B = rng.normal_mat(3, 2);
  EXPECT_EQ(project_frame(Mat(3, 2), p), p.B);
}

TEST(ProjectFrameTest, MatchesTripleProductOracle) {
  CounterRng rng(3);
  const Mat z = rng.normal_mat(3, 2);
  MatrixLinear p{rng.normal_mat(3, 2), rng.normal_mat(2, 2), rng.normal_mat(2, 2),
                 UNorm::kNone};
  EXPECT_LE(max_abs_diff(project_frame(z, p), testing::loop_project(z, p.U, p.W, p.B)),
            1e-14);
  EXPECT_THROW(project_frame(rng.normal_mat(4, 2), p), DimensionError);
}

TEST(FrameSimilarityTest, OnesGiveTwo) {
  const std::vector<Mat> q{Mat::ones(2, 2), Mat::ones(2, 2)};
  const FrameSimilarity s = frame_similarity(q, q);
  for (std::size_t i = 0; i < 4; ++i) EXPECT_DOUBLE_EQ(s.S[i], 2.0);
}

TEST(FrameSimilarityTest, ZeroKeysAndSingleFrame) {
  CounterRng rng(4);
  const std::vector<Mat> q{rng.normal_mat(2, 3)};
  const std::vector<Mat> z{Mat(2, 3)};
  EXPECT_EQ(frame_similarity(q, z).S, Mat(1, 1));
  const std::vector<Mat> k{rng.normal_mat(2, 3)};
  EXPECT_NEAR(frame_similarity(q, k).S[0], frobenius(q[0], k[0]) / std::sqrt(6.0), 1e-15);
  const std::vector<Mat> bad{Mat(3, 3)};
  EXPECT_THROW(frame_similarity(q, bad), DimensionError);
}

TEST(FrameSimilarityTest, UsesKeyOfOtherFrame) {
  const std::vector<Mat> q{Mat::ones(1, 1), Mat(1, 1, 2.0)};
  const std::vector<Mat> k{Mat(1, 1, 3.0), Mat(1, 1, 5.0)};
  const Mat s = frame_similarity(q, k).S;
  EXPECT_DOUBLE_EQ(s(0, 1), 5.0);
  EXPECT_DOUBLE_EQ(s(1, 0), 6.0);
}

TEST(FrameSimilarityTest, LinearInQueries) {
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    CounterRng rng(50 + seed);
    std::vector<Mat> a, b, k, ab;
    for (int t = 0; t < 3; ++t) {
      a.push_back(rng.normal_mat(2, 3));
      b.push_back(rng.normal_mat(2, 3));
      k.push_back(rng.normal_mat(2, 3));
      ab.push_back(add(scale(a.back(), 1.5), scale(b.back(), -0.7)));
    }
    const Mat lhs = frame_similarity(ab, k).S;
    const Mat rhs = add(scale(frame_similarity(a, k).S, 1.5),
                        scale(frame_similarity(b, k).S, -0.7));
    EXPECT_LE(max_abs_diff(lhs, rhs), 1e-10);
  }
}

TEST(MatrixAttentionTest, SingleFrameOutputsProjectedValue) {
  const auto c = small_matrix_config(3, 2, 2, 4);
  const auto p = random_matrix_params(c, 5);
  const VideoTokens z = random_video(1, 3, 2, 6);
  const Mat v = project_frame(z.frame(0), p.proj_v);
  EXPECT_LE(max_abs_diff(matrix_attention(z, p).tokens, project_frame(v, p.proj_o)), 1e-14);
}

TEST(MatrixAttentionTest, IdenticalFramesGiveIdenticalOutputs) {
  const auto c = small_matrix_config(3, 2, 2, 4);
  const auto p = random_matrix_params(c, 7);
  CounterRng rng(8);
  const Mat f = rng.normal_mat(3, 2);
  const std::vector<Mat> frames(4, f);
  const VideoTokens y = matrix_attention(VideoTokens::from_frames(frames), p);
  for (std::size_t t = 1; t < 4; ++t) EXPECT_LE(max_abs_diff(y.frame(t), y.frame(0)), 1e-12);
}

TEST(MatrixAttentionTest, MatchesIndexLoopOracle) {
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    const auto c = small_matrix_config(2, 2, 2, 2);
    const auto p = random_matrix_params(c, 10 + seed);
    const VideoTokens z = random_video(2, 2, 2, 20 + seed);
    EXPECT_LE(max_abs_diff(matrix_attention(z, p).tokens, loop_matrix_attention(z, p).tokens),
              1e-13);
  }
  const auto c = small_matrix_config(3, 4, 2, 5);
  const auto p = random_matrix_params(c, 30);
  const VideoTokens z = random_video(4, 3, 4, 31);
  EXPECT_LE(max_abs_diff(matrix_attention(z, p).tokens, loop_matrix_attention(z, p).tokens),
            1e-12);
}

TEST(MatrixAttentionTest, MultiHeadMatchesPerHeadOracle) {
  const auto c = small_matrix_config(4, 4, 4, 2, 2, 2);
  const auto p = random_matrix_params(c, 40);
  const VideoTokens z = random_video(3, 4, 4, 41);
  // Oracle: per-head loops over partitions.
  std::vector<Mat> q, k, v;
  for (std::size_t t = 0; t < 3; ++t) {
    q.push_back(project_frame(z.frame(t), p.proj_q));
    k.push_back(project_frame(z.frame(t), p.proj_k));
    v.push_back(project_frame(z.frame(t), p.proj_v));
  }
  std::vector<Mat> u(3, Mat(2, 4));
  for (std::size_t i = 0; i < 2; ++i)
    for (std::size_t j = 0; j < 2; ++j) {
      for (std::size_t t = 0; t < 3; ++t) {
        std::vector<double> s(3);
        for (std::size_t tp = 0; tp < 3; ++tp) {
          double acc = 0;
          for (std::size_t r = 0; r < 2; ++r)
            for (std::size_t cc = 0; cc < 2; ++cc)
              acc += q[t](2 * i + r, 2 * j + cc) * k[tp](2 * i + r, 2 * j + cc);
          s[tp] = acc / 2.0;
        }
        s = testing::loop_softmax(s);
        for (std::size_t tp = 0; tp < 3; ++tp)
          for (std::size_t cc = 0; cc < 2; ++cc)
            u[t](i, 2 * j + cc) += s[tp] * v[tp](i, 2 * j + cc);
      }
    }
  std::vector<Mat> out;
  for (auto& ut : u) out.push_back(project_frame(ut, p.proj_o));
  EXPECT_LE(max_abs_diff(matrix_attention(z, p).tokens, VideoTokens::from_frames(out).tokens),
            1e-12);
}

TEST(MatrixAttentionTest, UnitHeadGridEqualsSingleHeadBitExact) {
  auto c = small_matrix_config(4, 4, 2, 4);
  const auto p = random_matrix_params(c, 50);
  const VideoTokens z = random_video(3, 4, 4, 51);
  ParamSet ps;
  export_params(p, "m.", ps);
  AttentionSpec spec;
  spec.op = AttentionOp::kMatrix;
  spec.D = 4;
  spec.matrix = c;
  EXPECT_EQ(attention_forward(spec, ps, "m.", z).tokens, matrix_attention(z, p).tokens);
}

TEST(MatrixAttentionTest, HeadDivisibilityIsConfigError) {
  auto c = small_matrix_config(4, 4, 4, 4, 1, 3);
  try {
    c.validate();
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_EQ(e.key(), "heads_n");
  }
  c.heads_n = 1;
  c.heads_m = 3;
  EXPECT_THROW(c.validate(), ConfigError);
}

TEST(MatrixAttentionTest, SingleRowCompressionRuns) {
  auto c = small_matrix_config(4, 3, 1, 2);
  c.set_all_norms(UNorm::kSoftmax);
  const auto p = random_matrix_params(c, 60);
  const VideoTokens z = random_video(5, 4, 3, 61);
  const VideoTokens y = matrix_attention(z, p);
  EXPECT_TRUE(all_finite(y.tokens));
  EXPECT_TRUE(y.same_shape(z));
}

TEST(MatrixAttentionTest, UNormChangesOutput) {
  auto c = small_matrix_config(3, 2, 2, 2);
  auto p = random_matrix_params(c, 70);
  const VideoTokens z = random_video(2, 3, 2, 71);
  const Mat base = matrix_attention(z, p).tokens;
  for (UNorm u : {UNorm::kSoftmax, UNorm::kL1, UNorm::kL2}) {
    auto q = p;
    q.proj_q.u_norm = q.proj_k.u_norm = q.proj_v.u_norm = q.proj_o.u_norm = u;
    EXPECT_GT(max_abs_diff(matrix_attention(z, q).tokens, base), 1e-6);
  }
}

AttnParams random_attn(std::size_t D, std::size_t Dh, std::uint64_t seed) {
  CounterRng rng(seed);
  return init_attention(D, Dh, rng);
}

TEST(TokenAttentionTest, SpatialMatchesLoopOracle) {
  const auto p = random_attn(2, 3, 80);
  const VideoTokens z = random_video(1, 3, 2, 81);
  EXPECT_LE(max_abs_diff(spatial_attention(z, p).tokens,
                         loop_token_attention(z.tokens, p, testing::spatial_groups(1, 3))),
            1e-14);
  const VideoTokens z2 = random_video(3, 4, 2, 82);
  EXPECT_LE(max_abs_diff(spatial_attention(z2, p).tokens,
                         loop_token_attention(z2.tokens, p, testing::spatial_groups(3, 4))),
            1e-13);
}

TEST(TokenAttentionTest, SpatialSingleTokenAndSymmetry) {
  const auto p = random_attn(2, 2, 83);
  const VideoTokens z = random_video(2, 1, 2, 84);
  EXPECT_LE(max_abs_diff(spatial_attention(z, p).tokens,
                         matmul(matmul(z.tokens, p.W_v), p.W_o)),
            1e-14);
  Mat two(2, 2);
  two(0, 0) = two(1, 0) = 0.3;
  two(0, 1) = two(1, 1) = -1.2;
  const Mat y = spatial_attention(VideoTokens(1, 2, two), p).tokens;
  EXPECT_EQ(slice_rows(y, 0, 1), slice_rows(y, 1, 2));
}

TEST(TokenAttentionTest, LocalTemporalMatchesLoopOracle) {
  const auto p = random_attn(2, 2, 85);
  const VideoTokens z = random_video(3, 2, 2, 86);
  EXPECT_LE(max_abs_diff(local_temporal_attention(z, p).tokens,
                         loop_token_attention(z.tokens, p, testing::temporal_groups(3, 2))),
            1e-14);
  const VideoTokens one = random_video(1, 3, 2, 87);
  EXPECT_LE(max_abs_diff(local_temporal_attention(one, p).tokens,
                         matmul(matmul(one.tokens, p.W_v), p.W_o)),
            1e-14);
}

TEST(TokenAttentionTest, LocalTemporalIdenticalFrames) {
  const auto p = random_attn(3, 2, 88);
  CounterRng rng(89);
  const std::vector<Mat> frames(4, rng.normal_mat(2, 3));
  const VideoTokens y = local_temporal_attention(VideoTokens::from_frames(frames), p);
  for (std::size_t t = 1; t < 4; ++t) EXPECT_LE(max_abs_diff(y.frame(t), y.frame(0)), 1e-12);
}

TEST(TokenAttentionTest, Full3DMatchesLoopOracleAndCollapses) {
  const auto p = random_attn(2, 3, 90);
  const VideoTokens z = random_video(2, 2, 2, 91);
  EXPECT_LE(max_abs_diff(full3d_attention(z, p).tokens,
                         loop_token_attention(z.tokens, p, testing::full_group(2, 2))),
            1e-14);
  const VideoTokens t1 = random_video(1, 4, 2, 92);
  EXPECT_EQ(full3d_attention(t1, p).tokens, spatial_attention(t1, p).tokens);
  const VideoTokens n1 = random_video(4, 1, 2, 93);
  EXPECT_EQ(full3d_attention(n1, p).tokens, local_temporal_attention(n1, p).tokens);
}

TEST(TokenAttentionTest, ShapeMismatchThrows) {
  const auto p = random_attn(3, 2, 94);
  EXPECT_THROW(spatial_attention(random_video(2, 2, 2, 95), p), std::invalid_argument);
}

TEST(AttentionPropertiesTest, RowStochasticWeights) {
  // Constant value frames survive aggregation only if the weights sum to one.
  const auto c = small_matrix_config(3, 2, 2, 2);
  auto p = random_matrix_params(c, 96);
  CounterRng rng(97);
  p.proj_v.U = Mat(3, 2);
  p.proj_v.B = rng.normal_mat(2, 2);
  const VideoTokens z = random_video(5, 3, 2, 98, 4.0);
  const VideoTokens y = matrix_attention(z, p);
  const Mat expect = project_frame(p.proj_v.B, p.proj_o);
  for (std::size_t t = 0; t < 5; ++t) EXPECT_LE(max_abs_diff(y.frame(t), expect), 1e-12);
}

void expect_gradients(const AttentionSpec& spec, std::size_t T, std::size_t N,
                      std::uint64_t seed) {
  ParamSet ps;
  init_params(spec, "a.", seed, ps);
  randomize_params(ps, seed + 1, 0.6);
  const VideoTokens z = random_video(T, N, spec.D, seed + 2);
  GradCheckOptions opts;
  opts.seed = seed + 3;
  const auto res = check_gradients(
      [&](ParamBinder& b, const Var& x) { return graph::apply(spec, b, "a.", x, T, N); }, ps,
      z.tokens, opts);
  EXPECT_TRUE(res.pass) << to_string(spec.op) << " seed " << seed << " worst " << res.worst
                        << " err " << res.max_rel_err;
  EXPECT_GT(res.checked, 0u);
}

TEST(AttentionGradientTest, TokenVariants) {
  for (AttentionOp op : {AttentionOp::kSpatial, AttentionOp::kLocalTemporal,
                         AttentionOp::kFull3D}) {
    AttentionSpec spec;
    spec.op = op;
    spec.D = 3;
    spec.D_h = 2;
    for (std::uint64_t s = 0; s < 3; ++s) expect_gradients(spec, 3, 2, 100 * s + 7);
  }
}

TEST(AttentionGradientTest, MatrixVariantsAllNorms) {
  for (UNorm u : {UNorm::kNone, UNorm::kSoftmax, UNorm::kL1, UNorm::kL2}) {
    AttentionSpec spec;
    spec.op = AttentionOp::kMatrix;
    spec.D = 4;
    spec.matrix = small_matrix_config(2, 4, 2, 4, 2, 2);
    spec.matrix.set_all_norms(u);
    for (std::uint64_t s = 0; s < 3; ++s) expect_gradients(spec, 3, 2, 100 * s + 11);
  }
}

TEST(AttentionBackwardTest, ZeroUpstreamGivesZeroGradients) {
  AttentionSpec spec;
  spec.op = AttentionOp::kMatrix;
  spec.D = 2;
  spec.matrix = small_matrix_config(2, 2, 2, 2);
  ParamSet ps;
  init_params(spec, "m.", 3, ps);
  const VideoTokens z = random_video(2, 2, 2, 4);
  const AttentionGrads g = attention_backward(spec, ps, "m.", z, Mat(4, 2));
  EXPECT_EQ(g.dz, Mat(4, 2));
  for (const auto& [name, p] : g.dparams) EXPECT_EQ(max_abs(p.value), 0.0) << name;
}

TEST(AttentionBackwardTest, BiasGradientOfIdentityProjection) {
  // proj_o with U = I, W = I: dL/dB_o is the per-frame sum of the upstream gradient.
  AttentionSpec spec;
  spec.op = AttentionOp::kMatrix;
  spec.D = 2;
  spec.matrix = small_matrix_config(2, 2, 2, 2);
  ParamSet ps;
  init_params(spec, "m.", 3, ps);
  ps.set("m.o.U", Mat::identity(2));
  ps.set("m.o.W", Mat::identity(2));
  const VideoTokens z = random_video(1, 2, 2, 5);
  CounterRng rng(6);
  const Mat up = rng.normal_mat(2, 2);
  const AttentionGrads g = attention_backward(spec, ps, "m.", z, up);
  EXPECT_LE(max_abs_diff(g.dparams.at("m.o.B"), up), 1e-15);
}

TEST(AttentionBackwardTest, MatrixGradientAgreesWithFiniteDifferences) {
  AttentionSpec spec;
  spec.op = AttentionOp::kMatrix;
  spec.D = 2;
  spec.matrix = small_matrix_config(2, 2, 2, 2);
  ParamSet ps;
  init_params(spec, "m.", 12, ps);
  randomize_params(ps, 13, 0.7);
  const VideoTokens z = random_video(2, 2, 2, 14);
  CounterRng rng(15);
  const Mat up = rng.normal_mat(4, 2);
  const AttentionGrads g = attention_backward(spec, ps, "m.", z, up);
  const double h = 1e-5;
  for (const auto& [name, p] : ps) {
    for (std::size_t i = 0; i < p.value.size(); ++i) {
      ParamSet pp = ps, pm = ps;
      pp.at(name)[i] += h;
      pm.at(name)[i] -= h;
      const double fd = (frobenius(attention_forward(spec, pp, "m.", z).tokens, up) -
                         frobenius(attention_forward(spec, pm, "m.", z).tokens, up)) /
                        (2 * h);
      EXPECT_LE(std::abs(fd - g.dparams.at(name)[i]) / std::max(1.0, std::abs(fd)), 1e-4)
          << name << "[" << i << "]";
    }
  }
}

}  // namespace
}  // namespace mattn
