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

#include <gtest/gtest.h>

#include "mattn/errors.hpp"
#include "mattn/oracle.hpp"
#include "mattn/rng.hpp"
#include "test_util.hpp"

namespace mattn {
namespace {

std::vector<Mat> random_maps(std::size_t count, std::size_t n, CounterRng& rng) {
  std::vector<Mat> v;
  for (std::size_t i = 0; i < count; ++i) v.push_back(rng.normal_mat(n, n));
  return v;
}

TEST(SpatialBlockDiagTest, Examples) {
  CounterRng rng(1);
  const auto one = random_maps(1, 3, rng);
  EXPECT_EQ(build_spatial_blockdiag(one).A, one[0]);
  const std::vector<Mat> eye(2, Mat::identity(2));
  EXPECT_EQ(build_spatial_blockdiag(eye).A, Mat::identity(4));
  const auto S = build_spatial_blockdiag(random_maps(2, 2, rng));
  for (std::size_t i = 0; i < 2; ++i)
    for (std::size_t j = 2; j < 4; ++j) {
      EXPECT_EQ(S.A(i, j), 0.0);
      EXPECT_EQ(S.A(j, i), 0.0);
    }
  const std::vector<Mat> bad{Mat(2, 2), Mat(3, 3)};
  EXPECT_THROW(build_spatial_blockdiag(bad), DimensionError);
}

TEST(LocalTemporalMapTest, Examples) {
  CounterRng rng(2);
  const auto one = random_maps(1, 3, rng);
  EXPECT_EQ(build_local_temporal_map(one).A, one[0]);
  const std::vector<Mat> eye(3, Mat::identity(2));
  EXPECT_EQ(build_local_temporal_map(eye).A, Mat::identity(6));
  const auto Hn = random_maps(2, 2, rng);
  const auto H = build_local_temporal_map(Hn);
  for (std::size_t t = 0; t < 2; ++t)
    for (std::size_t n = 0; n < 2; ++n)
      for (std::size_t u = 0; u < 2; ++u)
        for (std::size_t m = 0; m < 2; ++m) {
          const double v = H.A(t * 2 + n, u * 2 + m);
          if (n == m) {
            EXPECT_EQ(v, Hn[n](t, u));
          } else {
            EXPECT_EQ(v, 0.0);
          }
        }
}

TEST(BottleneckTest, IdentityMaps) {
  const std::vector<Mat> hs(2, Mat::identity(3)), ss(3, Mat::identity(2));
  const auto H = build_local_temporal_map(hs);
  const auto S = build_spatial_blockdiag(ss);
  EXPECT_EQ(matmul(H.A, S.A), Mat::identity(6));
  EXPECT_TRUE(bottleneck_identity_check(H, S).pass);
}

TEST(BottleneckTest, RandomInstancesAndNegativeControls) {
  std::size_t swapped_fail = 0;
  for (std::uint64_t s = 0; s < 20; ++s) {
    CounterRng rng(100 + s);
    const std::size_t T = 2 + s % 3, N = 2 + (s / 3) % 3;
    const auto H = build_local_temporal_map(random_maps(N, T, rng));
    const auto S = build_spatial_blockdiag(random_maps(T, N, rng));
    const auto ok = bottleneck_identity_check(H, S);
    EXPECT_TRUE(ok.pass) << ok.max_dev;
    EXPECT_LE(ok.max_dev, 1e-12);

    auto noisy = H;
    noisy.A(0, 1) += 0.5;  // (t=0,n=0) -> (t=0,n=1): a structural zero
    EXPECT_FALSE(bottleneck_identity_check(noisy, S).pass);

    if (!bottleneck_identity_check(S, H).pass) ++swapped_fail;
  }
  EXPECT_EQ(swapped_fail, 20u);
}

TEST(MatrixMapTest, IdentityRowWeightsReduceToGram) {
  CounterRng rng(3);
  const Mat G = rng.normal_mat(6, 6);
  const Mat I = Mat::identity(3);
  EXPECT_EQ(lifted_matrix_map(I, I, I, G, 2), G);
}

TEST(MatrixMapTest, ZeroValueWeightsAnnihilate) {
  CounterRng rng(4);
  const Mat G = rng.normal_mat(4, 4);
  const auto S = build_spatial_blockdiag(random_maps(2, 2, rng));
  const Mat Hp = lifted_matrix_map(rng.normal_mat(2, 2), rng.normal_mat(2, 2), Mat(2, 2), G, 2);
  EXPECT_EQ(max_abs(matmul(Hp, S.A)), 0.0);
}

TEST(MatrixMapTest, SummedFormOnRandomInstances) {
  for (std::uint64_t s = 0; s < 20; ++s) {
    CounterRng rng(200 + s);
    const std::size_t T = 1 + s % 4, N = 2 + s % 3, Nr = 1 + s % 2;
    const auto S = build_spatial_blockdiag(random_maps(T, N, rng));
    const Mat G = rng.normal_mat(T * N, T * N);
    const auto r = matrix_map_expansion_check(rng.normal_mat(N, Nr), rng.normal_mat(N, Nr),
                                              rng.normal_mat(N, Nr), G, S);
    EXPECT_TRUE(r.pass) << r.max_dev;
  }
}

TEST(MatrixMapTest, MismatchedRowCountsAreConfigErrors) {
  CounterRng rng(5);
  const auto S = build_spatial_blockdiag(random_maps(2, 2, rng));
  try {
    matrix_map_expansion_check(Mat(2, 2), Mat(2, 2), Mat(2, 3), Mat(4, 4), S);
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("2x3"), std::string::npos);
  }
}

TEST(DualPathTest, ZeroInput) {
  const auto p = random_dual_path_params(3, 2, 2, 4, 6);
  const auto r = dual_path_equivalence(VideoTokens(2, 3, 2), p);
  EXPECT_EQ(max_abs(r.modular), 0.0);
  EXPECT_EQ(max_abs(r.oracle), 0.0);
}

TEST(DualPathTest, RandomSeeds) {
  for (std::uint64_t s = 0; s < 3; ++s) {
    const auto p = random_dual_path_params(3, 2, 2, 4, 10 + s);
    const VideoTokens z = testing::random_video(4, 3, 2, 20 + s);
    const auto r = dual_path_equivalence(z, p);
    EXPECT_LE(r.max_dev, 1e-10) << "seed " << s;
    EXPECT_GT(max_abs(r.oracle), 1e-6);
  }
}

TEST(DualPathTest, IdentityRowWeightsMatchSharedGramLocalAttention) {
  auto p = random_dual_path_params(3, 2, 3, 3, 30);
  for (MatrixLinear* l : {&p.matrix.proj_q, &p.matrix.proj_k, &p.matrix.proj_v,
                          &p.matrix.proj_o}) {
    l->U = Mat::identity(3);
  }
  const VideoTokens z = testing::random_video(3, 3, 2, 31);
  const auto r = dual_path_equivalence(z, p);
  EXPECT_LE(r.max_dev, 1e-10);
  const Mat local = shared_gram_local_path(z, p);
  EXPECT_EQ(local, r.oracle);
  EXPECT_LE(max_abs_diff(local, r.modular), 1e-10);
}

TEST(DualPathTest, RejectsBiases) {
  auto p = random_dual_path_params(2, 2, 2, 2, 40);
  p.matrix.proj_q.B(0, 0) = 1.0;
  EXPECT_THROW(dual_path_equivalence(VideoTokens(2, 2, 2), p), ConfigError);
}

}  // namespace
}  // namespace mattn
