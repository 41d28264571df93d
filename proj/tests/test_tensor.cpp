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

#include "mattn/errors.hpp"
#include "mattn/rng.hpp"
#include "mattn/tensor.hpp"

namespace mattn {
namespace {

TEST(MatmulTest, IdentityIsNeutral) {
  CounterRng rng(1);
  const Mat x = rng.normal_mat(3, 4);
  EXPECT_EQ(matmul(Mat::identity(3), x), x);
}

TEST(MatmulTest, HandComputedProduct) {
  const Mat a = Mat::from_rows({{1, 2}, {3, 4}});
  const Mat b = Mat::from_rows({{0}, {1}});
  EXPECT_EQ(matmul(a, b), Mat::from_rows({{2}, {4}}));
}

TEST(MatmulTest, ZeroAnnihilates) {
  CounterRng rng(2);
  EXPECT_EQ(matmul(Mat(2, 3), rng.normal_mat(3, 4)), Mat(2, 4));
}

TEST(MatmulTest, ShapeMismatchNamesBothShapes) {
  try {
    matmul(Mat(2, 3), Mat(4, 5));
    FAIL() << "expected DimensionError";
  } catch (const DimensionError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("2x3"), std::string::npos) << msg;
    EXPECT_NE(msg.find("4x5"), std::string::npos) << msg;
  }
}

TEST(MatmulTest, Associativity) {
  for (std::uint64_t s = 0; s < 5; ++s) {
    CounterRng rng(100 + s);
    const Mat a = rng.normal_mat(4, 5), b = rng.normal_mat(5, 3), c = rng.normal_mat(3, 6);
    const Mat l = matmul(matmul(a, b), c), r = matmul(a, matmul(b, c));
    EXPECT_LE(max_abs_diff(l, r), 1e-10 * std::max(1.0, max_abs(l)));
  }
}

TEST(MatmulTest, TransposedVariantsAgree) {
  CounterRng rng(3);
  const Mat a = rng.normal_mat(4, 3), b = rng.normal_mat(4, 5), c = rng.normal_mat(6, 3);
  EXPECT_LE(max_abs_diff(matmul_tn(a, b), matmul(transpose(a), b)), 1e-14);
  EXPECT_LE(max_abs_diff(matmul_nt(a, c), matmul(a, transpose(c))), 1e-14);
}

TEST(SoftmaxTest, EqualValuesAreUniform) {
  const Mat s = softmax_rows(Mat(2, 4, 3.7));
  for (std::size_t i = 0; i < s.size(); ++i) EXPECT_DOUBLE_EQ(s[i], 0.25);
}

TEST(SoftmaxTest, ClosedForm) {
  const Mat s = softmax_rows(Mat::from_rows({{0.0, std::log(3.0)}}));
  EXPECT_NEAR(s[0], 0.25, 1e-15);
  EXPECT_NEAR(s[1], 0.75, 1e-15);
}

TEST(SoftmaxTest, LargeLogitsDoNotOverflow) {
  const Mat s = softmax_rows(Mat::from_rows({{1000.0, 0.0}}));
  EXPECT_TRUE(all_finite(s));
  EXPECT_NEAR(s[0], 1.0, 1e-15);
  EXPECT_GE(s[1], 0.0);
}

TEST(SoftmaxTest, RowsSumToOneAtExtremes) {
  CounterRng rng(4);
  const Mat s = softmax_rows(rng.uniform_mat(20, 7, -1e3, 1e3));
  for (std::size_t r = 0; r < s.rows(); ++r) {
    double acc = 0;
    for (std::size_t c = 0; c < s.cols(); ++c) {
      EXPECT_GT(s(r, c), -1e-300);
      EXPECT_LE(s(r, c), 1.0);
      acc += s(r, c);
    }
    EXPECT_NEAR(acc, 1.0, 1e-12);
  }
}

TEST(SoftmaxTest, ColumnVariantMatchesTransposedRows) {
  CounterRng rng(5);
  const Mat a = rng.normal_mat(3, 4);
  EXPECT_EQ(softmax_cols(a), transpose(softmax_rows(transpose(a))));
}

TEST(FrobeniusTest, Basics) {
  CounterRng rng(6);
  EXPECT_EQ(frobenius(rng.normal_mat(3, 3), Mat(3, 3)), 0.0);
  EXPECT_EQ(frobenius(Mat::ones(2, 3), Mat::ones(2, 3)), 6.0);
  const Mat a = rng.normal_mat(2, 2), b = rng.normal_mat(2, 2);
  EXPECT_DOUBLE_EQ(frobenius(a, b), a[0] * b[0] + a[1] * b[1] + a[2] * b[2] + a[3] * b[3]);
  EXPECT_THROW(frobenius(Mat(2, 2), Mat(2, 3)), DimensionError);
}

TEST(FrobeniusTest, EqualsTraceOfProduct) {
  for (std::uint64_t s = 0; s < 5; ++s) {
    CounterRng rng(200 + s);
    const Mat a = rng.normal_mat(5, 5), b = rng.normal_mat(5, 5);
    EXPECT_NEAR(frobenius(a, b), trace(matmul_tn(a, b)), 1e-12);
  }
}

TEST(GridTest, TrivialSplit) {
  CounterRng rng(7);
  const Mat x = rng.normal_mat(3, 5);
  const auto parts = split_grid(x, 1, 1);
  ASSERT_EQ(parts.size(), 1u);
  EXPECT_EQ(parts[0], x);
}

TEST(GridTest, RowMajorBlockOrder) {
  Mat x(4, 4);
  for (std::size_t i = 0; i < 16; ++i) x[i] = static_cast<double>(i);
  const auto p = split_grid(x, 2, 2);
  ASSERT_EQ(p.size(), 4u);
  EXPECT_EQ(p[0], Mat::from_rows({{0, 1}, {4, 5}}));
  EXPECT_EQ(p[1], Mat::from_rows({{2, 3}, {6, 7}}));
  EXPECT_EQ(p[2], Mat::from_rows({{8, 9}, {12, 13}}));
  EXPECT_EQ(p[3], Mat::from_rows({{10, 11}, {14, 15}}));
}

TEST(GridTest, RoundTripIsBitExact) {
  CounterRng rng(8);
  const Mat x = rng.normal_mat(6, 8);
  const auto p = split_grid(x, 3, 4);
  EXPECT_EQ(concat_grid(p, 3, 4), x);
}

TEST(GridTest, NonDivisibleSplitThrows) {
  EXPECT_THROW(split_grid(Mat(5, 4), 2, 2), DimensionError);
  EXPECT_THROW(split_grid(Mat(4, 5), 2, 2), DimensionError);
}

TEST(VideoTokensTest, FrameLayoutIsTemporalMajor) {
  Mat s(6, 2);
  for (std::size_t i = 0; i < s.size(); ++i) s[i] = static_cast<double>(i);
  const VideoTokens v(3, 2, s);
  EXPECT_EQ(v.frame(1), Mat::from_rows({{4, 5}, {6, 7}}));
  const auto fr = v.frames();
  EXPECT_EQ(VideoTokens::from_frames(fr).tokens, s);
}

TEST(VideoTokensTest, RejectsBadShapes) {
  EXPECT_THROW(VideoTokens(0, 2, 2), DimensionError);
  EXPECT_THROW(VideoTokens(2, 2, Mat(5, 2)), DimensionError);
}

TEST(StructureTest, BlockDiagAndKron) {
  const Mat a = Mat::from_rows({{1, 2}});
  const Mat b = Mat::from_rows({{3}});
  const std::vector<Mat> parts{a, b};
  EXPECT_EQ(block_diag(parts), Mat::from_rows({{1, 2, 0}, {0, 0, 3}}));
  EXPECT_EQ(kron(Mat::identity(2), b), Mat::from_rows({{3, 0}, {0, 3}}));
}

TEST(RngTest, CounterStreamIsReproducible) {
  CounterRng a(42), b(42), c(43);
  for (int i = 0; i < 10; ++i) {
    const auto x = a.next_u64();
    EXPECT_EQ(x, b.next_u64());
    EXPECT_NE(x, c.next_u64());
  }
  EXPECT_EQ(CounterRng::derive(7, "w").next_u64(), CounterRng::derive(7, "w").next_u64());
}

TEST(RngTest, NormalMoments) {
  CounterRng rng(9);
  const int n = 200000;
  double s = 0, s2 = 0;
  for (int i = 0; i < n; ++i) {
    const double x = rng.normal();
    s += x;
    s2 += x * x;
  }
  EXPECT_NEAR(s / n, 0.0, 4.0 / std::sqrt(n));
  EXPECT_NEAR(s2 / n, 1.0, 0.02);
}

}  // namespace
}  // namespace mattn
