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

#ifndef MATTN_TENSOR_HPP_
#define MATTN_TENSOR_HPP_

#include <cstddef>
#include <initializer_list>
#include <span>
#include <vector>

#include "mattn/counters.hpp"
#include "mattn/errors.hpp"

namespace mattn {

using Buffer = std::vector<double, TrackedAllocator<double>>;

// Dense row-major f64 matrix.
class Mat {
 public:
  Mat() = default;
  Mat(std::size_t rows, std::size_t cols, double fill = 0.0);
  // Row-major data; throws DimensionError if data.size() != rows*cols.
  Mat(std::size_t rows, std::size_t cols, std::span<const double> data);

  static Mat from_rows(std::initializer_list<std::initializer_list<double>> rows);
  static Mat identity(std::size_t n);
  static Mat zeros(std::size_t rows, std::size_t cols) { return Mat(rows, cols); }
  static Mat ones(std::size_t rows, std::size_t cols) { return Mat(rows, cols, 1.0); }

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }
  bool same_shape(const Mat& o) const { return rows_ == o.rows_ && cols_ == o.cols_; }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }
  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }

  std::span<double> data() { return data_; }
  std::span<const double> data() const { return data_; }
  double* row_ptr(std::size_t r) { return data_.data() + r * cols_; }
  const double* row_ptr(std::size_t r) const { return data_.data() + r * cols_; }

  // Same data, new shape (rows*cols must match).
  Mat reshaped(std::size_t rows, std::size_t cols) const;

  bool operator==(const Mat& o) const {
    return same_shape(o) && data_ == o.data_;
  }

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  Buffer data_;
};

// T frames of N tokens with D features, stored temporal-major as a
// (T*N) x D matrix: token (t, n) is row t*N + n.
struct VideoTokens {
  std::size_t T = 0;
  std::size_t N = 0;
  std::size_t D = 0;
  Mat tokens;

  VideoTokens() = default;
  VideoTokens(std::size_t t, std::size_t n, std::size_t d);
  VideoTokens(std::size_t t, std::size_t n, Mat stacked);
  static VideoTokens from_frames(std::span<const Mat> frames);

  Mat frame(std::size_t t) const;
  std::vector<Mat> frames() const;
  bool same_shape(const VideoTokens& o) const {
    return T == o.T && N == o.N && D == o.D;
  }
  bool operator==(const VideoTokens& o) const {
    return same_shape(o) && tokens == o.tokens;
  }
};

// ---- kernels -------------------------------------------------------------
// All reductions run in a fixed order, so results are bit-reproducible.

// C (m x p) = op(A) * op(B) with op = transpose when the flag is set.
// `lda`/`ldb`/`ldc` are row strides. Accumulates into C when `accumulate`.
// Every call is reported to the FLOP counter as 2*m*k*p.
void gemm(bool trans_a, bool trans_b, std::size_t m, std::size_t p,
          std::size_t k, const double* a, std::size_t lda, const double* b,
          std::size_t ldb, double* c, std::size_t ldc, bool accumulate);

Mat matmul(const Mat& a, const Mat& b);
Mat matmul_tn(const Mat& a, const Mat& b);  // a^T b
Mat matmul_nt(const Mat& a, const Mat& b);  // a b^T
Mat transpose(const Mat& a);

Mat add(const Mat& a, const Mat& b);
Mat sub(const Mat& a, const Mat& b);
Mat hadamard(const Mat& a, const Mat& b);
Mat scale(const Mat& a, double s);
void axpy(double alpha, const Mat& x, Mat& y);  // y += alpha * x

// Row-wise softmax with max subtraction.
Mat softmax_rows(const Mat& a);
// Column-wise softmax (normalizes along the row index).
Mat softmax_cols(const Mat& a);

double frobenius(const Mat& a, const Mat& b);
double frobenius_norm(const Mat& a);
double trace(const Mat& a);
double sum(const Mat& a);
double max_abs(const Mat& a);
double max_abs_diff(const Mat& a, const Mat& b);
bool all_finite(const Mat& a);

// Contiguous m x n block partition in row-major block order.
std::vector<Mat> split_grid(const Mat& a, std::size_t m, std::size_t n);
Mat concat_grid(std::span<const Mat> blocks, std::size_t m, std::size_t n);

Mat slice_rows(const Mat& a, std::size_t begin, std::size_t end);
Mat slice_cols(const Mat& a, std::size_t begin, std::size_t end);
Mat concat_rows(std::span<const Mat> parts);
Mat concat_cols(std::span<const Mat> parts);

// Block-diagonal matrix with the given blocks along the diagonal.
Mat block_diag(std::span<const Mat> blocks);
// Kronecker product.
Mat kron(const Mat& a, const Mat& b);

}  // namespace mattn

#endif  // MATTN_TENSOR_HPP_
