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

#include "mattn/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace mattn {

std::string shape_str(std::size_t rows, std::size_t cols) {
  std::ostringstream os;
  os << '(' << rows << 'x' << cols << ')';
  return os.str();
}

namespace {

[[noreturn]] void shape_mismatch(const char* op, const Mat& a, const Mat& b) {
  throw DimensionError(std::string(op) + ": shape mismatch " +
                       shape_str(a.rows(), a.cols()) + " vs " +
                       shape_str(b.rows(), b.cols()));
}

void require_same(const char* op, const Mat& a, const Mat& b) {
  if (!a.same_shape(b)) shape_mismatch(op, a, b);
}

}  // namespace

Mat::Mat(std::size_t rows, std::size_t cols, double fill)
    : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

Mat::Mat(std::size_t rows, std::size_t cols, std::span<const double> data)
    : rows_(rows), cols_(cols), data_(data.begin(), data.end()) {
  if (data.size() != rows * cols) {
    throw DimensionError("Mat: " + std::to_string(data.size()) +
                         " values for shape " + shape_str(rows, cols));
  }
}

Mat Mat::from_rows(std::initializer_list<std::initializer_list<double>> rows) {
  const std::size_t r = rows.size();
  const std::size_t c = r ? rows.begin()->size() : 0;
  Mat m(r, c);
  std::size_t i = 0;
  for (const auto& row : rows) {
    if (row.size() != c) throw DimensionError("Mat::from_rows: ragged rows");
    std::copy(row.begin(), row.end(), m.row_ptr(i++));
  }
  return m;
}

Mat Mat::identity(std::size_t n) {
  Mat m(n, n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

Mat Mat::reshaped(std::size_t rows, std::size_t cols) const {
  if (rows * cols != size()) {
    throw DimensionError("reshape " + shape_str(rows_, cols_) + " -> " +
                         shape_str(rows, cols));
  }
  Mat out = *this;
  out.rows_ = rows;
  out.cols_ = cols;
  return out;
}

VideoTokens::VideoTokens(std::size_t t, std::size_t n, std::size_t d)
    : T(t), N(n), D(d), tokens(t * n, d) {
  if (T == 0) throw DimensionError("VideoTokens: need T >= 1 frames");
}

VideoTokens::VideoTokens(std::size_t t, std::size_t n, Mat stacked)
    : T(t), N(n), D(stacked.cols()), tokens(std::move(stacked)) {
  if (T == 0) throw DimensionError("VideoTokens: need T >= 1 frames");
  if (tokens.rows() != T * N) {
    throw DimensionError("VideoTokens: stacked rows " +
                         std::to_string(tokens.rows()) + " != T*N = " +
                         std::to_string(T * N));
  }
}

VideoTokens VideoTokens::from_frames(std::span<const Mat> frames) {
  if (frames.empty()) throw DimensionError("VideoTokens: need T >= 1 frames");
  for (const auto& f : frames) require_same("VideoTokens::from_frames", frames[0], f);
  return VideoTokens(frames.size(), frames[0].rows(), concat_rows(frames));
}

Mat VideoTokens::frame(std::size_t t) const {
  return slice_rows(tokens, t * N, (t + 1) * N);
}

std::vector<Mat> VideoTokens::frames() const {
  std::vector<Mat> out;
  out.reserve(T);
  for (std::size_t t = 0; t < T; ++t) out.push_back(frame(t));
  return out;
}

void gemm(bool trans_a, bool trans_b, std::size_t m, std::size_t p,
          std::size_t k, const double* a, std::size_t lda, const double* b,
          std::size_t ldb, double* c, std::size_t ldc, bool accumulate) {
  flops::record_matmul(m, k, p);
  if (!accumulate) {
    for (std::size_t i = 0; i < m; ++i) std::fill_n(c + i * ldc, p, 0.0);
  }
  if (!trans_a && !trans_b) {
    for (std::size_t i = 0; i < m; ++i) {
      double* ci = c + i * ldc;
      const double* ai = a + i * lda;
      for (std::size_t kk = 0; kk < k; ++kk) {
        const double av = ai[kk];
        const double* bk = b + kk * ldb;
        for (std::size_t j = 0; j < p; ++j) ci[j] += av * bk[j];
      }
    }
  } else if (!trans_a && trans_b) {
    for (std::size_t i = 0; i < m; ++i) {
      const double* ai = a + i * lda;
      double* ci = c + i * ldc;
      for (std::size_t j = 0; j < p; ++j) {
        const double* bj = b + j * ldb;
        double s = 0.0;
        for (std::size_t kk = 0; kk < k; ++kk) s += ai[kk] * bj[kk];
        ci[j] += s;
      }
    }
  } else if (trans_a && !trans_b) {
    for (std::size_t kk = 0; kk < k; ++kk) {
      const double* ak = a + kk * lda;
      const double* bk = b + kk * ldb;
      for (std::size_t i = 0; i < m; ++i) {
        const double av = ak[i];
        double* ci = c + i * ldc;
        for (std::size_t j = 0; j < p; ++j) ci[j] += av * bk[j];
      }
    }
  } else {
    for (std::size_t i = 0; i < m; ++i) {
      double* ci = c + i * ldc;
      for (std::size_t j = 0; j < p; ++j) {
        double s = 0.0;
        for (std::size_t kk = 0; kk < k; ++kk) s += a[kk * lda + i] * b[j * ldb + kk];
        ci[j] += s;
      }
    }
  }
}

Mat matmul(const Mat& a, const Mat& b) {
  if (a.cols() != b.rows()) shape_mismatch("matmul", a, b);
  Mat c(a.rows(), b.cols());
  gemm(false, false, a.rows(), b.cols(), a.cols(), a.data().data(), a.cols(),
       b.data().data(), b.cols(), c.data().data(), c.cols(), true);
  return c;
}

Mat matmul_tn(const Mat& a, const Mat& b) {
  if (a.rows() != b.rows()) shape_mismatch("matmul_tn", a, b);
  Mat c(a.cols(), b.cols());
  gemm(true, false, a.cols(), b.cols(), a.rows(), a.data().data(), a.cols(),
       b.data().data(), b.cols(), c.data().data(), c.cols(), true);
  return c;
}

Mat matmul_nt(const Mat& a, const Mat& b) {
  if (a.cols() != b.cols()) shape_mismatch("matmul_nt", a, b);
  Mat c(a.rows(), b.rows());
  gemm(false, true, a.rows(), b.rows(), a.cols(), a.data().data(), a.cols(),
       b.data().data(), b.cols(), c.data().data(), c.cols(), true);
  return c;
}

Mat transpose(const Mat& a) {
  Mat t(a.cols(), a.rows());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < a.cols(); ++j) t(j, i) = a(i, j);
  return t;
}

Mat add(const Mat& a, const Mat& b) {
  require_same("add", a, b);
  Mat c = a;
  for (std::size_t i = 0; i < c.size(); ++i) c[i] += b[i];
  return c;
}

Mat sub(const Mat& a, const Mat& b) {
  require_same("sub", a, b);
  Mat c = a;
  for (std::size_t i = 0; i < c.size(); ++i) c[i] -= b[i];
  return c;
}

Mat hadamard(const Mat& a, const Mat& b) {
  require_same("hadamard", a, b);
  Mat c = a;
  for (std::size_t i = 0; i < c.size(); ++i) c[i] *= b[i];
  return c;
}

Mat scale(const Mat& a, double s) {
  Mat c = a;
  for (auto& v : c.data()) v *= s;
  return c;
}

void axpy(double alpha, const Mat& x, Mat& y) {
  require_same("axpy", x, y);
  for (std::size_t i = 0; i < y.size(); ++i) y[i] += alpha * x[i];
}

Mat softmax_rows(const Mat& a) {
  Mat out(a.rows(), a.cols());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    const double* x = a.row_ptr(i);
    double* y = out.row_ptr(i);
    const double mx = *std::max_element(x, x + a.cols());
    double s = 0.0;
    for (std::size_t j = 0; j < a.cols(); ++j) {
      y[j] = std::exp(x[j] - mx);
      s += y[j];
    }
    const double inv = 1.0 / s;
    for (std::size_t j = 0; j < a.cols(); ++j) y[j] *= inv;
  }
  return out;
}

Mat softmax_cols(const Mat& a) { return transpose(softmax_rows(transpose(a))); }

double frobenius(const Mat& a, const Mat& b) {
  require_same("frobenius", a, b);
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double frobenius_norm(const Mat& a) { return std::sqrt(frobenius(a, a)); }

double trace(const Mat& a) {
  if (a.rows() != a.cols()) throw DimensionError("trace of non-square " + shape_str(a.rows(), a.cols()));
  double s = 0.0;
  for (std::size_t i = 0; i < a.rows(); ++i) s += a(i, i);
  return s;
}

double sum(const Mat& a) {
  double s = 0.0;
  for (double v : a.data()) s += v;
  return s;
}

double max_abs(const Mat& a) {
  double m = 0.0;
  for (double v : a.data()) m = std::max(m, std::abs(v));
  return m;
}

double max_abs_diff(const Mat& a, const Mat& b) {
  require_same("max_abs_diff", a, b);
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = std::abs(a[i] - b[i]);
    if (std::isnan(d)) return std::numeric_limits<double>::infinity();
    m = std::max(m, d);
  }
  return m;
}

bool all_finite(const Mat& a) {
  return std::all_of(a.data().begin(), a.data().end(),
                     [](double v) { return std::isfinite(v); });
}

std::vector<Mat> split_grid(const Mat& a, std::size_t m, std::size_t n) {
  if (m == 0 || n == 0 || a.rows() % m != 0 || a.cols() % n != 0) {
    throw DimensionError("split_grid: " + shape_str(a.rows(), a.cols()) +
                         " not divisible into " + std::to_string(m) + "x" +
                         std::to_string(n) + " blocks");
  }
  const std::size_t br = a.rows() / m, bc = a.cols() / n;
  std::vector<Mat> out;
  out.reserve(m * n);
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      Mat blk(br, bc);
      for (std::size_t r = 0; r < br; ++r)
        std::copy_n(a.row_ptr(i * br + r) + j * bc, bc, blk.row_ptr(r));
      out.push_back(std::move(blk));
    }
  }
  return out;
}

Mat concat_grid(std::span<const Mat> blocks, std::size_t m, std::size_t n) {
  if (blocks.size() != m * n || blocks.empty()) {
    throw DimensionError("concat_grid: expected " + std::to_string(m * n) +
                         " blocks, got " + std::to_string(blocks.size()));
  }
  const std::size_t br = blocks[0].rows(), bc = blocks[0].cols();
  for (const auto& b : blocks) require_same("concat_grid", blocks[0], b);
  Mat out(m * br, n * bc);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j)
      for (std::size_t r = 0; r < br; ++r)
        std::copy_n(blocks[i * n + j].row_ptr(r), bc, out.row_ptr(i * br + r) + j * bc);
  return out;
}

Mat slice_rows(const Mat& a, std::size_t begin, std::size_t end) {
  if (begin > end || end > a.rows()) {
    throw DimensionError("slice_rows [" + std::to_string(begin) + "," +
                         std::to_string(end) + ") of " + shape_str(a.rows(), a.cols()));
  }
  return Mat(end - begin, a.cols(),
             a.data().subspan(begin * a.cols(), (end - begin) * a.cols()));
}

Mat slice_cols(const Mat& a, std::size_t begin, std::size_t end) {
  if (begin > end || end > a.cols()) {
    throw DimensionError("slice_cols [" + std::to_string(begin) + "," +
                         std::to_string(end) + ") of " + shape_str(a.rows(), a.cols()));
  }
  Mat out(a.rows(), end - begin);
  for (std::size_t r = 0; r < a.rows(); ++r)
    std::copy(a.row_ptr(r) + begin, a.row_ptr(r) + end, out.row_ptr(r));
  return out;
}

Mat concat_rows(std::span<const Mat> parts) {
  if (parts.empty()) return {};
  std::size_t rows = 0;
  for (const auto& p : parts) {
    if (p.cols() != parts[0].cols()) shape_mismatch("concat_rows", parts[0], p);
    rows += p.rows();
  }
  Mat out(rows, parts[0].cols());
  std::size_t off = 0;
  for (const auto& p : parts) {
    std::copy(p.data().begin(), p.data().end(), out.data().begin() + off);
    off += p.size();
  }
  return out;
}

Mat concat_cols(std::span<const Mat> parts) {
  if (parts.empty()) return {};
  std::size_t cols = 0;
  for (const auto& p : parts) {
    if (p.rows() != parts[0].rows()) shape_mismatch("concat_cols", parts[0], p);
    cols += p.cols();
  }
  Mat out(parts[0].rows(), cols);
  for (std::size_t r = 0; r < out.rows(); ++r) {
    double* dst = out.row_ptr(r);
    for (const auto& p : parts) dst = std::copy_n(p.row_ptr(r), p.cols(), dst);
  }
  return out;
}

Mat block_diag(std::span<const Mat> blocks) {
  std::size_t rows = 0, cols = 0;
  for (const auto& b : blocks) {
    rows += b.rows();
    cols += b.cols();
  }
  Mat out(rows, cols);
  std::size_t r0 = 0, c0 = 0;
  for (const auto& b : blocks) {
    for (std::size_t r = 0; r < b.rows(); ++r)
      std::copy_n(b.row_ptr(r), b.cols(), out.row_ptr(r0 + r) + c0);
    r0 += b.rows();
    c0 += b.cols();
  }
  return out;
}

Mat kron(const Mat& a, const Mat& b) {
  Mat out(a.rows() * b.rows(), a.cols() * b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < a.cols(); ++j)
      for (std::size_t r = 0; r < b.rows(); ++r)
        for (std::size_t c = 0; c < b.cols(); ++c)
          out(i * b.rows() + r, j * b.cols() + c) = a(i, j) * b(r, c);
  return out;
}

}  // namespace mattn
