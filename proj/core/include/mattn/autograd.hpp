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

#ifndef MATTN_AUTOGRAD_HPP_
#define MATTN_AUTOGRAD_HPP_

#include <cstddef>
#include <functional>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "mattn/tensor.hpp"

namespace mattn {

namespace detail {
struct Node;
}

// Handle to a matrix value in a reverse-mode computation graph. Operations on
// Vars record a backward rule only when some input requires a gradient, so
// evaluating with constant inputs keeps no intermediates alive.
class Var {
 public:
  Var() = default;
  static Var constant(Mat value);
  static Var leaf(Mat value);

  const Mat& value() const;
  // Accumulated gradient; an empty matrix when none reached this node.
  const Mat& grad() const;
  bool requires_grad() const;
  std::size_t rows() const { return value().rows(); }
  std::size_t cols() const { return value().cols(); }
  bool valid() const { return node_ != nullptr; }

  const std::shared_ptr<detail::Node>& node() const { return node_; }

 private:
  explicit Var(std::shared_ptr<detail::Node> n) : node_(std::move(n)) {}
  friend Var make_op(Mat, std::vector<Var>, std::function<void(detail::Node&)>);
  std::shared_ptr<detail::Node> node_;
};

namespace detail {
struct Node {
  Mat value;
  Mat grad;
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void(Node&)> backprop;

  void accumulate(const Mat& g);
  Mat& grad_buffer();  // zero-initialized on first use
};
}  // namespace detail

// Creates an op node. `backprop` receives the node (whose grad is set) and
// must push gradients into its parents. Dropped when no input needs a grad.
Var make_op(Mat value, std::vector<Var> inputs,
            std::function<void(detail::Node&)> backprop);

// Reverse sweep from `out`, seeded with `seed` (same shape as out).
void backward(const Var& out, const Mat& seed);
// Scalar output (1x1), seed 1.
void backward(const Var& out);

// ---- ops -----------------------------------------------------------------
Var matmul(const Var& a, const Var& b);
Var transpose(const Var& a);
Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var hadamard(const Var& a, const Var& b);
Var scale(const Var& a, double s);
Var add_scalar(const Var& a, double s);
// x * s where s is a 1x1 Var.
Var mul_scalar(const Var& x, const Var& s);

// Row-broadcast: every row of x combined with the 1 x C row vector b.
Var add_row(const Var& x, const Var& b);
Var mul_row(const Var& x, const Var& b);
// x is (F*R) x C; b is R x C, added to each of the F row blocks.
Var add_tiled(const Var& x, const Var& b);

// Batched products over `batch` stacked row blocks.
// bmm:    a (batch*M x K), b (batch*K x P) -> (batch*M x P), out_i = a_i b_i
// bmm_nt: a (batch*M x K), b (batch*P x K) -> (batch*M x P), out_i = a_i b_i^T
Var bmm(const Var& a, const Var& b, std::size_t batch);
Var bmm_nt(const Var& a, const Var& b, std::size_t batch);
// y is (F*R) x C; out_f = U^T y_f with U (R x R_out).
Var frame_left_mul_t(const Var& u, const Var& y, std::size_t frames);

Var softmax_rows(const Var& a);
Var softmax_cols(const Var& a);
// Column-wise l1 / l2 normalization; columns whose norm is below `guard` pass
// through unchanged.
Var normalize_cols_l1(const Var& a, double guard = 1e-12);
Var normalize_cols_l2(const Var& a, double guard = 1e-12);

// Per-row normalization to zero mean / unit variance, no affine terms.
Var layernorm_rows(const Var& x, double eps = 1e-6);
Var gelu(const Var& x);  // tanh approximation
Var silu(const Var& x);
Var sigmoid(const Var& x);

// out.flat[i] = x.flat[index[i]], shaped rows x cols.
Var gather(const Var& x, std::size_t rows, std::size_t cols,
           std::shared_ptr<const std::vector<std::size_t>> index);
Var reshape(const Var& x, std::size_t rows, std::size_t cols);
Var slice_rows(const Var& x, std::size_t begin, std::size_t end);
Var slice_cols(const Var& x, std::size_t begin, std::size_t end);
Var concat_rows(const std::vector<Var>& parts);
Var concat_cols(const std::vector<Var>& parts);

// Mean of squared differences over all entries (1x1).
Var mse(const Var& pred, const Mat& target);
// Sum_ij w_ij x_ij (1x1).
Var weighted_sum(const Var& x, const Mat& w);
Var sum_all(const Var& x);

// ---- parameters ----------------------------------------------------------
struct Param {
  Mat value;
  bool trainable = true;
};

// Named parameters in deterministic (lexicographic) order.
class ParamSet {
 public:
  using Map = std::map<std::string, Param>;

  void add(const std::string& name, Mat value, bool trainable = true);
  void set(const std::string& name, Mat value);
  bool contains(const std::string& name) const { return entries_.count(name) > 0; }
  const Mat& at(const std::string& name) const;
  Mat& at(const std::string& name);
  Param& param(const std::string& name);
  const Param& param(const std::string& name) const;
  void erase(const std::string& name) { entries_.erase(name); }

  std::size_t size() const { return entries_.size(); }
  std::size_t scalar_count() const;
  // Copies of every entry whose name starts with `prefix` (prefix kept).
  ParamSet subset(const std::string& prefix) const;
  void merge(const ParamSet& other);  // add-or-overwrite
  ParamSet zeros_like() const;
  // Marks every parameter trainable iff its name starts with one of prefixes.
  void set_trainable_only(const std::vector<std::string>& prefixes);

  Map::const_iterator begin() const { return entries_.begin(); }
  Map::const_iterator end() const { return entries_.end(); }
  Map::iterator begin() { return entries_.begin(); }
  Map::iterator end() { return entries_.end(); }

 private:
  Map entries_;
};

// Global L2 norm over all entries.
double global_norm(const ParamSet& ps);

// Binds ParamSet entries as graph leaves on first use. With `track_grads`
// off, or for frozen parameters, values enter the graph as constants.
class ParamBinder {
 public:
  explicit ParamBinder(const ParamSet& params, bool track_grads = true)
      : params_(&params), track_(track_grads) {}

  Var operator()(const std::string& name);
  const ParamSet& params() const { return *params_; }
  bool tracking() const { return track_; }

  // Gradient for every parameter in the set (zeros where none flowed).
  ParamSet grads() const;
  // Adds this pass's gradients into `into` (which must contain every name).
  void accumulate_grads(ParamSet& into) const;

 private:
  const ParamSet* params_;
  bool track_;
  std::map<std::string, Var> bound_;
};

}  // namespace mattn

#endif  // MATTN_AUTOGRAD_HPP_
