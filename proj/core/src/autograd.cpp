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

#include "mattn/autograd.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <unordered_set>

namespace mattn {

namespace detail {

Mat& Node::grad_buffer() {
  if (grad.empty() && !value.empty()) grad = Mat(value.rows(), value.cols());
  return grad;
}

void Node::accumulate(const Mat& g) {
  if (!requires_grad) return;
  if (grad.empty()) {
    grad = g;
    return;
  }
  axpy(1.0, g, grad);
}

}  // namespace detail

using detail::Node;

namespace {

const Mat& empty_mat() {
  static const Mat m;
  return m;
}

Node& in(Node& self, std::size_t i) { return *self.parents[i]; }

}  // namespace

Var Var::constant(Mat value) {
  auto n = std::make_shared<Node>();
  n->value = std::move(value);
  return Var(std::move(n));
}

Var Var::leaf(Mat value) {
  auto n = std::make_shared<Node>();
  n->value = std::move(value);
  n->requires_grad = true;
  return Var(std::move(n));
}

const Mat& Var::value() const { return node_ ? node_->value : empty_mat(); }
const Mat& Var::grad() const { return node_ ? node_->grad : empty_mat(); }
bool Var::requires_grad() const { return node_ && node_->requires_grad; }

Var make_op(Mat value, std::vector<Var> inputs,
            std::function<void(Node&)> backprop) {
  auto n = std::make_shared<Node>();
  n->value = std::move(value);
  const bool needs = std::any_of(inputs.begin(), inputs.end(),
                                 [](const Var& v) { return v.requires_grad(); });
  if (needs) {
    n->requires_grad = true;
    n->parents.reserve(inputs.size());
    for (auto& v : inputs) n->parents.push_back(v.node());
    n->backprop = std::move(backprop);
  }
  return Var(std::move(n));
}

void backward(const Var& out, const Mat& seed) {
  if (!out.requires_grad()) return;
  if (!seed.same_shape(out.value())) {
    throw DimensionError("backward: seed " + shape_str(seed.rows(), seed.cols()) +
                         " vs output " + shape_str(out.rows(), out.cols()));
  }
  // Iterative post-order DFS gives a topological order.
  std::vector<Node*> order;
  std::unordered_set<Node*> seen;
  std::vector<std::pair<Node*, std::size_t>> stack{{out.node().get(), 0}};
  seen.insert(out.node().get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      Node* p = node->parents[next++].get();
      if (p->requires_grad && seen.insert(p).second) stack.emplace_back(p, 0);
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }
  out.node()->accumulate(seed);
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* n = *it;
    if (n->backprop && !n->grad.empty()) n->backprop(*n);
  }
}

void backward(const Var& out) {
  if (out.rows() != 1 || out.cols() != 1) {
    throw DimensionError("backward(): output must be 1x1, got " +
                         shape_str(out.rows(), out.cols()));
  }
  backward(out, Mat(1, 1, 1.0));
}

// ---- elementwise / linear ------------------------------------------------

Var matmul(const Var& a, const Var& b) {
  return make_op(matmul(a.value(), b.value()), {a, b}, [](Node& s) {
    Node& na = in(s, 0);
    Node& nb = in(s, 1);
    if (na.requires_grad) na.accumulate(matmul_nt(s.grad, nb.value));
    if (nb.requires_grad) nb.accumulate(matmul_tn(na.value, s.grad));
  });
}

Var transpose(const Var& a) {
  return make_op(transpose(a.value()), {a},
                 [](Node& s) { in(s, 0).accumulate(transpose(s.grad)); });
}

Var add(const Var& a, const Var& b) {
  return make_op(add(a.value(), b.value()), {a, b}, [](Node& s) {
    in(s, 0).accumulate(s.grad);
    in(s, 1).accumulate(s.grad);
  });
}

Var sub(const Var& a, const Var& b) {
  return make_op(sub(a.value(), b.value()), {a, b}, [](Node& s) {
    in(s, 0).accumulate(s.grad);
    if (in(s, 1).requires_grad) in(s, 1).accumulate(scale(s.grad, -1.0));
  });
}

Var hadamard(const Var& a, const Var& b) {
  return make_op(hadamard(a.value(), b.value()), {a, b}, [](Node& s) {
    Node& na = in(s, 0);
    Node& nb = in(s, 1);
    if (na.requires_grad) na.accumulate(hadamard(s.grad, nb.value));
    if (nb.requires_grad) nb.accumulate(hadamard(s.grad, na.value));
  });
}

Var scale(const Var& a, double f) {
  return make_op(scale(a.value(), f), {a},
                 [f](Node& s) { in(s, 0).accumulate(scale(s.grad, f)); });
}

Var add_scalar(const Var& a, double c) {
  Mat v = a.value();
  for (auto& x : v.data()) x += c;
  return make_op(std::move(v), {a}, [](Node& s) { in(s, 0).accumulate(s.grad); });
}

Var mul_scalar(const Var& x, const Var& sv) {
  if (sv.rows() != 1 || sv.cols() != 1) {
    throw DimensionError("mul_scalar: scale must be 1x1, got " +
                         shape_str(sv.rows(), sv.cols()));
  }
  return make_op(scale(x.value(), sv.value()[0]), {x, sv}, [](Node& s) {
    Node& nx = in(s, 0);
    Node& ns = in(s, 1);
    if (nx.requires_grad) nx.accumulate(scale(s.grad, ns.value[0]));
    if (ns.requires_grad) ns.accumulate(Mat(1, 1, frobenius(s.grad, nx.value)));
  });
}

namespace {
void require_row_vector(const char* op, const Mat& x, const Mat& b) {
  if (b.rows() != 1 || b.cols() != x.cols()) {
    throw DimensionError(std::string(op) + ": row vector " +
                         shape_str(b.rows(), b.cols()) + " vs " +
                         shape_str(x.rows(), x.cols()));
  }
}
}  // namespace

Var add_row(const Var& x, const Var& b) {
  require_row_vector("add_row", x.value(), b.value());
  Mat v = x.value();
  for (std::size_t r = 0; r < v.rows(); ++r)
    for (std::size_t c = 0; c < v.cols(); ++c) v(r, c) += b.value()[c];
  return make_op(std::move(v), {x, b}, [](Node& s) {
    in(s, 0).accumulate(s.grad);
    Node& nb = in(s, 1);
    if (nb.requires_grad) {
      Mat db(1, s.grad.cols());
      for (std::size_t r = 0; r < s.grad.rows(); ++r)
        for (std::size_t c = 0; c < s.grad.cols(); ++c) db[c] += s.grad(r, c);
      nb.accumulate(db);
    }
  });
}

Var mul_row(const Var& x, const Var& b) {
  require_row_vector("mul_row", x.value(), b.value());
  Mat v = x.value();
  for (std::size_t r = 0; r < v.rows(); ++r)
    for (std::size_t c = 0; c < v.cols(); ++c) v(r, c) *= b.value()[c];
  return make_op(std::move(v), {x, b}, [](Node& s) {
    Node& nx = in(s, 0);
    Node& nb = in(s, 1);
    if (nx.requires_grad) {
      Mat dx = s.grad;
      for (std::size_t r = 0; r < dx.rows(); ++r)
        for (std::size_t c = 0; c < dx.cols(); ++c) dx(r, c) *= nb.value[c];
      nx.accumulate(dx);
    }
    if (nb.requires_grad) {
      Mat db(1, s.grad.cols());
      for (std::size_t r = 0; r < s.grad.rows(); ++r)
        for (std::size_t c = 0; c < s.grad.cols(); ++c)
          db[c] += s.grad(r, c) * nx.value(r, c);
      nb.accumulate(db);
    }
  });
}

Var add_tiled(const Var& x, const Var& b) {
  const Mat& xv = x.value();
  const Mat& bv = b.value();
  if (bv.cols() != xv.cols() || bv.rows() == 0 || xv.rows() % bv.rows() != 0) {
    throw DimensionError("add_tiled: " + shape_str(bv.rows(), bv.cols()) +
                         " does not tile " + shape_str(xv.rows(), xv.cols()));
  }
  Mat v = xv;
  const std::size_t blk = bv.size();
  for (std::size_t i = 0; i < v.size(); ++i) v[i] += bv[i % blk];
  return make_op(std::move(v), {x, b}, [](Node& s) {
    in(s, 0).accumulate(s.grad);
    Node& nb = in(s, 1);
    if (nb.requires_grad) {
      Mat db(nb.value.rows(), nb.value.cols());
      const std::size_t blk = db.size();
      for (std::size_t i = 0; i < s.grad.size(); ++i) db[i % blk] += s.grad[i];
      nb.accumulate(db);
    }
  });
}

// ---- batched products ----------------------------------------------------

Var bmm(const Var& a, const Var& b, std::size_t batch) {
  const Mat& av = a.value();
  const Mat& bv = b.value();
  if (batch == 0 || av.rows() % batch || bv.rows() % batch ||
      av.cols() != bv.rows() / batch) {
    throw DimensionError("bmm: " + shape_str(av.rows(), av.cols()) + " x " +
                         shape_str(bv.rows(), bv.cols()) + " over batch " +
                         std::to_string(batch));
  }
  const std::size_t m = av.rows() / batch, k = av.cols(), p = bv.cols();
  Mat out(batch * m, p);
  for (std::size_t i = 0; i < batch; ++i) {
    gemm(false, false, m, p, k, av.row_ptr(i * m), k, bv.row_ptr(i * k), p,
         out.row_ptr(i * m), p, true);
  }
  return make_op(std::move(out), {a, b}, [batch, m, k, p](Node& s) {
    Node& na = in(s, 0);
    Node& nb = in(s, 1);
    for (std::size_t i = 0; i < batch; ++i) {
      const double* g = s.grad.row_ptr(i * m);
      if (na.requires_grad) {
        gemm(false, true, m, k, p, g, p, nb.value.row_ptr(i * k), p,
             na.grad_buffer().row_ptr(i * m), k, true);
      }
      if (nb.requires_grad) {
        gemm(true, false, k, p, m, na.value.row_ptr(i * m), k, g, p,
             nb.grad_buffer().row_ptr(i * k), p, true);
      }
    }
  });
}

Var bmm_nt(const Var& a, const Var& b, std::size_t batch) {
  const Mat& av = a.value();
  const Mat& bv = b.value();
  if (batch == 0 || av.rows() % batch || bv.rows() % batch ||
      av.cols() != bv.cols()) {
    throw DimensionError("bmm_nt: " + shape_str(av.rows(), av.cols()) + " x " +
                         shape_str(bv.rows(), bv.cols()) + "^T over batch " +
                         std::to_string(batch));
  }
  const std::size_t m = av.rows() / batch, k = av.cols(), p = bv.rows() / batch;
  Mat out(batch * m, p);
  for (std::size_t i = 0; i < batch; ++i) {
    gemm(false, true, m, p, k, av.row_ptr(i * m), k, bv.row_ptr(i * p), k,
         out.row_ptr(i * m), p, true);
  }
  return make_op(std::move(out), {a, b}, [batch, m, k, p](Node& s) {
    Node& na = in(s, 0);
    Node& nb = in(s, 1);
    for (std::size_t i = 0; i < batch; ++i) {
      const double* g = s.grad.row_ptr(i * m);
      if (na.requires_grad) {
        gemm(false, false, m, k, p, g, p, nb.value.row_ptr(i * p), k,
             na.grad_buffer().row_ptr(i * m), k, true);
      }
      if (nb.requires_grad) {
        gemm(true, false, p, k, m, g, p, na.value.row_ptr(i * m), k,
             nb.grad_buffer().row_ptr(i * p), k, true);
      }
    }
  });
}

Var frame_left_mul_t(const Var& u, const Var& y, std::size_t frames) {
  const Mat& uv = u.value();
  const Mat& yv = y.value();
  if (frames == 0 || yv.rows() != frames * uv.rows()) {
    throw DimensionError("frame_left_mul_t: U " + shape_str(uv.rows(), uv.cols()) +
                         " against " + std::to_string(frames) + " frames of " +
                         shape_str(yv.rows(), yv.cols()));
  }
  const std::size_t r = uv.rows(), ro = uv.cols(), c = yv.cols();
  Mat out(frames * ro, c);
  for (std::size_t f = 0; f < frames; ++f) {
    gemm(true, false, ro, c, r, uv.data().data(), ro, yv.row_ptr(f * r), c,
         out.row_ptr(f * ro), c, true);
  }
  return make_op(std::move(out), {u, y}, [frames, r, ro, c](Node& s) {
    Node& nu = in(s, 0);
    Node& ny = in(s, 1);
    for (std::size_t f = 0; f < frames; ++f) {
      const double* g = s.grad.row_ptr(f * ro);
      if (nu.requires_grad) {
        gemm(false, true, r, ro, c, ny.value.row_ptr(f * r), c, g, c,
             nu.grad_buffer().data().data(), ro, true);
      }
      if (ny.requires_grad) {
        gemm(false, false, r, c, ro, nu.value.data().data(), ro, g, c,
             ny.grad_buffer().row_ptr(f * r), c, true);
      }
    }
  });
}

// ---- normalizations ------------------------------------------------------

Var softmax_rows(const Var& a) {
  return make_op(softmax_rows(a.value()), {a}, [](Node& s) {
    const Mat& y = s.value;
    Mat dx(y.rows(), y.cols());
    for (std::size_t r = 0; r < y.rows(); ++r) {
      double dot = 0.0;
      for (std::size_t c = 0; c < y.cols(); ++c) dot += s.grad(r, c) * y(r, c);
      for (std::size_t c = 0; c < y.cols(); ++c)
        dx(r, c) = y(r, c) * (s.grad(r, c) - dot);
    }
    in(s, 0).accumulate(dx);
  });
}

Var softmax_cols(const Var& a) { return transpose(softmax_rows(transpose(a))); }

namespace {
Mat col_norms(const Mat& a, bool l2) {
  Mat n(1, a.cols());
  for (std::size_t r = 0; r < a.rows(); ++r)
    for (std::size_t c = 0; c < a.cols(); ++c)
      n[c] += l2 ? a(r, c) * a(r, c) : std::abs(a(r, c));
  if (l2)
    for (auto& v : n.data()) v = std::sqrt(v);
  return n;
}
}  // namespace

Var normalize_cols_l1(const Var& a, double guard) {
  const Mat& av = a.value();
  Mat norms = col_norms(av, false);
  Mat y = av;
  for (std::size_t r = 0; r < y.rows(); ++r)
    for (std::size_t c = 0; c < y.cols(); ++c)
      if (norms[c] >= guard) y(r, c) /= norms[c];
  return make_op(std::move(y), {a}, [norms, guard](Node& s) {
    const Mat& x = in(s, 0).value;
    Mat dx = s.grad;
    for (std::size_t c = 0; c < x.cols(); ++c) {
      const double n = norms[c];
      if (n < guard) continue;
      double gx = 0.0;
      for (std::size_t r = 0; r < x.rows(); ++r) gx += s.grad(r, c) * x(r, c);
      for (std::size_t r = 0; r < x.rows(); ++r) {
        const double sg = (x(r, c) > 0) - (x(r, c) < 0);
        dx(r, c) = s.grad(r, c) / n - sg * gx / (n * n);
      }
    }
    in(s, 0).accumulate(dx);
  });
}

Var normalize_cols_l2(const Var& a, double guard) {
  const Mat& av = a.value();
  Mat norms = col_norms(av, true);
  Mat y = av;
  for (std::size_t r = 0; r < y.rows(); ++r)
    for (std::size_t c = 0; c < y.cols(); ++c)
      if (norms[c] >= guard) y(r, c) /= norms[c];
  return make_op(std::move(y), {a}, [norms, guard](Node& s) {
    const Mat& x = in(s, 0).value;
    Mat dx = s.grad;
    for (std::size_t c = 0; c < x.cols(); ++c) {
      const double n = norms[c];
      if (n < guard) continue;
      double gx = 0.0;
      for (std::size_t r = 0; r < x.rows(); ++r) gx += s.grad(r, c) * x(r, c);
      for (std::size_t r = 0; r < x.rows(); ++r)
        dx(r, c) = s.grad(r, c) / n - x(r, c) * gx / (n * n * n);
    }
    in(s, 0).accumulate(dx);
  });
}

Var layernorm_rows(const Var& x, double eps) {
  const Mat& xv = x.value();
  const std::size_t d = xv.cols();
  Mat y(xv.rows(), d);
  Mat rstd(xv.rows(), 1);
  for (std::size_t r = 0; r < xv.rows(); ++r) {
    const double* xr = xv.row_ptr(r);
    double mu = 0.0;
    for (std::size_t c = 0; c < d; ++c) mu += xr[c];
    mu /= static_cast<double>(d);
    double var = 0.0;
    for (std::size_t c = 0; c < d; ++c) var += (xr[c] - mu) * (xr[c] - mu);
    var /= static_cast<double>(d);
    const double rs = 1.0 / std::sqrt(var + eps);
    rstd[r] = rs;
    for (std::size_t c = 0; c < d; ++c) y(r, c) = (xr[c] - mu) * rs;
  }
  return make_op(std::move(y), {x}, [rstd](Node& s) {
    const Mat& yv = s.value;
    const std::size_t d = yv.cols();
    Mat dx(yv.rows(), d);
    for (std::size_t r = 0; r < yv.rows(); ++r) {
      double mg = 0.0, mgy = 0.0;
      for (std::size_t c = 0; c < d; ++c) {
        mg += s.grad(r, c);
        mgy += s.grad(r, c) * yv(r, c);
      }
      mg /= static_cast<double>(d);
      mgy /= static_cast<double>(d);
      for (std::size_t c = 0; c < d; ++c)
        dx(r, c) = rstd[r] * (s.grad(r, c) - mg - yv(r, c) * mgy);
    }
    in(s, 0).accumulate(dx);
  });
}

namespace {
constexpr double kGeluC = 0.7978845608028654;  // sqrt(2/pi)
constexpr double kGeluA = 0.044715;

double stable_sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

template <typename F, typename DF>
Var unary(const Var& x, F f, DF df) {
  Mat y = x.value();
  for (auto& v : y.data()) v = f(v);
  return make_op(std::move(y), {x}, [df](Node& s) {
    const Mat& xv = in(s, 0).value;
    Mat dx = s.grad;
    for (std::size_t i = 0; i < dx.size(); ++i) dx[i] *= df(xv[i]);
    in(s, 0).accumulate(dx);
  });
}
}  // namespace

Var gelu(const Var& x) {
  return unary(
      x,
      [](double v) {
        return 0.5 * v * (1.0 + std::tanh(kGeluC * (v + kGeluA * v * v * v)));
      },
      [](double v) {
        const double t = std::tanh(kGeluC * (v + kGeluA * v * v * v));
        return 0.5 * (1.0 + t) +
               0.5 * v * (1.0 - t * t) * kGeluC * (1.0 + 3.0 * kGeluA * v * v);
      });
}

Var silu(const Var& x) {
  return unary(
      x, [](double v) { return v * stable_sigmoid(v); },
      [](double v) {
        const double sg = stable_sigmoid(v);
        return sg + v * sg * (1.0 - sg);
      });
}

Var sigmoid(const Var& x) {
  return unary(x, stable_sigmoid, [](double v) {
    const double sg = stable_sigmoid(v);
    return sg * (1.0 - sg);
  });
}

// ---- layout ----------------------------------------------------------------

Var gather(const Var& x, std::size_t rows, std::size_t cols,
           std::shared_ptr<const std::vector<std::size_t>> index) {
  if (index->size() != rows * cols) {
    throw DimensionError("gather: " + std::to_string(index->size()) +
                         " indices for shape " + shape_str(rows, cols));
  }
  const Mat& xv = x.value();
  Mat out(rows, cols);
  for (std::size_t i = 0; i < out.size(); ++i) {
    const std::size_t j = (*index)[i];
    if (j >= xv.size()) throw DimensionError("gather: index out of range");
    out[i] = xv[j];
  }
  return make_op(std::move(out), {x}, [index](Node& s) {
    Mat& dx = in(s, 0).grad_buffer();
    for (std::size_t i = 0; i < s.grad.size(); ++i) dx[(*index)[i]] += s.grad[i];
  });
}

Var reshape(const Var& x, std::size_t rows, std::size_t cols) {
  const std::size_t r0 = x.rows(), c0 = x.cols();
  return make_op(x.value().reshaped(rows, cols), {x}, [r0, c0](Node& s) {
    in(s, 0).accumulate(s.grad.reshaped(r0, c0));
  });
}

Var slice_rows(const Var& x, std::size_t begin, std::size_t end) {
  return make_op(slice_rows(x.value(), begin, end), {x}, [begin](Node& s) {
    Mat& dx = in(s, 0).grad_buffer();
    const std::size_t off = begin * dx.cols();
    for (std::size_t i = 0; i < s.grad.size(); ++i) dx[off + i] += s.grad[i];
  });
}

Var slice_cols(const Var& x, std::size_t begin, std::size_t end) {
  return make_op(slice_cols(x.value(), begin, end), {x}, [begin](Node& s) {
    Mat& dx = in(s, 0).grad_buffer();
    for (std::size_t r = 0; r < s.grad.rows(); ++r)
      for (std::size_t c = 0; c < s.grad.cols(); ++c) dx(r, begin + c) += s.grad(r, c);
  });
}

Var concat_rows(const std::vector<Var>& parts) {
  std::vector<Mat> vals;
  vals.reserve(parts.size());
  for (const auto& p : parts) vals.push_back(p.value());
  return make_op(concat_rows(vals), parts, [](Node& s) {
    std::size_t off = 0;
    for (auto& p : s.parents) {
      const std::size_t n = p->value.rows();
      if (p->requires_grad) p->accumulate(slice_rows(s.grad, off, off + n));
      off += n;
    }
  });
}

Var concat_cols(const std::vector<Var>& parts) {
  std::vector<Mat> vals;
  vals.reserve(parts.size());
  for (const auto& p : parts) vals.push_back(p.value());
  return make_op(concat_cols(vals), parts, [](Node& s) {
    std::size_t off = 0;
    for (auto& p : s.parents) {
      const std::size_t n = p->value.cols();
      if (p->requires_grad) p->accumulate(slice_cols(s.grad, off, off + n));
      off += n;
    }
  });
}

// ---- reductions ------------------------------------------------------------

Var mse(const Var& pred, const Mat& target) {
  if (!pred.value().same_shape(target)) {
    throw DimensionError("mse: " + shape_str(pred.rows(), pred.cols()) + " vs " +
                         shape_str(target.rows(), target.cols()));
  }
  const Mat diff = sub(pred.value(), target);
  const double n = static_cast<double>(diff.size());
  return make_op(Mat(1, 1, frobenius(diff, diff) / n), {pred},
                 [diff, n](Node& s) {
                   in(s, 0).accumulate(scale(diff, 2.0 * s.grad[0] / n));
                 });
}

Var weighted_sum(const Var& x, const Mat& w) {
  return make_op(Mat(1, 1, frobenius(x.value(), w)), {x},
                 [w](Node& s) { in(s, 0).accumulate(scale(w, s.grad[0])); });
}

Var sum_all(const Var& x) {
  return make_op(Mat(1, 1, sum(x.value())), {x}, [](Node& s) {
    in(s, 0).accumulate(Mat(s.parents[0]->value.rows(), s.parents[0]->value.cols(),
                            s.grad[0]));
  });
}

// ---- parameters --------------------------------------------------------------

void ParamSet::add(const std::string& name, Mat value, bool trainable) {
  if (!entries_.emplace(name, Param{std::move(value), trainable}).second) {
    throw ConfigError("duplicate parameter '" + name + "'", name);
  }
}

void ParamSet::set(const std::string& name, Mat value) {
  Mat& cur = at(name);
  if (!cur.same_shape(value)) {
    throw DimensionError("parameter '" + name + "': " +
                         shape_str(value.rows(), value.cols()) + " vs " +
                         shape_str(cur.rows(), cur.cols()));
  }
  cur = std::move(value);
}

Param& ParamSet::param(const std::string& name) {
  auto it = entries_.find(name);
  if (it == entries_.end()) throw ConfigError("unknown parameter '" + name + "'", name);
  return it->second;
}

const Param& ParamSet::param(const std::string& name) const {
  auto it = entries_.find(name);
  if (it == entries_.end()) throw ConfigError("unknown parameter '" + name + "'", name);
  return it->second;
}

const Mat& ParamSet::at(const std::string& name) const { return param(name).value; }
Mat& ParamSet::at(const std::string& name) { return param(name).value; }

std::size_t ParamSet::scalar_count() const {
  std::size_t n = 0;
  for (const auto& [_, p] : entries_) n += p.value.size();
  return n;
}

ParamSet ParamSet::subset(const std::string& prefix) const {
  ParamSet out;
  for (const auto& [name, p] : entries_)
    if (name.starts_with(prefix)) out.entries_.emplace(name, p);
  return out;
}

void ParamSet::merge(const ParamSet& other) {
  for (const auto& [name, p] : other.entries_) entries_[name] = p;
}

ParamSet ParamSet::zeros_like() const {
  ParamSet out;
  for (const auto& [name, p] : entries_)
    out.entries_.emplace(name, Param{Mat(p.value.rows(), p.value.cols()), p.trainable});
  return out;
}

void ParamSet::set_trainable_only(const std::vector<std::string>& prefixes) {
  for (auto& [name, p] : entries_) {
    p.trainable = std::any_of(prefixes.begin(), prefixes.end(),
                              [&](const std::string& pre) { return name.starts_with(pre); });
  }
}

double global_norm(const ParamSet& ps) {
  double s = 0.0;
  for (const auto& [_, p] : ps)
    for (double v : p.value.data()) s += v * v;
  return std::sqrt(s);
}

Var ParamBinder::operator()(const std::string& name) {
  auto it = bound_.find(name);
  if (it != bound_.end()) return it->second;
  const Param& p = params_->param(name);
  Var v = (track_ && p.trainable) ? Var::leaf(p.value) : Var::constant(p.value);
  bound_.emplace(name, v);
  return v;
}

ParamSet ParamBinder::grads() const {
  ParamSet out = params_->zeros_like();
  accumulate_grads(out);
  return out;
}

void ParamBinder::accumulate_grads(ParamSet& into) const {
  for (const auto& [name, v] : bound_) {
    if (v.grad().empty()) continue;
    axpy(1.0, v.grad(), into.at(name));
  }
}

}  // namespace mattn
