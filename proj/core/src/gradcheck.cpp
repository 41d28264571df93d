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

#include "mattn/gradcheck.hpp"

#include <algorithm>
#include <cmath>

#include "mattn/rng.hpp"

namespace mattn {

GradCheckResult check_gradients(const GraphFn& f, ParamSet params, const Mat& input,
                                const GradCheckOptions& opts) {
  Mat R;
  auto loss_of = [&](const ParamSet& ps, const Mat& x) {
    ParamBinder binder(ps, false);
    Var y = f(binder, Var::constant(x));
    if (R.size() == 0) {
      CounterRng rng(opts.seed);
      R = rng.normal_mat(y.rows(), y.cols(), 1.0);
    }
    return frobenius(y.value(), R);
  };
  loss_of(params, input);

  ParamBinder binder(params, true);
  Var x = opts.check_input ? Var::leaf(input) : Var::constant(input);
  Var y = f(binder, x);
  backward(weighted_sum(y, R));
  const ParamSet grads = binder.grads();

  GradCheckResult res;
  auto record = [&](double analytic, double fd, const std::string& where) {
    const double err = std::abs(analytic - fd) / std::max(1.0, std::abs(fd));
    ++res.checked;
    if (!(err <= res.max_rel_err)) {
      res.max_rel_err = std::isnan(err) ? INFINITY : err;
      res.worst = where;
    }
  };

  for (auto& [name, p] : params) {
    if (!p.trainable) continue;
    const Mat* g = grads.contains(name) ? &grads.at(name) : nullptr;
    for (std::size_t i = 0; i < p.value.size(); ++i) {
      const double orig = p.value[i];
      p.value[i] = orig + opts.h;
      const double lp = loss_of(params, input);
      p.value[i] = orig - opts.h;
      const double lm = loss_of(params, input);
      p.value[i] = orig;
      record(g ? (*g)[i] : 0.0, (lp - lm) / (2 * opts.h),
             name + "[" + std::to_string(i) + "]");
    }
  }
  if (opts.check_input) {
    Mat xi = input;
    const Mat& gx = x.grad();
    for (std::size_t i = 0; i < xi.size(); ++i) {
      const double orig = xi[i];
      xi[i] = orig + opts.h;
      const double lp = loss_of(params, xi);
      xi[i] = orig - opts.h;
      const double lm = loss_of(params, xi);
      xi[i] = orig;
      const double a = gx.size() ? gx[i] : 0.0;
      record(a, (lp - lm) / (2 * opts.h), "input[" + std::to_string(i) + "]");
    }
  }
  res.pass = res.max_rel_err <= opts.tol;
  return res;
}

void randomize_params(ParamSet& params, std::uint64_t seed, double stddev) {
  for (auto& [name, p] : params) {
    CounterRng rng = CounterRng::derive(seed, name);
    p.value = rng.normal_mat(p.value.rows(), p.value.cols(), stddev);
  }
}

}  // namespace mattn
