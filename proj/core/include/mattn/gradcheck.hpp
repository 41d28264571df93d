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

#ifndef MATTN_GRADCHECK_HPP_
#define MATTN_GRADCHECK_HPP_

#include <cstdint>
#include <functional>
#include <string>

#include "mattn/autograd.hpp"
#include "mattn/tensor.hpp"

namespace mattn {

struct GradCheckOptions {
  double h = 1e-5;
  double tol = 1e-4;
  std::uint64_t seed = 0;  // projection weights of the scalar loss
  bool check_input = true;
};

struct GradCheckResult {
  double max_rel_err = 0.0;
  std::size_t checked = 0;
  std::string worst;  // "<param>[i]" or "input[i]"
  bool pass = true;
};

// f maps (params, input) to an output; the checked scalar is <R, f> for a
// fixed random R. Relative error is |analytic - fd| / max(1, |fd|) using
// central differences of step h on every trainable parameter entry and,
// optionally, every input entry.
using GraphFn = std::function<Var(ParamBinder&, const Var&)>;
GradCheckResult check_gradients(const GraphFn& f, ParamSet params, const Mat& input,
                                const GradCheckOptions& opts = {});

// Replaces every parameter by N(0, stddev^2) noise so zero-initialized gates
// do not hide gradient paths.
void randomize_params(ParamSet& params, std::uint64_t seed, double stddev);

}  // namespace mattn

#endif  // MATTN_GRADCHECK_HPP_
