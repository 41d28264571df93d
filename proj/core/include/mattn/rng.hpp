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

#ifndef MATTN_RNG_HPP_
#define MATTN_RNG_HPP_

#include <cstdint>
#include <string_view>

#include "mattn/tensor.hpp"

namespace mattn {

// Counter-based generator: the i-th draw (i = 1, 2, ...) of a stream keyed by
// `seed` is mix64(seed + i * 0x9E3779B97F4A7C15), where mix64 is the
// SplitMix64 finalizer. Uniforms take the top 53 bits; normals use the
// Box-Muller transform on consecutive uniform pairs. Identical seeds produce
// identical streams on every platform.
class CounterRng {
 public:
  explicit CounterRng(std::uint64_t seed) : key_(seed) {}

  // Independent stream for a (seed, label) or (seed, index) pair.
  static CounterRng derive(std::uint64_t seed, std::string_view label);
  static CounterRng derive(std::uint64_t seed, std::uint64_t index);

  std::uint64_t next_u64();
  double uniform();  // [0, 1)
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  double normal();
  // Uniform integer in [lo, hi].
  std::uint64_t uniform_int(std::uint64_t lo, std::uint64_t hi);

  Mat normal_mat(std::size_t rows, std::size_t cols, double stddev = 1.0);
  Mat uniform_mat(std::size_t rows, std::size_t cols, double lo, double hi);

  std::uint64_t counter() const { return counter_; }

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

std::uint64_t mix64(std::uint64_t x);
// FNV-1a, used for stable label hashing.
std::uint64_t fnv1a(std::string_view s);

}  // namespace mattn

#endif  // MATTN_RNG_HPP_
