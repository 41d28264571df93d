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

#include "mattn/counters.hpp"

#include <algorithm>

namespace mattn {
namespace memory {
namespace {
thread_local std::size_t g_live = 0;
thread_local std::size_t g_peak = 0;
}  // namespace

std::size_t live_bytes() { return g_live; }
std::size_t peak_bytes() { return g_peak; }
void reset_peak() { g_peak = g_live; }

namespace detail {
void on_alloc(std::size_t bytes) {
  g_live += bytes;
  g_peak = std::max(g_peak, g_live);
}
void on_free(std::size_t bytes) { g_live -= bytes; }
}  // namespace detail
}  // namespace memory

namespace flops {
namespace {
thread_local bool g_enabled = false;
thread_local FlopCategory g_category = FlopCategory::kOther;
thread_local Tally g_tally;
}  // namespace

std::uint64_t Tally::total() const {
  std::uint64_t s = 0;
  for (auto v : by_category) s += v;
  return s;
}

void record_matmul(std::size_t m, std::size_t k, std::size_t p) {
  if (!g_enabled) return;
  g_tally.by_category[static_cast<int>(g_category)] +=
      2ull * static_cast<std::uint64_t>(m) * k * p;
}

CountingScope::CountingScope() {
  g_tally = Tally{};
  g_enabled = true;
}
CountingScope::~CountingScope() { g_enabled = false; }
Tally CountingScope::tally() const { return g_tally; }

Tag::Tag(FlopCategory c) : saved_(g_category) { g_category = c; }
Tag::~Tag() { g_category = saved_; }

}  // namespace flops
}  // namespace mattn
