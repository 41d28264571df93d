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

#ifndef MATTN_COUNTERS_HPP_
#define MATTN_COUNTERS_HPP_

#include <array>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <new>

namespace mattn {

// Live-buffer accounting. Every matrix buffer goes through TrackedAllocator,
// so the counters reflect exactly the bytes held by live matrices on this
// thread.
namespace memory {

std::size_t live_bytes();
std::size_t peak_bytes();
// Sets the peak to the current live count.
void reset_peak();

namespace detail {
void on_alloc(std::size_t bytes);
void on_free(std::size_t bytes);
}  // namespace detail

}  // namespace memory

template <typename T>
struct TrackedAllocator {
  using value_type = T;

  TrackedAllocator() noexcept = default;
  template <typename U>
  TrackedAllocator(const TrackedAllocator<U>&) noexcept {}

  T* allocate(std::size_t n) {
    if (n > std::numeric_limits<std::size_t>::max() / sizeof(T)) {
      throw std::bad_array_new_length();
    }
    T* p = static_cast<T*>(::operator new(n * sizeof(T)));
    memory::detail::on_alloc(n * sizeof(T));
    return p;
  }
  void deallocate(T* p, std::size_t n) noexcept {
    memory::detail::on_free(n * sizeof(T));
    ::operator delete(p);
  }

  template <typename U>
  bool operator==(const TrackedAllocator<U>&) const noexcept {
    return true;
  }
};

// Matmul FLOP accounting: 2*M*K*P per product, attributed to the category
// active when the kernel runs. Counting is off unless a CountingScope is live.
enum class FlopCategory : int { kOther = 0, kProj, kSpatial, kTemporal };
inline constexpr int kNumFlopCategories = 4;

namespace flops {

struct Tally {
  std::array<std::uint64_t, kNumFlopCategories> by_category{};
  std::uint64_t total() const;
  std::uint64_t operator[](FlopCategory c) const {
    return by_category[static_cast<int>(c)];
  }
};

void record_matmul(std::size_t m, std::size_t k, std::size_t p);

// Enables counting and zeroes the tally for its lifetime. Not nestable.
class CountingScope {
 public:
  CountingScope();
  ~CountingScope();
  CountingScope(const CountingScope&) = delete;
  CountingScope& operator=(const CountingScope&) = delete;
  Tally tally() const;
};

// Sets the category for matmuls issued inside its lifetime.
class Tag {
 public:
  explicit Tag(FlopCategory c);
  ~Tag();
  Tag(const Tag&) = delete;
  Tag& operator=(const Tag&) = delete;

 private:
  FlopCategory saved_;
};

}  // namespace flops
}  // namespace mattn

#endif  // MATTN_COUNTERS_HPP_
