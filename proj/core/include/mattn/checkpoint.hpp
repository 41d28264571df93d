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

#ifndef MATTN_CHECKPOINT_HPP_
#define MATTN_CHECKPOINT_HPP_

#include <cstdint>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

#include "mattn/autograd.hpp"
#include "mattn/tensor.hpp"

namespace mattn {

// Binary "FDTC" container: magic, u32 version, u32 entry count, then per
// entry u16 name length, name bytes, u8 ndim, u32 dims, f64 payload. All
// integers and floats little-endian.
inline constexpr std::uint32_t kCheckpointVersion = 1;

struct NamedTensor {
  std::string name;
  std::vector<std::uint32_t> dims;
  std::vector<double> data;
};

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

void write_tensors(std::ostream& os, const std::vector<NamedTensor>& entries);
std::vector<NamedTensor> read_tensors(std::istream& is);

void save_tensors(const std::string& path, const std::vector<NamedTensor>& entries);
std::vector<NamedTensor> load_tensors(const std::string& path);

// Parameter sets are stored as 2-d entries in name order.
void save_params(const std::string& path, const ParamSet& params);
ParamSet load_params(const std::string& path);

NamedTensor to_named(const std::string& name, const Mat& m);
Mat to_mat(const NamedTensor& t);

}  // namespace mattn

#endif  // MATTN_CHECKPOINT_HPP_
