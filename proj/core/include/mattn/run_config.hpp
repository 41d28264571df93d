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

#ifndef MATTN_RUN_CONFIG_HPP_
#define MATTN_RUN_CONFIG_HPP_

#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "mattn/blocks.hpp"
#include "mattn/diffusion.hpp"
#include "mattn/synth.hpp"

namespace mattn {

// Fully resolved run settings. Built from a plain key=value file: the preset
// (default "toy") is expanded first, then file entries, then overrides.
struct RunConfig {
  std::string preset = "toy";
  std::string variant = "hybrid";
  std::size_t depth = 1;
  std::size_t D = 16, T = 8, N = 16;
  std::size_t N_qk = 4, N_v = 16, D_qk = 16, D_v = 16;
  std::size_t heads_m = 1, heads_n = 4;
  std::size_t mlp_hidden = 0;  // 0: 4D
  std::string u_norm = "softmax";
  std::string fusion = "concat_mlp";
  double eta = 1.0;
  std::size_t steps = 50;  // sampling steps
  std::size_t K = 1000;
  double lr = 3e-3;
  std::size_t batch = 4;
  std::size_t train_steps = 2000;
  double ema_decay = 0.999;
  double grad_clip = 1.0;
  std::size_t clip_start = 0;
  std::uint64_t seed = 0;
  std::string out_dir = "out";
  // Data and harness settings.
  std::string dataset = "moving_square";
  std::size_t image_size = 16, patch = 4;
  std::size_t dataset_clips = 64;
  int max_velocity = 2;
  std::vector<std::size_t> T_list = {16, 32, 64, 128};
  std::size_t repeats = 5;
  std::size_t num_samples = 2;

  BlockConfig block_config() const;
  TrainConfig train_config() const;
  SamplerConfig sampler_config() const;
  DatasetConfig dataset_config() const;

  // Checks every field; throws ConfigError naming the key.
  void validate() const;
  // Also checks that N equals (image_size / patch)^2.
  void validate_data() const;

  // Canonical key=value text, one line per key in sorted order.
  std::string to_text() const;
};

// Applies the named preset to every key it defines.
void apply_preset(RunConfig& cfg, const std::string& name);
// Sets one key from text; unknown keys and unparsable values are ConfigErrors.
void set_key(RunConfig& cfg, const std::string& key, const std::string& value);

// Parses "key=value" lines ('#' starts a comment). Duplicate keys: last wins.
std::vector<std::pair<std::string, std::string>> parse_kv_text(const std::string& text);

RunConfig resolve_config(const std::vector<std::pair<std::string, std::string>>& file_entries,
                         const std::vector<std::pair<std::string, std::string>>& overrides);
RunConfig load_config(const std::string& path,
                      const std::vector<std::pair<std::string, std::string>>& overrides = {});

std::vector<std::string> config_keys();

}  // namespace mattn

#endif  // MATTN_RUN_CONFIG_HPP_
