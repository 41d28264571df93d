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

#ifndef MATTN_SYNTH_HPP_
#define MATTN_SYNTH_HPP_

#include <cstdint>
#include <string>
#include <vector>

#include "mattn/tensor.hpp"

namespace mattn {

enum class SynthKind { kMovingSquare, kBouncingDot, kStatic };
std::string to_string(SynthKind k);
SynthKind parse_synth_kind(const std::string& s);

struct SynthConfig {
  SynthKind kind = SynthKind::kMovingSquare;
  std::size_t T = 8;
  std::size_t P = 16;  // image side
  std::size_t s = 4;   // square side / dot diameter
  int vx = 1, vy = 0;  // pixels per frame
  std::uint64_t seed = 0;  // start position
  void validate() const;
};

// T frames of P x P pixels, background 0 and foreground 1.
struct PixelClip {
  std::size_t T = 0, P = 0;
  std::vector<Mat> frames;
};

PixelClip generate_clip(const SynthConfig& cfg);

struct TokenizerConfig {
  std::size_t p = 4;   // patch side
  std::size_t D = 16;  // token width
  std::uint64_t seed = 0;
};

// Seeded random p^2 x D projection with orthonormal columns (p^2 >= D) or
// orthonormal rows (p^2 < D).
Mat tokenizer_projection(const TokenizerConfig& cfg);

// Patch (i, j) of frame t becomes token t*N + i*(P/p) + j; no normalization.
VideoTokens tokenize(const PixelClip& clip, const TokenizerConfig& cfg);
// Least-squares inverse of tokenize.
PixelClip detokenize(const VideoTokens& tokens, const TokenizerConfig& cfg, std::size_t P);

// Dataset-level scalar standardization.
struct Normalizer {
  double mean = 0.0, stddev = 1.0;
  Mat apply(const Mat& x) const;
  Mat invert(const Mat& x) const;
};
Normalizer fit_normalizer(const std::vector<VideoTokens>& data);

struct DatasetConfig {
  SynthConfig base;
  TokenizerConfig tokenizer;
  std::size_t clips = 64;
  int max_velocity = 2;  // per-axis velocities drawn from [-v, v]
  std::uint64_t seed = 0;
};

struct Dataset {
  std::vector<VideoTokens> clips;  // normalized
  Normalizer normalizer;
};

Dataset make_dataset(const DatasetConfig& cfg);

// Horizontal strip of frames as binary PGM (P5), values clamped to [0, 1].
void write_pgm_strip(const std::string& path, const PixelClip& clip);
void save_clip(const std::string& path, const PixelClip& clip);
PixelClip load_clip(const std::string& path);

}  // namespace mattn

#endif  // MATTN_SYNTH_HPP_
