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

#include "mattn/synth.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <fstream>

#include "mattn/checkpoint.hpp"
#include "mattn/errors.hpp"
#include "mattn/rng.hpp"

namespace mattn {

std::string to_string(SynthKind k) {
  switch (k) {
    case SynthKind::kMovingSquare: return "moving_square";
    case SynthKind::kBouncingDot: return "bouncing_dot";
    case SynthKind::kStatic: return "static";
  }
  return "?";
}

SynthKind parse_synth_kind(const std::string& s) {
  if (s == "moving_square") return SynthKind::kMovingSquare;
  if (s == "bouncing_dot") return SynthKind::kBouncingDot;
  if (s == "static") return SynthKind::kStatic;
  throw ConfigError("dataset must be moving_square|bouncing_dot|static, got '" + s + "'",
                    "dataset");
}

void SynthConfig::validate() const {
  if (T == 0) throw ConfigError("T must be positive", "T");
  if (s == 0 || s >= P) throw ConfigError("object size must satisfy 0 < s < P", "image_size");
  if (static_cast<std::size_t>(std::abs(vx)) >= P || static_cast<std::size_t>(std::abs(vy)) >= P) {
    throw ConfigError("|velocity| must be < P", "max_velocity");
  }
}

namespace {

// Advances one coordinate with reflection at 0 and hi.
void reflect_step(int& x, int& v, int hi) {
  x += v;
  while (x < 0 || x > hi) {
    if (x < 0) x = -x;
    if (x > hi) x = 2 * hi - x;
    v = -v;
  }
}

void draw(Mat& f, SynthKind kind, int x, int y, std::size_t s) {
  const double r = static_cast<double>(s) / 2.0;
  const double cx = x + r, cy = y + r;
  for (std::size_t i = 0; i < s; ++i)
    for (std::size_t j = 0; j < s; ++j) {
      const std::size_t row = static_cast<std::size_t>(y) + i;
      const std::size_t col = static_cast<std::size_t>(x) + j;
      if (kind == SynthKind::kBouncingDot) {
        const double dy = row + 0.5 - cy, dx = col + 0.5 - cx;
        if (dx * dx + dy * dy > r * r) continue;
      }
      f(row, col) = 1.0;
    }
}

}  // namespace

PixelClip generate_clip(const SynthConfig& cfg) {
  cfg.validate();
  const int hi = static_cast<int>(cfg.P - cfg.s);
  CounterRng rng = CounterRng::derive(cfg.seed, "synth.start");
  int x = static_cast<int>(rng.uniform_int(0, static_cast<std::uint64_t>(hi)));
  int y = static_cast<int>(rng.uniform_int(0, static_cast<std::uint64_t>(hi)));
  int vx = cfg.kind == SynthKind::kStatic ? 0 : cfg.vx;
  int vy = cfg.kind == SynthKind::kStatic ? 0 : cfg.vy;
  const SynthKind shape =
      cfg.kind == SynthKind::kStatic ? SynthKind::kMovingSquare : cfg.kind;
  PixelClip clip{cfg.T, cfg.P, {}};
  for (std::size_t t = 0; t < cfg.T; ++t) {
    Mat f(cfg.P, cfg.P);
    draw(f, shape, x, y, cfg.s);
    clip.frames.push_back(std::move(f));
    reflect_step(x, vx, hi);
    reflect_step(y, vy, hi);
  }
  return clip;
}

Mat tokenizer_projection(const TokenizerConfig& cfg) {
  const std::size_t pp = cfg.p * cfg.p, D = cfg.D;
  const std::size_t tall = std::max(pp, D), wide = std::min(pp, D);
  CounterRng rng = CounterRng::derive(cfg.seed, "tokenizer");
  const Mat g = rng.normal_mat(tall, wide);
  Eigen::MatrixXd G(tall, wide);
  for (std::size_t i = 0; i < tall; ++i)
    for (std::size_t j = 0; j < wide; ++j) G(i, j) = g(i, j);
  const Eigen::HouseholderQR<Eigen::MatrixXd> qr(G);
  const Eigen::MatrixXd Q = qr.householderQ() * Eigen::MatrixXd::Identity(tall, wide);
  const Eigen::MatrixXd R = qr.matrixQR();
  Mat out(pp, D);
  for (std::size_t i = 0; i < tall; ++i)
    for (std::size_t j = 0; j < wide; ++j) {
      const double v = R(j, j) < 0 ? -Q(i, j) : Q(i, j);
      if (pp >= D) {
        out(i, j) = v;
      } else {
        out(j, i) = v;
      }
    }
  return out;
}

namespace {

void check_patch(std::size_t P, std::size_t p) {
  if (p == 0 || P % p != 0) {
    throw ConfigError("patch=" + std::to_string(p) + " does not divide image_size=" +
                          std::to_string(P),
                      "patch");
  }
}

}  // namespace

VideoTokens tokenize(const PixelClip& clip, const TokenizerConfig& cfg) {
  check_patch(clip.P, cfg.p);
  const std::size_t g = clip.P / cfg.p, N = g * g, pp = cfg.p * cfg.p;
  Mat patches(clip.T * N, pp);
  for (std::size_t t = 0; t < clip.T; ++t)
    for (std::size_t i = 0; i < g; ++i)
      for (std::size_t j = 0; j < g; ++j)
        for (std::size_t a = 0; a < cfg.p; ++a)
          for (std::size_t b = 0; b < cfg.p; ++b)
            patches(t * N + i * g + j, a * cfg.p + b) =
                clip.frames[t](i * cfg.p + a, j * cfg.p + b);
  return VideoTokens(clip.T, N, matmul(patches, tokenizer_projection(cfg)));
}

PixelClip detokenize(const VideoTokens& tokens, const TokenizerConfig& cfg, std::size_t P) {
  check_patch(P, cfg.p);
  const std::size_t g = P / cfg.p, pp = cfg.p * cfg.p;
  if (tokens.N != g * g || tokens.D != cfg.D) {
    throw ConfigError("detokenize: tokens do not match the tokenizer shape", "patch");
  }
  const Mat W = tokenizer_projection(cfg);
  // Solve patches * W = tokens in the least-squares sense: W^T patches^T = tokens^T.
  Eigen::MatrixXd Wt(cfg.D, pp);
  for (std::size_t r = 0; r < pp; ++r)
    for (std::size_t c = 0; c < cfg.D; ++c) Wt(c, r) = W(r, c);
  Eigen::MatrixXd rhs(cfg.D, tokens.tokens.rows());
  for (std::size_t r = 0; r < tokens.tokens.rows(); ++r)
    for (std::size_t c = 0; c < cfg.D; ++c) rhs(c, r) = tokens.tokens(r, c);
  const Eigen::MatrixXd sol = Wt.completeOrthogonalDecomposition().solve(rhs);
  PixelClip clip{tokens.T, P, {}};
  for (std::size_t t = 0; t < tokens.T; ++t) {
    Mat f(P, P);
    for (std::size_t i = 0; i < g; ++i)
      for (std::size_t j = 0; j < g; ++j)
        for (std::size_t a = 0; a < cfg.p; ++a)
          for (std::size_t b = 0; b < cfg.p; ++b)
            f(i * cfg.p + a, j * cfg.p + b) =
                sol(static_cast<Eigen::Index>(a * cfg.p + b),
                    static_cast<Eigen::Index>(t * g * g + i * g + j));
    clip.frames.push_back(std::move(f));
  }
  return clip;
}

Mat Normalizer::apply(const Mat& x) const {
  Mat out = x;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = (x[i] - mean) / stddev;
  return out;
}

Mat Normalizer::invert(const Mat& x) const {
  Mat out = x;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = x[i] * stddev + mean;
  return out;
}

Normalizer fit_normalizer(const std::vector<VideoTokens>& data) {
  double s = 0.0, s2 = 0.0, n = 0.0;
  for (const auto& v : data)
    for (std::size_t i = 0; i < v.tokens.size(); ++i) {
      s += v.tokens[i];
      s2 += v.tokens[i] * v.tokens[i];
      n += 1.0;
    }
  Normalizer z;
  if (n == 0.0) return z;
  z.mean = s / n;
  const double var = s2 / n - z.mean * z.mean;
  z.stddev = var > 1e-24 ? std::sqrt(var) : 1.0;
  return z;
}

Dataset make_dataset(const DatasetConfig& cfg) {
  Dataset ds;
  for (std::size_t i = 0; i < cfg.clips; ++i) {
    CounterRng rng = CounterRng::derive(cfg.seed, static_cast<std::uint64_t>(i));
    SynthConfig sc = cfg.base;
    const auto span = static_cast<std::uint64_t>(2 * cfg.max_velocity);
    sc.vx = static_cast<int>(rng.uniform_int(0, span)) - cfg.max_velocity;
    sc.vy = static_cast<int>(rng.uniform_int(0, span)) - cfg.max_velocity;
    sc.seed = rng.next_u64();
    ds.clips.push_back(tokenize(generate_clip(sc), cfg.tokenizer));
  }
  ds.normalizer = fit_normalizer(ds.clips);
  for (auto& c : ds.clips) c.tokens = ds.normalizer.apply(c.tokens);
  return ds;
}

void write_pgm_strip(const std::string& path, const PixelClip& clip) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw ConfigError("cannot write '" + path + "'", "out_dir");
  const std::size_t W = clip.T * clip.P;
  os << "P5\n" << W << " " << clip.P << "\n255\n";
  std::string row(W, '\0');
  for (std::size_t r = 0; r < clip.P; ++r) {
    for (std::size_t t = 0; t < clip.T; ++t)
      for (std::size_t c = 0; c < clip.P; ++c) {
        const double v = std::clamp(clip.frames[t](r, c), 0.0, 1.0);
        row[t * clip.P + c] = static_cast<char>(static_cast<unsigned char>(std::lround(v * 255)));
      }
    os.write(row.data(), static_cast<std::streamsize>(W));
  }
}

void save_clip(const std::string& path, const PixelClip& clip) {
  NamedTensor t;
  t.name = "clip";
  t.dims = {static_cast<std::uint32_t>(clip.T), static_cast<std::uint32_t>(clip.P),
            static_cast<std::uint32_t>(clip.P)};
  for (const auto& f : clip.frames) t.data.insert(t.data.end(), f.data().begin(), f.data().end());
  save_tensors(path, {t});
}

PixelClip load_clip(const std::string& path) {
  const auto e = load_tensors(path);
  if (e.size() != 1 || e[0].dims.size() != 3 || e[0].dims[1] != e[0].dims[2]) {
    throw CheckpointError("clip file '" + path + "' has an unexpected layout");
  }
  const std::size_t T = e[0].dims[0], P = e[0].dims[1];
  PixelClip clip{T, P, {}};
  for (std::size_t t = 0; t < T; ++t) {
    clip.frames.emplace_back(P, P, std::span<const double>(e[0].data).subspan(t * P * P, P * P));
  }
  return clip;
}

}  // namespace mattn
