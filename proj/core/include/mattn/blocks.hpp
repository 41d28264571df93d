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

#ifndef MATTN_BLOCKS_HPP_
#define MATTN_BLOCKS_HPP_

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "mattn/attention.hpp"
#include "mattn/autograd.hpp"
#include "mattn/tensor.hpp"

namespace mattn {

// Temporal sub-layer of a block.
//   kLocal  - local factorized temporal attention
//   kGlobal - Matrix Attention (FrameDiT-G)
//   kHybrid - fused local + Matrix Attention (FrameDiT-H)
//   kFull3D - one joint attention over all tokens, no separate spatial layer
enum class BlockVariant { kLocal, kGlobal, kHybrid, kFull3D };
enum class FusionVariant { kConcatMlp, kSigmoidGate, kSoftmaxGate };

std::string to_string(BlockVariant v);
std::string to_string(FusionVariant v);
BlockVariant parse_block_variant(const std::string& s);
FusionVariant parse_fusion(const std::string& s);

// Fusion parameters in value form.
struct FusionMode {
  FusionVariant variant = FusionVariant::kConcatMlp;
  double alpha = 0.0;                 // sigmoid gate
  std::array<double, 2> logits{};     // softmax gate
  Mat weight;                         // concat_mlp, 2D x D
  Mat bias;                           // concat_mlp, 1 x D

  static FusionMode concat_mlp(std::size_t D, std::uint64_t seed);
  static FusionMode sigmoid_gate(double alpha);
  // Logits (ln 0.97, ln 0.03): weights 0.97 on the local branch.
  static FusionMode softmax_gate();
  // (local, global) weights of a gate variant.
  std::pair<double, double> gate_weights() const;
};

VideoTokens fuse(const VideoTokens& e_local, const VideoTokens& e_global,
                 const FusionMode& mode);

struct BlockConfig {
  std::string preset;
  std::size_t depth = 1;
  std::size_t D = 16;
  std::size_t N = 16;
  std::size_t D_h = 0;         // 0 -> D
  std::size_t mlp_hidden = 0;  // 0 -> 4D
  std::size_t freq_dim = 32;   // sinusoidal timestep features
  BlockVariant variant = BlockVariant::kHybrid;
  FusionVariant fusion = FusionVariant::kConcatMlp;
  MatrixAttnConfig matrix;     // N and D mirror the fields above

  std::size_t head_dim() const { return D_h ? D_h : D; }
  std::size_t hidden() const { return mlp_hidden ? mlp_hidden : 4 * D; }
  // Number of adaptive-norm sub-layers per block (spatial, temporal, MLP).
  std::size_t sublayers() const { return variant == BlockVariant::kFull3D ? 2 : 3; }
  bool uses_matrix() const {
    return variant == BlockVariant::kGlobal || variant == BlockVariant::kHybrid;
  }
  void validate() const;
};

// Model-shape presets: "p128", "p256", "toy".
BlockConfig preset_block_config(const std::string& name);

// Fixed sinusoidal features. Row p of the result encodes position p.
Mat sinusoid_table(std::size_t positions, std::size_t dim);
// Spatial-index plus frame-index embedding for T x N tokens, (T*N) x D.
Mat positional_embedding(std::size_t T, std::size_t N, std::size_t D);
// 1 x dim sinusoidal features of the diffusion step.
Mat timestep_features(double k, std::size_t dim);

namespace graph {

Var fuse(ParamBinder& params, const std::string& prefix, FusionVariant variant,
         const Var& e_local, const Var& e_global);

// Temporal sub-layer of `cfg.variant` applied to the (already modulated) x.
Var temporal_mix(ParamBinder& params, const std::string& prefix,
                 const BlockConfig& cfg, const Var& x, std::size_t T);

// One block: spatial, temporal and MLP residual sub-layers, each modulated by
// the 1 x D conditioning vector `cond` (AdaLN-Zero).
Var block(ParamBinder& params, const std::string& prefix, const BlockConfig& cfg,
          const Var& x, const Var& cond, std::size_t T);

Var timestep_embedding(ParamBinder& params, const BlockConfig& cfg, double k);

}  // namespace graph

// Noise-prediction transformer: input linear layer + positional embedding,
// `depth` blocks, adaptive final norm and a zero-initialized linear head.
class FrameDiT {
 public:
  explicit FrameDiT(BlockConfig cfg);

  const BlockConfig& config() const { return cfg_; }

  // AdaLN modulation, fusion gates and the output head follow their
  // documented initializations; the rest is fan-in scaled Gaussian.
  ParamSet init_params(std::uint64_t seed) const;

  Var forward(ParamBinder& params, const Var& z_k, std::size_t T, double k) const;
  VideoTokens predict(const ParamSet& params, const VideoTokens& z_k, double k) const;

 private:
  BlockConfig cfg_;
};

// Block-level value API. `params` must hold the block's parameters under
// `prefix` (see FrameDiT::init_params for the naming); `cond` is 1 x D.
VideoTokens framedit_block(const BlockConfig& cfg, const ParamSet& params,
                           const std::string& prefix, const VideoTokens& z,
                           const Mat& cond);
VideoTokens framedit_g_block(const BlockConfig& cfg, const ParamSet& params,
                             const std::string& prefix, const VideoTokens& z,
                             const Mat& cond);
VideoTokens framedit_h_block(const BlockConfig& cfg, const ParamSet& params,
                             const std::string& prefix, const VideoTokens& z,
                             const Mat& cond);

VideoTokens model_forward(const FrameDiT& model, const ParamSet& params,
                          const VideoTokens& z_k, double k);

// Initializes one block's parameters under `prefix`.
void init_block_params(const BlockConfig& cfg, const std::string& prefix,
                       std::uint64_t seed, ParamSet& out);
void init_fusion_params(FusionVariant v, std::size_t D, const std::string& prefix,
                        std::uint64_t seed, ParamSet& out);

struct GateRatioOptions {
  std::optional<Mat> softmax_logits;  // 1 x 2, default (ln 0.97, ln 0.03)
  std::optional<Mat> concat_weight;   // 2D x D, default Kaiming uniform
  double loss_scale = 1.0;
  std::uint64_t seed = 0;
};

// ||dL/d theta_global|| with a softmax gate divided by the same norm with
// concat_mlp fusion, where theta_global are the Matrix Attention parameters of
// a hybrid temporal sub-layer and L is the mean squared error against each
// batch target. Both norms zero gives 1.
double gate_gradient_ratio(const std::vector<std::pair<VideoTokens, VideoTokens>>& batch,
                           const BlockConfig& cfg, const GateRatioOptions& opts = {});

}  // namespace mattn

#endif  // MATTN_BLOCKS_HPP_
