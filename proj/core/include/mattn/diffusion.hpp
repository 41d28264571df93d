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

#ifndef MATTN_DIFFUSION_HPP_
#define MATTN_DIFFUSION_HPP_

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "mattn/autograd.hpp"
#include "mattn/rng.hpp"
#include "mattn/tensor.hpp"

namespace mattn {

// Variance-preserving schedule, entries indexed 0..K. Linear beta from 1e-4
// to 2e-2 over steps 1..K (beta[0] = 0), a_k = sqrt(prod (1 - beta_i)),
// sigma_k = sqrt(1 - a_k^2).
struct NoiseSchedule {
  std::size_t K = 0;
  std::vector<double> beta, a, sigma;

  double snr(std::size_t k) const { return a[k] * a[k] / (sigma[k] * sigma[k]); }
};

NoiseSchedule make_schedule(std::size_t K);

// x_k = a_k x + sigma_k eps.
Mat forward_diffuse(const Mat& x, std::size_t k, const Mat& eps, const NoiseSchedule& s);

struct SamplerConfig {
  double eta = 1.0;
  std::size_t steps = 0;  // 0 means K
  std::uint64_t seed = 0;
  void validate(std::size_t K) const;
};

// Standard deviation of the k -> k_prev transition (0 when k_prev == 0).
double transition_omega(std::size_t k, std::size_t k_prev, double eta, const NoiseSchedule& s);

// One reverse transition k -> k_prev given predicted noise.
Mat reverse_transition(const Mat& x_k, std::size_t k, std::size_t k_prev, const Mat& eps_hat,
                       double eta, const NoiseSchedule& s, const Mat& noise);
// Single step k -> k-1.
Mat reverse_step(const Mat& x_k, std::size_t k, const Mat& eps_hat, double eta,
                 const NoiseSchedule& s, const Mat& noise);

// Evenly spaced descending indices from K to 1 inclusive (steps of them).
std::vector<std::size_t> sampling_indices(std::size_t K, std::size_t steps);

using NoisePredictor = std::function<Mat(const Mat& x_k, std::size_t k)>;

// Ancestral sampling from x_K ~ N(0, I) of the given shape.
Mat sample(const NoisePredictor& model, std::size_t rows, std::size_t cols,
           const SamplerConfig& cfg, const NoiseSchedule& s);

// Graph form of a noise-prediction network.
using EpsModel = std::function<Var(ParamBinder&, const Var& x_k, std::size_t k)>;

struct LossAndGrads {
  double loss = 0.0;
  ParamSet grads;
};

// Mean squared error between model(x_k, k) and eps, x_k from forward_diffuse.
LossAndGrads nm_loss(const EpsModel& model, const ParamSet& params, const Mat& x,
                     std::size_t k, const Mat& eps, const NoiseSchedule& s);

struct TrainConfig {
  double lr = 1e-4;
  std::size_t batch = 16;
  std::size_t steps = 1000;
  double ema_decay = 0.999;
  double grad_clip = 1.0;
  std::size_t clip_start = 100000;
  std::uint64_t seed = 0;
  double beta1 = 0.9, beta2 = 0.999, adam_eps = 1e-8, weight_decay = 0.0;
  void validate() const;
};

// Scales grads in place so their global norm is at most max_norm; returns
// the norm before clipping.
double clip_global_norm(ParamSet& grads, double max_norm);

class AdamW {
 public:
  AdamW(const TrainConfig& cfg, const ParamSet& like);
  void step(ParamSet& params, const ParamSet& grads);

 private:
  double lr_, b1_, b2_, eps_, wd_;
  std::size_t t_ = 0;
  ParamSet m_, v_;
};

// ema += (1 - decay) (params - ema); returns the global norm of the change.
double ema_update(ParamSet& ema, const ParamSet& params, double decay);

struct TraceRow {
  std::size_t step = 0;
  double loss = 0.0, grad_norm = 0.0, ema_delta = 0.0;
};

struct TrainResult {
  ParamSet params;
  ParamSet ema;
  std::vector<TraceRow> trace;
};

// Per step: a batch of clips drawn uniformly, k ~ U{1..K}, eps ~ N(0, I), the
// averaged NM gradient, global-norm clipping from clip_start, AdamW, EMA.
// Throws NumericError carrying the step on a non-finite loss or gradient.
TrainResult train(const EpsModel& model, ParamSet init, const std::vector<Mat>& dataset,
                  const TrainConfig& cfg, const NoiseSchedule& s,
                  const std::function<void(const TraceRow&)>& on_step = {});

void write_trace_csv(const std::string& path, const std::vector<TraceRow>& trace);
double mean_loss(const std::vector<TraceRow>& trace, std::size_t begin, std::size_t end);

}  // namespace mattn

#endif  // MATTN_DIFFUSION_HPP_
