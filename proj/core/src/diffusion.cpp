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

#include "mattn/diffusion.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>

#include "mattn/errors.hpp"

namespace mattn {

NoiseSchedule make_schedule(std::size_t K) {
  if (K < 1) throw ConfigError("K must be >= 1", "K");
  NoiseSchedule s;
  s.K = K;
  s.beta.assign(K + 1, 0.0);
  s.a.assign(K + 1, 1.0);
  s.sigma.assign(K + 1, 0.0);
  double prod = 1.0;
  for (std::size_t k = 1; k <= K; ++k) {
    const double frac = K == 1 ? 0.0 : static_cast<double>(k - 1) / static_cast<double>(K - 1);
    s.beta[k] = 1e-4 + (2e-2 - 1e-4) * frac;
    prod *= 1.0 - s.beta[k];
    s.a[k] = std::sqrt(prod);
    s.sigma[k] = std::sqrt(1.0 - prod);
  }
  return s;
}

Mat forward_diffuse(const Mat& x, std::size_t k, const Mat& eps, const NoiseSchedule& s) {
  if (k > s.K) {
    throw ConfigError("forward_diffuse: k=" + std::to_string(k) + " outside 0.." +
                          std::to_string(s.K),
                      "K");
  }
  Mat out = scale(x, s.a[k]);
  axpy(s.sigma[k], eps, out);
  return out;
}

void SamplerConfig::validate(std::size_t K) const {
  if (!(eta >= 0.0 && eta <= 1.0)) throw ConfigError("eta must lie in [0, 1]", "eta");
  if (steps > K) throw ConfigError("steps must not exceed K", "steps");
}

double transition_omega(std::size_t k, std::size_t k_prev, double eta, const NoiseSchedule& s) {
  if (k_prev == 0) return 0.0;
  const double sp2 = s.sigma[k_prev] * s.sigma[k_prev];
  const double ratio = (sp2 / (s.sigma[k] * s.sigma[k])) *
                       (s.a[k] * s.a[k] / (s.a[k_prev] * s.a[k_prev]));
  const double w2 = eta * eta * sp2 * (1.0 - ratio);
  return std::sqrt(std::max(0.0, w2));
}

Mat reverse_transition(const Mat& x_k, std::size_t k, std::size_t k_prev, const Mat& eps_hat,
                       double eta, const NoiseSchedule& s, const Mat& noise) {
  if (k < 1 || k > s.K || k_prev >= k) {
    throw ConfigError("reverse step " + std::to_string(k) + " -> " + std::to_string(k_prev) +
                          " outside the schedule",
                      "steps");
  }
  const double omega = transition_omega(k, k_prev, eta, s);
  const double r = s.a[k_prev] / s.a[k];
  const double sp = s.sigma[k_prev];
  const double c_eps = std::sqrt(std::max(0.0, sp * sp - omega * omega)) - s.sigma[k] * r;
  Mat out = scale(x_k, r);
  axpy(c_eps, eps_hat, out);
  if (omega > 0.0) axpy(omega, noise, out);
  if (!all_finite(out)) {
    throw NumericError("reverse step produced a non-finite value at k=" + std::to_string(k),
                       static_cast<long>(k));
  }
  return out;
}

Mat reverse_step(const Mat& x_k, std::size_t k, const Mat& eps_hat, double eta,
                 const NoiseSchedule& s, const Mat& noise) {
  return reverse_transition(x_k, k, k - 1, eps_hat, eta, s, noise);
}

std::vector<std::size_t> sampling_indices(std::size_t K, std::size_t steps) {
  if (steps == 0 || steps > K) throw ConfigError("steps must lie in 1..K", "steps");
  std::vector<std::size_t> idx;
  if (steps == 1) return {K};
  for (std::size_t i = 0; i < steps; ++i) {
    // Round K - i (K - 1) / (steps - 1) to the nearest integer.
    const std::size_t num = i * (K - 1);
    const std::size_t den = steps - 1;
    idx.push_back(K - (2 * num + den) / (2 * den));
  }
  return idx;
}

Mat sample(const NoisePredictor& model, std::size_t rows, std::size_t cols,
           const SamplerConfig& cfg, const NoiseSchedule& s) {
  cfg.validate(s.K);
  const auto idx = sampling_indices(s.K, cfg.steps ? cfg.steps : s.K);
  CounterRng rng(cfg.seed);
  Mat x = rng.normal_mat(rows, cols);
  for (std::size_t i = 0; i < idx.size(); ++i) {
    const std::size_t k = idx[i];
    const std::size_t k_prev = i + 1 < idx.size() ? idx[i + 1] : 0;
    const Mat eps_hat = model(x, k);
    const Mat noise = rng.normal_mat(rows, cols);
    x = reverse_transition(x, k, k_prev, eps_hat, cfg.eta, s, noise);
  }
  return x;
}

LossAndGrads nm_loss(const EpsModel& model, const ParamSet& params, const Mat& x,
                     std::size_t k, const Mat& eps, const NoiseSchedule& s) {
  ParamBinder binder(params, true);
  Var pred = model(binder, Var::constant(forward_diffuse(x, k, eps, s)), k);
  Var loss = mse(pred, eps);
  backward(loss);
  return {loss.value()[0], binder.grads()};
}

void TrainConfig::validate() const {
  if (!(lr >= 0.0)) throw ConfigError("lr must be >= 0", "lr");
  if (batch == 0) throw ConfigError("batch must be positive", "batch");
  if (!(ema_decay >= 0.0 && ema_decay <= 1.0)) {
    throw ConfigError("ema_decay must lie in [0, 1]", "ema_decay");
  }
  if (!(grad_clip > 0.0)) throw ConfigError("grad_clip must be positive", "grad_clip");
}

double clip_global_norm(ParamSet& grads, double max_norm) {
  const double norm = global_norm(grads);
  if (norm > max_norm) {
    const double f = max_norm / norm;
    for (auto& [name, g] : grads) g.value = scale(g.value, f);
  }
  return norm;
}

AdamW::AdamW(const TrainConfig& cfg, const ParamSet& like)
    : lr_(cfg.lr), b1_(cfg.beta1), b2_(cfg.beta2), eps_(cfg.adam_eps),
      wd_(cfg.weight_decay), m_(like.zeros_like()), v_(like.zeros_like()) {}

void AdamW::step(ParamSet& params, const ParamSet& grads) {
  ++t_;
  const double c1 = 1.0 - std::pow(b1_, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(b2_, static_cast<double>(t_));
  for (auto& [name, p] : params) {
    if (!p.trainable || !grads.contains(name)) continue;
    const Mat& g = grads.at(name);
    Mat& m = m_.at(name);
    Mat& v = v_.at(name);
    for (std::size_t i = 0; i < g.size(); ++i) {
      m[i] = b1_ * m[i] + (1.0 - b1_) * g[i];
      v[i] = b2_ * v[i] + (1.0 - b2_) * g[i] * g[i];
      const double upd = (m[i] / c1) / (std::sqrt(v[i] / c2) + eps_) + wd_ * p.value[i];
      p.value[i] -= lr_ * upd;
    }
  }
}

double ema_update(ParamSet& ema, const ParamSet& params, double decay) {
  double sq = 0.0;
  for (auto& [name, e] : ema) {
    const Mat& p = params.at(name);
    for (std::size_t i = 0; i < p.size(); ++i) {
      const double d = (1.0 - decay) * (p[i] - e.value[i]);
      e.value[i] += d;
      sq += d * d;
    }
  }
  return std::sqrt(sq);
}

TrainResult train(const EpsModel& model, ParamSet init, const std::vector<Mat>& dataset,
                  const TrainConfig& cfg, const NoiseSchedule& s,
                  const std::function<void(const TraceRow&)>& on_step) {
  cfg.validate();
  if (dataset.empty()) throw ConfigError("train: empty dataset", "dataset_clips");
  TrainResult res;
  res.params = std::move(init);
  res.ema = res.params;
  AdamW opt(cfg, res.params);
  const double inv_b = 1.0 / static_cast<double>(cfg.batch);
  for (std::size_t step = 0; step < cfg.steps; ++step) {
    CounterRng rng = CounterRng::derive(cfg.seed, static_cast<std::uint64_t>(step));
    ParamSet grads = res.params.zeros_like();
    double loss = 0.0;
    for (std::size_t b = 0; b < cfg.batch; ++b) {
      const Mat& x = dataset[rng.uniform_int(0, dataset.size() - 1)];
      const std::size_t k = rng.uniform_int(1, s.K);
      const Mat eps = rng.normal_mat(x.rows(), x.cols());
      LossAndGrads lg = nm_loss(model, res.params, x, k, eps, s);
      loss += lg.loss * inv_b;
      for (const auto& [name, g] : lg.grads) axpy(inv_b, g.value, grads.at(name));
    }
    double norm = global_norm(grads);
    if (!std::isfinite(loss) || !std::isfinite(norm)) {
      throw NumericError("non-finite loss at step " + std::to_string(step),
                         static_cast<long>(step));
    }
    if (step >= cfg.clip_start) norm = clip_global_norm(grads, cfg.grad_clip);
    opt.step(res.params, grads);
    const double delta = ema_update(res.ema, res.params, cfg.ema_decay);
    res.trace.push_back({step, loss, norm, delta});
    if (on_step) on_step(res.trace.back());
  }
  return res;
}

void write_trace_csv(const std::string& path, const std::vector<TraceRow>& trace) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw ConfigError("cannot write '" + path + "'", "out_dir");
  os << "step,loss,grad_norm,ema_delta\n";
  char buf[128];
  for (const auto& r : trace) {
    std::snprintf(buf, sizeof buf, "%zu,%.17g,%.17g,%.17g\n", r.step, r.loss, r.grad_norm,
                  r.ema_delta);
    os << buf;
  }
}

double mean_loss(const std::vector<TraceRow>& trace, std::size_t begin, std::size_t end) {
  end = std::min(end, trace.size());
  if (begin >= end) return 0.0;
  double s = 0.0;
  for (std::size_t i = begin; i < end; ++i) s += trace[i].loss;
  return s / static_cast<double>(end - begin);
}

}  // namespace mattn
