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

#include <cmath>
#include <fstream>
#include <limits>

#include <gtest/gtest.h>

#include "mattn/diffusion.hpp"
#include "mattn/errors.hpp"
#include "mattn/gradcheck.hpp"

namespace mattn {
namespace {

TEST(ScheduleTest, VariancePreservingAndMonotoneSnr) {
  for (std::size_t K : {1u, 10u, 250u, 1000u}) {
    const NoiseSchedule s = make_schedule(K);
    EXPECT_EQ(s.a[0], 1.0);
    EXPECT_EQ(s.sigma[0], 0.0);
    for (std::size_t k = 0; k <= K; ++k) {
      EXPECT_NEAR(s.a[k] * s.a[k] + s.sigma[k] * s.sigma[k], 1.0, 1e-12);
    }
    for (std::size_t k = 1; k < K; ++k) EXPECT_GT(s.snr(k), s.snr(k + 1));
  }
}

TEST(ScheduleTest, SingleStepClosedForm) {
  EXPECT_DOUBLE_EQ(make_schedule(1).a[1], std::sqrt(1.0 - 1e-4));
  EXPECT_THROW(make_schedule(0), ConfigError);
  const NoiseSchedule s = make_schedule(1000);
  EXPECT_DOUBLE_EQ(s.beta[1], 1e-4);
  EXPECT_DOUBLE_EQ(s.beta[1000], 2e-2);
}

TEST(ForwardDiffuseTest, Boundaries) {
  const NoiseSchedule s = make_schedule(100);
  CounterRng rng(1);
  const Mat x = rng.normal_mat(3, 2), eps = rng.normal_mat(3, 2);
  EXPECT_EQ(forward_diffuse(x, 0, eps, s), x);
  EXPECT_EQ(forward_diffuse(Mat(3, 2), 40, eps, s), scale(eps, s.sigma[40]));
  EXPECT_THROW(forward_diffuse(x, 101, eps, s), ConfigError);
}

TEST(ForwardDiffuseTest, MonteCarloMoments) {
  const NoiseSchedule s = make_schedule(1000);
  const std::size_t k = 300, n = 100000;
  const double x0 = 0.8;
  CounterRng rng(2);
  const Mat eps = rng.normal_mat(n, 1);
  const Mat xk = forward_diffuse(Mat(n, 1, x0), k, eps, s);
  double m = 0, v = 0;
  for (std::size_t i = 0; i < n; ++i) m += xk[i];
  m /= n;
  for (std::size_t i = 0; i < n; ++i) v += (xk[i] - m) * (xk[i] - m);
  v /= (n - 1);
  EXPECT_NEAR(m, s.a[k] * x0, 4 * s.sigma[k] / std::sqrt(double(n)));
  EXPECT_NEAR(v / (s.sigma[k] * s.sigma[k]), 1.0, 0.05);
}

TEST(ReverseStepTest, ZeroNoisePredictionRescales) {
  const NoiseSchedule s = make_schedule(50);
  CounterRng rng(3);
  const Mat x = rng.normal_mat(2, 2);
  const Mat y = reverse_step(x, 20, Mat(2, 2), 0.0, s, rng.normal_mat(2, 2));
  EXPECT_LE(max_abs_diff(y, scale(x, s.a[19] / s.a[20])), 1e-15);
}

TEST(ReverseStepTest, EtaZeroIsDeterministic) {
  const NoiseSchedule s = make_schedule(50);
  CounterRng rng(4);
  const Mat x = rng.normal_mat(2, 2), e = rng.normal_mat(2, 2);
  for (std::size_t k = 2; k <= 50; ++k) EXPECT_EQ(transition_omega(k, k - 1, 0.0, s), 0.0);
  EXPECT_EQ(reverse_step(x, 10, e, 0.0, s, rng.normal_mat(2, 2)),
            reverse_step(x, 10, e, 0.0, s, rng.normal_mat(2, 2)));
}

TEST(ReverseStepTest, EtaOneMatchesDdpmPosteriorStd) {
  const NoiseSchedule s = make_schedule(1000);
  for (std::size_t k = 2; k <= 1000; ++k) {
    const double sp2 = s.sigma[k - 1] * s.sigma[k - 1];
    const double expect =
        s.sigma[k - 1] * std::sqrt(1.0 - sp2 * s.a[k] * s.a[k] /
                                             (s.sigma[k] * s.sigma[k] * s.a[k - 1] * s.a[k - 1]));
    EXPECT_NEAR(transition_omega(k, k - 1, 1.0, s), expect, 1e-12);
    // Posterior variance of DDPM: beta_k (1 - abar_{k-1}) / (1 - abar_k).
    EXPECT_NEAR(transition_omega(k, k - 1, 1.0, s) * transition_omega(k, k - 1, 1.0, s),
                s.beta[k] * sp2 / (s.sigma[k] * s.sigma[k]), 1e-12);
  }
  EXPECT_EQ(transition_omega(1, 0, 1.0, s), 0.0);
}

TEST(ReverseStepTest, PerfectNoiseGivesPosteriorMoments) {
  const NoiseSchedule s = make_schedule(1000);
  const std::size_t k = 200, n = 100000;
  const double x0 = -0.7, e = 0.9;
  const double xk = s.a[k] * x0 + s.sigma[k] * e;
  const double abar_p = s.a[k - 1] * s.a[k - 1], abar = s.a[k] * s.a[k];
  const double post_mean = std::sqrt(abar_p) * s.beta[k] / (1 - abar) * x0 +
                           std::sqrt(1 - s.beta[k]) * (1 - abar_p) / (1 - abar) * xk;
  const double post_var = s.beta[k] * (1 - abar_p) / (1 - abar);
  CounterRng rng(5);
  const Mat y = reverse_step(Mat(n, 1, xk), k, Mat(n, 1, (xk - s.a[k] * x0) / s.sigma[k]), 1.0,
                             s, rng.normal_mat(n, 1));
  double m = 0, v = 0;
  for (std::size_t i = 0; i < n; ++i) m += y[i];
  m /= n;
  for (std::size_t i = 0; i < n; ++i) v += (y[i] - m) * (y[i] - m);
  v /= (n - 1);
  EXPECT_NEAR(m, post_mean, 4 * std::sqrt(post_var / n));
  EXPECT_NEAR(v / post_var, 1.0, 0.05);
}

TEST(ReverseStepTest, NonFiniteNamesStep) {
  const NoiseSchedule s = make_schedule(10);
  const Mat bad(1, 1, std::numeric_limits<double>::quiet_NaN());
  try {
    reverse_step(Mat(1, 1), 7, bad, 0.0, s, Mat(1, 1));
    FAIL();
  } catch (const NumericError& e) {
    EXPECT_EQ(e.step(), 7);
    EXPECT_NE(std::string(e.what()).find("k=7"), std::string::npos);
  }
}

TEST(SamplerTest, Indices) {
  EXPECT_EQ(sampling_indices(4, 4), (std::vector<std::size_t>{4, 3, 2, 1}));
  EXPECT_EQ(sampling_indices(1000, 2), (std::vector<std::size_t>{1000, 1}));
  const auto idx = sampling_indices(1000, 250);
  ASSERT_EQ(idx.size(), 250u);
  EXPECT_EQ(idx.front(), 1000u);
  EXPECT_EQ(idx.back(), 1u);
  for (std::size_t i = 1; i < idx.size(); ++i) EXPECT_LT(idx[i], idx[i - 1]);
  EXPECT_THROW(sampling_indices(10, 11), ConfigError);
}

TEST(SamplerTest, ZeroModelTwoStepsClosedForm) {
  const NoiseSchedule s = make_schedule(2);
  SamplerConfig cfg;
  cfg.eta = 0.0;
  cfg.steps = 2;
  cfg.seed = 11;
  const Mat out = sample([](const Mat& x, std::size_t) { return Mat(x.rows(), x.cols()); }, 3,
                         2, cfg, s);
  CounterRng rng(11);
  const Mat x2 = rng.normal_mat(3, 2);
  const Mat x1 = scale(x2, s.a[1] / s.a[2]);
  EXPECT_LE(max_abs_diff(out, scale(x1, 1.0 / s.a[1])), 1e-15);
}

TEST(SamplerTest, SameSeedIsBitIdentical) {
  const NoiseSchedule s = make_schedule(100);
  SamplerConfig cfg;
  cfg.steps = 25;
  cfg.seed = 12;
  auto model = [](const Mat& x, std::size_t k) { return scale(x, 0.01 * double(k % 7)); };
  EXPECT_EQ(sample(model, 4, 3, cfg, s), sample(model, 4, 3, cfg, s));
  cfg.eta = 1.5;
  EXPECT_THROW(sample(model, 4, 3, cfg, s), ConfigError);
}

struct ChainMoments {
  double eta;
  std::size_t steps;
  double mean, var;  // relative to mu and sd^2
};

std::vector<ChainMoments> frozen_chain_moments() {
  std::ifstream is(std::string(MATTN_TEST_DATA_DIR) + "/sampler_moments.txt");
  std::vector<ChainMoments> rows;
  ChainMoments r{};
  while (is >> r.eta >> r.steps >> r.mean >> r.var) rows.push_back(r);
  return rows;
}

std::pair<double, double> sampled_moments(std::size_t n, double eta, std::size_t steps) {
  const double mu = 1.5, sd = 0.5;
  const NoiseSchedule s = make_schedule(1000);
  auto oracle = [&](const Mat& x, std::size_t k) {
    const double a = s.a[k], sg = s.sigma[k];
    Mat e = x;
    for (std::size_t i = 0; i < e.size(); ++i)
      e[i] = sg / (a * a * sd * sd + sg * sg) * (x[i] - a * mu);
    return e;
  };
  SamplerConfig cfg;
  cfg.eta = eta;
  cfg.steps = steps;
  cfg.seed = 13;
  const Mat x = sample(oracle, n, 1, cfg, s);
  double m = 0, v = 0;
  for (std::size_t i = 0; i < x.size(); ++i) m += x[i];
  m /= x.size();
  for (std::size_t i = 0; i < x.size(); ++i) v += (x[i] - m) * (x[i] - m);
  v /= (x.size() - 1);
  return {m / mu, v / (sd * sd)};
}

TEST(SamplerTest, ScalarOracleReproducesDataMomentsAtFullLength) {
  for (double eta : {0.0, 1.0}) {
    const auto [m, v] = sampled_moments(4096, eta, 1000);
    EXPECT_NEAR(m, 1.0, 0.05) << eta;
    EXPECT_NEAR(v, 1.0, 0.05) << eta;
  }
}

TEST(SamplerTest, StridedChainMatchesExactMoments) {
  const auto rows = frozen_chain_moments();
  ASSERT_EQ(rows.size(), 6u);
  for (const auto& r : rows) {
    if (r.steps == 50) continue;
    const auto [m4, v4] = sampled_moments(4096, r.eta, r.steps);
    EXPECT_NEAR(m4 / r.mean, 1.0, 0.05) << r.eta << " " << r.steps;
    EXPECT_NEAR(v4 / r.var, 1.0, 0.05) << r.eta << " " << r.steps;
    const auto [m, v] = sampled_moments(65536, r.eta, r.steps);
    EXPECT_NEAR(m / r.mean, 1.0, 0.01) << r.eta << " " << r.steps;
    EXPECT_NEAR(v / r.var, 1.0, 0.02) << r.eta << " " << r.steps;
  }
}

EpsModel linear_model() {
  return [](ParamBinder& p, const Var& x, std::size_t k) {
    return add(matmul(x, p("w")), mul_scalar(Var::constant(Mat(x.rows(), x.cols(), 1.0)),
                                             scale(p("b"), 1.0 + 1e-3 * double(k))));
  };
}

TEST(NmLossTest, PerfectPredictionIsZero) {
  const NoiseSchedule s = make_schedule(10);
  CounterRng rng(14);
  const Mat x = rng.normal_mat(3, 2), eps = rng.normal_mat(3, 2);
  EpsModel cheat = [&](ParamBinder& p, const Var&, std::size_t) {
    return add(Var::constant(eps), scale(p("w"), 0.0));
  };
  ParamSet ps;
  ps.add("w", Mat(3, 2));
  EXPECT_EQ(nm_loss(cheat, ps, x, 5, eps, s).loss, 0.0);
}

TEST(NmLossTest, ZeroPredictionGivesUnitLoss) {
  const NoiseSchedule s = make_schedule(10);
  CounterRng rng(15);
  const Mat eps = rng.normal_mat(400, 250);
  EpsModel zero = [](ParamBinder& p, const Var& x, std::size_t) {
    return scale(matmul(x, p("w")), 0.0);
  };
  ParamSet ps;
  ps.add("w", Mat(250, 250));
  EXPECT_NEAR(nm_loss(zero, ps, rng.normal_mat(400, 250), 3, eps, s).loss, 1.0, 0.01);
}

TEST(NmLossTest, GradientMatchesFiniteDifferences) {
  const NoiseSchedule s = make_schedule(10);
  CounterRng rng(16);
  ParamSet ps;
  ps.add("w", rng.normal_mat(2, 2));
  ps.add("b", rng.normal_mat(1, 1));
  const Mat x = rng.normal_mat(3, 2), eps = rng.normal_mat(3, 2);
  const auto lg = nm_loss(linear_model(), ps, x, 4, eps, s);
  const double h = 1e-5;
  for (const auto& [name, p] : ps) {
    for (std::size_t i = 0; i < p.value.size(); ++i) {
      ParamSet pp = ps, pm = ps;
      pp.at(name)[i] += h;
      pm.at(name)[i] -= h;
      const double fd = (nm_loss(linear_model(), pp, x, 4, eps, s).loss -
                         nm_loss(linear_model(), pm, x, 4, eps, s).loss) / (2 * h);
      EXPECT_LE(std::abs(fd - lg.grads.at(name)[i]) / std::max(1.0, std::abs(fd)), 1e-4);
    }
  }
}

TEST(OptimizerTest, ClipToUnitNorm) {
  ParamSet g;
  g.add("a", Mat::from_rows({{6.0, 0.0}}));
  g.add("b", Mat::from_rows({{8.0}}));
  EXPECT_DOUBLE_EQ(clip_global_norm(g, 1.0), 10.0);
  EXPECT_NEAR(global_norm(g), 1.0, 1e-12);
  EXPECT_DOUBLE_EQ(clip_global_norm(g, 5.0), global_norm(g));
}

TEST(OptimizerTest, EmaFormula) {
  ParamSet ema, p;
  ema.add("w", Mat(1, 1, 1.0));
  p.add("w", Mat(1, 1, 2.0));
  ema_update(ema, p, 0.999);
  EXPECT_NEAR(ema.at("w")[0], 0.999 * 1.0 + 0.001 * 2.0, 1e-15);
}

std::vector<Mat> scalar_dataset(std::size_t n, std::uint64_t seed) {
  CounterRng rng(seed);
  std::vector<Mat> d;
  for (std::size_t i = 0; i < n; ++i) d.push_back(rng.normal_mat(3, 2, 0.3));
  return d;
}

TEST(TrainTest, ZeroLearningRateLeavesParamsAndEma) {
  const NoiseSchedule s = make_schedule(10);
  CounterRng rng(17);
  ParamSet ps;
  ps.add("w", rng.normal_mat(2, 2));
  ps.add("b", rng.normal_mat(1, 1));
  TrainConfig cfg;
  cfg.lr = 0.0;
  cfg.batch = 2;
  cfg.steps = 5;
  cfg.clip_start = 0;
  const auto r = train(linear_model(), ps, scalar_dataset(4, 1), cfg, s);
  for (const auto& [n, p] : ps) {
    EXPECT_EQ(r.params.at(n), p.value);
    EXPECT_EQ(r.ema.at(n), p.value);
  }
  ASSERT_EQ(r.trace.size(), 5u);
  for (const auto& row : r.trace) EXPECT_EQ(row.ema_delta, 0.0);
}

TEST(TrainTest, DeterministicAndLossDecreases) {
  const NoiseSchedule s = make_schedule(50);
  ParamSet ps;
  ps.add("w", Mat(2, 2));
  ps.add("b", Mat(1, 1));
  TrainConfig cfg;
  cfg.lr = 0.02;
  cfg.batch = 8;
  cfg.steps = 300;
  cfg.clip_start = 0;
  cfg.seed = 3;
  const auto a = train(linear_model(), ps, scalar_dataset(16, 2), cfg, s);
  const auto b = train(linear_model(), ps, scalar_dataset(16, 2), cfg, s);
  EXPECT_EQ(a.params.at("w"), b.params.at("w"));
  EXPECT_EQ(a.ema.at("w"), b.ema.at("w"));
  EXPECT_LT(mean_loss(a.trace, 250, 300), mean_loss(a.trace, 0, 50));
}

TEST(TrainTest, NonFiniteLossAbortsWithStep) {
  const NoiseSchedule s = make_schedule(10);
  ParamSet ps;
  ps.add("w", Mat(2, 2));
  EpsModel boom = [](ParamBinder& p, const Var& x, std::size_t) {
    return scale(matmul(x, p("w")), std::numeric_limits<double>::infinity());
  };
  TrainConfig cfg;
  cfg.batch = 1;
  cfg.steps = 3;
  try {
    train(boom, ps, scalar_dataset(2, 3), cfg, s);
    FAIL();
  } catch (const NumericError& e) {
    EXPECT_EQ(e.step(), 0);
  }
}

TEST(TrainTest, FrozenParamsStayFixed) {
  const NoiseSchedule s = make_schedule(10);
  CounterRng rng(18);
  ParamSet ps;
  ps.add("w", rng.normal_mat(2, 2), false);
  ps.add("b", rng.normal_mat(1, 1));
  TrainConfig cfg;
  cfg.lr = 0.1;
  cfg.batch = 2;
  cfg.steps = 3;
  const auto r = train(linear_model(), ps, scalar_dataset(4, 4), cfg, s);
  EXPECT_EQ(r.params.at("w"), ps.at("w"));
  EXPECT_NE(r.params.at("b"), ps.at("b"));
}

}  // namespace
}  // namespace mattn
