// Copyright 2026 The zeroforge Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "zeroforge/training.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <limits>

#include "test_util.hpp"
#include "zeroforge/gradcheck.hpp"

namespace zeroforge {
namespace {

TEST(HingeLoss, Examples) {
  EXPECT_EQ(hinge_loss_signed(2.0, 1.0, 1.0), 0.0);
  EXPECT_EQ(hinge_loss_signed(0.5, 1.0, 1.0), 0.5);
  EXPECT_EQ(hinge_loss_signed(0.5, -1.0, 1.0), 1.5);
}

TEST(HingeLoss, LabelOrientation) {
  // bit 1 decodes from tau < 0, so a confident negative tau costs nothing
  EXPECT_EQ(hinge_loss(-3.0, 1, 1.0), 0.0);
  EXPECT_EQ(hinge_loss(3.0, 0, 1.0), 0.0);
  EXPECT_EQ(hinge_loss(-3.0, 1, 1.0, /*literal=*/true), 4.0);
  Stream rng = make_stream(1);
  for (int t = 0; t < 1000; ++t) {
    const double tau = 6.0 * (rng.uniform() - 0.5);
    const int bit = static_cast<int>(rng() & 1U);
    const double label = hinge_label(bit);
    EXPECT_EQ(hinge_loss(tau, bit, 1.0) == 0.0, label * tau >= 1.0);
  }
}

TEST(BceLoss, Examples) {
  EXPECT_NEAR(bce_loss(0.0, 0), std::log(2.0), 1e-15);
  EXPECT_NEAR(bce_loss(0.0, 1), std::log(2.0), 1e-15);
  EXPECT_NEAR(bce_loss(20.0, 1), std::log1p(std::exp(-20.0)), 1e-20);
  EXPECT_NEAR(bce_loss(20.0, 1), 2.0611536e-9, 1e-15);
  EXPECT_NEAR(bce_loss(-20.0, 1), 20.0 + std::log1p(std::exp(-20.0)), 1e-12);
  EXPECT_TRUE(std::isfinite(bce_loss(-800.0, 1)));
  EXPECT_NEAR(bce_loss(-800.0, 1), 800.0, 1e-9);
}

TEST(BceLoss, PositiveAndConvex) {
  for (int bit : {0, 1}) {
    for (double p = -30.0; p <= 30.0; p += 0.25) {
      EXPECT_GT(bce_loss(p, bit), 0.0);
      if (std::abs(p) > 15.0) continue;  // curvature below rounding there
      const double h = 0.25;
      EXPECT_GT(bce_loss(p + h, bit) + bce_loss(p - h, bit), 2.0 * bce_loss(p, bit));
    }
  }
}

TEST(LrSchedule, Endpoints) {
  TrainConfig cfg;
  cfg.n_epoch = 30000;
  EXPECT_EQ(lr_schedule(0, cfg), 1e-2);
  EXPECT_EQ(lr_schedule(cfg.n_epoch, cfg), 1e-4);
  EXPECT_NEAR(lr_schedule(cfg.n_epoch / 2, cfg), 1e-3, 1e-15);
  for (int e = 0; e < cfg.n_epoch; e += 97) {
    EXPECT_GT(lr_schedule(e, cfg), lr_schedule(e + 1, cfg));
  }
}

TEST(Adam, FirstStepMovesByLearningRate) {
  for (double grad : {0.3, -2.0, 1e-3}) {
    AdamState<double> st;
    double x = 1.0;
    const std::vector<ParamSlot<double>> slots{{&x, &grad, 1}};
    adam_step<double>(st, slots, 0.01);
    EXPECT_NEAR(x, 1.0 - 0.01 * (grad > 0 ? 1.0 : -1.0), 1e-7);
  }
}

TEST(Adam, ZeroGradientLeavesParameters) {
  AdamState<double> st;
  std::vector<double> x{1.0, -2.0, 3.0};
  const std::vector<double> g(3, 0.0);
  const std::vector<ParamSlot<double>> slots{{x.data(), g.data(), 3}};
  for (int i = 0; i < 5; ++i) adam_step<double>(st, slots, 0.1);
  EXPECT_EQ(x, (std::vector<double>{1.0, -2.0, 3.0}));
}

TEST(Adam, Deterministic) {
  auto run = [] {
    AdamState<double> st;
    double x = 3.0, g = 0.0;
    const std::vector<ParamSlot<double>> slots{{&x, &g, 1}};
    for (int i = 0; i < 200; ++i) {
      g = 2.0 * (x - 1.0);
      adam_step<double>(st, slots, 0.05);
    }
    return x;
  };
  const double a = run();
  EXPECT_EQ(a, run());
  EXPECT_NEAR(a, 1.0, 0.1);
}

TEST(Adam, RejectsNonFiniteGradient) {
  AdamState<double> st;
  double x = 1.0;
  double g = std::numeric_limits<double>::quiet_NaN();
  const std::vector<ParamSlot<double>> slots{{&x, &g, 1}};
  EXPECT_THROW(adam_step<double>(st, slots, 0.1), TrainingAborted);
  EXPECT_EQ(x, 1.0);
}

TEST(GenBatch, Noiseless) {
  Stream rng = make_stream(2);
  const Constellation c = Constellation::canonical(6, 0.5);
  const Batch b = gen_batch(6, 32, c, 0.0, rng);
  for (int j = 0; j < 32; ++j) {
    EXPECT_LT(testing::multiset_distance(roots(b.received[j]), bits_to_zeros(b.bits[j], c)), 1e-8);
  }
}

TEST(GenBatch, NoiseVarianceAndUniformMessages) {
  Stream rng = make_stream(3);
  const int k = 4;
  const Constellation c = Constellation::canonical(k, 0.5);
  const double var = ebn0_to_noise_var(5.0, k);
  std::vector<int> hist(1 << k, 0);
  double acc = 0.0;
  long n_coeff = 0;
  const int total = 100000;
  for (int done = 0; done < total; done += 500) {
    const Batch b = gen_batch(k, 500, c, var, rng);
    for (int j = 0; j < 500; ++j) {
      ++hist[message_index(b.bits[j])];
      const ComplexPoly x = encode(b.bits[j], c);
      for (int i = 0; i <= k; ++i) {
        acc += std::norm(b.received[j].coeffs[i] - x.coeffs[i]);
        ++n_coeff;
      }
    }
  }
  EXPECT_NEAR(acc / n_coeff, var, 0.02 * var);
  // chi-square with 15 degrees of freedom, 99% quantile 30.578
  const double expected = static_cast<double>(total) / hist.size();
  double chi2 = 0.0;
  for (int h : hist) chi2 += (h - expected) * (h - expected) / expected;
  EXPECT_LT(chi2, 30.578);
}

TEST(Gradients, DizetHingeNoiseless) {
  const GradCheckResult r = check_dizet_gradient(4, 8, INFINITY, 5);
  EXPECT_TRUE(r.pass(1e-4)) << r.max_rel_error;
}

TEST(Gradients, DizetHingeNoisy) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const GradCheckResult r = check_dizet_gradient(4, 8, 10.0, seed);
    EXPECT_TRUE(r.pass(1e-4)) << "seed " << seed << ": " << r.max_rel_error;
  }
}

TEST(Gradients, NnFullPipeline) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const GradCheckResult r = check_nn_gradient(4, 8, 4, 10.0, seed);
    EXPECT_TRUE(r.pass(1e-3)) << "seed " << seed << ": " << r.max_rel_error;
  }
}

TEST(Gradients, MlpBackprop) {
  const GradCheckResult r = check_mlp_backprop(3, 6, 5, 9);
  EXPECT_TRUE(r.pass(1e-6)) << r.max_rel_error;
}

TEST(Gradients, EigenJacobian) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const GradCheckResult r = check_eigen_jacobian(7, seed);
    EXPECT_TRUE(r.pass(1e-4)) << "seed " << seed << ": " << r.max_rel_error;
  }
}

TEST(Gradients, SuiteOnManyInstances) {
  for (const GradCheckResult& r : run_gradient_suite(100, 1)) {
    EXPECT_TRUE(r.pass(1e-3)) << r.name << ": " << r.max_rel_error;
    EXPECT_GT(r.entries, 100);
  }
}

TEST(Gradients, Losses) {
  EXPECT_TRUE(check_loss_derivatives(3).pass(1e-6));
}

TEST(NnBatchLoss, SkipsDegenerateSamples) {
  // zero noise with a constellation whose outer and inner zeros coincide on
  // two rays cannot happen (R > 1), so force a repeated root directly
  ConstellationParams p = ConstellationParams::from(Constellation(1.3, {0.0, 1.0}));
  Batch b;
  b.k = 2;
  b.bits = {BitMessage{1, 1}, BitMessage{0, 1}};
  const ComplexPoly x = encode(b.bits[0], p.constellation());
  // y = x + w = (z - 1)^2 scaled
  b.noise = {std::vector<cplx>{x.leading() - x.coeffs[0], -2.0 * x.leading() - x.coeffs[1], 0.0},
             std::vector<cplx>(3, cplx(0.0))};
  Stream rng = make_stream(4);
  const MlpParamsD mlp = MlpParamsD::random(2, 4, rng);
  ConstellationGrad g(2);
  const auto r = nn_batch_loss<double>(p, mlp, b, nullptr, &g, nullptr);
  EXPECT_EQ(r.skipped, 1);
  EXPECT_EQ(r.used, 1);
  EXPECT_TRUE(std::isfinite(r.loss));
}

TrainConfig small_dizet_config(int k, std::uint64_t seed) {
  TrainConfig cfg;
  cfg.k = k;
  cfg.batch_size = 64;
  cfg.n_epoch = 100;
  cfg.seed = seed;
  return cfg;
}

TEST(TrainDizet, LossDecreasesEarly) {
  double first = 0.0, last = 0.0;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    TrainConfig cfg = small_dizet_config(7, seed);
    cfg.batch_size = 256;
    const DizetTrainResult r = train_dizet(cfg);
    ASSERT_EQ(r.trace.size(), 100U);
    for (int e = 0; e < 20; ++e) first += r.trace[e].mean_loss;
    for (int e = 80; e < 100; ++e) last += r.trace[e].mean_loss;
  }
  EXPECT_LT(last, first);
}

TEST(TrainDizet, ReproducibleAndTraced) {
  const TrainConfig cfg = small_dizet_config(4, 42);
  const DizetTrainResult a = train_dizet(cfg);
  const DizetTrainResult b = train_dizet(cfg);
  EXPECT_EQ(a.constellation, b.constellation);
  ASSERT_EQ(a.trace.size(), b.trace.size());
  for (std::size_t i = 0; i < a.trace.size(); ++i) {
    EXPECT_EQ(a.trace[i].mean_loss, b.trace[i].mean_loss);
    EXPECT_EQ(a.trace[i].lr, lr_schedule(static_cast<int>(i), cfg));
  }
}

TEST(TrainDizet, InvalidConfig) {
  TrainConfig cfg;
  cfg.batch_size = 0;
  EXPECT_THROW(train_dizet(cfg), InvalidArgument);
  cfg = TrainConfig{};
  cfg.lr_final = 1.0;
  EXPECT_THROW(train_dizet(cfg), InvalidArgument);
}

TEST(TrainNn, ShortRunIsReproducible) {
  TrainConfig cfg;
  cfg.k = 3;
  cfg.l_hidden = 16;
  cfg.batch_size = 32;
  cfg.n_epoch = 20;
  cfg.seed = 7;
  const auto a = train_nn<float>(cfg);
  const auto b = train_nn<float>(cfg);
  EXPECT_EQ(a.constellation, b.constellation);
  EXPECT_EQ(a.mlp, b.mlp);
  EXPECT_FALSE(a.mlp.training_mode);
  ASSERT_EQ(a.stage1.size(), 20U);
  ASSERT_EQ(a.stage2.size(), 20U);
  EXPECT_EQ(a.stage2.front().lr, cfg.lr_initial);
  EXPECT_TRUE(std::isfinite(a.stage2.back().mean_loss));
  cfg.l_hidden = 0;
  EXPECT_THROW(train_nn<float>(cfg), InvalidArgument);
}

}  // namespace
}  // namespace zeroforge
