// Copyright 2026 The patchfuse Authors
// SPDX-License-Identifier: Apache-2.0
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "patchfuse/head.h"

#include <algorithm>
#include <bit>
#include <cmath>
#include <string>
#include <vector>

#include "gtest/gtest.h"
#include "patchfuse/error.h"
#include "patchfuse/rng.h"

namespace patchfuse {
namespace {

ClassifierModel RandomModel(int in_dim, int hidden, SplitMix64& rng) {
  ClassifierModel m = ClassifierModel::GlorotUniform(in_dim, rng, hidden);
  for (double& b : m.b1) b = rng.NextUniform(-0.5, 0.5);
  for (double& b : m.b2) b = rng.NextUniform(-0.5, 0.5);
  return m;
}

std::vector<double> RandomVector(int n, SplitMix64& rng) {
  std::vector<double> v(n);
  for (double& x : v) x = rng.NextUniform(-2.0, 2.0);
  return v;
}

double LossAt(const ClassifierModel& m, const LabeledExample& ex) {
  return Loss(Forward(m, ex.features), ex.label);
}

// Central differences over every parameter; returns the number of
// components checked.
int CheckGradients(ClassifierModel model, const LabeledExample& ex) {
  constexpr double kStep = 1e-5;
  const Gradients g = Backward(model, ex);
  std::vector<double> pre(model.hidden);
  for (int j = 0; j < model.hidden; ++j) {
    double z = model.b1[j];
    for (int k = 0; k < model.in_dim; ++k) {
      z += model.w1[j * model.in_dim + k] * ex.features[k];
    }
    pre[j] = z;
  }
  auto near_kink = [&](int unit) { return std::abs(pre[unit]) < 1e-4; };
  int checked = 0;
  auto check = [&](std::vector<double>& params, const std::vector<double>& grad,
                   auto unit_of) {
    ASSERT_EQ(params.size(), grad.size());
    for (size_t i = 0; i < params.size(); ++i) {
      const int unit = unit_of(i);
      if (unit >= 0 && near_kink(unit)) continue;
      const double saved = params[i];
      params[i] = saved + kStep;
      const double up = LossAt(model, ex);
      params[i] = saved - kStep;
      const double down = LossAt(model, ex);
      params[i] = saved;
      const double numeric = (up - down) / (2 * kStep);
      const double tol =
          1e-4 * std::max(std::abs(numeric), std::abs(grad[i])) + 1e-8;
      ASSERT_NEAR(grad[i], numeric, tol) << "component " << i;
      ++checked;
    }
  };
  const int in_dim = model.in_dim;
  check(model.w1, g.w1, [in_dim](size_t i) { return static_cast<int>(i) / in_dim; });
  check(model.b1, g.b1, [](size_t i) { return static_cast<int>(i); });
  check(model.w2, g.w2, [](size_t) { return -1; });
  check(model.b2, g.b2, [](size_t) { return -1; });
  return checked;
}

// Label is the sign of the first coordinate, kept away from zero.
std::vector<LabeledExample> Separable(int n, SplitMix64& rng) {
  std::vector<LabeledExample> out;
  for (int i = 0; i < n; ++i) {
    LabeledExample ex;
    ex.features.resize(8);
    for (double& x : ex.features) x = rng.NextUniform(-1.0, 1.0);
    ex.label = static_cast<int>(rng.NextBelow(2));
    ex.features[0] = (ex.label == 1 ? 1.0 : -1.0) * rng.NextUniform(0.3, 1.0);
    out.push_back(std::move(ex));
  }
  return out;
}

double Accuracy(const ClassifierModel& m, const std::vector<LabeledExample>& xs) {
  int correct = 0;
  for (const auto& ex : xs) {
    const auto p = Forward(m, ex.features);
    correct += (p[1] > p[0] ? 1 : 0) == ex.label;
  }
  return static_cast<double>(correct) / static_cast<double>(xs.size());
}

TEST(ForwardTest, ZeroModelIsUniform) {
  const ClassifierModel m = ClassifierModel::Zeros(16);
  const auto p = Forward(m, std::vector<double>(16, 3.0));
  ASSERT_EQ(p.size(), 2u);
  EXPECT_DOUBLE_EQ(p[0], 0.5);
  EXPECT_DOUBLE_EQ(p[1], 0.5);
}

TEST(ForwardTest, OutputBiasGivesLogistic) {
  ClassifierModel m = ClassifierModel::Zeros(4);
  m.b2 = {1.0, 0.0};
  const auto p = Forward(m, std::vector<double>(4, 0.0));
  EXPECT_NEAR(p[0], 0.7310585786300049, 1e-12);
  EXPECT_NEAR(p[1], 0.2689414213699951, 1e-12);
}

TEST(ForwardTest, OutputShiftInvariance) {
  SplitMix64 rng(5);
  for (int t = 0; t < 50; ++t) {
    ClassifierModel m = RandomModel(6, 10, rng);
    const auto x = RandomVector(6, rng);
    const auto p = Forward(m, x);
    const double c = rng.NextUniform(-50.0, 50.0);
    for (double& b : m.b2) b += c;
    const auto q = Forward(m, x);
    for (int k = 0; k < 2; ++k) EXPECT_NEAR(p[k], q[k], 1e-12);
  }
}

TEST(ForwardTest, ProbabilitiesNormalizedEvenForLargeLogits) {
  SplitMix64 rng(6);
  ClassifierModel m = ClassifierModel::Zeros(3);
  m.b2 = {800.0, -800.0};
  auto p = Forward(m, std::vector<double>(3, 0.0));
  EXPECT_TRUE(std::isfinite(p[0]) && std::isfinite(p[1]));
  EXPECT_NEAR(p[0] + p[1], 1.0, 1e-12);
  for (int t = 0; t < 50; ++t) {
    const ClassifierModel r = RandomModel(5, 7, rng);
    p = Forward(r, RandomVector(5, rng));
    EXPECT_NEAR(p[0] + p[1], 1.0, 1e-12);
    EXPECT_GE(p[0], 0.0);
    EXPECT_GE(p[1], 0.0);
  }
}

TEST(ForwardTest, RejectsWrongInputSize) {
  const ClassifierModel m = ClassifierModel::Zeros(4);
  EXPECT_THROW(Forward(m, std::vector<double>(5, 0.0)), Error);
}

TEST(LossTest, KnownValues) {
  EXPECT_NEAR(Loss({0.5, 0.5}, 0), 0.6931471805599453, 1e-12);
  EXPECT_NEAR(Loss({0.7, 0.3}, 1), 1.2039728043259361, 1e-12);
  EXPECT_NEAR(Loss({1.0, 0.0}, 1), -std::log(1e-12), 1e-9);
}

TEST(BackwardTest, MatchesFiniteDifferences) {
  SplitMix64 rng(77);
  int checked = 0;
  for (int t = 0; t < 20; ++t) {
    const ClassifierModel m = RandomModel(8, 12, rng);
    LabeledExample ex{RandomVector(8, rng), static_cast<int>(rng.NextBelow(2))};
    checked += CheckGradients(m, ex);
  }
  EXPECT_GT(checked, 20 * 100);
}

TEST(BackwardTest, ZeroInputGivesZeroFirstLayerWeightGradient) {
  SplitMix64 rng(8);
  const ClassifierModel m = RandomModel(8, 12, rng);
  const Gradients g = Backward(m, {std::vector<double>(8, 0.0), 1});
  for (double v : g.w1) EXPECT_EQ(v, 0.0);
}

TEST(InitTest, GlorotBoundsAndZeroBiases) {
  SplitMix64 rng(3);
  const ClassifierModel m = ClassifierModel::GlorotUniform(2048, rng);
  const double l1 = std::sqrt(6.0 / (2048 + 512));
  const double l2 = std::sqrt(6.0 / (512 + 2));
  ASSERT_EQ(m.w1.size(), 512u * 2048u);
  ASSERT_EQ(m.w2.size(), 2u * 512u);
  for (double w : m.w1) ASSERT_LE(std::abs(w), l1);
  for (double w : m.w2) ASSERT_LE(std::abs(w), l2);
  for (double b : m.b1) EXPECT_EQ(b, 0.0);
  for (double b : m.b2) EXPECT_EQ(b, 0.0);
}

TEST(TrainTest, LearnsSeparableData) {
  SplitMix64 rng(2024);
  const auto train = Separable(200, rng);
  const auto val = Separable(100, rng);
  TrainConfig config;
  config.seed = 11;
  const ClassifierModel m = Train(train, val, config);
  EXPECT_GE(Accuracy(m, val), 0.98);
}

TEST(TrainTest, Deterministic) {
  SplitMix64 rng(1);
  const auto train = Separable(60, rng);
  const auto val = Separable(20, rng);
  TrainConfig config;
  config.seed = 9;
  config.max_epochs = 15;
  TrainHistory h1, h2;
  const ClassifierModel a = Train(train, val, config, &h1);
  const ClassifierModel b = Train(train, val, config, &h2);
  EXPECT_EQ(a, b);
  ASSERT_EQ(h1.size(), h2.size());
  for (size_t i = 0; i < h1.size(); ++i) {
    EXPECT_EQ(h1[i].train_loss, h2[i].train_loss);
  }
  config.seed = 10;
  EXPECT_FALSE(Train(train, val, config) == a);
}

TEST(TrainTest, NoSignalStaysNearChance) {
  SplitMix64 rng(99);
  auto make = [&rng](int n) {
    std::vector<LabeledExample> xs;
    for (int i = 0; i < n; ++i) {
      xs.push_back({RandomVector(8, rng), static_cast<int>(rng.NextBelow(2))});
    }
    return xs;
  };
  const auto train = make(200);
  const auto val = make(100);
  const auto test = make(400);
  TrainConfig config;
  config.seed = 4;
  const ClassifierModel m = Train(train, val, config);
  EXPECT_NEAR(Accuracy(m, test), 0.5, 0.1);
}

TEST(TrainTest, SmallLearningRateDecreasesLossSteadily) {
  SplitMix64 rng(12);
  const auto train = Separable(128, rng);
  TrainConfig config;
  config.seed = 21;
  config.learning_rate = 1e-3;
  config.max_epochs = 30;
  config.patience = 30;
  SplitMix64 init_rng(config.seed);
  const double initial =
      MeanLoss(ClassifierModel::GlorotUniform(8, init_rng), train);
  TrainHistory history;
  Train(train, train, config, &history);
  ASSERT_EQ(history.size(), 30u);
  EXPECT_LT(history.back().validation_loss, initial);
  double prev = initial;
  for (const EpochStats& s : history) {
    EXPECT_LE(s.validation_loss, prev * 1.1) << "epoch " << s.epoch;
    prev = s.validation_loss;
  }
}

TEST(TrainTest, EarlyStoppingKeepsBestEpoch) {
  SplitMix64 rng(13);
  const auto train = Separable(40, rng);
  const auto val = Separable(40, rng);
  TrainConfig config;
  config.seed = 2;
  config.learning_rate = 0.5;
  config.max_epochs = 60;
  config.patience = 3;
  TrainHistory history;
  const ClassifierModel m = Train(train, val, config, &history);
  double best = history.front().validation_loss;
  for (const EpochStats& s : history) best = std::min(best, s.validation_loss);
  EXPECT_EQ(m.metadata.validation_loss, best);
  EXPECT_EQ(m.metadata.epochs_run, static_cast<int>(history.size()));
  EXPECT_DOUBLE_EQ(MeanLoss(m, val), best);
}

TEST(TrainTest, RejectsBadInput) {
  SplitMix64 rng(14);
  const auto xs = Separable(10, rng);
  TrainConfig config;
  EXPECT_THROW(Train({}, xs, config), Error);
  EXPECT_THROW(Train(xs, {}, config), Error);
  config.batch_size = 0;
  EXPECT_THROW(Train(xs, xs, config), Error);
  config = TrainConfig();
  auto bad = xs;
  bad[3].label = 2;
  EXPECT_THROW(Train(bad, xs, config), Error);
}

TEST(TrainTest, DivergenceIsNumericalError) {
  SplitMix64 rng(15);
  auto xs = Separable(20, rng);
  for (auto& ex : xs) {
    for (double& x : ex.features) x *= 1e150;
  }
  TrainConfig config;
  config.learning_rate = 1e6;
  try {
    Train(xs, xs, config);
    FAIL() << "expected divergence";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kNumerical);
  }
}

TEST(ModelIoTest, BitExactRoundTrip) {
  SplitMix64 rng(16);
  ClassifierModel m = RandomModel(37, 9, rng);
  m.w1[0] = -0.0;
  m.w1[1] = std::numeric_limits<double>::denorm_min();
  m.w1[2] = 1e-310;
  m.w2[0] = 1.0 / 3.0;
  m.metadata = {123456789012345ULL, 17, 0.123456789};
  const ClassifierModel back = LoadModel(SaveModel(m));
  ASSERT_EQ(back.w1.size(), m.w1.size());
  for (size_t i = 0; i < m.w1.size(); ++i) {
    ASSERT_EQ(std::bit_cast<uint64_t>(back.w1[i]), std::bit_cast<uint64_t>(m.w1[i]));
  }
  EXPECT_EQ(back, m);
  EXPECT_EQ(SaveModel(back), SaveModel(m));
}

TEST(ModelIoTest, HeaderRecordsInputDim) {
  const std::string text = SaveModel(ClassifierModel::Zeros(2048));
  EXPECT_EQ(text.rfind("# patchfuse-model v1 in=2048\n", 0), 0u);
}

TEST(ModelIoTest, DimensionMismatchIsReported) {
  std::string text = SaveModel(ClassifierModel::Zeros(2047));
  text.replace(text.find("in=2047"), 7, "in=2048");
  try {
    LoadModel(text);
    FAIL() << "expected error";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kFormat);
    EXPECT_NE(std::string(e.what()).find("dimension"), std::string::npos) << e.what();
  }
}

TEST(ModelIoTest, RejectsGarbage) {
  EXPECT_THROW(LoadModel(""), Error);
  EXPECT_THROW(LoadModel("# patchfuse-model v2 in=4\n"), Error);
  std::string text = SaveModel(ClassifierModel::Zeros(3, 4));
  text.resize(text.rfind('\n', text.size() - 2) + 1);
  EXPECT_THROW(LoadModel(text), Error);
  text = SaveModel(ClassifierModel::Zeros(3, 4));
  text.replace(text.rfind("0.0"), 3, "x.0");
  EXPECT_THROW(LoadModel(text), Error);
}

}  // namespace
}  // namespace patchfuse
