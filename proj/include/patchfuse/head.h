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

#ifndef PATCHFUSE_HEAD_H_
#define PATCHFUSE_HEAD_H_

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "patchfuse/rng.h"

namespace patchfuse {

inline constexpr int kNumClasses = 2;  // 0 = benign, 1 = malignant
inline constexpr int kHiddenUnits = 512;
// Probabilities below this are clamped before taking logarithms.
inline constexpr double kProbabilityFloor = 1e-12;

// Per-class probabilities, summing to 1.
using ProbabilityVector = std::vector<double>;

struct ModelMetadata {
  uint64_t seed = 0;
  int epochs_run = 0;
  double validation_loss = 0.0;

  friend bool operator==(const ModelMetadata&, const ModelMetadata&) = default;
};

// Two fully connected layers with a ReLU between them and softmax on top:
//   probs = softmax(w2 * relu(w1 * x + b1) + b2)
// Matrices are row-major: w1 is hidden x in_dim, w2 is classes x hidden.
struct ClassifierModel {
  int in_dim = 0;
  int hidden = kHiddenUnits;
  int classes = kNumClasses;
  std::vector<double> w1;
  std::vector<double> b1;
  std::vector<double> w2;
  std::vector<double> b2;
  ModelMetadata metadata;

  // All parameters zero.
  static ClassifierModel Zeros(int in_dim, int hidden = kHiddenUnits,
                               int classes = kNumClasses);

  // Weights uniform in +-sqrt(6 / (fan_in + fan_out)), biases zero. Draws w1
  // then w2, row-major.
  static ClassifierModel GlorotUniform(int in_dim, SplitMix64& rng,
                                       int hidden = kHiddenUnits,
                                       int classes = kNumClasses);

  // Throws Error(kInvalidArgument) on inconsistent shapes or non-finite
  // parameters.
  void Validate() const;

  friend bool operator==(const ClassifierModel&,
                         const ClassifierModel&) = default;
};

// Same shapes as the model parameters.
struct Gradients {
  std::vector<double> w1;
  std::vector<double> b1;
  std::vector<double> w2;
  std::vector<double> b2;
};

struct LabeledExample {
  std::vector<double> features;
  int label = 0;
};

// Widens stored 32-bit features for training.
LabeledExample MakeExample(std::span<const float> features, int label);

ProbabilityVector Forward(const ClassifierModel& model,
                          std::span<const double> features);

// Cross-entropy -log p[label], with p clamped below at kProbabilityFloor.
double Loss(const ProbabilityVector& probs, int label);

// Analytic gradient of Loss(Forward(model, x), label) for one example.
Gradients Backward(const ClassifierModel& model, const LabeledExample& example);

struct TrainConfig {
  double learning_rate = 0.01;
  int batch_size = 32;
  int max_epochs = 200;
  int patience = 10;
  uint64_t seed = 0;
  // When unset, shuffling continues the initialization stream.
  std::optional<uint64_t> shuffle_seed;

  void Validate() const;
};

struct EpochStats {
  int epoch;
  double train_loss;  // mean loss over the epoch's mini-batches
  double validation_loss;
};

using TrainHistory = std::vector<EpochStats>;

// Mini-batch gradient descent with early stopping on validation loss. The
// returned model carries the parameters of the best validation epoch.
// Throws Error(kInvalidArgument) for empty or inconsistent data and
// Error(kNumerical) when a loss becomes non-finite.
ClassifierModel Train(std::span<const LabeledExample> train,
                      std::span<const LabeledExample> validation,
                      const TrainConfig& config,
                      TrainHistory* history = nullptr);

// Mean Loss over `examples`.
double MeanLoss(const ClassifierModel& model,
                std::span<const LabeledExample> examples);

// Text format: header "# patchfuse-model v1 in=<d>", metadata lines, then
// parameter blocks w1, b1, w2, b2 in 17-significant-digit scientific
// notation.
std::string SaveModel(const ClassifierModel& model);
ClassifierModel LoadModel(const std::string& text);

void SaveModelFile(const ClassifierModel& model, const std::string& path);
ClassifierModel LoadModelFile(const std::string& path);

}  // namespace patchfuse

#endif  // PATCHFUSE_HEAD_H_
