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
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>
#include <system_error>
#include <utility>

#include "patchfuse/error.h"

namespace patchfuse {
namespace {

// Four partial sums with a fixed association order.
double Dot(const double* a, const double* b, int n) {
  double s0 = 0.0, s1 = 0.0, s2 = 0.0, s3 = 0.0;
  int i = 0;
  for (; i + 4 <= n; i += 4) {
    s0 += a[i] * b[i];
    s1 += a[i + 1] * b[i + 1];
    s2 += a[i + 2] * b[i + 2];
    s3 += a[i + 3] * b[i + 3];
  }
  for (; i < n; ++i) s0 += a[i] * b[i];
  return (s0 + s1) + (s2 + s3);
}

void Softmax(std::span<const double> logits, ProbabilityVector& probs) {
  const double max_logit = *std::max_element(logits.begin(), logits.end());
  double total = 0.0;
  for (size_t k = 0; k < logits.size(); ++k) {
    probs[k] = std::exp(logits[k] - max_logit);
    total += probs[k];
  }
  for (double& p : probs) p /= total;
}

// Activations kept for the backward pass.
struct Activations {
  std::vector<double> hidden;  // post-ReLU
  ProbabilityVector probs;
};

void ForwardInto(const ClassifierModel& m, const double* x, Activations& act) {
  act.hidden.resize(m.hidden);
  for (int i = 0; i < m.hidden; ++i) {
    const double z =
        Dot(m.w1.data() + static_cast<size_t>(i) * m.in_dim, x, m.in_dim) +
        m.b1[i];
    act.hidden[i] = z > 0.0 ? z : 0.0;
  }
  std::vector<double> logits(m.classes);
  for (int k = 0; k < m.classes; ++k) {
    logits[k] = Dot(m.w2.data() + static_cast<size_t>(k) * m.hidden,
                    act.hidden.data(), m.hidden) +
                m.b2[k];
  }
  act.probs.resize(m.classes);
  Softmax(logits, act.probs);
}

void CheckInput(const ClassifierModel& m, size_t n) {
  if (n != static_cast<size_t>(m.in_dim)) {
    throw Error(ErrorCode::kInvalidArgument,
                "feature length " + std::to_string(n) +
                    " does not match model input dim " +
                    std::to_string(m.in_dim));
  }
}

Gradients ZeroGradients(const ClassifierModel& m) {
  return {std::vector<double>(m.w1.size()), std::vector<double>(m.b1.size()),
          std::vector<double>(m.w2.size()), std::vector<double>(m.b2.size())};
}

// Activations for a group of examples, laid out example-major.
struct BatchActivations {
  std::vector<double> hidden;  // post-ReLU, n x hidden
  std::vector<double> probs;   // n x classes
  std::vector<double> hidden_delta;
  std::vector<double> logits;
};

// Same values as ForwardInto per example, with hidden rows as the outer
// loop.
void ForwardBatch(const ClassifierModel& m, std::span<const double* const> xs,
                  BatchActivations& act) {
  const size_t n = xs.size();
  act.hidden.resize(n * m.hidden);
  act.probs.resize(n * m.classes);
  act.logits.resize(m.classes);
  for (int i = 0; i < m.hidden; ++i) {
    const double* w = m.w1.data() + static_cast<size_t>(i) * m.in_dim;
    for (size_t b = 0; b < n; ++b) {
      const double z = Dot(w, xs[b], m.in_dim) + m.b1[i];
      act.hidden[b * m.hidden + i] = z > 0.0 ? z : 0.0;
    }
  }
  ProbabilityVector probs(m.classes);
  for (size_t b = 0; b < n; ++b) {
    const double* h = act.hidden.data() + b * m.hidden;
    for (int k = 0; k < m.classes; ++k) {
      act.logits[k] =
          Dot(m.w2.data() + static_cast<size_t>(k) * m.hidden, h, m.hidden) +
          m.b2[k];
    }
    Softmax(act.logits, probs);
    std::copy(probs.begin(), probs.end(), act.probs.begin() + b * m.classes);
  }
}

// Adds the gradients of a batch into `g` and returns the summed loss.
double AccumulateBatch(const ClassifierModel& m,
                       std::span<const double* const> xs,
                       std::span<const int> labels, BatchActivations& act,
                       Gradients& g) {
  ForwardBatch(m, xs, act);
  const size_t n = xs.size();
  act.hidden_delta.assign(n * m.hidden, 0.0);
  double loss = 0.0;
  ProbabilityVector probs(m.classes);
  for (size_t b = 0; b < n; ++b) {
    std::copy_n(act.probs.begin() + b * m.classes, m.classes, probs.begin());
    loss += Loss(probs, labels[b]);
    const double* h = act.hidden.data() + b * m.hidden;
    double* hd = act.hidden_delta.data() + b * m.hidden;
    for (int k = 0; k < m.classes; ++k) {
      const double delta = probs[k] - (k == labels[b] ? 1.0 : 0.0);
      g.b2[k] += delta;
      double* gw2 = g.w2.data() + static_cast<size_t>(k) * m.hidden;
      const double* w2 = m.w2.data() + static_cast<size_t>(k) * m.hidden;
      for (int i = 0; i < m.hidden; ++i) {
        gw2[i] += delta * h[i];
        hd[i] += delta * w2[i];
      }
    }
  }
  for (int i = 0; i < m.hidden; ++i) {
    double* row = g.w1.data() + static_cast<size_t>(i) * m.in_dim;
    for (size_t b = 0; b < n; ++b) {
      const double d = act.hidden_delta[b * m.hidden + i];
      if (act.hidden[b * m.hidden + i] <= 0.0 || d == 0.0) continue;
      g.b1[i] += d;
      const double* x = xs[b];
      for (int j = 0; j < m.in_dim; ++j) row[j] += d * x[j];
    }
  }
  return loss;
}

void Step(std::vector<double>& param, const std::vector<double>& grad,
          double scale) {
  for (size_t i = 0; i < param.size(); ++i) param[i] -= scale * grad[i];
}

void Fill(std::vector<double>& v, double bound, SplitMix64& rng) {
  for (double& w : v) w = rng.NextUniform(-bound, bound);
}

}  // namespace

ClassifierModel ClassifierModel::Zeros(int in_dim, int hidden, int classes) {
  if (in_dim < 1 || hidden < 1 || classes < 2) {
    throw Error(ErrorCode::kInvalidArgument, "invalid classifier shape");
  }
  ClassifierModel m;
  m.in_dim = in_dim;
  m.hidden = hidden;
  m.classes = classes;
  m.w1.assign(static_cast<size_t>(hidden) * in_dim, 0.0);
  m.b1.assign(hidden, 0.0);
  m.w2.assign(static_cast<size_t>(classes) * hidden, 0.0);
  m.b2.assign(classes, 0.0);
  return m;
}

ClassifierModel ClassifierModel::GlorotUniform(int in_dim, SplitMix64& rng,
                                               int hidden, int classes) {
  ClassifierModel m = Zeros(in_dim, hidden, classes);
  Fill(m.w1, std::sqrt(6.0 / (in_dim + hidden)), rng);
  Fill(m.w2, std::sqrt(6.0 / (hidden + classes)), rng);
  return m;
}

void ClassifierModel::Validate() const {
  if (in_dim < 1 || hidden < 1 || classes < 2 ||
      w1.size() != static_cast<size_t>(hidden) * in_dim ||
      b1.size() != static_cast<size_t>(hidden) ||
      w2.size() != static_cast<size_t>(classes) * hidden ||
      b2.size() != static_cast<size_t>(classes)) {
    throw Error(ErrorCode::kInvalidArgument, "inconsistent classifier shapes");
  }
  for (const auto* v : {&w1, &b1, &w2, &b2}) {
    for (double x : *v) {
      if (!std::isfinite(x)) {
        throw Error(ErrorCode::kNumerical, "classifier has non-finite parameter");
      }
    }
  }
}

LabeledExample MakeExample(std::span<const float> features, int label) {
  return {std::vector<double>(features.begin(), features.end()), label};
}

ProbabilityVector Forward(const ClassifierModel& model,
                          std::span<const double> features) {
  CheckInput(model, features.size());
  Activations act;
  ForwardInto(model, features.data(), act);
  return act.probs;
}

double Loss(const ProbabilityVector& probs, int label) {
  return -std::log(std::max(probs.at(label), kProbabilityFloor));
}

Gradients Backward(const ClassifierModel& model, const LabeledExample& example) {
  CheckInput(model, example.features.size());
  if (example.label < 0 || example.label >= model.classes) {
    throw Error(ErrorCode::kInvalidArgument, "label out of range");
  }
  Gradients g = ZeroGradients(model);
  BatchActivations act;
  const double* x = example.features.data();
  AccumulateBatch(model, {&x, 1}, {&example.label, 1}, act, g);
  return g;
}

void TrainConfig::Validate() const {
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) {
    throw Error(ErrorCode::kInvalidArgument, "learning rate must be positive");
  }
  if (batch_size < 1) {
    throw Error(ErrorCode::kInvalidArgument, "batch size must be positive");
  }
  if (max_epochs < 1) {
    throw Error(ErrorCode::kInvalidArgument, "epoch count must be positive");
  }
  if (patience < 0) {
    throw Error(ErrorCode::kInvalidArgument, "patience must be non-negative");
  }
}

double MeanLoss(const ClassifierModel& model,
                std::span<const LabeledExample> examples) {
  if (examples.empty()) return 0.0;
  constexpr size_t kChunk = 32;
  BatchActivations act;
  std::vector<const double*> xs;
  ProbabilityVector probs(model.classes);
  double total = 0.0;
  for (size_t start = 0; start < examples.size(); start += kChunk) {
    const size_t end = std::min(examples.size(), start + kChunk);
    xs.clear();
    for (size_t e = start; e < end; ++e) {
      CheckInput(model, examples[e].features.size());
      xs.push_back(examples[e].features.data());
    }
    ForwardBatch(model, xs, act);
    for (size_t e = start; e < end; ++e) {
      std::copy_n(act.probs.begin() + (e - start) * model.classes,
                  model.classes, probs.begin());
      total += Loss(probs, examples[e].label);
    }
  }
  return total / static_cast<double>(examples.size());
}

ClassifierModel Train(std::span<const LabeledExample> train,
                      std::span<const LabeledExample> validation,
                      const TrainConfig& config, TrainHistory* history) {
  config.Validate();
  if (train.empty()) {
    throw Error(ErrorCode::kInvalidArgument, "training set is empty");
  }
  if (validation.empty()) {
    throw Error(ErrorCode::kInvalidArgument, "validation set is empty");
  }
  const size_t in_dim = train.front().features.size();
  for (const auto set : {train, validation}) {
    for (const LabeledExample& ex : set) {
      if (ex.features.size() != in_dim) {
        throw Error(ErrorCode::kInvalidArgument,
                    "inconsistent feature dimensions in training data");
      }
      if (ex.label < 0 || ex.label >= kNumClasses) {
        throw Error(ErrorCode::kInvalidArgument, "label out of range");
      }
    }
  }

  SplitMix64 init_rng(config.seed);
  ClassifierModel model =
      ClassifierModel::GlorotUniform(static_cast<int>(in_dim), init_rng);
  std::optional<SplitMix64> separate_shuffle_rng;
  if (config.shuffle_seed) separate_shuffle_rng.emplace(*config.shuffle_seed);
  SplitMix64& shuffle_rng =
      separate_shuffle_rng ? *separate_shuffle_rng : init_rng;

  std::vector<size_t> order(train.size());
  std::iota(order.begin(), order.end(), size_t{0});

  ClassifierModel best = model;
  double best_loss = std::numeric_limits<double>::infinity();
  int epochs_without_improvement = 0;
  int epochs_run = 0;
  Gradients grad = ZeroGradients(model);
  BatchActivations act;
  std::vector<const double*> xs;
  std::vector<int> labels;

  for (int epoch = 1; epoch <= config.max_epochs; ++epoch) {
    epochs_run = epoch;
    Shuffle(std::span<size_t>(order), shuffle_rng);
    double epoch_loss = 0.0;
    for (size_t start = 0; start < order.size();
         start += static_cast<size_t>(config.batch_size)) {
      const size_t end =
          std::min(order.size(), start + static_cast<size_t>(config.batch_size));
      for (auto* v : {&grad.w1, &grad.b1, &grad.w2, &grad.b2}) {
        std::fill(v->begin(), v->end(), 0.0);
      }
      xs.clear();
      labels.clear();
      for (size_t i = start; i < end; ++i) {
        xs.push_back(train[order[i]].features.data());
        labels.push_back(train[order[i]].label);
      }
      epoch_loss += AccumulateBatch(model, xs, labels, act, grad);
      const double scale =
          config.learning_rate / static_cast<double>(end - start);
      Step(model.w1, grad.w1, scale);
      Step(model.b1, grad.b1, scale);
      Step(model.w2, grad.w2, scale);
      Step(model.b2, grad.b2, scale);
    }
    const double train_loss = epoch_loss / static_cast<double>(train.size());
    const double val_loss = MeanLoss(model, validation);
    if (!std::isfinite(train_loss) || !std::isfinite(val_loss)) {
      throw Error(ErrorCode::kNumerical,
                  "training diverged at epoch " + std::to_string(epoch));
    }
    if (history != nullptr) history->push_back({epoch, train_loss, val_loss});
    if (val_loss < best_loss) {
      best_loss = val_loss;
      best = model;
      epochs_without_improvement = 0;
    } else if (++epochs_without_improvement >= config.patience) {
      break;
    }
  }
  best.Validate();
  best.metadata = {config.seed, epochs_run, best_loss};
  return best;
}

namespace {

constexpr std::string_view kModelMagic = "# patchfuse-model v1 in=";

void AppendDouble(std::string& out, double v) {
  char buf[40];
  auto res = std::to_chars(buf, buf + sizeof(buf), v,
                           std::chars_format::scientific, 16);
  out.append(buf, res.ptr);
}

// Matrices carry "<name> <rows> <cols>", vectors "<name> <n>".
void AppendBlock(std::string& out, const char* name,
                 const std::vector<double>& values, int rows, int cols,
                 bool matrix) {
  out += name;
  if (matrix) {
    out += ' ' + std::to_string(rows) + ' ' + std::to_string(cols) + '\n';
  } else {
    out += ' ' + std::to_string(cols) + '\n';
  }
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) {
      if (c > 0) out += ' ';
      AppendDouble(out, values[static_cast<size_t>(r) * cols + c]);
    }
    out += '\n';
  }
}

class ModelParser {
 public:
  explicit ModelParser(const std::string& text) : in_(text) {}

  [[noreturn]] void Fail(const std::string& what) const {
    throw Error(ErrorCode::kFormat,
                "model line " + std::to_string(line_no_) + ": " + what);
  }

  std::string NextLine() {
    std::string line;
    if (!std::getline(in_, line)) {
      ++line_no_;
      Fail("unexpected end of file");
    }
    ++line_no_;
    return line;
  }

  static std::vector<std::string_view> Tokens(std::string_view line) {
    std::vector<std::string_view> out;
    size_t i = 0;
    while (i < line.size()) {
      while (i < line.size() && line[i] == ' ') ++i;
      const size_t start = i;
      while (i < line.size() && line[i] != ' ') ++i;
      if (i > start) out.push_back(line.substr(start, i - start));
    }
    return out;
  }

  template <typename T>
  T Number(std::string_view token) const {
    T v{};
    auto res = std::from_chars(token.data(), token.data() + token.size(), v);
    if (res.ec != std::errc() || res.ptr != token.data() + token.size()) {
      Fail("non-numeric token '" + std::string(token) + "'");
    }
    return v;
  }

  // "<key> <value>"
  template <typename T>
  T KeyValue(std::string_view key) {
    const std::string line = NextLine();
    const auto tokens = Tokens(line);
    if (tokens.size() != 2 || tokens[0] != key) {
      Fail("expected '" + std::string(key) + " <value>'");
    }
    return Number<T>(tokens[1]);
  }

  std::vector<double> Block(std::string_view name, int rows, int cols,
                            bool matrix) {
    const std::string header = NextLine();
    const auto tokens = Tokens(header);
    if (tokens.empty() || tokens[0] != name) {
      Fail("expected block '" + std::string(name) + "'");
    }
    if (tokens.size() != (matrix ? 3u : 2u)) {
      Fail("malformed block header for '" + std::string(name) + "'");
    }
    const int got_rows = matrix ? Number<int>(tokens[1]) : 1;
    const int got_cols = Number<int>(tokens[matrix ? 2 : 1]);
    if (got_rows != rows || got_cols != cols) {
      Fail("dimension mismatch for '" + std::string(name) + "': expected " +
           std::to_string(rows) + "x" + std::to_string(cols) + ", found " +
           std::to_string(got_rows) + "x" + std::to_string(got_cols));
    }
    std::vector<double> values;
    values.reserve(static_cast<size_t>(rows) * cols);
    for (int r = 0; r < rows; ++r) {
      const std::string line = NextLine();
      const auto row = Tokens(line);
      if (row.size() != static_cast<size_t>(cols)) {
        Fail("dimension mismatch for '" + std::string(name) + "': expected " +
             std::to_string(cols) + " values, found " +
             std::to_string(row.size()));
      }
      for (std::string_view tok : row) values.push_back(Number<double>(tok));
    }
    return values;
  }

  void ExpectEnd() {
    std::string line;
    while (std::getline(in_, line)) {
      ++line_no_;
      if (!line.empty()) Fail("trailing content");
    }
  }

 private:
  std::istringstream in_;
  int line_no_ = 0;
};

}  // namespace

std::string SaveModel(const ClassifierModel& model) {
  model.Validate();
  std::string out(kModelMagic);
  out += std::to_string(model.in_dim) + '\n';
  out += "hidden " + std::to_string(model.hidden) + '\n';
  out += "classes " + std::to_string(model.classes) + '\n';
  out += "seed " + std::to_string(model.metadata.seed) + '\n';
  out += "epochs " + std::to_string(model.metadata.epochs_run) + '\n';
  out += "val_loss ";
  AppendDouble(out, model.metadata.validation_loss);
  out += '\n';
  AppendBlock(out, "w1", model.w1, model.hidden, model.in_dim, true);
  AppendBlock(out, "b1", model.b1, 1, model.hidden, false);
  AppendBlock(out, "w2", model.w2, model.classes, model.hidden, true);
  AppendBlock(out, "b2", model.b2, 1, model.classes, false);
  return out;
}

ClassifierModel LoadModel(const std::string& text) {
  ModelParser p(text);
  const std::string header = p.NextLine();
  if (header.rfind(kModelMagic, 0) != 0) p.Fail("bad header");
  const int in_dim = p.Number<int>(std::string_view(header).substr(kModelMagic.size()));
  const int hidden = p.KeyValue<int>("hidden");
  const int classes = p.KeyValue<int>("classes");
  if (in_dim < 1 || hidden < 1 || classes < 2) p.Fail("invalid model shape");
  ClassifierModel m = ClassifierModel::Zeros(in_dim, hidden, classes);
  m.metadata.seed = p.KeyValue<uint64_t>("seed");
  m.metadata.epochs_run = p.KeyValue<int>("epochs");
  m.metadata.validation_loss = p.KeyValue<double>("val_loss");
  m.w1 = p.Block("w1", hidden, in_dim, true);
  m.b1 = p.Block("b1", 1, hidden, false);
  m.w2 = p.Block("w2", classes, hidden, true);
  m.b2 = p.Block("b2", 1, classes, false);
  p.ExpectEnd();
  m.Validate();
  return m;
}

void SaveModelFile(const ClassifierModel& model, const std::string& path) {
  const std::string text = SaveModel(model);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::kIo, "cannot write " + path);
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!out) throw Error(ErrorCode::kIo, "write failed for " + path);
}

ClassifierModel LoadModelFile(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIo, "cannot open " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  try {
    return LoadModel(buf.str());
  } catch (const Error& e) {
    throw Error(e.code(), path + ": " + e.what());
  }
}

}  // namespace patchfuse
