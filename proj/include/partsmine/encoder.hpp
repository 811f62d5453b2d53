// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <memory>
#include <vector>

#include "partsmine/image.hpp"
#include "partsmine/lstm.hpp"
#include "partsmine/parts.hpp"

namespace partsmine::encoder {

// Deterministic image patch -> fixed-dim feature.
class FeatureExtractor {
 public:
  virtual ~FeatureExtractor() = default;
  virtual core::FeatureVec extract(const core::RgbImage& patch) const = 0;
  virtual int dim() const = 0;
};

// Mean-pools the patch onto a grid x grid x 3 layout, values scaled to
// [-1, 1]. Crop size sets the effective receptive resolution: small crops
// resolve detail that whole-image pooling averages away.
class PoolingExtractor : public FeatureExtractor {
 public:
  explicit PoolingExtractor(int grid = 6) : grid_(grid) {}
  core::FeatureVec extract(const core::RgbImage& patch) const override;
  int dim() const override { return grid_ * grid_ * 3; }

 private:
  int grid_;
};

// Feature order follows the fusion input layout: whole image, parts A1..An+1,
// then one random crop. n+3 vectors in total.
struct PatchSequence {
  std::vector<core::FeatureVec> features;
};

PatchSequence build_sequence(const core::RgbImage& image,
                             const parts::PartsModel& model,
                             const FeatureExtractor& extractor,
                             std::mt19937_64& rng, double crop_min_scale = 0.7);

template <class T>
std::vector<std::vector<T>> to_real(const PatchSequence& seq) {
  std::vector<std::vector<T>> out(seq.features.size());
  for (std::size_t i = 0; i < seq.features.size(); ++i) {
    out[i].resize(seq.features[i].values.size());
    for (std::size_t j = 0; j < out[i].size(); ++j)
      out[i][j] = static_cast<T>(seq.features[i].values[j]);
  }
  return out;
}

struct Dataset {
  std::vector<PatchSequence> sequences;
  std::vector<int> labels;
  std::size_t size() const { return sequences.size(); }
};

struct SgdConfig {
  double lr = 0.001;
  double momentum = 0.9;
  double weight_decay = 0.0002;
  double lr_decay = 0.1;      // multiplier applied every lr_step_epochs
  int lr_step_epochs = 20;
  int epochs = 40;
  int hidden_dim = 256;
  double init_scale = 0.1;
  std::uint64_t seed = 7;
};

struct EpochStats {
  int epoch = 0;
  double train_loss = 0.0;
  double train_accuracy = 0.0;
  double val_accuracy = -1.0;  // -1 when no validation set
};

struct TrainResult {
  StackedLstm<float> net;
  std::vector<EpochStats> curve;
};

// Plain SGD with momentum and weight decay over a seeded shuffle; aborts with
// a StageError when the loss goes non-finite.
TrainResult train(const Dataset& train_set, const Dataset* val_set,
                  int num_classes, const LossConfig& loss_cfg,
                  const SgdConfig& opt);

struct Prediction {
  int label = 0;
  std::vector<float> probs;
};

// Whole-image step by default; `aggregate_mean` averages every step's output
// instead. Ties break to the lowest class index.
Prediction predict(const PatchSequence& seq, const StackedLstm<float>& net,
                   bool aggregate_mean = false);

double accuracy(const Dataset& data, const StackedLstm<float>& net,
                bool aggregate_mean = false);

// Ablation baselines: one linear softmax over concatenated features, and a
// shared per-patch linear softmax whose outputs are summed at prediction.
struct LinearSoftmax {
  int input_dim = 0, num_classes = 0;
  Mat<float> w;
  std::vector<float> b;
};

LinearSoftmax train_concat_baseline(const Dataset& train_set, int num_classes,
                                    const SgdConfig& opt);
LinearSoftmax train_average_baseline(const Dataset& train_set, int num_classes,
                                     const SgdConfig& opt);
int predict_concat(const PatchSequence& seq, const LinearSoftmax& model);
int predict_average(const PatchSequence& seq, const LinearSoftmax& model);
std::vector<float> average_probs(const PatchSequence& seq,
                                 const LinearSoftmax& model);
double accuracy_concat(const Dataset& data, const LinearSoftmax& model);
double accuracy_average(const Dataset& data, const LinearSoftmax& model);

}  // namespace partsmine::encoder
