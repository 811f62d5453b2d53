// SPDX-License-Identifier: Apache-2.0

#include "partsmine/encoder.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "partsmine/detect.hpp"
#include "partsmine/rng.hpp"

namespace partsmine::encoder {

core::FeatureVec PoolingExtractor::extract(const core::RgbImage& patch) const {
  std::vector<float> out(static_cast<std::size_t>(grid_) * grid_ * 3, 0.0f);
  for (int r = 0; r < grid_; ++r) {
    const int y0 = r * patch.height / grid_;
    const int y1 = std::max(y0 + 1, (r + 1) * patch.height / grid_);
    for (int c = 0; c < grid_; ++c) {
      const int x0 = c * patch.width / grid_;
      const int x1 = std::max(x0 + 1, (c + 1) * patch.width / grid_);
      double acc[3] = {0, 0, 0};
      for (int y = y0; y < y1 && y < patch.height; ++y)
        for (int x = x0; x < x1 && x < patch.width; ++x)
          for (int ch = 0; ch < 3; ++ch) acc[ch] += patch.at(y, x, ch);
      const double count =
          static_cast<double>(std::max(1, std::min(y1, patch.height) - y0)) *
          std::max(1, std::min(x1, patch.width) - x0);
      for (int ch = 0; ch < 3; ++ch)
        out[(static_cast<std::size_t>(r) * grid_ + c) * 3 + ch] =
            static_cast<float>(acc[ch] / count / 127.5 - 1.0);
    }
  }
  return core::FeatureVec{std::move(out)};
}

PatchSequence build_sequence(const core::RgbImage& image,
                             const parts::PartsModel& model,
                             const FeatureExtractor& extractor,
                             std::mt19937_64& rng, double crop_min_scale) {
  parts::validate(model);
  PatchSequence seq;
  seq.features.reserve(model.parts.size() + 2);
  seq.features.push_back(extractor.extract(image));

  for (const parts::Part& part : model.parts) {
    const core::PixelRect r =
        core::clip(core::raster(part.geometry), image.width, image.height);
    if (r.empty())
      throw detect::StageError("encoder", "part box falls outside the image");
    seq.features.push_back(extractor.extract(core::crop(image, r)));
  }

  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const double sw = (crop_min_scale + (1.0 - crop_min_scale) * unit(rng)) * image.width;
  const double sh = (crop_min_scale + (1.0 - crop_min_scale) * unit(rng)) * image.height;
  const double x0 = unit(rng) * (image.width - sw);
  const double y0 = unit(rng) * (image.height - sh);
  const core::PixelRect crop_rect = core::clip(
      core::raster(core::make_bbox(x0 + sw / 2, y0 + sh / 2, sw, sh)),
      image.width, image.height);
  seq.features.push_back(extractor.extract(core::crop(image, crop_rect)));
  return seq;
}

namespace {

struct Velocity {
  StackedLstm<float> v;
};

void sgd_step(StackedLstm<float>& net, const StackedLstm<float>& grad,
              Velocity& vel, const SgdConfig& opt, double lr) {
  auto update = [&](std::vector<float>& theta, const std::vector<float>& g,
                    std::vector<float>& v) {
    const float mu = static_cast<float>(opt.momentum);
    const float wd = static_cast<float>(opt.weight_decay);
    const float rate = static_cast<float>(lr);
    for (std::size_t i = 0; i < theta.size(); ++i) {
      v[i] = mu * v[i] - rate * (g[i] + wd * theta[i]);
      theta[i] += v[i];
    }
  };
  update(net.l1.wx.v, grad.l1.wx.v, vel.v.l1.wx.v);
  update(net.l1.wh.v, grad.l1.wh.v, vel.v.l1.wh.v);
  update(net.l1.b, grad.l1.b, vel.v.l1.b);
  update(net.l2.wx.v, grad.l2.wx.v, vel.v.l2.wx.v);
  update(net.l2.wh.v, grad.l2.wh.v, vel.v.l2.wh.v);
  update(net.l2.b, grad.l2.b, vel.v.l2.b);
  update(net.wc.v, grad.wc.v, vel.v.wc.v);
  update(net.bc, grad.bc, vel.v.bc);
}

}  // namespace

TrainResult train(const Dataset& train_set, const Dataset* val_set,
                  int num_classes, const LossConfig& loss_cfg,
                  const SgdConfig& opt) {
  if (train_set.size() == 0)
    throw std::invalid_argument("train: empty dataset");
  const int input_dim = train_set.sequences.front().features.front().dim();

  auto init_rng = core::stream(opt.seed, "encoder-init");
  TrainResult result;
  result.net = StackedLstm<float>::randomized(input_dim, opt.hidden_dim,
                                              num_classes, init_rng,
                                              opt.init_scale);
  Velocity vel{StackedLstm<float>::zeros(input_dim, opt.hidden_dim, num_classes)};

  std::vector<std::vector<std::vector<float>>> cache(train_set.size());
  for (std::size_t i = 0; i < train_set.size(); ++i)
    cache[i] = to_real<float>(train_set.sequences[i]);

  std::vector<std::size_t> order(train_set.size());
  std::iota(order.begin(), order.end(), 0);

  double lr = opt.lr;
  for (int epoch = 0; epoch < opt.epochs; ++epoch) {
    if (epoch > 0 && opt.lr_step_epochs > 0 && epoch % opt.lr_step_epochs == 0)
      lr *= opt.lr_decay;
    auto shuffle_rng = core::stream(opt.seed, "encoder-shuffle",
                                    static_cast<std::uint64_t>(epoch));
    std::shuffle(order.begin(), order.end(), shuffle_rng);

    double loss_sum = 0.0;
    std::size_t correct = 0;
    for (std::size_t idx : order) {
      const auto& seq = cache[idx];
      const int label = train_set.labels[idx];
      Gradients<float> g = backward(seq, result.net, label, loss_cfg);
      const auto probs = lstm_forward(seq, result.net);
      const double l = loss(probs, label, loss_cfg);
      if (!std::isfinite(l))
        throw detect::StageError("encoder",
                                 "training diverged (non-finite loss) at epoch " +
                                     std::to_string(epoch));
      loss_sum += l;
      const auto& p0 = probs[0];
      const int pred = static_cast<int>(
          std::max_element(p0.begin(), p0.end()) - p0.begin());
      if (pred == label) ++correct;
      sgd_step(result.net, g.params, vel, opt, lr);
    }

    EpochStats stats;
    stats.epoch = epoch;
    stats.train_loss = loss_sum / static_cast<double>(train_set.size());
    stats.train_accuracy =
        static_cast<double>(correct) / static_cast<double>(train_set.size());
    if (val_set) stats.val_accuracy = accuracy(*val_set, result.net);
    result.curve.push_back(stats);
  }
  return result;
}

Prediction predict(const PatchSequence& seq, const StackedLstm<float>& net,
                   bool aggregate_mean) {
  const auto probs = lstm_forward(to_real<float>(seq), net);
  std::vector<float> out;
  if (aggregate_mean) {
    out.assign(probs[0].size(), 0.0f);
    for (const auto& p : probs)
      for (std::size_t k = 0; k < p.size(); ++k) out[k] += p[k];
    for (float& v : out) v /= static_cast<float>(probs.size());
  } else {
    out = probs[0];
  }
  Prediction pred;
  pred.probs = out;
  pred.label = static_cast<int>(std::max_element(out.begin(), out.end()) -
                                out.begin());  // first max: lowest index wins
  return pred;
}

double accuracy(const Dataset& data, const StackedLstm<float>& net,
                bool aggregate_mean) {
  if (data.size() == 0) return 0.0;
  std::size_t correct = 0;
  for (std::size_t i = 0; i < data.size(); ++i)
    if (predict(data.sequences[i], net, aggregate_mean).label == data.labels[i])
      ++correct;
  return static_cast<double>(correct) / static_cast<double>(data.size());
}

namespace {

std::vector<float> concat_features(const PatchSequence& seq) {
  std::vector<float> x;
  for (const auto& f : seq.features)
    x.insert(x.end(), f.values.begin(), f.values.end());
  return x;
}

std::vector<float> linear_softmax(const LinearSoftmax& m,
                                  std::span<const float> x) {
  std::vector<float> logits(m.num_classes);
  for (int k = 0; k < m.num_classes; ++k)
    logits[k] = m.b[k] + kern::dot(m.w.row(k), x);
  float hi = logits[0];
  for (float v : logits) hi = std::max(hi, v);
  float z = 0.0f;
  for (float& v : logits) {
    v = std::exp(v - hi);
    z += v;
  }
  for (float& v : logits) v /= z;
  return logits;
}

// shared SGD body for both linear baselines; `per_patch` switches between one
// concatenated example and one term per patch
LinearSoftmax train_linear(const Dataset& train_set, int num_classes,
                           const SgdConfig& opt, bool per_patch) {
  const int dim = per_patch
                      ? train_set.sequences.front().features.front().dim()
                      : static_cast<int>(
                            concat_features(train_set.sequences.front()).size());
  LinearSoftmax model;
  model.input_dim = dim;
  model.num_classes = num_classes;
  model.w = Mat<float>(num_classes, dim);
  model.b.assign(num_classes, 0.0f);
  auto init_rng = core::stream(opt.seed, per_patch ? "avg-init" : "concat-init");
  std::uniform_real_distribution<double> u(-opt.init_scale, opt.init_scale);
  for (float& v : model.w.v) v = static_cast<float>(u(init_rng));

  Mat<float> vw(num_classes, dim);
  std::vector<float> vb(num_classes, 0.0f);
  std::vector<std::size_t> order(train_set.size());
  std::iota(order.begin(), order.end(), 0);

  double lr = opt.lr;
  for (int epoch = 0; epoch < opt.epochs; ++epoch) {
    if (epoch > 0 && opt.lr_step_epochs > 0 && epoch % opt.lr_step_epochs == 0)
      lr *= opt.lr_decay;
    auto rng = core::stream(opt.seed, per_patch ? "avg-shuffle" : "concat-shuffle",
                            static_cast<std::uint64_t>(epoch));
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t idx : order) {
      const int label = train_set.labels[idx];
      std::vector<std::vector<float>> inputs;
      if (per_patch) {
        for (const auto& f : train_set.sequences[idx].features)
          inputs.push_back(f.values);
      } else {
        inputs.push_back(concat_features(train_set.sequences[idx]));
      }
      Mat<float> gw(num_classes, dim);
      std::vector<float> gb(num_classes, 0.0f);
      for (const auto& x : inputs) {
        const auto p = linear_softmax(model, x);
        for (int k = 0; k < num_classes; ++k) {
          const float d = p[k] - (k == label ? 1.0f : 0.0f);
          gb[k] += d;
          kern::axpy(d, std::span<const float>(x), gw.row(k));
        }
      }
      const float mu = static_cast<float>(opt.momentum);
      const float wd = static_cast<float>(opt.weight_decay);
      const float rate = static_cast<float>(lr);
      for (std::size_t i = 0; i < model.w.v.size(); ++i) {
        vw.v[i] = mu * vw.v[i] - rate * (gw.v[i] + wd * model.w.v[i]);
        model.w.v[i] += vw.v[i];
      }
      for (int k = 0; k < num_classes; ++k) {
        vb[k] = mu * vb[k] - rate * gb[k];
        model.b[k] += vb[k];
      }
    }
  }
  return model;
}

}  // namespace

LinearSoftmax train_concat_baseline(const Dataset& train_set, int num_classes,
                                    const SgdConfig& opt) {
  return train_linear(train_set, num_classes, opt, false);
}

LinearSoftmax train_average_baseline(const Dataset& train_set, int num_classes,
                                     const SgdConfig& opt) {
  return train_linear(train_set, num_classes, opt, true);
}

int predict_concat(const PatchSequence& seq, const LinearSoftmax& model) {
  const auto x = concat_features(seq);
  const auto p = linear_softmax(model, x);
  return static_cast<int>(std::max_element(p.begin(), p.end()) - p.begin());
}

std::vector<float> average_probs(const PatchSequence& seq,
                                 const LinearSoftmax& model) {
  std::vector<float> sum(model.num_classes, 0.0f);
  for (const auto& f : seq.features) {
    const auto p = linear_softmax(model, f.values);
    for (int k = 0; k < model.num_classes; ++k) sum[k] += p[k];
  }
  return sum;
}

int predict_average(const PatchSequence& seq, const LinearSoftmax& model) {
  const auto sum = average_probs(seq, model);
  return static_cast<int>(std::max_element(sum.begin(), sum.end()) - sum.begin());
}

double accuracy_concat(const Dataset& data, const LinearSoftmax& model) {
  std::size_t correct = 0;
  for (std::size_t i = 0; i < data.size(); ++i)
    if (predict_concat(data.sequences[i], model) == data.labels[i]) ++correct;
  return data.size() ? static_cast<double>(correct) / data.size() : 0.0;
}

double accuracy_average(const Dataset& data, const LinearSoftmax& model) {
  std::size_t correct = 0;
  for (std::size_t i = 0; i < data.size(); ++i)
    if (predict_average(data.sequences[i], model) == data.labels[i]) ++correct;
  return data.size() ? static_cast<double>(correct) / data.size() : 0.0;
}

}  // namespace partsmine::encoder
