// SPDX-License-Identifier: Apache-2.0

#include "partsmine/synthetic.hpp"

#include <algorithm>
#include <cmath>

#include "partsmine/rng.hpp"

namespace partsmine::detect {
namespace {

constexpr std::uint8_t kBackgroundTone = 120;

struct Tone {
  std::uint8_t r, g, b;
};

Tone class_tone(int class_id) {
  static const Tone palette[] = {
      {200, 70, 60}, {60, 140, 210}, {80, 190, 90},
      {230, 180, 60}, {160, 80, 200}, {90, 200, 190},
  };
  return palette[static_cast<std::size_t>(class_id) % std::size(palette)];
}

core::FeatureVec class_embedding(std::uint64_t scene_seed, int class_id, int dim) {
  auto rng = core::stream(scene_seed, "class-emb", static_cast<std::uint64_t>(class_id));
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::vector<float> v(dim);
  double norm = 0.0;
  for (float& x : v) {
    x = static_cast<float>(gauss(rng));
    norm += static_cast<double>(x) * x;
  }
  norm = std::sqrt(std::max(norm, 1e-12));
  for (float& x : v) x = static_cast<float>(x / norm);
  return core::FeatureVec{std::move(v)};
}

core::MaskPatch mask_for_box(const SceneInstance& inst, const core::BBox& box) {
  const core::PixelRect r = core::raster(box);
  core::MaskPatch m;
  m.height = r.height();
  m.width = r.width();
  m.values.resize(static_cast<std::size_t>(m.height) * m.width);
  for (int y = 0; y < m.height; ++y)
    for (int x = 0; x < m.width; ++x)
      m.values[static_cast<std::size_t>(y) * m.width + x] =
          instance_soft_mask(inst, r.x0 + x + 0.5, r.y0 + y + 0.5);
  return m;
}

core::BBox clip_box_to_image(const core::BBox& b, int width, int height) {
  core::Corners c = core::to_corners(b);
  c.x0 = std::clamp(c.x0, 0.0, width - 2.0);
  c.y0 = std::clamp(c.y0, 0.0, height - 2.0);
  c.x1 = std::clamp(c.x1, c.x0 + 1.0, static_cast<double>(width));
  c.y1 = std::clamp(c.y1, c.y0 + 1.0, static_cast<double>(height));
  return core::from_corners(c);
}

// Bounding boxes of {q_l > 0.5} for every instance channel of the prior.
std::vector<core::BBox> prior_support_boxes(const crf::MarginalStack& prior) {
  std::vector<core::BBox> boxes;
  for (int l = 0; l + 1 < prior.labels; ++l) {
    int x0 = prior.width, y0 = prior.height, x1 = -1, y1 = -1;
    const auto q = prior.channel(l);
    for (int y = 0; y < prior.height; ++y)
      for (int x = 0; x < prior.width; ++x)
        if (q[static_cast<std::size_t>(y) * prior.width + x] > 0.5f) {
          x0 = std::min(x0, x);
          y0 = std::min(y0, y);
          x1 = std::max(x1, x);
          y1 = std::max(y1, y);
        }
    if (x1 >= x0 && y1 >= y0)
      boxes.push_back(core::from_corners(
          {static_cast<double>(x0), static_cast<double>(y0),
           static_cast<double>(x1 + 1), static_cast<double>(y1 + 1)}));
  }
  return boxes;
}

class ScriptedProvider : public DetectionProvider {
 public:
  ScriptedProvider(SyntheticScene scene, double jitter, int count, bool multiscale)
      : scene_(std::move(scene)), jitter_(jitter), count_(count),
        multiscale_(multiscale) {}

  std::vector<core::Proposal> propose(const DetectInput& input) const override {
    auto rng = core::stream(scene_.seed, "proposals",
                            static_cast<std::uint64_t>(input.round));
    std::normal_distribution<double> gauss(0.0, 1.0);
    std::vector<core::Proposal> out;

    for (std::size_t ii = 0; ii < scene_.instances.size(); ++ii) {
      const SceneInstance& inst = scene_.instances[ii];
      emit(inst, inst.bbox, rng, gauss, out);
      for (int c = 0; c < count_; ++c)
        emit(inst, jittered_box(inst.bbox, rng, gauss), rng, gauss, out);
      if (multiscale_) {
        // two variants per sub-box keep the suppressed pool larger than the
        // parts model, so the greedy search has real choices
        for (const core::BBox& base : part_boxes(inst.bbox))
          for (int v = 0; v < 2; ++v)
            emit(inst, jitter_ > 0 ? jittered_box(base, rng, gauss, 0.35) : base,
                 rng, gauss, out);
      }
    }

    if (input.prior && scene_.noise.prior_weight > 0.0) {
      const double w = scene_.noise.prior_weight;
      const auto support = prior_support_boxes(*input.prior);
      for (core::Proposal& p : out) {
        double best = 0.0;
        for (const core::BBox& b : support)
          best = std::max(best, core::iou(p.bbox, b));
        p.score = std::clamp(p.score * (1.0 - w + w * best), 0.0, 1.0);
      }
    }
    return out;
  }

 private:
  core::BBox jittered_box(const core::BBox& base, std::mt19937_64& rng,
                          std::normal_distribution<double>& gauss,
                          double scale = 1.0) const {
    const double j = jitter_ * scale;
    const double cx = base.cx + gauss(rng) * j * base.w;
    const double cy = base.cy + gauss(rng) * j * base.h;
    const double w = base.w * std::exp(gauss(rng) * j);
    const double h = base.h * std::exp(gauss(rng) * j);
    return clip_box_to_image(core::make_bbox(cx, cy, std::max(w, 2.0), std::max(h, 2.0)),
                             scene_.width, scene_.height);
  }

  // Half and quadrant sub-boxes: overlap with the full box stays above
  // typical benchmark tau values, so NMS folds them into the suppressed pool.
  static std::vector<core::BBox> part_boxes(const core::BBox& b) {
    const double qw = b.w / 2.0, qh = b.h / 2.0;
    std::vector<core::BBox> out;
    out.push_back(core::make_bbox(b.cx - qw / 2, b.cy, qw, b.h));  // left
    out.push_back(core::make_bbox(b.cx + qw / 2, b.cy, qw, b.h));  // right
    out.push_back(core::make_bbox(b.cx, b.cy - qh / 2, b.w, qh));  // top
    out.push_back(core::make_bbox(b.cx, b.cy + qh / 2, b.w, qh));  // bottom
    for (int sy = -1; sy <= 1; sy += 2)
      for (int sx = -1; sx <= 1; sx += 2)
        out.push_back(core::make_bbox(b.cx + sx * qw / 2, b.cy + sy * qh / 2, qw, qh));
    return out;
  }

  void emit(const SceneInstance& inst, const core::BBox& box,
            std::mt19937_64& rng, std::normal_distribution<double>& gauss,
            std::vector<core::Proposal>& out) const {
    core::Proposal p;
    p.bbox = box;
    p.class_id = inst.class_id;

    const double overlap = core::iou(box, inst.bbox);
    double decay = 1.0;
    core::FeatureVec feat = class_embedding(scene_.seed, inst.class_id,
                                            scene_.noise.feature_dim);
    // box-offset encoding in the leading dims; the gain keeps semantic
    // distances between distinct geometries meaningful next to detection
    // scores in the hypothesis objective
    constexpr double kOffsetGain = 3.0;
    const double off[4] = {(box.cx - inst.bbox.cx) / inst.bbox.w,
                           (box.cy - inst.bbox.cy) / inst.bbox.h,
                           std::log(box.w / inst.bbox.w),
                           std::log(box.h / inst.bbox.h)};
    for (int d = 0; d < 4 && d < feat.dim(); ++d)
      feat.values[d] += static_cast<float>(kOffsetGain * off[d]);
    if (jitter_ > 0.0) {
      const double z = gauss(rng);
      decay = std::max(0.0, 1.0 - scene_.noise.score_noise * std::abs(z));
      for (float& v : feat.values)
        v += static_cast<float>(gauss(rng) * scene_.noise.feature_noise);
    }
    p.score = std::clamp(overlap * decay, 0.0, 1.0);
    p.feature = std::move(feat);
    p.mask = mask_for_box(inst, box);
    out.push_back(std::move(p));
  }

  SyntheticScene scene_;
  double jitter_;
  int count_;
  bool multiscale_;
};

}  // namespace

float instance_soft_mask(const SceneInstance& inst, double x, double y) {
  const double nx = (x - inst.bbox.cx) / (inst.bbox.w * 0.5);
  const double ny = (y - inst.bbox.cy) / (inst.bbox.h * 0.5);
  const double r = std::sqrt(nx * nx + ny * ny);
  if (r >= 1.0) return 0.0f;
  if (r <= 0.85) return 0.95f;
  return static_cast<float>(0.95 * (1.0 - r) / 0.15);
}

core::RgbImage render_scene(const SyntheticScene& scene) {
  core::RgbImage img = core::make_image(scene.height, scene.width, kBackgroundTone);
  auto rng = core::stream(scene.seed, "render");
  std::normal_distribution<double> gauss(0.0, 6.0);
  for (int y = 0; y < scene.height; ++y)
    for (int x = 0; x < scene.width; ++x) {
      double rgb[3];
      const double noise = gauss(rng);
      for (double& c : rgb) c = kBackgroundTone + noise;
      for (const SceneInstance& inst : scene.instances) {
        const float soft = instance_soft_mask(inst, x + 0.5, y + 0.5);
        if (soft <= 0.0f) continue;
        const Tone tone = class_tone(inst.class_id);
        const double t[3] = {static_cast<double>(tone.r),
                             static_cast<double>(tone.g),
                             static_cast<double>(tone.b)};
        for (int c = 0; c < 3; ++c) rgb[c] = rgb[c] + soft * (t[c] - rgb[c]);
      }
      for (int c = 0; c < 3; ++c)
        img.at(y, x, c) = static_cast<std::uint8_t>(std::clamp(rgb[c], 0.0, 255.0));
    }
  return img;
}

std::unique_ptr<DetectionProvider> synthetic_provider(const SyntheticScene& scene,
                                                      double jitter, int count) {
  if (count < 1)
    throw std::invalid_argument("synthetic_provider: count must be >= 1");
  return std::make_unique<ScriptedProvider>(scene, jitter, count, false);
}

std::unique_ptr<DetectionProvider> multiscale_provider(const SyntheticScene& scene,
                                                       double jitter, int count) {
  if (count < 1)
    throw std::invalid_argument("multiscale_provider: count must be >= 1");
  return std::make_unique<ScriptedProvider>(scene, jitter, count, true);
}

SyntheticScene make_detection_scene(int height, int width, int instances,
                                    int classes, std::uint64_t seed) {
  SyntheticScene scene;
  scene.height = height;
  scene.width = width;
  scene.seed = seed;
  auto rng = core::stream(seed, "scene");
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const int cols = instances > 1 ? 2 : 1;
  const int rows = (instances + cols - 1) / cols;
  for (int i = 0; i < instances; ++i) {
    // lay instances out on a coarse grid so ground truth never overlaps
    const int r = i / cols, c = i % cols;
    const double cell_w = static_cast<double>(width) / cols;
    const double cell_h = static_cast<double>(height) / rows;
    const double w = cell_w * (0.45 + 0.2 * unit(rng));
    const double h = cell_h * (0.45 + 0.2 * unit(rng));
    const double cx = (c + 0.5) * cell_w + (unit(rng) - 0.5) * cell_w * 0.15;
    const double cy = (r + 0.5) * cell_h + (unit(rng) - 0.5) * cell_h * 0.15;
    SceneInstance inst;
    inst.bbox = core::make_bbox(cx, cy, w, h);
    inst.class_id = static_cast<int>(rng() % static_cast<std::uint64_t>(classes));
    scene.instances.push_back(inst);
  }
  return scene;
}

}  // namespace partsmine::detect
