// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <memory>
#include <vector>

#include "partsmine/detect.hpp"

namespace partsmine::detect {

struct SceneInstance {
  core::BBox bbox;
  int class_id = 0;
};

// Reproducible test scene: ground truth instances plus the noise model the
// providers draw from.
struct SyntheticScene {
  int width = 64;
  int height = 64;
  std::uint64_t seed = 0;
  std::vector<SceneInstance> instances;

  struct Noise {
    double score_noise = 0.15;    // multiplicative score decay scale
    double feature_noise = 0.1;   // per-dim Gaussian sigma on features
    double prior_weight = 0.5;    // 0 disables prior re-scoring
    int feature_dim = 64;
  } noise;
};

// Soft elliptical support of an instance at a pixel, in [0, 0.95].
float instance_soft_mask(const SceneInstance& inst, double x, double y);

// Flat render: per-class tones on a noisy gray background.
core::RgbImage render_scene(const SyntheticScene& scene);

// Ground-truth boxes plus `count` jittered copies per instance. Score is the
// IoU with the source instance decayed by the proposal's noise draw; features
// are the class embedding plus a box-offset encoding plus Gaussian noise.
// jitter == 0 turns all noise off (pure echo provider). When a prior is given
// and the scene's prior_weight > 0, scores are re-weighted by overlap with
// the prior's instance support boxes.
std::unique_ptr<DetectionProvider> synthetic_provider(const SyntheticScene& scene,
                                                      double jitter, int count);

// Benchmark provider: adds half- and quadrant-scale sub-boxes of each
// instance so the suppressed pool carries part-level candidates.
std::unique_ptr<DetectionProvider> multiscale_provider(const SyntheticScene& scene,
                                                       double jitter, int count);

// Detection-suite scene with `instances` non-overlapping blobs.
SyntheticScene make_detection_scene(int height, int width, int instances,
                                    int classes, std::uint64_t seed);

}  // namespace partsmine::detect
