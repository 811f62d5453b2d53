// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <span>
#include <vector>

#include "partsmine/feature.hpp"
#include "partsmine/tensor.hpp"

namespace partsmine::cam {

// Unnormalized class activation map at image resolution.
struct CamMap {
  int height = 0;
  int width = 0;
  std::vector<float> values;
  int class_id = 0;
};

// n instance probability channels plus one background channel; background is
// the clamped complement of the instance sum.
struct ProbStack {
  int n = 0;
  int height = 0;
  int width = 0;
  std::vector<float> maps;  // (n + 1) * height * width, channel-major

  std::span<float> channel(int i) {
    return std::span<float>(maps).subspan(
        static_cast<std::size_t>(i) * height * width,
        static_cast<std::size_t>(height) * width);
  }
  std::span<const float> channel(int i) const {
    return std::span<const float>(maps).subspan(
        static_cast<std::size_t>(i) * height * width,
        static_cast<std::size_t>(height) * width);
  }
  std::span<const float> background() const { return channel(n); }

  core::Tensor3 to_tensor() const;
  static ProbStack from_tensor(const core::Tensor3& t);
};

// Labels in {0, 1, ..., n}; 0 marks unknown/background seed pixels.
struct LabelMap {
  int height = 0;
  int width = 0;
  std::vector<int> labels;

  core::Tensor3 to_tensor() const;  // single float channel
  static LabelMap from_tensor(const core::Tensor3& t);
};

// Weighted channel sum of the feature map, bilinearly upsampled to the target
// size.
CamMap compute_cam(const core::Tensor3& features,
                   const core::FeatureVec& class_weights, int class_id,
                   int out_height, int out_width);

// Connected components (8-connectivity) of {value >= floor * max}, each
// returned as the CAM restricted to that component, ordered by descending
// peak. All-zero (or non-positive) maps yield an empty list.
std::vector<CamMap> split_instances(const CamMap& cam, double activation_floor);

// Each instance channel normalized by its own max; background clamped
// complement.
ProbStack build_prob_stack(const std::vector<CamMap>& instance_maps);

// Argmax labels where the winning channel strictly exceeds sigma_c (ties to
// the lowest channel index); background wins map to 0.
LabelMap make_label_map(const ProbStack& stack, double sigma_c);

// True when all values lie in [0,1] and the background channel equals the
// clamped complement within tol.
bool stack_invariants_hold(const ProbStack& stack, double tol = 1e-6);

}  // namespace partsmine::cam
