// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <span>
#include <utility>
#include <vector>

#include "partsmine/cam.hpp"
#include "partsmine/image.hpp"

namespace partsmine::crf {

struct CrfParams {
  double appearance_weight = 10.0;
  double appearance_spatial_sigma = 60.0;
  double appearance_color_sigma = 20.0;
  double smoothness_weight = 3.0;
  double smoothness_sigma = 3.0;
  int iterations = 10;
  double hard_seed_confidence = 0.9;  // in (0.5, 1)

  // Exact O(N^2) message passing up to 64x64 pixels, truncated window above;
  // tests can force either path.
  enum class Path { automatic, exact, windowed };
  Path path = Path::automatic;
};

void validate(const CrfParams& p);

// Per-pixel distributions over n+1 labels (instances first, background last).
struct MarginalStack {
  int labels = 0;
  int height = 0;
  int width = 0;
  std::vector<float> q;  // labels * height * width, channel-major

  std::span<float> channel(int l) {
    return std::span<float>(q).subspan(
        static_cast<std::size_t>(l) * height * width,
        static_cast<std::size_t>(height) * width);
  }
  std::span<const float> channel(int l) const {
    return std::span<const float>(q).subspan(
        static_cast<std::size_t>(l) * height * width,
        static_cast<std::size_t>(height) * width);
  }
};

bool marginals_normalized(const MarginalStack& q, double tol = 1e-6);

// Hard-seeded pixels take hard_seed_confidence on their label with the
// remainder spread uniformly; unseeded pixels take the renormalized stack
// distribution.
MarginalStack unary_from_labels(const cam::LabelMap& labels,
                                const cam::ProbStack& stack,
                                const CrfParams& params);

// One dense mean-field round with Potts compatibility; the input distribution
// doubles as the per-step unary, so zero pairwise weights leave it unchanged.
MarginalStack mean_field_step(const MarginalStack& q,
                              const core::RgbImage& image,
                              const CrfParams& params);

// `iterations` mean-field rounds from the label-seeded unaries, then argmax.
std::pair<cam::LabelMap, MarginalStack> infer(const cam::LabelMap& labels,
                                              const cam::ProbStack& stack,
                                              const core::RgbImage& image,
                                              const CrfParams& params);

}  // namespace partsmine::crf
