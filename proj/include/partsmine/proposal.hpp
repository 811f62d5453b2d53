// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <optional>
#include <stdexcept>
#include <vector>

#include "partsmine/feature.hpp"
#include "partsmine/geometry.hpp"

namespace partsmine::core {

// Per-pixel probability patch aligned to a box raster.
struct MaskPatch {
  int height = 0;
  int width = 0;
  std::vector<float> values;  // in [0, 1], row-major
};

struct Proposal {
  BBox bbox;
  double score = 0.0;  // in [0, 1]
  int class_id = 0;
  FeatureVec feature;
  std::optional<MaskPatch> mask;
};

inline void validate(const Proposal& p) {
  if (!(p.score >= 0.0 && p.score <= 1.0))
    throw std::invalid_argument("Proposal: score outside [0,1]");
  if (!(p.bbox.w > 0.0 && p.bbox.h > 0.0))
    throw std::invalid_argument("Proposal: degenerate box");
  if (p.mask) {
    const PixelRect r = raster(p.bbox);
    if (p.mask->height != r.height() || p.mask->width != r.width())
      throw std::invalid_argument("Proposal: mask dims do not match box raster");
    if (p.mask->values.size() !=
        static_cast<std::size_t>(p.mask->height) * p.mask->width)
      throw std::invalid_argument("Proposal: mask data length mismatch");
    for (float v : p.mask->values)
      if (!(v >= 0.0f && v <= 1.0f))
        throw std::invalid_argument("Proposal: mask values outside [0,1]");
  }
}

}  // namespace partsmine::core
