// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <stdexcept>
#include <utility>
#include <vector>

#include "partsmine/kernels.hpp"

namespace partsmine::core {

struct FeatureVec {
  std::vector<float> values;
  int dim() const { return static_cast<int>(values.size()); }
};

inline FeatureVec make_feature(std::vector<float> values) {
  for (float v : values)
    if (!std::isfinite(v))
      throw std::invalid_argument("FeatureVec: entries must be finite");
  return FeatureVec{std::move(values)};
}

// ||p - q||^2
inline double semantic_distance(const FeatureVec& p, const FeatureVec& q) {
  if (p.dim() != q.dim())
    throw std::invalid_argument("semantic_distance: dimension mismatch");
  return kern::squared_distance(std::span<const float>(p.values),
                                std::span<const float>(q.values));
}

}  // namespace partsmine::core
