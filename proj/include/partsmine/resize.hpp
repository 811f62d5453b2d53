// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <span>
#include <vector>

namespace partsmine::core {

// Corner-aligned bilinear resample of a single-channel row-major map.
// Identity dims return a bit-identical copy; constants stay constant.
std::vector<float> bilinear_resize(std::span<const float> src, int in_h,
                                   int in_w, int out_h, int out_w);

}  // namespace partsmine::core
