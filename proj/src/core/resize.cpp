// SPDX-License-Identifier: Apache-2.0

#include "partsmine/resize.hpp"

#include <cmath>
#include <stdexcept>

namespace partsmine::core {

std::vector<float> bilinear_resize(std::span<const float> src, int in_h,
                                   int in_w, int out_h, int out_w) {
  if (in_h < 1 || in_w < 1)
    throw std::invalid_argument("bilinear_resize: input dims must be >= 1");
  if (out_h < 1 || out_w < 1)
    throw std::invalid_argument("bilinear_resize: output dims must be >= 1");
  if (src.size() != static_cast<std::size_t>(in_h) * in_w)
    throw std::invalid_argument("bilinear_resize: data length mismatch");

  if (in_h == out_h && in_w == out_w)
    return std::vector<float>(src.begin(), src.end());

  const double sy = out_h > 1 ? static_cast<double>(in_h - 1) / (out_h - 1) : 0.0;
  const double sx = out_w > 1 ? static_cast<double>(in_w - 1) / (out_w - 1) : 0.0;

  std::vector<float> out(static_cast<std::size_t>(out_h) * out_w);
  for (int y = 0; y < out_h; ++y) {
    const double fy = y * sy;
    int y0 = static_cast<int>(std::floor(fy));
    if (y0 > in_h - 2) y0 = in_h >= 2 ? in_h - 2 : 0;
    const int y1 = in_h >= 2 ? y0 + 1 : 0;
    const double ty = fy - y0;
    for (int x = 0; x < out_w; ++x) {
      const double fx = x * sx;
      int x0 = static_cast<int>(std::floor(fx));
      if (x0 > in_w - 2) x0 = in_w >= 2 ? in_w - 2 : 0;
      const int x1 = in_w >= 2 ? x0 + 1 : 0;
      const double tx = fx - x0;
      const double p00 = src[static_cast<std::size_t>(y0) * in_w + x0];
      const double p01 = src[static_cast<std::size_t>(y0) * in_w + x1];
      const double p10 = src[static_cast<std::size_t>(y1) * in_w + x0];
      const double p11 = src[static_cast<std::size_t>(y1) * in_w + x1];
      const double top = p00 + tx * (p01 - p00);
      const double bot = p10 + tx * (p11 - p10);
      out[static_cast<std::size_t>(y) * out_w + x] =
          static_cast<float>(top + ty * (bot - top));
    }
  }
  return out;
}

}  // namespace partsmine::core
