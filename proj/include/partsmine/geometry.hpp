// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace partsmine::core {

// Axis-aligned box, center + size. Corner form is a derived view.
struct BBox {
  double cx = 0.0;
  double cy = 0.0;
  double w = 1.0;
  double h = 1.0;
};

struct Corners {
  double x0, y0, x1, y1;
};

// Integer raster of a box, half-open [x0, x1) x [y0, y1).
struct PixelRect {
  int x0 = 0, y0 = 0, x1 = 0, y1 = 0;
  int width() const { return x1 - x0; }
  int height() const { return y1 - y0; }
  bool empty() const { return x1 <= x0 || y1 <= y0; }
};

inline BBox make_bbox(double cx, double cy, double w, double h) {
  if (!(w > 0.0) || !(h > 0.0) || !std::isfinite(cx) || !std::isfinite(cy) ||
      !std::isfinite(w) || !std::isfinite(h))
    throw std::invalid_argument("BBox: sizes must be positive and finite");
  return BBox{cx, cy, w, h};
}

inline Corners to_corners(const BBox& b) {
  const double hw = b.w * 0.5, hh = b.h * 0.5;
  return Corners{b.cx - hw, b.cy - hh, b.cx + hw, b.cy + hh};
}

inline BBox from_corners(const Corners& c) {
  return make_bbox((c.x0 + c.x1) * 0.5, (c.y0 + c.y1) * 0.5, c.x1 - c.x0,
                   c.y1 - c.y0);
}

// floor on the top-left corner, ceil on the bottom-right: covered pixels are
// never dropped.
inline PixelRect raster(const BBox& b) {
  const Corners c = to_corners(b);
  return PixelRect{static_cast<int>(std::floor(c.x0)),
                   static_cast<int>(std::floor(c.y0)),
                   static_cast<int>(std::ceil(c.x1)),
                   static_cast<int>(std::ceil(c.y1))};
}

inline PixelRect clip(const PixelRect& r, int width, int height) {
  return PixelRect{std::max(r.x0, 0), std::max(r.y0, 0),
                   std::min(r.x1, width), std::min(r.y1, height)};
}

inline double iou(const BBox& a, const BBox& b) {
  const Corners ca = to_corners(a), cb = to_corners(b);
  const double ix = std::min(ca.x1, cb.x1) - std::max(ca.x0, cb.x0);
  const double iy = std::min(ca.y1, cb.y1) - std::max(ca.y0, cb.y0);
  if (ix <= 0.0 || iy <= 0.0) return 0.0;
  const double inter = ix * iy;
  const double uni = a.w * a.h + b.w * b.h - inter;
  return inter / uni;
}

}  // namespace partsmine::core
