// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <bit>
#include <cmath>
#include <cstddef>
#include <cstdint>

#include "partsmine/kernels.hpp"

namespace partsmine::kern {

struct KernelTable {
  float (*dot_f32)(const float*, const float*, std::size_t);
  double (*dot_f64)(const double*, const double*, std::size_t);
  double (*sqdist_f32)(const float*, const float*, std::size_t);
  double (*sqdist_f64)(const double*, const double*, std::size_t);
  void (*axpy_f32)(float, const float*, float*, std::size_t);
  void (*axpy_f64)(double, const double*, double*, std::size_t);
  float (*sum_f32)(const float*, std::size_t);
  double (*sum_f64)(const double*, std::size_t);
  void (*gauss_row)(float, float, float, float, float, const float*,
                    const float*, const float*, const float*, const float*,
                    GaussRowParams, float*, std::size_t);
};

extern const KernelTable kScalarTable;
extern const KernelTable kAvx2Table;

bool cpu_has_avx2();

namespace detail {

// exp(-x) = 2^-n * exp(-r) with n = round(x * log2 e) and the residual r
// recovered through the split-ln2 (Cody-Waite) reduction, so accuracy holds
// across the whole clamp range. exp(-r) is a degree-6 Taylor polynomial on
// |r| <= ln2/2. Every backend evaluates the identical operation sequence.
inline constexpr float kExpClampHi = 87.0f;
inline constexpr float kLog2E = 1.44269504088896341f;
inline constexpr float kLn2Hi = 6.9314575195e-01f;  // trailing mantissa zeros
inline constexpr float kLn2Lo = 1.4286067653e-06f;
inline constexpr float kP1 = -1.0f;
inline constexpr float kP2 = 1.0f / 2.0f;
inline constexpr float kP3 = -1.0f / 6.0f;
inline constexpr float kP4 = 1.0f / 24.0f;
inline constexpr float kP5 = -1.0f / 120.0f;
inline constexpr float kP6 = 1.0f / 720.0f;

inline float exp_neg_one(float x) {
  if (x >= kExpClampHi) return 0.0f;
  const float n = std::nearbyintf(x * kLog2E);
  const float r = (x - n * kLn2Hi) - n * kLn2Lo;
  float p = kP6;
  p = kP5 + r * p;
  p = kP4 + r * p;
  p = kP3 + r * p;
  p = kP2 + r * p;
  p = kP1 + r * p;
  p = 1.0f + r * p;
  const auto bits = static_cast<std::uint32_t>(127 - static_cast<int>(n)) << 23;
  return p * std::bit_cast<float>(bits);
}

inline float gauss_row_one(float xi, float yi, float ri, float gi, float bi,
                           float px, float py, float pr, float pg, float pb,
                           const GaussRowParams& p) {
  const float dx = xi - px;
  const float dy = yi - py;
  const float dpos2 = dx * dx + dy * dy;
  const float dr = ri - pr;
  const float dg = gi - pg;
  const float db = bi - pb;
  const float dcol2 = (dr * dr + dg * dg) + db * db;
  const float app = dpos2 * p.inv_two_sigma_spatial_sq +
                    dcol2 * p.inv_two_sigma_color_sq;
  const float smo = dpos2 * p.inv_two_sigma_smooth_sq;
  return p.appearance_weight * exp_neg_one(app) +
         p.smoothness_weight * exp_neg_one(smo);
}

}  // namespace detail

}  // namespace partsmine::kern
