// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <span>
#include <string_view>

namespace partsmine::kern {

enum class Backend { scalar, avx2 };

// Backend selected at load time: AVX2 when the CPU supports it, otherwise
// scalar. PARTSMINE_KERNELS=scalar|avx2|auto overrides. All backends produce
// bit-identical results: reductions use a fixed lane-blocked order and the
// transcendental kernels share one polynomial, so the choice only affects
// speed.
Backend active_backend();
bool backend_supported(Backend b);
std::string_view backend_name(Backend b);
void force_backend(Backend b);  // throws std::invalid_argument if unsupported
void reset_backend();           // back to auto selection

float dot(std::span<const float> a, std::span<const float> b);
double dot(std::span<const double> a, std::span<const double> b);

// Squared Euclidean distance, accumulated in double regardless of input width.
double squared_distance(std::span<const float> a, std::span<const float> b);
double squared_distance(std::span<const double> a, std::span<const double> b);

// y += alpha * x
void axpy(float alpha, std::span<const float> x, std::span<float> y);
void axpy(double alpha, std::span<const double> x, std::span<double> y);

float sum(std::span<const float> x);
double sum(std::span<const double> x);

// e^-x for finite x >= 0 (exactly 1 at 0, exactly 0 above ~87).
// Shared base-2 polynomial; relative error < 2e-6 against std::exp.
float exp_neg(float x);

struct GaussRowParams {
  float appearance_weight;
  float inv_two_sigma_spatial_sq;
  float inv_two_sigma_color_sq;
  float smoothness_weight;
  float inv_two_sigma_smooth_sq;
};

// Dense-CRF pairwise kernel row against pixel (xi, yi) with color (ri, gi, bi):
//   out[j] = wa * exp(-(dpos2[j] * i2ss + dcol2[j] * i2sc))
//          + ws * exp(-dpos2[j] * i2sm)
// where dpos2/dcol2 are squared distances to the planar position/color arrays.
void gauss_kernel_row(float xi, float yi, float ri, float gi, float bi,
                      std::span<const float> px, std::span<const float> py,
                      std::span<const float> pr, std::span<const float> pg,
                      std::span<const float> pb, const GaussRowParams& params,
                      std::span<float> out);

}  // namespace partsmine::kern
