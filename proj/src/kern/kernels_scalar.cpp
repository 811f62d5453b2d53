// SPDX-License-Identifier: Apache-2.0
//
// Reference kernels. Reductions accumulate into a fixed number of lanes
// (8 for float, 4 for double) and fold them in a fixed tree so the AVX2
// backend can reproduce every rounding step.

#include "kernel_table.hpp"

namespace partsmine::kern {
namespace {

float dot_f32(const float* a, const float* b, std::size_t n) {
  float acc[8] = {0, 0, 0, 0, 0, 0, 0, 0};
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8)
    for (int l = 0; l < 8; ++l) acc[l] += a[i + l] * b[i + l];
  for (int l = 0; i + l < n; ++l) acc[l] += a[i + l] * b[i + l];
  const float s04 = acc[0] + acc[4];
  const float s15 = acc[1] + acc[5];
  const float s26 = acc[2] + acc[6];
  const float s37 = acc[3] + acc[7];
  return (s04 + s26) + (s15 + s37);
}

double dot_f64(const double* a, const double* b, std::size_t n) {
  double acc[4] = {0, 0, 0, 0};
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4)
    for (int l = 0; l < 4; ++l) acc[l] += a[i + l] * b[i + l];
  for (int l = 0; i + l < n; ++l) acc[l] += a[i + l] * b[i + l];
  return (acc[0] + acc[2]) + (acc[1] + acc[3]);
}

double sqdist_f32(const float* a, const float* b, std::size_t n) {
  double acc[4] = {0, 0, 0, 0};
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4)
    for (int l = 0; l < 4; ++l) {
      const double d = static_cast<double>(a[i + l]) - static_cast<double>(b[i + l]);
      acc[l] += d * d;
    }
  for (int l = 0; i + l < n; ++l) {
    const double d = static_cast<double>(a[i + l]) - static_cast<double>(b[i + l]);
    acc[l] += d * d;
  }
  return (acc[0] + acc[2]) + (acc[1] + acc[3]);
}

double sqdist_f64(const double* a, const double* b, std::size_t n) {
  double acc[4] = {0, 0, 0, 0};
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4)
    for (int l = 0; l < 4; ++l) {
      const double d = a[i + l] - b[i + l];
      acc[l] += d * d;
    }
  for (int l = 0; i + l < n; ++l) {
    const double d = a[i + l] - b[i + l];
    acc[l] += d * d;
  }
  return (acc[0] + acc[2]) + (acc[1] + acc[3]);
}

void axpy_f32(float alpha, const float* x, float* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

void axpy_f64(double alpha, const double* x, double* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

float sum_f32(const float* a, std::size_t n) {
  float acc[8] = {0, 0, 0, 0, 0, 0, 0, 0};
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8)
    for (int l = 0; l < 8; ++l) acc[l] += a[i + l];
  for (int l = 0; i + l < n; ++l) acc[l] += a[i + l];
  const float s04 = acc[0] + acc[4];
  const float s15 = acc[1] + acc[5];
  const float s26 = acc[2] + acc[6];
  const float s37 = acc[3] + acc[7];
  return (s04 + s26) + (s15 + s37);
}

double sum_f64(const double* a, std::size_t n) {
  double acc[4] = {0, 0, 0, 0};
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4)
    for (int l = 0; l < 4; ++l) acc[l] += a[i + l];
  for (int l = 0; i + l < n; ++l) acc[l] += a[i + l];
  return (acc[0] + acc[2]) + (acc[1] + acc[3]);
}

void gauss_row(float xi, float yi, float ri, float gi, float bi,
               const float* px, const float* py, const float* pr,
               const float* pg, const float* pb, GaussRowParams p, float* out,
               std::size_t n) {
  for (std::size_t j = 0; j < n; ++j)
    out[j] = detail::gauss_row_one(xi, yi, ri, gi, bi, px[j], py[j], pr[j],
                                   pg[j], pb[j], p);
}

}  // namespace

const KernelTable kScalarTable = {
    dot_f32, dot_f64, sqdist_f32, sqdist_f64, axpy_f32,
    axpy_f64, sum_f32, sum_f64, gauss_row,
};

}  // namespace partsmine::kern
