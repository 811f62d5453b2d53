// SPDX-License-Identifier: Apache-2.0
//
// AVX2 backend. Mirrors the scalar lane-blocked accumulation exactly:
// vector blocks use mul+add (no fma), tails fall back to the scalar body on
// the extracted lanes, and the final reduction tree is the same. Output is
// bit-identical to the scalar backend on every input.

#include "kernel_table.hpp"

#if defined(__x86_64__) || defined(__i386__)
#include <immintrin.h>

namespace partsmine::kern {
namespace {

inline float reduce8(const float lanes[8]) {
  const float s04 = lanes[0] + lanes[4];
  const float s15 = lanes[1] + lanes[5];
  const float s26 = lanes[2] + lanes[6];
  const float s37 = lanes[3] + lanes[7];
  return (s04 + s26) + (s15 + s37);
}

inline double reduce4(const double lanes[4]) {
  return (lanes[0] + lanes[2]) + (lanes[1] + lanes[3]);
}

float dot_f32(const float* a, const float* b, std::size_t n) {
  __m256 acc = _mm256_setzero_ps();
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8)
    acc = _mm256_add_ps(acc,
                        _mm256_mul_ps(_mm256_loadu_ps(a + i), _mm256_loadu_ps(b + i)));
  alignas(32) float lanes[8];
  _mm256_store_ps(lanes, acc);
  for (int l = 0; i + l < n; ++l) lanes[l] += a[i + l] * b[i + l];
  return reduce8(lanes);
}

double dot_f64(const double* a, const double* b, std::size_t n) {
  __m256d acc = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4)
    acc = _mm256_add_pd(acc,
                        _mm256_mul_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i)));
  alignas(32) double lanes[4];
  _mm256_store_pd(lanes, acc);
  for (int l = 0; i + l < n; ++l) lanes[l] += a[i + l] * b[i + l];
  return reduce4(lanes);
}

double sqdist_f32(const float* a, const float* b, std::size_t n) {
  __m256d acc = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d av = _mm256_cvtps_pd(_mm_loadu_ps(a + i));
    const __m256d bv = _mm256_cvtps_pd(_mm_loadu_ps(b + i));
    const __m256d d = _mm256_sub_pd(av, bv);
    acc = _mm256_add_pd(acc, _mm256_mul_pd(d, d));
  }
  alignas(32) double lanes[4];
  _mm256_store_pd(lanes, acc);
  for (int l = 0; i + l < n; ++l) {
    const double d = static_cast<double>(a[i + l]) - static_cast<double>(b[i + l]);
    lanes[l] += d * d;
  }
  return reduce4(lanes);
}

double sqdist_f64(const double* a, const double* b, std::size_t n) {
  __m256d acc = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d d =
        _mm256_sub_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i));
    acc = _mm256_add_pd(acc, _mm256_mul_pd(d, d));
  }
  alignas(32) double lanes[4];
  _mm256_store_pd(lanes, acc);
  for (int l = 0; i + l < n; ++l) {
    const double d = a[i + l] - b[i + l];
    lanes[l] += d * d;
  }
  return reduce4(lanes);
}

void axpy_f32(float alpha, const float* x, float* y, std::size_t n) {
  const __m256 av = _mm256_set1_ps(alpha);
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8)
    _mm256_storeu_ps(
        y + i, _mm256_add_ps(_mm256_loadu_ps(y + i),
                             _mm256_mul_ps(av, _mm256_loadu_ps(x + i))));
  for (; i < n; ++i) y[i] += alpha * x[i];
}

void axpy_f64(double alpha, const double* x, double* y, std::size_t n) {
  const __m256d av = _mm256_set1_pd(alpha);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4)
    _mm256_storeu_pd(
        y + i, _mm256_add_pd(_mm256_loadu_pd(y + i),
                             _mm256_mul_pd(av, _mm256_loadu_pd(x + i))));
  for (; i < n; ++i) y[i] += alpha * x[i];
}

float sum_f32(const float* a, std::size_t n) {
  __m256 acc = _mm256_setzero_ps();
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) acc = _mm256_add_ps(acc, _mm256_loadu_ps(a + i));
  alignas(32) float lanes[8];
  _mm256_store_ps(lanes, acc);
  for (int l = 0; i + l < n; ++l) lanes[l] += a[i + l];
  return reduce8(lanes);
}

double sum_f64(const double* a, std::size_t n) {
  __m256d acc = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) acc = _mm256_add_pd(acc, _mm256_loadu_pd(a + i));
  alignas(32) double lanes[4];
  _mm256_store_pd(lanes, acc);
  for (int l = 0; i + l < n; ++l) lanes[l] += a[i + l];
  return reduce4(lanes);
}

// 8-wide mirror of detail::exp_neg_one
inline __m256 exp_neg8(__m256 x) {
  const __m256 zero_mask =
      _mm256_cmp_ps(x, _mm256_set1_ps(detail::kExpClampHi), _CMP_GE_OQ);
  const __m256 nv =
      _mm256_round_ps(_mm256_mul_ps(x, _mm256_set1_ps(detail::kLog2E)),
                      _MM_FROUND_TO_NEAREST_INT | _MM_FROUND_NO_EXC);
  const __m256 r = _mm256_sub_ps(
      _mm256_sub_ps(x, _mm256_mul_ps(nv, _mm256_set1_ps(detail::kLn2Hi))),
      _mm256_mul_ps(nv, _mm256_set1_ps(detail::kLn2Lo)));
  __m256 p = _mm256_set1_ps(detail::kP6);
  p = _mm256_add_ps(_mm256_set1_ps(detail::kP5), _mm256_mul_ps(r, p));
  p = _mm256_add_ps(_mm256_set1_ps(detail::kP4), _mm256_mul_ps(r, p));
  p = _mm256_add_ps(_mm256_set1_ps(detail::kP3), _mm256_mul_ps(r, p));
  p = _mm256_add_ps(_mm256_set1_ps(detail::kP2), _mm256_mul_ps(r, p));
  p = _mm256_add_ps(_mm256_set1_ps(detail::kP1), _mm256_mul_ps(r, p));
  p = _mm256_add_ps(_mm256_set1_ps(1.0f), _mm256_mul_ps(r, p));
  const __m256i e = _mm256_cvtps_epi32(nv);
  const __m256i bits =
      _mm256_slli_epi32(_mm256_sub_epi32(_mm256_set1_epi32(127), e), 23);
  const __m256 out = _mm256_mul_ps(p, _mm256_castsi256_ps(bits));
  return _mm256_andnot_ps(zero_mask, out);
}

void gauss_row(float xi, float yi, float ri, float gi, float bi,
               const float* px, const float* py, const float* pr,
               const float* pg, const float* pb, GaussRowParams p, float* out,
               std::size_t n) {
  const __m256 xiv = _mm256_set1_ps(xi), yiv = _mm256_set1_ps(yi);
  const __m256 riv = _mm256_set1_ps(ri), giv = _mm256_set1_ps(gi),
               biv = _mm256_set1_ps(bi);
  const __m256 i2ss = _mm256_set1_ps(p.inv_two_sigma_spatial_sq);
  const __m256 i2sc = _mm256_set1_ps(p.inv_two_sigma_color_sq);
  const __m256 i2sm = _mm256_set1_ps(p.inv_two_sigma_smooth_sq);
  const __m256 wa = _mm256_set1_ps(p.appearance_weight);
  const __m256 ws = _mm256_set1_ps(p.smoothness_weight);
  std::size_t j = 0;
  for (; j + 8 <= n; j += 8) {
    const __m256 dx = _mm256_sub_ps(xiv, _mm256_loadu_ps(px + j));
    const __m256 dy = _mm256_sub_ps(yiv, _mm256_loadu_ps(py + j));
    const __m256 dpos2 =
        _mm256_add_ps(_mm256_mul_ps(dx, dx), _mm256_mul_ps(dy, dy));
    const __m256 dr = _mm256_sub_ps(riv, _mm256_loadu_ps(pr + j));
    const __m256 dg = _mm256_sub_ps(giv, _mm256_loadu_ps(pg + j));
    const __m256 db = _mm256_sub_ps(biv, _mm256_loadu_ps(pb + j));
    const __m256 dcol2 = _mm256_add_ps(
        _mm256_add_ps(_mm256_mul_ps(dr, dr), _mm256_mul_ps(dg, dg)),
        _mm256_mul_ps(db, db));
    const __m256 app = _mm256_add_ps(_mm256_mul_ps(dpos2, i2ss),
                                     _mm256_mul_ps(dcol2, i2sc));
    const __m256 smo = _mm256_mul_ps(dpos2, i2sm);
    const __m256 k = _mm256_add_ps(_mm256_mul_ps(wa, exp_neg8(app)),
                                   _mm256_mul_ps(ws, exp_neg8(smo)));
    _mm256_storeu_ps(out + j, k);
  }
  for (; j < n; ++j)
    out[j] = detail::gauss_row_one(xi, yi, ri, gi, bi, px[j], py[j], pr[j],
                                   pg[j], pb[j], p);
}

}  // namespace

const KernelTable kAvx2Table = {
    dot_f32, dot_f64, sqdist_f32, sqdist_f64, axpy_f32,
    axpy_f64, sum_f32, sum_f64, gauss_row,
};

bool cpu_has_avx2() { return __builtin_cpu_supports("avx2"); }

}  // namespace partsmine::kern

#else  // non-x86 fallback: alias the scalar table

namespace partsmine::kern {
const KernelTable kAvx2Table = kScalarTable;
bool cpu_has_avx2() { return false; }
}  // namespace partsmine::kern

#endif
