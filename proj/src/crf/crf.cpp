// SPDX-License-Identifier: Apache-2.0

#include "partsmine/crf.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "partsmine/kernels.hpp"

namespace partsmine::crf {
namespace {

constexpr double kProbFloor = 1e-12;
constexpr int kExactPixelLimit = 64 * 64;

kern::GaussRowParams row_params(const CrfParams& p) {
  kern::GaussRowParams rp;
  rp.appearance_weight = static_cast<float>(p.appearance_weight);
  rp.inv_two_sigma_spatial_sq = static_cast<float>(
      1.0 / (2.0 * p.appearance_spatial_sigma * p.appearance_spatial_sigma));
  rp.inv_two_sigma_color_sq = static_cast<float>(
      1.0 / (2.0 * p.appearance_color_sigma * p.appearance_color_sigma));
  rp.smoothness_weight = static_cast<float>(p.smoothness_weight);
  rp.inv_two_sigma_smooth_sq = static_cast<float>(
      1.0 / (2.0 * p.smoothness_sigma * p.smoothness_sigma));
  return rp;
}

// Potts update at one pixel: softmax over log q + m_l (the constant total
// message shifts out of the softmax).
void write_softmax(const std::vector<double>& logits, MarginalStack& out,
                   std::size_t pixel) {
  const int L = out.labels;
  double hi = logits[0];
  for (int l = 1; l < L; ++l) hi = std::max(hi, logits[l]);
  double z = 0.0;
  for (int l = 0; l < L; ++l) z += std::exp(logits[l] - hi);
  for (int l = 0; l < L; ++l)
    out.channel(l)[pixel] = static_cast<float>(std::exp(logits[l] - hi) / z);
}

}  // namespace

void validate(const CrfParams& p) {
  if (p.appearance_weight < 0 || p.smoothness_weight < 0)
    throw std::invalid_argument("CrfParams: weights must be >= 0");
  if (p.iterations < 1)
    throw std::invalid_argument("CrfParams: iterations must be >= 1");
  if (!(p.hard_seed_confidence > 0.5 && p.hard_seed_confidence < 1.0))
    throw std::invalid_argument("CrfParams: hard_seed_confidence in (0.5,1)");
  if (!(p.appearance_spatial_sigma > 0) || !(p.appearance_color_sigma > 0) ||
      !(p.smoothness_sigma > 0))
    throw std::invalid_argument("CrfParams: sigmas must be > 0");
}

bool marginals_normalized(const MarginalStack& q, double tol) {
  const std::size_t plane = static_cast<std::size_t>(q.height) * q.width;
  for (std::size_t p = 0; p < plane; ++p) {
    double s = 0.0;
    for (int l = 0; l < q.labels; ++l) {
      const float v = q.channel(l)[p];
      if (!(v >= 0.0f && v <= 1.0f)) return false;
      s += v;
    }
    if (std::abs(s - 1.0) > tol) return false;
  }
  return true;
}

MarginalStack unary_from_labels(const cam::LabelMap& labels,
                                const cam::ProbStack& stack,
                                const CrfParams& params) {
  validate(params);
  if (labels.height != stack.height || labels.width != stack.width)
    throw std::invalid_argument("unary_from_labels: dimension mismatch");
  const int L = stack.n + 1;
  MarginalStack out;
  out.labels = L;
  out.height = stack.height;
  out.width = stack.width;
  const std::size_t plane = static_cast<std::size_t>(stack.height) * stack.width;
  out.q.assign(static_cast<std::size_t>(L) * plane, 0.0f);

  const float conf = static_cast<float>(params.hard_seed_confidence);
  const float rest = static_cast<float>((1.0 - params.hard_seed_confidence) / (L - 1));
  for (std::size_t p = 0; p < plane; ++p) {
    const int lab = labels.labels[p];
    if (lab > 0) {
      for (int l = 0; l < L; ++l) out.channel(l)[p] = rest;
      out.channel(lab - 1)[p] = conf;
    } else {
      double s = 0.0;
      for (int l = 0; l < L; ++l) s += stack.channel(l)[p];
      if (s <= kProbFloor) {
        for (int l = 0; l < L; ++l)
          out.channel(l)[p] = 1.0f / static_cast<float>(L);
      } else {
        for (int l = 0; l < L; ++l)
          out.channel(l)[p] = static_cast<float>(stack.channel(l)[p] / s);
      }
    }
  }
  return out;
}

MarginalStack mean_field_step(const MarginalStack& q,
                              const core::RgbImage& image,
                              const CrfParams& params) {
  validate(params);
  if (q.height != image.height || q.width != image.width)
    throw std::invalid_argument("mean_field_step: image/marginal dims differ");
  const int h = q.height, w = q.width, L = q.labels;
  const std::size_t plane = static_cast<std::size_t>(h) * w;

  MarginalStack out;
  out.labels = L;
  out.height = h;
  out.width = w;
  out.q.assign(q.q.size(), 0.0f);

  const auto planes = core::planar_channels(image);
  std::vector<float> px(plane), py(plane);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      px[static_cast<std::size_t>(y) * w + x] = static_cast<float>(x);
      py[static_cast<std::size_t>(y) * w + x] = static_cast<float>(y);
    }

  const kern::GaussRowParams rp = row_params(params);
  const double self_k = params.appearance_weight + params.smoothness_weight;

  const bool exact =
      params.path == CrfParams::Path::exact ||
      (params.path == CrfParams::Path::automatic &&
       plane <= static_cast<std::size_t>(kExactPixelLimit));

  const int radius = static_cast<int>(std::ceil(
      3.0 * std::max(params.appearance_spatial_sigma, params.smoothness_sigma)));

  std::vector<float> krow(plane);
  std::vector<double> logits(L);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const std::size_t i = static_cast<std::size_t>(y) * w + x;
      const float xi = static_cast<float>(x), yi = static_cast<float>(y);
      const float ri = planes[0][i], gi = planes[1][i], bi = planes[2][i];
      std::vector<double>& m = logits;  // reuse as message accumulator
      for (int l = 0; l < L; ++l) m[l] = 0.0;

      if (exact) {
        kern::gauss_kernel_row(xi, yi, ri, gi, bi, px, py, planes[0], planes[1],
                               planes[2], rp, krow);
        std::span<const float> row(krow.data(), plane);
        for (int l = 0; l < L; ++l)
          m[l] = kern::dot(row, q.channel(l));
      } else {
        const int y0 = std::max(0, y - radius), y1 = std::min(h - 1, y + radius);
        const int x0 = std::max(0, x - radius), x1 = std::min(w - 1, x + radius);
        const std::size_t span_w = static_cast<std::size_t>(x1 - x0 + 1);
        for (int yy = y0; yy <= y1; ++yy) {
          const std::size_t base = static_cast<std::size_t>(yy) * w + x0;
          std::span<float> seg(krow.data(), span_w);
          kern::gauss_kernel_row(
              xi, yi, ri, gi, bi,
              std::span<const float>(px.data() + base, span_w),
              std::span<const float>(py.data() + base, span_w),
              std::span<const float>(planes[0].data() + base, span_w),
              std::span<const float>(planes[1].data() + base, span_w),
              std::span<const float>(planes[2].data() + base, span_w), rp, seg);
          for (int l = 0; l < L; ++l)
            m[l] += kern::dot(std::span<const float>(seg),
                              q.channel(l).subspan(base, span_w));
        }
      }

      for (int l = 0; l < L; ++l) {
        const double ql = q.channel(l)[i];
        const double message = m[l] - self_k * ql;  // exclude j == i
        m[l] = std::log(std::max(ql, kProbFloor)) + message;
      }
      write_softmax(m, out, i);
    }
  }
  return out;
}

std::pair<cam::LabelMap, MarginalStack> infer(const cam::LabelMap& labels,
                                              const cam::ProbStack& stack,
                                              const core::RgbImage& image,
                                              const CrfParams& params) {
  MarginalStack q = unary_from_labels(labels, stack, params);
  for (int it = 0; it < params.iterations; ++it)
    q = mean_field_step(q, image, params);

  cam::LabelMap refined;
  refined.height = q.height;
  refined.width = q.width;
  const std::size_t plane = static_cast<std::size_t>(q.height) * q.width;
  refined.labels.assign(plane, 0);
  for (std::size_t p = 0; p < plane; ++p) {
    int best = 0;
    float best_v = q.channel(0)[p];
    for (int l = 1; l < q.labels; ++l)
      if (q.channel(l)[p] > best_v) {
        best_v = q.channel(l)[p];
        best = l;
      }
    refined.labels[p] = best == q.labels - 1 ? 0 : best + 1;
  }
  return {std::move(refined), std::move(q)};
}

}  // namespace partsmine::crf
