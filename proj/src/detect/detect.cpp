// SPDX-License-Identifier: Apache-2.0

#include "partsmine/detect.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "partsmine/resize.hpp"

namespace partsmine::detect {

std::vector<core::Proposal> NmsOutcome::survivor_proposals() const {
  std::vector<core::Proposal> out;
  out.reserve(survivors.size());
  for (std::size_t idx : survivors) out.push_back(proposals[idx]);
  return out;
}

std::vector<core::Proposal> NmsOutcome::suppressed_pool(
    std::size_t survivor_index) const {
  std::vector<core::Proposal> out;
  for (const auto& [victim, keeper] : suppression)
    if (keeper == survivor_index) out.push_back(proposals[victim]);
  return out;
}

std::vector<core::Proposal> filter_by_score(std::vector<core::Proposal> proposals,
                                            double sigma_0) {
  if (!(sigma_0 >= 0.0 && sigma_0 <= 1.0))
    throw std::invalid_argument("filter_by_score: sigma_0 must be in [0,1]");
  std::vector<core::Proposal> out;
  out.reserve(proposals.size());
  for (auto& p : proposals)
    if (p.score > sigma_0) out.push_back(std::move(p));
  return out;
}

NmsOutcome nms_with_records(const std::vector<core::Proposal>& proposals,
                            double tau) {
  if (!(tau > 0.0 && tau < 1.0))
    throw std::invalid_argument("nms_with_records: tau must be in (0,1)");
  NmsOutcome outcome;
  outcome.tau = tau;
  outcome.proposals = proposals;
  if (proposals.empty()) return outcome;

  std::vector<std::size_t> order(proposals.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (proposals[a].score != proposals[b].score)
      return proposals[a].score > proposals[b].score;
    return a < b;
  });

  std::vector<bool> removed(proposals.size(), false);
  for (std::size_t oi = 0; oi < order.size(); ++oi) {
    const std::size_t keep = order[oi];
    if (removed[keep]) continue;
    outcome.survivors.push_back(keep);
    for (std::size_t oj = oi + 1; oj < order.size(); ++oj) {
      const std::size_t cand = order[oj];
      if (removed[cand]) continue;
      if (proposals[cand].class_id != proposals[keep].class_id) continue;
      if (core::iou(proposals[cand].bbox, proposals[keep].bbox) > tau) {
        removed[cand] = true;
        outcome.suppression.emplace_back(cand, keep);
      }
    }
  }
  return outcome;
}

namespace {

void paint_proposal(const core::Proposal& p, std::span<float> channel,
                    int height, int width) {
  const core::PixelRect box = core::raster(p.bbox);
  const core::PixelRect r = core::clip(box, width, height);
  if (r.empty()) return;
  std::vector<float> patch;
  if (p.mask) {
    patch = core::bilinear_resize(p.mask->values, p.mask->height, p.mask->width,
                                  box.height(), box.width());
  } else {
    patch.assign(static_cast<std::size_t>(box.height()) * box.width(),
                 static_cast<float>(p.score));
  }
  for (int y = r.y0; y < r.y1; ++y)
    for (int x = r.x0; x < r.x1; ++x)
      channel[static_cast<std::size_t>(y) * width + x] +=
          patch[static_cast<std::size_t>(y - box.y0) * box.width() + (x - box.x0)];
}

}  // namespace

cam::ProbStack accumulate_prob_stack(const NmsOutcome& outcome, int height,
                                     int width) {
  if (outcome.survivors.empty())
    throw std::invalid_argument("accumulate_prob_stack: no survivors");
  cam::ProbStack stack;
  stack.n = static_cast<int>(outcome.survivors.size());
  stack.height = height;
  stack.width = width;
  const std::size_t plane = static_cast<std::size_t>(height) * width;
  stack.maps.assign(static_cast<std::size_t>(stack.n + 1) * plane, 0.0f);

  for (int j = 0; j < stack.n; ++j) {
    auto channel = stack.channel(j);
    paint_proposal(outcome.proposals[outcome.survivors[j]], channel, height, width);
    for (const auto& [victim, keeper] : outcome.suppression)
      if (keeper == outcome.survivors[j])
        paint_proposal(outcome.proposals[victim], channel, height, width);
    float peak = 0.0f;
    for (float v : channel) peak = std::max(peak, v);
    if (peak > 0.0f)
      for (float& v : channel) v = std::clamp(v / peak, 0.0f, 1.0f);
  }

  auto bg = stack.channel(stack.n);
  for (std::size_t p = 0; p < plane; ++p) {
    double s = 0.0;
    for (int j = 0; j < stack.n; ++j) s += stack.channel(j)[p];
    bg[p] = static_cast<float>(std::max(1.0 - s, 0.0));
  }
  return stack;
}

RefineResult iterative_refine(const core::RgbImage& image,
                              const DetectionProvider& provider,
                              const crf::CrfParams& crf_params,
                              const DetectParams& detect_params, int rounds,
                              const crf::MarginalStack* init_prior,
                              bool run_crf) {
  if (rounds < 1)
    throw std::invalid_argument("iterative_refine: rounds must be >= 1");

  RefineResult result;
  crf::MarginalStack prior_storage;
  const crf::MarginalStack* prior = init_prior;
  for (int round = 0; round < rounds; ++round) {
    DetectInput input{&image, prior, round};
    std::vector<core::Proposal> proposals = provider.propose(input);
    if (proposals.empty())
      throw StageError("detect", "provider returned zero proposals", round);
    std::vector<core::Proposal> filtered =
        filter_by_score(std::move(proposals), detect_params.sigma_0);
    if (filtered.empty())
      throw StageError("detect", "all proposals filtered out", round);

    result.nms = nms_with_records(filtered, detect_params.tau);
    result.stack =
        accumulate_prob_stack(result.nms, image.height, image.width);
    cam::LabelMap seeds = cam::make_label_map(result.stack, detect_params.sigma_c);
    if (run_crf) {
      auto [labels, marginals] = crf::infer(seeds, result.stack, image, crf_params);
      result.labels = std::move(labels);
      result.marginals = std::move(marginals);
    } else {
      result.labels = std::move(seeds);
      result.marginals = crf::unary_from_labels(result.labels, result.stack, crf_params);
    }
    RoundStats stats;
    stats.round = round;
    stats.proposals = result.nms.proposals.size();
    stats.survivors = result.nms.survivors.size();
    for (std::size_t idx : result.nms.survivors)
      stats.survivor_boxes.push_back(result.nms.proposals[idx].bbox);
    result.rounds.push_back(std::move(stats));
    prior_storage = result.marginals;
    prior = &prior_storage;
  }
  return result;
}

}  // namespace partsmine::detect
