// SPDX-License-Identifier: Apache-2.0

#include "partsmine/parts.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace partsmine::parts {
namespace {

Part part_from_proposal(const core::Proposal& p, int candidate_index) {
  return Part{p.feature, p.bbox, p.score,
              {PartSource::Kind::proposal, candidate_index}};
}

bool uses_candidate(const PartsModel& model, int candidate_index) {
  for (const Part& part : model.parts)
    if (part.source.kind == PartSource::Kind::proposal &&
        part.source.index == candidate_index)
      return true;
  return false;
}

}  // namespace

void validate(const PartsModel& model) {
  if (model.parts.size() < 2)
    throw std::invalid_argument("PartsModel: needs n >= 1 parts plus the root");
  for (std::size_t a = 0; a + 1 < model.parts.size(); ++a)
    for (std::size_t b = a + 1; b + 1 < model.parts.size(); ++b) {
      const PartSource& sa = model.parts[a].source;
      const PartSource& sb = model.parts[b].source;
      if (sa.kind == PartSource::Kind::proposal &&
          sb.kind == PartSource::Kind::proposal && sa.index == sb.index)
        throw std::invalid_argument("PartsModel: candidate used twice");
    }
  for (const Part& part : model.parts)
    if (!(part.det_score >= 0.0 && part.det_score <= 1.0))
      throw std::invalid_argument("PartsModel: det_score outside [0,1]");
}

void validate(const SearchConfig& cfg) {
  if (cfg.s * cfg.s != cfg.n)
    throw std::invalid_argument("SearchConfig: s^2 must equal n");
  if (cfg.lambda_0 < 0.0 || cfg.beta_0 < 0.0)
    throw std::invalid_argument("SearchConfig: lambda_0, beta_0 must be >= 0");
  if (cfg.max_passes < 1)
    throw std::invalid_argument("SearchConfig: max_passes must be >= 1");
}

double score_hypothesis(const PartsModel& model, const SearchConfig& cfg) {
  double score = 0.0;
  for (const Part& part : model.parts) score += part.det_score;
  double penalty = 0.0;
  for (std::size_t p = 0; p + 1 < model.parts.size(); ++p)
    for (std::size_t q = p + 1; q < model.parts.size(); ++q) {
      penalty += core::semantic_distance(model.parts[p].feature,
                                         model.parts[q].feature);
      penalty += cfg.beta_0 * core::iou(model.parts[p].geometry,
                                        model.parts[q].geometry);
    }
  return score - cfg.lambda_0 * penalty;
}

PartsModel grid_init(const core::Proposal& root,
                     std::span<const core::Proposal> candidates,
                     const SearchConfig& cfg) {
  validate(cfg);
  const core::Corners rc = core::to_corners(root.bbox);
  const double cell_w = root.bbox.w / cfg.s;
  const double cell_h = root.bbox.h / cfg.s;

  // cell order: center first (A1), then the rest row-major (A2..An)
  const int center_cell = (cfg.n - 1) / 2;
  std::vector<int> cell_order;
  cell_order.push_back(center_cell);
  for (int m = 0; m < cfg.n; ++m)
    if (m != center_cell) cell_order.push_back(m);

  std::vector<bool> used(candidates.size(), false);
  PartsModel model;
  model.parts.resize(cfg.n + 1);
  for (int slot = 0; slot < cfg.n; ++slot) {
    const int cell = cell_order[slot];
    const int row = cell / cfg.s, col = cell % cfg.s;
    const double ccx = rc.x0 + (col + 0.5) * cell_w;
    const double ccy = rc.y0 + (row + 0.5) * cell_h;

    int best = -1;
    double best_d = std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < candidates.size(); ++c) {
      if (used[c]) continue;
      const double dx = candidates[c].bbox.cx - ccx;
      const double dy = candidates[c].bbox.cy - ccy;
      const double d = dx * dx + dy * dy;
      if (d < best_d) {
        best_d = d;
        best = static_cast<int>(c);
      }
    }
    if (best >= 0) {
      used[best] = true;
      model.parts[slot] = part_from_proposal(candidates[best], best);
    } else {
      model.parts[slot] = Part{root.feature,
                               core::make_bbox(ccx, ccy, cell_w, cell_h),
                               root.score,
                               {PartSource::Kind::grid_cell, cell}};
    }
  }
  model.parts[cfg.n] =
      Part{root.feature, root.bbox, root.score, {PartSource::Kind::root, -1}};
  validate(model);
  return model;
}

PartsModel greedy_search(const PartsModel& init,
                         std::span<const core::Proposal> candidates,
                         const SearchConfig& cfg) {
  validate(cfg);
  validate(init);
  PartsModel model = init;
  double current = score_hypothesis(model, cfg);
  for (int pass = 0; pass < cfg.max_passes; ++pass) {
    bool improved = false;
    for (int i = 0; i < model.n(); ++i) {
      int best = -1;
      double best_score = current;
      for (std::size_t c = 0; c < candidates.size(); ++c) {
        const int ci = static_cast<int>(c);
        if (model.parts[i].source.kind == PartSource::Kind::proposal &&
            model.parts[i].source.index == ci)
          continue;
        if (uses_candidate(model, ci)) continue;
        PartsModel trial = model;
        trial.parts[i] = part_from_proposal(candidates[c], ci);
        const double s = score_hypothesis(trial, cfg);
        if (s > best_score) {  // strict: ties keep the incumbent
          best_score = s;
          best = ci;
        }
      }
      if (best >= 0) {
        model.parts[i] = part_from_proposal(candidates[best], best);
        current = best_score;
        improved = true;
      }
    }
    if (!improved) break;
  }
  validate(model);
  return model;
}

long long binomial(int k, int n, long long cap) {
  if (n < 0 || n > k) return 0;
  long long r = 1;
  for (int i = 1; i <= n; ++i) {
    r = r * (k - n + i) / i;
    if (r > cap) return cap + 1;
  }
  return r;
}

PartsModel brute_force_search(const core::Proposal& root,
                              std::span<const core::Proposal> candidates,
                              const SearchConfig& cfg) {
  validate(cfg);
  const int k = static_cast<int>(candidates.size());
  if (k < cfg.n)
    throw std::invalid_argument("brute_force_search: fewer candidates than parts");
  if (binomial(k, cfg.n, cfg.brute_force_guard) > cfg.brute_force_guard)
    throw std::invalid_argument(
        "brute_force_search: C(k,n) exceeds the guard; use greedy_search");

  const Part root_part{root.feature, root.bbox, root.score,
                       {PartSource::Kind::root, -1}};

  PartsModel best;
  double best_score = -std::numeric_limits<double>::infinity();

  std::vector<int> pick(cfg.n);
  for (int i = 0; i < cfg.n; ++i) pick[i] = i;
  PartsModel trial;
  trial.parts.resize(cfg.n + 1);
  trial.parts[cfg.n] = root_part;
  while (true) {
    for (int i = 0; i < cfg.n; ++i)
      trial.parts[i] = part_from_proposal(candidates[pick[i]], pick[i]);
    const double s = score_hypothesis(trial, cfg);
    if (s > best_score) {  // first subset in lexicographic order wins ties
      best_score = s;
      best = trial;
    }
    // next combination, lexicographic
    int pos = cfg.n - 1;
    while (pos >= 0 && pick[pos] == k - cfg.n + pos) --pos;
    if (pos < 0) break;
    ++pick[pos];
    for (int j = pos + 1; j < cfg.n; ++j) pick[j] = pick[j - 1] + 1;
  }
  validate(best);
  return best;
}

}  // namespace partsmine::parts
