// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <span>
#include <vector>

#include "partsmine/proposal.hpp"

namespace partsmine::parts {

struct PartSource {
  enum class Kind { proposal, grid_cell, root };
  Kind kind = Kind::grid_cell;
  int index = -1;  // candidate index or row-major grid cell
};

struct Part {
  core::FeatureVec feature;
  core::BBox geometry;
  double det_score = 0.0;
  PartSource source;
};

// parts[0] is the center part A1, parts[n] the root part A(n+1).
struct PartsModel {
  std::vector<Part> parts;
  int n() const { return static_cast<int>(parts.size()) - 1; }
  const Part& root() const { return parts.back(); }
};

void validate(const PartsModel& model);

struct SearchConfig {
  double lambda_0 = 0.01;
  double beta_0 = 0.1;
  int n = 9;
  int s = 3;  // s * s == n
  int max_passes = 1;
  // brute force enumerates at most this many subsets
  long long brute_force_guard = 1'000'000;
};

void validate(const SearchConfig& cfg);

// Summed part scores minus the pairwise appearance/overlap penalty:
//   S(A) = sum_i f(phi_i)
//        - lambda_0 * sum_{p<q} [ d_s(phi_p, phi_q) + beta_0 * IoU(u_p, u_q) ]
double score_hypothesis(const PartsModel& model, const SearchConfig& cfg);

// s x s grid template over the root box; each cell takes the unused candidate
// whose center is nearest (center cell first, then row-major), falling back
// to a synthetic grid-cell part cut from the root.
PartsModel grid_init(const core::Proposal& root,
                     std::span<const core::Proposal> candidates,
                     const SearchConfig& cfg);

// One in-order replacement sweep over the non-root parts (O(nk) hypothesis
// evaluations); ties keep the incumbent, so the score never decreases.
PartsModel greedy_search(const PartsModel& init,
                         std::span<const core::Proposal> candidates,
                         const SearchConfig& cfg);

// Exact argmax over all n-subsets of the candidates (the pairwise penalty is
// symmetric, so assignment order within a subset does not matter). Requires
// k >= n and C(k, n) within the guard.
PartsModel brute_force_search(const core::Proposal& root,
                              std::span<const core::Proposal> candidates,
                              const SearchConfig& cfg);

long long binomial(int k, int n, long long cap);

}  // namespace partsmine::parts
