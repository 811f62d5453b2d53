// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <memory>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "partsmine/cam.hpp"
#include "partsmine/crf.hpp"
#include "partsmine/image.hpp"
#include "partsmine/proposal.hpp"

namespace partsmine::detect {

// Raised by pipeline stages; carries the stage tag (and round when relevant).
class StageError : public std::runtime_error {
 public:
  StageError(std::string stage, std::string message, int round = -1)
      : std::runtime_error(stage + ": " + message), stage_(std::move(stage)),
        round_(round) {}
  const std::string& stage() const { return stage_; }
  int round() const { return round_; }

 private:
  std::string stage_;
  int round_;
};

struct DetectInput {
  const core::RgbImage* image = nullptr;
  const crf::MarginalStack* prior = nullptr;  // previous round's marginals
  int round = 0;
};

// Stand-in for the trained detector: deterministic proposals for an image.
class DetectionProvider {
 public:
  virtual ~DetectionProvider() = default;
  virtual std::vector<core::Proposal> propose(const DetectInput& input) const = 0;
};

// Survivors plus the record of who suppressed whom; all indices refer to the
// filtered input proposal list.
struct NmsOutcome {
  double tau = 0.5;
  std::vector<core::Proposal> proposals;  // filtered inputs, original order
  std::vector<std::size_t> survivors;     // indices, descending score
  std::vector<std::pair<std::size_t, std::size_t>> suppression;  // suppressed -> survivor

  std::vector<core::Proposal> survivor_proposals() const;
  // Complementary-part candidates of one survivor: the proposals it removed.
  std::vector<core::Proposal> suppressed_pool(std::size_t survivor_index) const;
};

// Keep proposals with score strictly above sigma_0, order preserved.
std::vector<core::Proposal> filter_by_score(std::vector<core::Proposal> proposals,
                                            double sigma_0);

// Greedy highest-score-first NMS, per class, recording every suppression.
// Equal scores break toward the lower input index.
NmsOutcome nms_with_records(const std::vector<core::Proposal>& proposals,
                            double tau);

// Channel j accumulates the bilinearly placed masks of survivor j and all
// proposals it suppressed (mask-less proposals contribute a box-shaped
// constant patch at their score), normalized by the channel max; background
// is the clamped complement.
cam::ProbStack accumulate_prob_stack(const NmsOutcome& outcome, int height,
                                     int width);

struct DetectParams {
  double sigma_0 = 0.05;
  double tau = 0.5;
  double sigma_c = 0.8;
};

struct RoundStats {
  int round = 0;
  std::size_t proposals = 0;
  std::size_t survivors = 0;
  std::vector<core::BBox> survivor_boxes;
};

struct RefineResult {
  NmsOutcome nms;
  cam::ProbStack stack;
  cam::LabelMap labels;
  crf::MarginalStack marginals;
  std::vector<RoundStats> rounds;
};

// Alternates {provider -> filter -> NMS -> accumulate -> CRF}; each round's
// CRF marginals are handed to the provider as the next round's prior.
RefineResult iterative_refine(const core::RgbImage& image,
                              const DetectionProvider& provider,
                              const crf::CrfParams& crf_params,
                              const DetectParams& detect_params, int rounds,
                              const crf::MarginalStack* init_prior = nullptr,
                              bool run_crf = true);

}  // namespace partsmine::detect
