// SPDX-License-Identifier: Apache-2.0
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <random>
#include <set>

#include "partsmine/json_io.hpp"
#include "partsmine/rng.hpp"
#include "partsmine/synthetic.hpp"

using namespace partsmine;

namespace {

core::Proposal simple_proposal(double cx, double cy, double w, double h,
                               double score, int class_id = 0) {
  core::Proposal p;
  p.bbox = core::make_bbox(cx, cy, w, h);
  p.score = score;
  p.class_id = class_id;
  p.feature = core::FeatureVec{{static_cast<float>(score)}};
  return p;
}

std::vector<core::Proposal> random_proposals(std::mt19937_64& rng, int count,
                                             int classes = 1) {
  std::uniform_real_distribution<double> pos(4.0, 60.0), len(2.0, 24.0),
      score(0.0, 1.0);
  std::vector<core::Proposal> out;
  for (int i = 0; i < count; ++i)
    out.push_back(simple_proposal(pos(rng), pos(rng), len(rng), len(rng),
                                  score(rng),
                                  static_cast<int>(rng() % classes)));
  return out;
}

// provider that fails on a chosen round
class FlakyProvider : public detect::DetectionProvider {
 public:
  FlakyProvider(std::vector<core::Proposal> proposals, int fail_round)
      : proposals_(std::move(proposals)), fail_round_(fail_round) {}
  std::vector<core::Proposal> propose(const detect::DetectInput& in) const override {
    if (in.round == fail_round_) return {};
    return proposals_;
  }

 private:
  std::vector<core::Proposal> proposals_;
  int fail_round_;
};

crf::CrfParams fast_crf() {
  crf::CrfParams p;
  p.appearance_spatial_sigma = 6.0;
  p.appearance_color_sigma = 30.0;
  p.iterations = 3;
  return p;
}

}  // namespace

TEST_CASE("filter_by_score worked examples") {
  std::vector<core::Proposal> ps{simple_proposal(5, 5, 2, 2, 0.9),
                                 simple_proposal(9, 5, 2, 2, 0.04),
                                 simple_proposal(13, 5, 2, 2, 0.5)};
  CHECK(detect::filter_by_score(ps, 0.0).size() == 3);
  CHECK(detect::filter_by_score(ps, 1.0).empty());
  const auto kept = detect::filter_by_score(ps, 0.05);
  REQUIRE(kept.size() == 2);
  CHECK(kept[0].score == 0.9);
  CHECK(kept[1].score == 0.5);
  CHECK_THROWS_AS(detect::filter_by_score(ps, -0.1), std::invalid_argument);
}

TEST_CASE("nms_with_records worked examples") {
  const auto single = detect::nms_with_records({simple_proposal(5, 5, 4, 4, 0.7)}, 0.5);
  CHECK(single.survivors == std::vector<std::size_t>{0});
  CHECK(single.suppression.empty());

  std::vector<core::Proposal> twin{simple_proposal(5, 5, 4, 4, 0.9),
                                   simple_proposal(5, 5, 4, 4, 0.8)};
  const auto out = detect::nms_with_records(twin, 0.5);
  CHECK(out.survivors == std::vector<std::size_t>{0});
  REQUIRE(out.suppression.size() == 1);
  CHECK(out.suppression[0].first == 1);
  CHECK(out.suppression[0].second == 0);

  std::vector<core::Proposal> apart{simple_proposal(5, 5, 2, 2, 0.9),
                                    simple_proposal(20, 20, 2, 2, 0.8)};
  CHECK(detect::nms_with_records(apart, 0.5).survivors.size() == 2);

  const auto empty = detect::nms_with_records({}, 0.5);
  CHECK(empty.survivors.empty());
  CHECK(empty.suppression.empty());
}

TEST_CASE("per-class NMS never suppresses across classes") {
  std::vector<core::Proposal> ps{simple_proposal(5, 5, 4, 4, 0.9, 0),
                                 simple_proposal(5, 5, 4, 4, 0.8, 1)};
  const auto out = detect::nms_with_records(ps, 0.5);
  CHECK(out.survivors.size() == 2);
}

TEST_CASE("NMS outcome invariants hold on random proposal sets") {
  std::mt19937_64 rng(51);
  std::uniform_real_distribution<double> tau_dist(0.2, 0.8);
  for (int trial = 0; trial < 1000; ++trial) {
    const double tau = tau_dist(rng);
    const int classes = 1 + static_cast<int>(rng() % 2);
    const auto ps = random_proposals(rng, 3 + static_cast<int>(rng() % 20), classes);
    const auto out = detect::nms_with_records(ps, tau);

    // partition: every input is either a survivor or suppressed, never both
    std::set<std::size_t> seen;
    for (std::size_t s : out.survivors) CHECK(seen.insert(s).second);
    for (const auto& [victim, keeper] : out.suppression) {
      CHECK(seen.insert(victim).second);
      CHECK(std::find(out.survivors.begin(), out.survivors.end(), keeper) !=
            out.survivors.end());
    }
    CHECK(seen.size() == ps.size());

    // survivor dominance and overlap bounds
    for (std::size_t a = 0; a < out.survivors.size(); ++a)
      for (std::size_t b = a + 1; b < out.survivors.size(); ++b) {
        const auto& pa = ps[out.survivors[a]];
        const auto& pb = ps[out.survivors[b]];
        if (pa.class_id == pb.class_id)
          CHECK(core::iou(pa.bbox, pb.bbox) <= tau);
      }
    for (const auto& [victim, keeper] : out.suppression) {
      CHECK(core::iou(ps[victim].bbox, ps[keeper].bbox) > tau);
      CHECK(ps[victim].score <= ps[keeper].score);
      CHECK(ps[victim].class_id == ps[keeper].class_id);
    }
  }
}

TEST_CASE("NMS is invariant to input order for distinct scores") {
  std::mt19937_64 rng(52);
  for (int trial = 0; trial < 200; ++trial) {
    auto ps = random_proposals(rng, 12);
    // force distinct scores
    for (std::size_t i = 0; i < ps.size(); ++i)
      ps[i].score = 0.05 + 0.9 * static_cast<double>(i) / ps.size();
    std::shuffle(ps.begin(), ps.end(), rng);
    auto shuffled = ps;
    std::shuffle(shuffled.begin(), shuffled.end(), rng);

    const auto a = detect::nms_with_records(ps, 0.4);
    const auto b = detect::nms_with_records(shuffled, 0.4);

    auto survivor_scores = [](const detect::NmsOutcome& o) {
      std::vector<double> s;
      for (std::size_t idx : o.survivors) s.push_back(o.proposals[idx].score);
      return s;
    };
    CHECK(survivor_scores(a) == survivor_scores(b));

    auto suppression_pairs = [](const detect::NmsOutcome& o) {
      std::set<std::pair<double, double>> pairs;
      for (const auto& [victim, keeper] : o.suppression)
        pairs.insert({o.proposals[victim].score, o.proposals[keeper].score});
      return pairs;
    };
    CHECK(suppression_pairs(a) == suppression_pairs(b));
  }
}

TEST_CASE("accumulate_prob_stack worked examples") {
  // one survivor whose mask is all ones inside its box
  core::Proposal boxed = simple_proposal(4, 4, 4, 4, 0.9);
  boxed.mask = core::MaskPatch{4, 4, std::vector<float>(16, 1.0f)};
  const auto one = detect::nms_with_records({boxed}, 0.5);
  const auto stack = detect::accumulate_prob_stack(one, 12, 12);
  CHECK(stack.n == 1);
  CHECK(stack.channel(0)[4 * 12 + 4] == doctest::Approx(1.0f));
  CHECK(stack.channel(0)[0] == 0.0f);
  CHECK(stack.background()[0] == doctest::Approx(1.0f));
  CHECK(stack.background()[4 * 12 + 4] == doctest::Approx(0.0f));
  CHECK(cam::stack_invariants_hold(stack));

  // two suppressed half-masks stack to the channel max and renormalize to 1
  core::Proposal keeper = simple_proposal(4, 4, 4, 4, 0.9);
  keeper.mask = core::MaskPatch{4, 4, std::vector<float>(16, 0.5f)};
  core::Proposal victim = keeper;
  victim.score = 0.8;
  const auto nms = detect::nms_with_records({keeper, victim}, 0.5);
  REQUIRE(nms.suppression.size() == 1);
  const auto sum = detect::accumulate_prob_stack(nms, 12, 12);
  CHECK(sum.channel(0)[4 * 12 + 4] == doctest::Approx(1.0f));
  CHECK(cam::stack_invariants_hold(sum));

  // mask-less survivor falls back to a box-shaped constant at its score
  const auto bare = detect::nms_with_records({simple_proposal(4, 4, 4, 4, 0.6)}, 0.5);
  const auto fstack = detect::accumulate_prob_stack(bare, 12, 12);
  CHECK(fstack.channel(0)[4 * 12 + 4] == doctest::Approx(1.0f));  // 0.6 / 0.6
  CHECK(cam::stack_invariants_hold(fstack));

  CHECK_THROWS_AS(detect::accumulate_prob_stack(detect::NmsOutcome{}, 8, 8),
                  std::invalid_argument);
}

TEST_CASE("accumulate output satisfies stack invariants on random outcomes") {
  std::mt19937_64 rng(53);
  for (int trial = 0; trial < 50; ++trial) {
    auto ps = random_proposals(rng, 8);
    for (auto& p : ps) {
      const core::PixelRect r = core::raster(p.bbox);
      p.mask = core::MaskPatch{
          r.height(), r.width(),
          std::vector<float>(static_cast<std::size_t>(r.height()) * r.width(),
                             0.7f)};
    }
    const auto out = detect::nms_with_records(ps, 0.5);
    CHECK(cam::stack_invariants_hold(detect::accumulate_prob_stack(out, 72, 72)));
  }
}

TEST_CASE("synthetic provider echoes ground truth at zero jitter") {
  const auto scene = detect::make_detection_scene(48, 48, 2, 2, 77);
  const auto provider = detect::synthetic_provider(scene, 0.0, 3);
  const auto ps = provider->propose({nullptr, nullptr, 0});
  CHECK(ps.size() == 2 * 4);  // ground truth + 3 copies per instance
  for (const auto& p : ps) {
    CHECK(p.score == doctest::Approx(1.0));
    bool matches_gt = false;
    for (const auto& inst : scene.instances)
      matches_gt |= core::iou(p.bbox, inst.bbox) > 0.999;
    CHECK(matches_gt);
  }
}

TEST_CASE("synthetic provider is deterministic for a fixed seed") {
  const auto scene = detect::make_detection_scene(48, 48, 2, 3, 123);
  const auto p1 = detect::synthetic_provider(scene, 0.1, 10)->propose({nullptr, nullptr, 1});
  const auto p2 = detect::synthetic_provider(scene, 0.1, 10)->propose({nullptr, nullptr, 1});
  REQUIRE(p1.size() == p2.size());
  for (std::size_t i = 0; i < p1.size(); ++i) {
    CHECK(p1[i].score == p2[i].score);
    CHECK(p1[i].bbox.cx == p2[i].bbox.cx);
    CHECK(p1[i].feature.values == p2[i].feature.values);
  }
  // different rounds draw from different streams
  const auto p3 = detect::synthetic_provider(scene, 0.1, 10)->propose({nullptr, nullptr, 2});
  bool any_differs = false;
  for (std::size_t i = 0; i < p1.size(); ++i)
    any_differs |= p1[i].bbox.cx != p3[i].bbox.cx;
  CHECK(any_differs);
}

TEST_CASE("jittered proposals keep IoU > 0.5 with their instance") {
  // regression bound measured on the generator: jitter 0.1, 20 copies
  std::size_t total = 0, good = 0;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto scene = detect::make_detection_scene(64, 64, 2, 2, 1000 + seed);
    const auto ps = detect::synthetic_provider(scene, 0.1, 20)->propose({nullptr, nullptr, 0});
    for (const auto& p : ps) {
      double best = 0.0;
      for (const auto& inst : scene.instances)
        best = std::max(best, core::iou(p.bbox, inst.bbox));
      ++total;
      good += best > 0.5;
    }
  }
  CHECK(static_cast<double>(good) / static_cast<double>(total) >= 0.95);
}

TEST_CASE("iterative_refine composes the four stages for rounds=1") {
  const auto scene = detect::make_detection_scene(32, 32, 1, 1, 5);
  const auto image = detect::render_scene(scene);
  const auto provider = detect::synthetic_provider(scene, 0.08, 6);
  const detect::DetectParams dp{0.05, 0.5, 0.8};
  const auto result = detect::iterative_refine(image, *provider, fast_crf(), dp, 1);

  const auto manual_props = provider->propose({&image, nullptr, 0});
  const auto manual_nms =
      detect::nms_with_records(detect::filter_by_score(manual_props, dp.sigma_0), dp.tau);
  const auto manual_stack = detect::accumulate_prob_stack(manual_nms, 32, 32);
  const auto manual_seeds = cam::make_label_map(manual_stack, dp.sigma_c);
  const auto [manual_labels, manual_q] =
      crf::infer(manual_seeds, manual_stack, image, fast_crf());

  CHECK(result.nms.survivors == manual_nms.survivors);
  CHECK(result.stack.maps == manual_stack.maps);
  CHECK(result.labels.labels == manual_labels.labels);
  CHECK(result.rounds.size() == 1);
}

TEST_CASE("an echo provider is a fixed point across rounds") {
  const auto scene = detect::make_detection_scene(32, 32, 2, 2, 9);
  const auto image = detect::render_scene(scene);
  const auto provider = detect::synthetic_provider(scene, 0.0, 2);
  const detect::DetectParams dp{0.05, 0.5, 0.8};
  const auto r1 = detect::iterative_refine(image, *provider, fast_crf(), dp, 1);
  const auto r3 = detect::iterative_refine(image, *provider, fast_crf(), dp, 3);
  CHECK(r1.nms.survivors == r3.nms.survivors);
  CHECK(r1.stack.maps == r3.stack.maps);
  CHECK(r1.labels.labels == r3.labels.labels);
  for (const auto& round : r3.rounds)
    CHECK(round.survivors == r1.rounds[0].survivors);
}

TEST_CASE("zero proposals raise a stage error carrying the round") {
  const auto scene = detect::make_detection_scene(24, 24, 1, 1, 3);
  const auto image = detect::render_scene(scene);
  const auto good = detect::synthetic_provider(scene, 0.0, 2)->propose({&image, nullptr, 0});
  FlakyProvider flaky(good, 2);
  const detect::DetectParams dp{0.05, 0.5, 0.8};
  try {
    detect::iterative_refine(image, flaky, fast_crf(), dp, 4);
    FAIL("expected StageError");
  } catch (const detect::StageError& e) {
    CHECK(e.round() == 2);
    CHECK(e.stage() == "detect");
  }
}

TEST_CASE("NmsOutcome JSON round trip") {
  std::mt19937_64 rng(54);
  auto ps = random_proposals(rng, 6);
  for (auto& p : ps) {
    const core::PixelRect r = core::raster(p.bbox);
    p.mask = core::MaskPatch{
        r.height(), r.width(),
        std::vector<float>(static_cast<std::size_t>(r.height()) * r.width(), 0.4f)};
  }
  const auto out = detect::nms_with_records(ps, 0.45);
  const nlohmann::json j = out;
  const auto back = j.get<detect::NmsOutcome>();
  CHECK(back.tau == out.tau);
  CHECK(back.survivors == out.survivors);
  CHECK(back.suppression == out.suppression);
  REQUIRE(back.proposals.size() == out.proposals.size());
  CHECK(back.proposals[0].feature.values == out.proposals[0].feature.values);
}

TEST_CASE("scene JSON round trip") {
  const auto scene = detect::make_detection_scene(40, 56, 3, 2, 31);
  const nlohmann::json j = scene;
  const auto back = j.get<detect::SyntheticScene>();
  CHECK(back.seed == scene.seed);
  CHECK(back.width == 56);
  REQUIRE(back.instances.size() == 3);
  CHECK(back.instances[2].bbox.cx == scene.instances[2].bbox.cx);
  CHECK(back.noise.feature_dim == scene.noise.feature_dim);
}
