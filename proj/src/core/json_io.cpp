// SPDX-License-Identifier: Apache-2.0

#include "partsmine/json_io.hpp"

namespace partsmine::core {

void to_json(nlohmann::json& j, const BBox& b) {
  j = nlohmann::json{{"cx", b.cx}, {"cy", b.cy}, {"w", b.w}, {"h", b.h}};
}

void from_json(const nlohmann::json& j, BBox& b) {
  b = make_bbox(j.at("cx").get<double>(), j.at("cy").get<double>(),
                j.at("w").get<double>(), j.at("h").get<double>());
}

void to_json(nlohmann::json& j, const FeatureVec& f) {
  j = nlohmann::json{{"dim", f.dim()}, {"values", f.values}};
}

void from_json(const nlohmann::json& j, FeatureVec& f) {
  f.values = j.at("values").get<std::vector<float>>();
  if (j.contains("dim") && j.at("dim").get<int>() != f.dim())
    throw std::invalid_argument("FeatureVec: dim does not match values");
}

void to_json(nlohmann::json& j, const MaskPatch& m) {
  j = nlohmann::json{{"height", m.height}, {"width", m.width}, {"values", m.values}};
}

void from_json(const nlohmann::json& j, MaskPatch& m) {
  m.height = j.at("height").get<int>();
  m.width = j.at("width").get<int>();
  m.values = j.at("values").get<std::vector<float>>();
}

void to_json(nlohmann::json& j, const Proposal& p) {
  j = nlohmann::json{{"bbox", p.bbox},
                     {"score", p.score},
                     {"class_id", p.class_id},
                     {"feature", p.feature}};
  if (p.mask)
    j["mask"] = *p.mask;
  else
    j["mask"] = nullptr;
}

void from_json(const nlohmann::json& j, Proposal& p) {
  p.bbox = j.at("bbox").get<BBox>();
  p.score = j.at("score").get<double>();
  p.class_id = j.at("class_id").get<int>();
  p.feature = j.at("feature").get<FeatureVec>();
  if (j.contains("mask") && !j.at("mask").is_null())
    p.mask = j.at("mask").get<MaskPatch>();
  else
    p.mask.reset();
  validate(p);
}

}  // namespace partsmine::core

namespace partsmine::crf {

void to_json(nlohmann::json& j, const CrfParams& p) {
  j = nlohmann::json{{"appearance_weight", p.appearance_weight},
                     {"appearance_spatial_sigma", p.appearance_spatial_sigma},
                     {"appearance_color_sigma", p.appearance_color_sigma},
                     {"smoothness_weight", p.smoothness_weight},
                     {"smoothness_sigma", p.smoothness_sigma},
                     {"iterations", p.iterations},
                     {"hard_seed_confidence", p.hard_seed_confidence}};
}

void from_json(const nlohmann::json& j, CrfParams& p) {
  p = CrfParams{};
  p.appearance_weight = j.value("appearance_weight", p.appearance_weight);
  p.appearance_spatial_sigma =
      j.value("appearance_spatial_sigma", p.appearance_spatial_sigma);
  p.appearance_color_sigma =
      j.value("appearance_color_sigma", p.appearance_color_sigma);
  p.smoothness_weight = j.value("smoothness_weight", p.smoothness_weight);
  p.smoothness_sigma = j.value("smoothness_sigma", p.smoothness_sigma);
  p.iterations = j.value("iterations", p.iterations);
  p.hard_seed_confidence = j.value("hard_seed_confidence", p.hard_seed_confidence);
  validate(p);
}

}  // namespace partsmine::crf

namespace partsmine::detect {

void to_json(nlohmann::json& j, const NmsOutcome& o) {
  j = nlohmann::json{{"tau", o.tau},
                     {"proposals", o.proposals},
                     {"survivors", o.survivors},
                     {"suppression", o.suppression}};
}

void from_json(const nlohmann::json& j, NmsOutcome& o) {
  o.tau = j.at("tau").get<double>();
  o.proposals = j.at("proposals").get<std::vector<core::Proposal>>();
  o.survivors = j.at("survivors").get<std::vector<std::size_t>>();
  o.suppression =
      j.at("suppression").get<std::vector<std::pair<std::size_t, std::size_t>>>();
}

void to_json(nlohmann::json& j, const SceneInstance& s) {
  j = nlohmann::json{{"bbox", s.bbox}, {"class_id", s.class_id}};
}

void from_json(const nlohmann::json& j, SceneInstance& s) {
  s.bbox = j.at("bbox").get<core::BBox>();
  s.class_id = j.at("class_id").get<int>();
}

void to_json(nlohmann::json& j, const SyntheticScene& s) {
  j = nlohmann::json{{"width", s.width},
                     {"height", s.height},
                     {"seed", s.seed},
                     {"instances", s.instances},
                     {"noise",
                      {{"score_noise", s.noise.score_noise},
                       {"feature_noise", s.noise.feature_noise},
                       {"prior_weight", s.noise.prior_weight},
                       {"feature_dim", s.noise.feature_dim}}}};
}

void from_json(const nlohmann::json& j, SyntheticScene& s) {
  s = SyntheticScene{};
  s.width = j.at("width").get<int>();
  s.height = j.at("height").get<int>();
  s.seed = j.at("seed").get<std::uint64_t>();
  s.instances = j.at("instances").get<std::vector<SceneInstance>>();
  if (j.contains("noise")) {
    const auto& n = j.at("noise");
    s.noise.score_noise = n.value("score_noise", s.noise.score_noise);
    s.noise.feature_noise = n.value("feature_noise", s.noise.feature_noise);
    s.noise.prior_weight = n.value("prior_weight", s.noise.prior_weight);
    s.noise.feature_dim = n.value("feature_dim", s.noise.feature_dim);
  }
}

}  // namespace partsmine::detect

namespace partsmine::parts {

namespace {
const char* source_kind_name(PartSource::Kind k) {
  switch (k) {
    case PartSource::Kind::proposal: return "proposal";
    case PartSource::Kind::grid_cell: return "grid_cell";
    case PartSource::Kind::root: return "root";
  }
  return "grid_cell";
}

PartSource::Kind source_kind_from(const std::string& s) {
  if (s == "proposal") return PartSource::Kind::proposal;
  if (s == "root") return PartSource::Kind::root;
  return PartSource::Kind::grid_cell;
}
}  // namespace

void to_json(nlohmann::json& j, const Part& p) {
  j = nlohmann::json{{"feature", p.feature},
                     {"geometry", p.geometry},
                     {"det_score", p.det_score},
                     {"source",
                      {{"kind", source_kind_name(p.source.kind)},
                       {"index", p.source.index}}}};
}

void from_json(const nlohmann::json& j, Part& p) {
  p.feature = j.at("feature").get<core::FeatureVec>();
  p.geometry = j.at("geometry").get<core::BBox>();
  p.det_score = j.at("det_score").get<double>();
  p.source.kind = source_kind_from(j.at("source").at("kind").get<std::string>());
  p.source.index = j.at("source").at("index").get<int>();
}

void to_json(nlohmann::json& j, const PartsModel& m) {
  j = nlohmann::json{{"n", m.n()}, {"parts", m.parts}};
}

void from_json(const nlohmann::json& j, PartsModel& m) {
  m.parts = j.at("parts").get<std::vector<Part>>();
  validate(m);
}

void to_json(nlohmann::json& j, const SearchConfig& c) {
  j = nlohmann::json{{"lambda_0", c.lambda_0}, {"beta_0", c.beta_0},
                     {"n", c.n},               {"s", c.s},
                     {"max_passes", c.max_passes},
                     {"brute_force_guard", c.brute_force_guard}};
}

void from_json(const nlohmann::json& j, SearchConfig& c) {
  c = SearchConfig{};
  c.lambda_0 = j.value("lambda_0", c.lambda_0);
  c.beta_0 = j.value("beta_0", c.beta_0);
  c.n = j.value("n", c.n);
  c.s = j.value("s", c.s);
  c.max_passes = j.value("max_passes", c.max_passes);
  c.brute_force_guard = j.value("brute_force_guard", c.brute_force_guard);
  validate(c);
}

}  // namespace partsmine::parts
