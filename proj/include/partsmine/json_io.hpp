// SPDX-License-Identifier: Apache-2.0
#pragma once

// JSON (de)serialization for the documented file schemas. Field names match
// the domain types one to one.

#include <json.hpp>

#include "partsmine/crf.hpp"
#include "partsmine/detect.hpp"
#include "partsmine/parts.hpp"
#include "partsmine/proposal.hpp"
#include "partsmine/synthetic.hpp"

namespace partsmine::core {
void to_json(nlohmann::json& j, const BBox& b);
void from_json(const nlohmann::json& j, BBox& b);
void to_json(nlohmann::json& j, const FeatureVec& f);
void from_json(const nlohmann::json& j, FeatureVec& f);
void to_json(nlohmann::json& j, const MaskPatch& m);
void from_json(const nlohmann::json& j, MaskPatch& m);
void to_json(nlohmann::json& j, const Proposal& p);
void from_json(const nlohmann::json& j, Proposal& p);
}  // namespace partsmine::core

namespace partsmine::crf {
void to_json(nlohmann::json& j, const CrfParams& p);
void from_json(const nlohmann::json& j, CrfParams& p);
}  // namespace partsmine::crf

namespace partsmine::detect {
void to_json(nlohmann::json& j, const NmsOutcome& o);
void from_json(const nlohmann::json& j, NmsOutcome& o);
void to_json(nlohmann::json& j, const SceneInstance& s);
void from_json(const nlohmann::json& j, SceneInstance& s);
void to_json(nlohmann::json& j, const SyntheticScene& s);
void from_json(const nlohmann::json& j, SyntheticScene& s);
}  // namespace partsmine::detect

namespace partsmine::parts {
void to_json(nlohmann::json& j, const Part& p);
void from_json(const nlohmann::json& j, Part& p);
void to_json(nlohmann::json& j, const PartsModel& m);
void from_json(const nlohmann::json& j, PartsModel& m);
void to_json(nlohmann::json& j, const SearchConfig& c);
void from_json(const nlohmann::json& j, SearchConfig& c);
}  // namespace partsmine::parts
