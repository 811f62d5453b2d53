// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>

#include <json.hpp>

#include "partsmine/encoder.hpp"

namespace partsmine::encoder {

// Checkpoint directory: one PMT tensor per parameter plus manifest.json with
// names, shapes and the training configuration.
void save_checkpoint(const StackedLstm<float>& net,
                     const std::filesystem::path& dir,
                     const nlohmann::json& extra = nlohmann::json::object());
StackedLstm<float> load_checkpoint(const std::filesystem::path& dir,
                                   nlohmann::json* manifest_out = nullptr);

// Sequence dataset directory: features.pmt shaped (items, steps, dim) plus
// labels.json.
void save_sequences(const Dataset& data, const std::filesystem::path& dir);
Dataset load_sequences(const std::filesystem::path& dir);

}  // namespace partsmine::encoder
