// SPDX-License-Identifier: Apache-2.0

#include "partsmine/encoder_io.hpp"

#include <fstream>

#include "partsmine/tensor.hpp"

namespace partsmine::encoder {
namespace {

struct Entry {
  const char* name;
  int rows, cols;
};

core::Tensor3 as_tensor(const std::vector<float>& v, int rows, int cols) {
  return core::Tensor3(1, rows, cols, v);
}

void write_json(const nlohmann::json& j, const std::filesystem::path& path) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw std::runtime_error("checkpoint: cannot write " + path.string());
  os << j.dump(2) << "\n";
}

}  // namespace

void save_checkpoint(const StackedLstm<float>& net,
                     const std::filesystem::path& dir,
                     const nlohmann::json& extra) {
  std::filesystem::create_directories(dir);
  const int h = net.l1.hidden_dim;
  const Entry entries[] = {
      {"l1_wx", 4 * h, net.l1.input_dim}, {"l1_wh", 4 * h, h},
      {"l1_b", 1, 4 * h},                 {"l2_wx", 4 * h, h},
      {"l2_wh", 4 * h, h},                {"l2_b", 1, 4 * h},
      {"wc", net.num_classes, h},         {"bc", 1, net.num_classes},
  };
  const std::vector<float>* data[] = {&net.l1.wx.v, &net.l1.wh.v, &net.l1.b,
                                      &net.l2.wx.v, &net.l2.wh.v, &net.l2.b,
                                      &net.wc.v,    &net.bc};
  nlohmann::json params = nlohmann::json::array();
  for (std::size_t i = 0; i < std::size(entries); ++i) {
    as_tensor(*data[i], entries[i].rows, entries[i].cols)
        .save(dir / (std::string(entries[i].name) + ".pmt"));
    params.push_back({{"name", entries[i].name},
                      {"rows", entries[i].rows},
                      {"cols", entries[i].cols}});
  }
  nlohmann::json manifest{{"input_dim", net.l1.input_dim},
                          {"hidden_dim", h},
                          {"num_classes", net.num_classes},
                          {"parameters", params},
                          {"config", extra}};
  write_json(manifest, dir / "manifest.json");
}

StackedLstm<float> load_checkpoint(const std::filesystem::path& dir,
                                   nlohmann::json* manifest_out) {
  std::ifstream is(dir / "manifest.json");
  if (!is)
    throw std::runtime_error("checkpoint: cannot open manifest in " + dir.string());
  const nlohmann::json manifest = nlohmann::json::parse(is);
  if (manifest_out) *manifest_out = manifest;

  StackedLstm<float> net = StackedLstm<float>::zeros(
      manifest.at("input_dim").get<int>(), manifest.at("hidden_dim").get<int>(),
      manifest.at("num_classes").get<int>());
  std::vector<float>* data[] = {&net.l1.wx.v, &net.l1.wh.v, &net.l1.b,
                                &net.l2.wx.v, &net.l2.wh.v, &net.l2.b,
                                &net.wc.v,    &net.bc};
  const char* names[] = {"l1_wx", "l1_wh", "l1_b", "l2_wx",
                         "l2_wh", "l2_b",  "wc",   "bc"};
  for (std::size_t i = 0; i < std::size(names); ++i) {
    const core::Tensor3 t = core::Tensor3::load(dir / (std::string(names[i]) + ".pmt"));
    if (t.size() != data[i]->size())
      throw std::runtime_error("checkpoint: shape mismatch for " +
                               std::string(names[i]));
    data[i]->assign(t.data().begin(), t.data().end());
  }
  return net;
}

void save_sequences(const Dataset& data, const std::filesystem::path& dir) {
  if (data.size() == 0)
    throw std::invalid_argument("save_sequences: empty dataset");
  std::filesystem::create_directories(dir);
  const int steps = static_cast<int>(data.sequences.front().features.size());
  const int dim = data.sequences.front().features.front().dim();
  std::vector<float> flat;
  flat.reserve(data.size() * steps * dim);
  for (const PatchSequence& seq : data.sequences) {
    if (static_cast<int>(seq.features.size()) != steps)
      throw std::invalid_argument("save_sequences: ragged sequence lengths");
    for (const core::FeatureVec& f : seq.features) {
      if (f.dim() != dim)
        throw std::invalid_argument("save_sequences: ragged feature dims");
      flat.insert(flat.end(), f.values.begin(), f.values.end());
    }
  }
  core::Tensor3(static_cast<int>(data.size()), steps, dim, std::move(flat))
      .save(dir / "features.pmt");
  write_json(nlohmann::json{{"labels", data.labels}}, dir / "labels.json");
}

Dataset load_sequences(const std::filesystem::path& dir) {
  const core::Tensor3 t = core::Tensor3::load(dir / "features.pmt");
  std::ifstream is(dir / "labels.json");
  if (!is)
    throw std::runtime_error("load_sequences: cannot open labels.json in " +
                             dir.string());
  const nlohmann::json labels = nlohmann::json::parse(is);
  Dataset data;
  data.labels = labels.at("labels").get<std::vector<int>>();
  if (static_cast<int>(data.labels.size()) != t.channels())
    throw std::runtime_error("load_sequences: label count does not match items");
  const int steps = t.height(), dim = t.width();
  data.sequences.resize(static_cast<std::size_t>(t.channels()));
  for (int i = 0; i < t.channels(); ++i) {
    auto& seq = data.sequences[static_cast<std::size_t>(i)];
    seq.features.resize(static_cast<std::size_t>(steps));
    const auto plane = t.channel(i);
    for (int s = 0; s < steps; ++s) {
      auto& f = seq.features[static_cast<std::size_t>(s)];
      f.values.assign(plane.begin() + static_cast<std::ptrdiff_t>(s) * dim,
                      plane.begin() + static_cast<std::ptrdiff_t>(s + 1) * dim);
    }
  }
  return data;
}

}  // namespace partsmine::encoder
