// SPDX-License-Identifier: Apache-2.0

#include "partsmine/cam.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "partsmine/kernels.hpp"
#include "partsmine/resize.hpp"

namespace partsmine::cam {

core::Tensor3 ProbStack::to_tensor() const {
  return core::Tensor3(n + 1, height, width, maps);
}

ProbStack ProbStack::from_tensor(const core::Tensor3& t) {
  if (t.channels() < 2)
    throw std::invalid_argument("ProbStack: tensor needs >= 2 channels");
  ProbStack s;
  s.n = t.channels() - 1;
  s.height = t.height();
  s.width = t.width();
  s.maps.assign(t.data().begin(), t.data().end());
  return s;
}

core::Tensor3 LabelMap::to_tensor() const {
  std::vector<float> data(labels.size());
  for (std::size_t i = 0; i < labels.size(); ++i)
    data[i] = static_cast<float>(labels[i]);
  return core::Tensor3(1, height, width, std::move(data));
}

LabelMap LabelMap::from_tensor(const core::Tensor3& t) {
  if (t.channels() != 1)
    throw std::invalid_argument("LabelMap: tensor must have one channel");
  LabelMap m;
  m.height = t.height();
  m.width = t.width();
  m.labels.resize(t.data().size());
  for (std::size_t i = 0; i < m.labels.size(); ++i)
    m.labels[i] = static_cast<int>(std::lround(t.data()[i]));
  return m;
}

CamMap compute_cam(const core::Tensor3& features,
                   const core::FeatureVec& class_weights, int class_id,
                   int out_height, int out_width) {
  if (class_weights.dim() != features.channels())
    throw std::invalid_argument("compute_cam: weight/channel count mismatch");
  const std::size_t plane = static_cast<std::size_t>(features.height()) * features.width();
  std::vector<float> acc(plane, 0.0f);
  for (int k = 0; k < features.channels(); ++k)
    kern::axpy(class_weights.values[k], features.channel(k), std::span<float>(acc));
  CamMap cam;
  cam.height = out_height;
  cam.width = out_width;
  cam.class_id = class_id;
  cam.values = core::bilinear_resize(acc, features.height(), features.width(),
                                     out_height, out_width);
  return cam;
}

std::vector<CamMap> split_instances(const CamMap& cam, double activation_floor) {
  if (!(activation_floor > 0.0 && activation_floor < 1.0))
    throw std::invalid_argument("split_instances: floor must be in (0,1)");
  const int h = cam.height, w = cam.width;
  float peak = 0.0f;
  for (float v : cam.values) peak = std::max(peak, v);
  if (peak <= 0.0f) return {};
  const float thresh = static_cast<float>(activation_floor) * peak;

  std::vector<int> comp(cam.values.size(), -1);
  struct Blob {
    int id;
    float peak;
  };
  std::vector<Blob> blobs;
  std::vector<std::size_t> stack;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const std::size_t idx = static_cast<std::size_t>(y) * w + x;
      if (comp[idx] >= 0 || cam.values[idx] < thresh) continue;
      const int id = static_cast<int>(blobs.size());
      blobs.push_back({id, cam.values[idx]});
      comp[idx] = id;
      stack.push_back(idx);
      while (!stack.empty()) {
        const std::size_t cur = stack.back();
        stack.pop_back();
        blobs[id].peak = std::max(blobs[id].peak, cam.values[cur]);
        const int cy = static_cast<int>(cur) / w, cx = static_cast<int>(cur) % w;
        for (int dy = -1; dy <= 1; ++dy)
          for (int dx = -1; dx <= 1; ++dx) {
            if (dy == 0 && dx == 0) continue;
            const int ny = cy + dy, nx = cx + dx;
            if (ny < 0 || ny >= h || nx < 0 || nx >= w) continue;
            const std::size_t nidx = static_cast<std::size_t>(ny) * w + nx;
            if (comp[nidx] >= 0 || cam.values[nidx] < thresh) continue;
            comp[nidx] = id;
            stack.push_back(nidx);
          }
      }
    }
  }

  std::stable_sort(blobs.begin(), blobs.end(),
                   [](const Blob& a, const Blob& b) { return a.peak > b.peak; });
  std::vector<CamMap> out;
  out.reserve(blobs.size());
  for (const Blob& blob : blobs) {
    CamMap inst;
    inst.height = h;
    inst.width = w;
    inst.class_id = cam.class_id;
    inst.values.assign(cam.values.size(), 0.0f);
    for (std::size_t i = 0; i < comp.size(); ++i)
      if (comp[i] == blob.id) inst.values[i] = cam.values[i];
    out.push_back(std::move(inst));
  }
  return out;
}

ProbStack build_prob_stack(const std::vector<CamMap>& instance_maps) {
  if (instance_maps.empty())
    throw std::invalid_argument("build_prob_stack: no instance maps");
  const int h = instance_maps.front().height, w = instance_maps.front().width;
  for (const CamMap& m : instance_maps)
    if (m.height != h || m.width != w)
      throw std::invalid_argument("build_prob_stack: mixed dimensions");

  ProbStack stack;
  stack.n = static_cast<int>(instance_maps.size());
  stack.height = h;
  stack.width = w;
  const std::size_t plane = static_cast<std::size_t>(h) * w;
  stack.maps.assign(static_cast<std::size_t>(stack.n + 1) * plane, 0.0f);

  for (int i = 0; i < stack.n; ++i) {
    const auto& src = instance_maps[i].values;
    float peak = 0.0f;
    for (float v : src) peak = std::max(peak, v);
    auto dst = stack.channel(i);
    if (peak <= 0.0f) continue;
    for (std::size_t p = 0; p < plane; ++p)
      dst[p] = std::clamp(src[p] / peak, 0.0f, 1.0f);
  }

  auto bg = stack.channel(stack.n);
  for (std::size_t p = 0; p < plane; ++p) {
    double s = 0.0;
    for (int i = 0; i < stack.n; ++i) s += stack.channel(i)[p];
    bg[p] = static_cast<float>(std::max(1.0 - s, 0.0));
  }
  return stack;
}

LabelMap make_label_map(const ProbStack& stack, double sigma_c) {
  if (!(sigma_c > 0.0 && sigma_c < 1.0))
    throw std::invalid_argument("make_label_map: sigma_c must be in (0,1)");
  // compare in the stack's own precision so a stored 0.8 is not "above" 0.8
  const float threshold = static_cast<float>(sigma_c);
  LabelMap out;
  out.height = stack.height;
  out.width = stack.width;
  const std::size_t plane = static_cast<std::size_t>(stack.height) * stack.width;
  out.labels.assign(plane, 0);
  for (std::size_t p = 0; p < plane; ++p) {
    int best = 0;
    float best_v = stack.channel(0)[p];
    for (int i = 1; i <= stack.n; ++i) {
      const float v = stack.channel(i)[p];
      if (v > best_v) {  // ties keep the lowest channel index
        best_v = v;
        best = i;
      }
    }
    if (best < stack.n && best_v > threshold) out.labels[p] = best + 1;
  }
  return out;
}

bool stack_invariants_hold(const ProbStack& stack, double tol) {
  const std::size_t plane = static_cast<std::size_t>(stack.height) * stack.width;
  if (stack.maps.size() != static_cast<std::size_t>(stack.n + 1) * plane)
    return false;
  for (float v : stack.maps)
    if (!(v >= 0.0f && v <= 1.0f)) return false;
  for (std::size_t p = 0; p < plane; ++p) {
    double s = 0.0;
    for (int i = 0; i < stack.n; ++i) s += stack.channel(i)[p];
    const double expect = std::max(1.0 - s, 0.0);
    if (std::abs(expect - stack.background()[p]) > tol) return false;
  }
  return true;
}

}  // namespace partsmine::cam
