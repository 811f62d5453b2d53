// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <vector>

namespace partsmine::core {

// Dense K x h x w float tensor, channel-major then row-major. Matches the
// PMT1 file container wire layout.
class Tensor3 {
 public:
  Tensor3() = default;
  Tensor3(int channels, int height, int width);  // zero-filled
  Tensor3(int channels, int height, int width, std::vector<float> data);

  int channels() const { return channels_; }
  int height() const { return height_; }
  int width() const { return width_; }
  std::size_t size() const { return data_.size(); }

  float& at(int k, int y, int x) {
    return data_[(static_cast<std::size_t>(k) * height_ + y) * width_ + x];
  }
  float at(int k, int y, int x) const {
    return data_[(static_cast<std::size_t>(k) * height_ + y) * width_ + x];
  }

  std::span<float> channel(int k) {
    return std::span<float>(data_).subspan(
        static_cast<std::size_t>(k) * height_ * width_,
        static_cast<std::size_t>(height_) * width_);
  }
  std::span<const float> channel(int k) const {
    return std::span<const float>(data_).subspan(
        static_cast<std::size_t>(k) * height_ * width_,
        static_cast<std::size_t>(height_) * width_);
  }

  std::span<const float> data() const { return data_; }
  std::span<float> data() { return data_; }

  // PMT1 container: "PMT1", u32le K, u32le h, u32le w, then K*h*w f32le.
  static Tensor3 load(const std::filesystem::path& path);
  void save(const std::filesystem::path& path) const;

 private:
  int channels_ = 0, height_ = 0, width_ = 0;
  std::vector<float> data_;
};

}  // namespace partsmine::core
