// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <vector>

#include "partsmine/geometry.hpp"

namespace partsmine::core {

// Interleaved 8-bit RGB.
struct RgbImage {
  int height = 0;
  int width = 0;
  std::vector<std::uint8_t> data;  // height * width * 3

  std::uint8_t at(int y, int x, int c) const {
    return data[(static_cast<std::size_t>(y) * width + x) * 3 + c];
  }
  std::uint8_t& at(int y, int x, int c) {
    return data[(static_cast<std::size_t>(y) * width + x) * 3 + c];
  }
};

RgbImage make_image(int height, int width, std::uint8_t fill = 0);

// Binary PPM (P6) and PGM (P5, replicated to gray RGB), maxval 255.
RgbImage load_pnm(const std::filesystem::path& path);
void save_ppm(const RgbImage& image, const std::filesystem::path& path);

RgbImage crop(const RgbImage& image, const PixelRect& rect);

// Planar float copies of the three channels, for kernel-row consumption.
std::array<std::vector<float>, 3> planar_channels(const RgbImage& image);

}  // namespace partsmine::core
