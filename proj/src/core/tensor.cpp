// SPDX-License-Identifier: Apache-2.0

#include "partsmine/tensor.hpp"

#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace partsmine::core {
namespace {

constexpr char kMagic[4] = {'P', 'M', 'T', '1'};

void put_u32le(std::ostream& os, std::uint32_t v) {
  const unsigned char b[4] = {
      static_cast<unsigned char>(v & 0xff),
      static_cast<unsigned char>((v >> 8) & 0xff),
      static_cast<unsigned char>((v >> 16) & 0xff),
      static_cast<unsigned char>((v >> 24) & 0xff)};
  os.write(reinterpret_cast<const char*>(b), 4);
}

std::uint32_t get_u32le(std::istream& is) {
  unsigned char b[4];
  is.read(reinterpret_cast<char*>(b), 4);
  return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
         (static_cast<std::uint32_t>(b[2]) << 16) |
         (static_cast<std::uint32_t>(b[3]) << 24);
}

void check_dims(int channels, int height, int width, std::size_t n) {
  if (channels < 1 || height < 1 || width < 1)
    throw std::invalid_argument("Tensor3: dims must be >= 1");
  if (n != static_cast<std::size_t>(channels) * height * width)
    throw std::invalid_argument("Tensor3: data length does not match dims");
}

}  // namespace

Tensor3::Tensor3(int channels, int height, int width)
    : channels_(channels), height_(height), width_(width),
      data_(static_cast<std::size_t>(channels) * height * width, 0.0f) {
  if (channels < 1 || height < 1 || width < 1)
    throw std::invalid_argument("Tensor3: dims must be >= 1");
}

Tensor3::Tensor3(int channels, int height, int width, std::vector<float> data)
    : channels_(channels), height_(height), width_(width), data_(std::move(data)) {
  check_dims(channels, height, width, data_.size());
  for (float v : data_)
    if (!std::isfinite(v))
      throw std::invalid_argument("Tensor3: entries must be finite");
}

Tensor3 Tensor3::load(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("Tensor3: cannot open " + path.string());
  char magic[4];
  is.read(magic, 4);
  if (!is || std::memcmp(magic, kMagic, 4) != 0)
    throw std::runtime_error("Tensor3: bad magic in " + path.string());
  const auto k = get_u32le(is), h = get_u32le(is), w = get_u32le(is);
  const std::size_t n = static_cast<std::size_t>(k) * h * w;
  std::vector<float> data(n);
  static_assert(std::endian::native == std::endian::little,
                "PMT reader assumes a little-endian host");
  is.read(reinterpret_cast<char*>(data.data()),
          static_cast<std::streamsize>(n * sizeof(float)));
  if (!is) throw std::runtime_error("Tensor3: truncated file " + path.string());
  return Tensor3(static_cast<int>(k), static_cast<int>(h), static_cast<int>(w),
                 std::move(data));
}

void Tensor3::save(const std::filesystem::path& path) const {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw std::runtime_error("Tensor3: cannot write " + path.string());
  os.write(kMagic, 4);
  put_u32le(os, static_cast<std::uint32_t>(channels_));
  put_u32le(os, static_cast<std::uint32_t>(height_));
  put_u32le(os, static_cast<std::uint32_t>(width_));
  static_assert(std::endian::native == std::endian::little,
                "PMT writer assumes a little-endian host");
  os.write(reinterpret_cast<const char*>(data_.data()),
           static_cast<std::streamsize>(data_.size() * sizeof(float)));
  if (!os) throw std::runtime_error("Tensor3: write failed " + path.string());
}

}  // namespace partsmine::core
