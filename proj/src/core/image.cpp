// SPDX-License-Identifier: Apache-2.0

#include "partsmine/image.hpp"

#include <fstream>
#include <stdexcept>
#include <string>

namespace partsmine::core {
namespace {

int read_pnm_int(std::istream& is) {
  // skips whitespace and '#' comments
  int c = is.get();
  while (c == '#' || std::isspace(c)) {
    if (c == '#')
      while (c != '\n' && c != EOF) c = is.get();
    c = is.get();
  }
  int v = 0;
  bool any = false;
  while (std::isdigit(c)) {
    v = v * 10 + (c - '0');
    any = true;
    c = is.get();
  }
  if (!any) throw std::runtime_error("pnm: malformed header");
  return v;
}

}  // namespace

RgbImage make_image(int height, int width, std::uint8_t fill) {
  if (height < 1 || width < 1)
    throw std::invalid_argument("RgbImage: dims must be >= 1");
  RgbImage img;
  img.height = height;
  img.width = width;
  img.data.assign(static_cast<std::size_t>(height) * width * 3, fill);
  return img;
}

RgbImage load_pnm(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("pnm: cannot open " + path.string());
  char p = 0, kind = 0;
  is.get(p);
  is.get(kind);
  if (p != 'P' || (kind != '5' && kind != '6'))
    throw std::runtime_error("pnm: only binary P5/P6 supported: " + path.string());
  const int w = read_pnm_int(is);
  const int h = read_pnm_int(is);
  const int maxval = read_pnm_int(is);
  if (maxval != 255) throw std::runtime_error("pnm: maxval must be 255");
  RgbImage img = make_image(h, w);
  if (kind == '6') {
    is.read(reinterpret_cast<char*>(img.data.data()),
            static_cast<std::streamsize>(img.data.size()));
  } else {
    std::vector<std::uint8_t> gray(static_cast<std::size_t>(h) * w);
    is.read(reinterpret_cast<char*>(gray.data()),
            static_cast<std::streamsize>(gray.size()));
    for (std::size_t i = 0; i < gray.size(); ++i)
      img.data[i * 3] = img.data[i * 3 + 1] = img.data[i * 3 + 2] = gray[i];
  }
  if (!is) throw std::runtime_error("pnm: truncated file " + path.string());
  return img;
}

void save_ppm(const RgbImage& image, const std::filesystem::path& path) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw std::runtime_error("ppm: cannot write " + path.string());
  os << "P6\n" << image.width << " " << image.height << "\n255\n";
  os.write(reinterpret_cast<const char*>(image.data.data()),
           static_cast<std::streamsize>(image.data.size()));
  if (!os) throw std::runtime_error("ppm: write failed " + path.string());
}

RgbImage crop(const RgbImage& image, const PixelRect& rect) {
  const PixelRect r = clip(rect, image.width, image.height);
  if (r.empty()) throw std::invalid_argument("crop: empty region");
  RgbImage out = make_image(r.height(), r.width());
  for (int y = 0; y < r.height(); ++y)
    for (int x = 0; x < r.width(); ++x)
      for (int c = 0; c < 3; ++c)
        out.at(y, x, c) = image.at(r.y0 + y, r.x0 + x, c);
  return out;
}

std::array<std::vector<float>, 3> planar_channels(const RgbImage& image) {
  const std::size_t n = static_cast<std::size_t>(image.height) * image.width;
  std::array<std::vector<float>, 3> planes;
  for (auto& p : planes) p.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    planes[0][i] = static_cast<float>(image.data[i * 3]);
    planes[1][i] = static_cast<float>(image.data[i * 3 + 1]);
    planes[2][i] = static_cast<float>(image.data[i * 3 + 2]);
  }
  return planes;
}

}  // namespace partsmine::core
