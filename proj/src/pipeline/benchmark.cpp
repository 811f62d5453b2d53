// SPDX-License-Identifier: Apache-2.0

#include "partsmine/benchmark.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include "partsmine/json_io.hpp"
#include "partsmine/rng.hpp"

namespace partsmine::pipeline {
namespace {

// the two motif tones share their mean, so any pooling cell that covers a
// whole site averages every symbol to the same color
constexpr double kTone1[3] = {205.0, 140.0, 70.0};
constexpr double kTone2[3] = {70.0, 150.0, 185.0};
constexpr double kBodyTone[3] = {135.0, 130.0, 125.0};
constexpr double kBgTone[3] = {118.0, 122.0, 126.0};

struct GridShape {
  int cols, rows;
};

GridShape site_grid(int sites) {
  const int cols = static_cast<int>(std::ceil(std::sqrt(static_cast<double>(sites))));
  const int rows = (sites + cols - 1) / cols;
  return {cols, rows};
}

void write_json_file(const nlohmann::json& j, const std::filesystem::path& path) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw std::runtime_error("benchmark: cannot write " + path.string());
  os << j.dump(2) << "\n";
}

nlohmann::json read_json_file(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("benchmark: cannot open " + path.string());
  return nlohmann::json::parse(is);
}

void check_classes(int classes) {
  if (classes != 2 && classes != 4)
    throw std::invalid_argument("benchmark: classes must be 2 or 4 (XOR code)");
}

bool motif_first_half(int symbol, double u, double v) {
  const bool second = symbol & kMotifSecondBit;
  bool first;
  if (symbol & kMotifDiagBit)
    first = second ? (u + v < 1.0) : (u > v);  // anti vs main diagonal
  else
    first = second ? (u < 0.5) : (v < 0.5);  // V vs H split
  if (symbol & kMotifOrderBit) first = !first;
  return first;
}

struct BitDecode {
  bool diag, second, order;
};

// majority bits from per-site symbols
BitDecode majority_bits(const std::vector<int>& motifs) {
  int n_diag = 0, n_second = 0, n_order = 0;
  for (int s : motifs) {
    n_diag += (s & kMotifDiagBit) != 0;
    n_second += (s & kMotifSecondBit) != 0;
    n_order += (s & kMotifOrderBit) != 0;
  }
  const int half = static_cast<int>(motifs.size()) / 2;
  return {n_diag > half, n_second > half, n_order > half};
}

}  // namespace

int benchmark_class(int classes, bool b_diag, bool b_second, bool b_order) {
  check_classes(classes);
  const int x = (b_diag != b_second) ? 1 : 0;
  return classes == 2 ? x : 2 * static_cast<int>(b_order) + x;
}

double single_site_ceiling(int classes, int sites) {
  check_classes(classes);
  // one site agrees with an attribute's majority with probability (S-1)/S
  const double p = static_cast<double>(sites - 1) / sites;
  const double xor_right = p * p + (1.0 - p) * (1.0 - p);
  return classes == 2 ? xor_right : p * xor_right;
}

std::vector<core::BBox> site_boxes(const core::BBox& object, int sites) {
  const GridShape g = site_grid(sites);
  const core::Corners oc = core::to_corners(object);
  const double cell_w = object.w / g.cols;
  const double cell_h = object.h / g.rows;
  if (cell_w < 6.0 || cell_h < 6.0)
    throw std::invalid_argument(
        "benchmark: signal split exceeds object dims (sites too small)");
  std::vector<core::BBox> out;
  for (int s = 0; s < sites; ++s) {
    const int r = s / g.cols, c = s % g.cols;
    out.push_back(core::make_bbox(oc.x0 + (c + 0.5) * cell_w,
                                  oc.y0 + (r + 0.5) * cell_h, cell_w * 0.85,
                                  cell_h * 0.85));
  }
  return out;
}

BenchmarkDataset gen_benchmark(const BenchmarkSpec& spec) {
  check_classes(spec.classes);
  if (spec.items < spec.classes)
    throw std::invalid_argument("benchmark: need at least one item per class");
  if (spec.sites < 4)
    throw std::invalid_argument("benchmark: need at least 4 sites");
  BenchmarkDataset data;
  data.spec = spec;

  const int train_items =
      static_cast<int>(std::lround(spec.items * spec.train_fraction));
  for (int i = 0; i < spec.items; ++i) {
    auto rng = core::stream(spec.seed, "bench-item", static_cast<std::uint64_t>(i));
    std::uniform_real_distribution<double> unit(0.0, 1.0);

    BenchItem item;
    const double w = spec.width * (0.56 + 0.12 * unit(rng));
    const double h = spec.height * (0.44 + 0.12 * unit(rng));
    const double cx = spec.width * 0.5 + (unit(rng) - 0.5) * spec.width * 0.12;
    const double cy = spec.height * 0.5 + (unit(rng) - 0.5) * spec.height * 0.12;

    // attribute majority bits; the diag/second pair carries the XOR bit
    const bool b_order = rng() & 1;
    const bool b_diag = rng() & 1;
    bool b_second;
    if (spec.classes == 4) {
      const bool want_xor = rng() & 1;
      b_second = want_xor != b_diag;
    } else {
      b_second = rng() & 1;
    }
    item.label = benchmark_class(spec.classes, b_diag, b_second, b_order);

    // each attribute has exactly one dissenting site
    const auto odd_site = [&]() {
      return static_cast<int>(rng() % static_cast<std::uint64_t>(spec.sites));
    };
    const int odd_diag = odd_site(), odd_second = odd_site(), odd_order = odd_site();
    item.motifs.assign(static_cast<std::size_t>(spec.sites), 0);
    for (int s = 0; s < spec.sites; ++s) {
      const bool a_diag = b_diag != (s == odd_diag);
      const bool a_second = b_second != (s == odd_second);
      const bool a_order = b_order != (s == odd_order);
      item.motifs[static_cast<std::size_t>(s)] =
          (a_diag ? kMotifDiagBit : 0) | (a_second ? kMotifSecondBit : 0) |
          (a_order ? kMotifOrderBit : 0);
    }

    detect::SceneInstance inst;
    inst.bbox = core::make_bbox(cx, cy, w, h);
    inst.class_id = item.label;
    item.scene.width = spec.width;
    item.scene.height = spec.height;
    item.scene.seed = core::mix64(spec.seed ^ (static_cast<std::uint64_t>(i) + 1));
    item.scene.instances.push_back(inst);

    (i < train_items ? data.train : data.test).push_back(std::move(item));
  }
  return data;
}

core::RgbImage render_bench_item(const BenchItem& item, const BenchmarkSpec& spec) {
  const detect::SceneInstance& inst = item.scene.instances.front();
  core::RgbImage img = core::make_image(spec.height, spec.width);
  auto rng = core::stream(item.scene.seed, "bench-render");
  std::normal_distribution<double> noise(0.0, spec.pixel_noise);

  const auto sites = site_boxes(inst.bbox, spec.sites);
  std::vector<core::Corners> corners;
  corners.reserve(sites.size());
  for (const auto& s : sites) corners.push_back(core::to_corners(s));

  for (int y = 0; y < spec.height; ++y)
    for (int x = 0; x < spec.width; ++x) {
      const double px = x + 0.5, py = y + 0.5;
      double rgb[3] = {kBgTone[0], kBgTone[1], kBgTone[2]};
      const float soft = detect::instance_soft_mask(inst, px, py);
      if (soft > 0.0f)
        for (int c = 0; c < 3; ++c) rgb[c] += soft * (kBodyTone[c] - rgb[c]);
      for (std::size_t s = 0; s < sites.size(); ++s) {
        const core::Corners& sc = corners[s];
        if (px < sc.x0 || px >= sc.x1 || py < sc.y0 || py >= sc.y1) continue;
        const double u = (px - sc.x0) / (sc.x1 - sc.x0);
        const double v = (py - sc.y0) / (sc.y1 - sc.y0);
        const double* tone =
            motif_first_half(item.motifs[s], u, v) ? kTone1 : kTone2;
        for (int c = 0; c < 3; ++c) rgb[c] = tone[c];
        break;
      }
      for (int c = 0; c < 3; ++c)
        img.at(y, x, c) = static_cast<std::uint8_t>(
            std::clamp(rgb[c] + noise(rng), 0.0, 255.0));
    }
  return img;
}

void to_json(nlohmann::json& j, const BenchmarkSpec& s) {
  j = nlohmann::json{{"classes", s.classes},
                     {"items", s.items},
                     {"train_fraction", s.train_fraction},
                     {"height", s.height},
                     {"width", s.width},
                     {"sites", s.sites},
                     {"pixel_noise", s.pixel_noise},
                     {"seed", s.seed}};
}

void from_json(const nlohmann::json& j, BenchmarkSpec& s) {
  s = BenchmarkSpec{};
  s.classes = j.value("classes", s.classes);
  s.items = j.value("items", s.items);
  s.train_fraction = j.value("train_fraction", s.train_fraction);
  s.height = j.value("height", s.height);
  s.width = j.value("width", s.width);
  s.sites = j.value("sites", s.sites);
  s.pixel_noise = j.value("pixel_noise", s.pixel_noise);
  s.seed = j.value("seed", s.seed);
}

void to_json(nlohmann::json& j, const BenchItem& s) {
  j = nlohmann::json{{"scene", s.scene}, {"label", s.label}, {"motifs", s.motifs}};
}

void from_json(const nlohmann::json& j, BenchItem& s) {
  s.scene = j.at("scene").get<detect::SyntheticScene>();
  s.label = j.at("label").get<int>();
  s.motifs = j.at("motifs").get<std::vector<int>>();
}

void save_benchmark(const BenchmarkDataset& data, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  nlohmann::json meta{{"spec", data.spec}, {"oracles", data.metadata}};
  write_json_file(meta, dir / "meta.json");
  write_json_file(nlohmann::json(data.train), dir / "train.json");
  write_json_file(nlohmann::json(data.test), dir / "test.json");
}

BenchmarkDataset load_benchmark(const std::filesystem::path& dir) {
  BenchmarkDataset data;
  const nlohmann::json meta = read_json_file(dir / "meta.json");
  data.spec = meta.at("spec").get<BenchmarkSpec>();
  data.metadata = meta.value("oracles", nlohmann::json::object());
  data.train = read_json_file(dir / "train.json").get<std::vector<BenchItem>>();
  data.test = read_json_file(dir / "test.json").get<std::vector<BenchItem>>();
  return data;
}

void measure_benchmark_oracles(BenchmarkDataset& data, int extractor_grid) {
  const encoder::PoolingExtractor extractor(extractor_grid);
  const BenchmarkSpec& spec = data.spec;

  auto whole_image_set = [&](const std::vector<BenchItem>& items) {
    encoder::Dataset set;
    for (const BenchItem& item : items) {
      encoder::PatchSequence seq;
      seq.features.push_back(extractor.extract(render_bench_item(item, spec)));
      set.sequences.push_back(std::move(seq));
      set.labels.push_back(item.label);
    }
    return set;
  };

  encoder::SgdConfig opt;
  opt.epochs = 25;
  opt.lr = 0.02;
  opt.lr_step_epochs = 10;
  opt.seed = spec.seed;

  // whole-image-only linear classifier
  const encoder::Dataset wtrain = whole_image_set(data.train);
  const encoder::Dataset wtest = whole_image_set(data.test);
  const encoder::LinearSoftmax wmodel =
      encoder::train_concat_baseline(wtrain, spec.classes, opt);
  const double whole_image_acc = encoder::accuracy_concat(wtest, wmodel);

  // single-site ceiling, measured: Bayes decision from one observed symbol
  auto rng = core::stream(spec.seed, "oracle-site");
  std::size_t correct = 0;
  for (const BenchItem& item : data.test) {
    const int site = static_cast<int>(rng() % static_cast<std::uint64_t>(spec.sites));
    const int sym = item.motifs[static_cast<std::size_t>(site)];
    // each observed attribute is the likeliest majority value
    const int guess = benchmark_class(spec.classes, sym & kMotifDiagBit,
                                      sym & kMotifSecondBit, sym & kMotifOrderBit);
    correct += guess == item.label;
  }
  const double single_site_measured =
      data.test.empty() ? 0.0 : static_cast<double>(correct) / data.test.size();

  // full-parts route from pixels: 8-way site-symbol classifier, then
  // majority bits and the class code
  auto site_set = [&](const std::vector<BenchItem>& items) {
    encoder::Dataset set;
    for (const BenchItem& item : items) {
      const core::RgbImage img = render_bench_item(item, spec);
      const auto boxes = site_boxes(item.scene.instances.front().bbox, spec.sites);
      for (int s = 0; s < spec.sites; ++s) {
        const core::PixelRect r = core::clip(
            core::raster(boxes[static_cast<std::size_t>(s)]), img.width, img.height);
        encoder::PatchSequence seq;
        seq.features.push_back(extractor.extract(core::crop(img, r)));
        set.sequences.push_back(std::move(seq));
        set.labels.push_back(item.motifs[static_cast<std::size_t>(s)]);
      }
    }
    return set;
  };
  const encoder::Dataset strain = site_set(data.train);
  const encoder::LinearSoftmax smodel = encoder::train_concat_baseline(strain, 8, opt);
  correct = 0;
  for (const BenchItem& item : data.test) {
    const core::RgbImage img = render_bench_item(item, spec);
    const auto boxes = site_boxes(item.scene.instances.front().bbox, spec.sites);
    std::vector<int> decoded(static_cast<std::size_t>(spec.sites));
    for (int s = 0; s < spec.sites; ++s) {
      const core::PixelRect r = core::clip(
          core::raster(boxes[static_cast<std::size_t>(s)]), img.width, img.height);
      encoder::PatchSequence seq;
      seq.features.push_back(extractor.extract(core::crop(img, r)));
      decoded[static_cast<std::size_t>(s)] = encoder::predict_concat(seq, smodel);
    }
    const BitDecode bits = majority_bits(decoded);
    correct += benchmark_class(spec.classes, bits.diag, bits.second, bits.order) ==
               item.label;
  }
  const double full_parts_acc =
      data.test.empty() ? 0.0 : static_cast<double>(correct) / data.test.size();

  data.metadata = nlohmann::json{
      {"single_site_ceiling_analytic", single_site_ceiling(spec.classes, spec.sites)},
      {"single_site_measured", single_site_measured},
      {"whole_image_linear", whole_image_acc},
      {"full_parts_achievable", full_parts_acc}};
}

}  // namespace partsmine::pipeline
