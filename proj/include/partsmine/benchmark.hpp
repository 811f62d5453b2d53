// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include <json.hpp>

#include "partsmine/encoder.hpp"
#include "partsmine/synthetic.hpp"

namespace partsmine::pipeline {

// Parts-informative classification benchmark. Every object carries `sites`
// motif sites; a motif is a two-tone split of the site (style: horizontal,
// vertical, main- or anti-diagonal; order: which tone comes first), giving
// three attribute bits per site with identical mean color. Per item each
// attribute is set on either 1 or sites-1 sites; the class is built from
// XORs of the resulting majority bits:
//   4 classes: 2 * b_order + (b_diag XOR b_second)
//   2 classes: b_diag XOR b_second
// An XOR of majorities spread across disjoint patches is not an additive
// function of the patches, so per-patch posterior averaging (and any linear
// pooling) cannot express it, single sites only hint at it, and whole-image
// pooling cannot even see the motifs.
struct BenchmarkSpec {
  int classes = 4;  // 2 or 4
  int items = 1000;
  double train_fraction = 0.8;
  int height = 64;
  int width = 64;
  int sites = 6;  // part-signal split: evidence sites per object
  double pixel_noise = 8.0;
  std::uint64_t seed = 7;
};

struct BenchItem {
  detect::SyntheticScene scene;  // one instance
  int label = 0;
  std::vector<int> motifs;  // generator metadata: symbol 0..7 per site
};

struct BenchmarkDataset {
  BenchmarkSpec spec;
  std::vector<BenchItem> train, test;
  nlohmann::json metadata;  // oracle ceilings measured at generation time
};

// symbol bit layout
constexpr int kMotifDiagBit = 1;    // axis split vs diagonal split
constexpr int kMotifSecondBit = 2;  // H vs V, or main vs anti diagonal
constexpr int kMotifOrderBit = 4;   // tone order

// class from the three majority bits
int benchmark_class(int classes, bool b_diag, bool b_second, bool b_order);

// Bayes accuracy when only one site's symbol is observed.
double single_site_ceiling(int classes, int sites);

// Site boxes inside an object box, row-major grid.
std::vector<core::BBox> site_boxes(const core::BBox& object, int sites);

BenchmarkDataset gen_benchmark(const BenchmarkSpec& spec);

core::RgbImage render_bench_item(const BenchItem& item, const BenchmarkSpec& spec);

void save_benchmark(const BenchmarkDataset& data, const std::filesystem::path& dir);
BenchmarkDataset load_benchmark(const std::filesystem::path& dir);

void to_json(nlohmann::json& j, const BenchmarkSpec& s);
void from_json(const nlohmann::json& j, BenchmarkSpec& s);
void to_json(nlohmann::json& j, const BenchItem& s);
void from_json(const nlohmann::json& j, BenchItem& s);

// Oracle classifiers run against the generated data; results land in
// data.metadata: analytic and measured single-site ceilings, a whole-image
// linear classifier, and count decoding from per-site motif classification.
void measure_benchmark_oracles(BenchmarkDataset& data, int extractor_grid = 6);

}  // namespace partsmine::pipeline
