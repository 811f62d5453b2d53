// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <optional>
#include <string>

#include "partsmine/benchmark.hpp"
#include "partsmine/crf.hpp"
#include "partsmine/encoder.hpp"

namespace partsmine::pipeline {

struct PipelineConfig {
  std::uint64_t seed = 7;
  double sigma_c = 0.8;   // label-map threshold
  double sigma_0 = 0.05;  // proposal score filter
  double tau = 0.5;       // NMS overlap threshold
  int n = 9;              // parts per object
  int s = 3;              // grid side, s^2 == n
  double lambda_0 = 0.01;
  double beta_0 = 0.1;
  int refine_rounds = 3;
  crf::CrfParams crf;

  struct Encoder {
    std::string mode = "multi";  // single | multi
    int hidden_dim = 256;
    double lr = 0.001;
    double momentum = 0.9;
    double weight_decay = 0.0002;
    double lr_decay = 0.1;
    int lr_step_epochs = 20;
    int epochs = 40;
    double init_scale = 0.1;
    int extractor_grid = 6;
    double crop_min_scale = 0.7;
  } encoder;

  // classification path: part mining uses a looser NMS threshold so the
  // suppressed pool keeps part-scale boxes, and skips CRF refinement by
  // default (mask refinement does not feed classification)
  struct Classify {
    double tau = 0.2;
    double jitter = 0.05;
    int proposals_per_instance = 6;
    bool use_crf = false;
    bool train_baselines = true;
  } classify;

  struct DetectSuite {
    int scenes = 12;
    int instances = 2;
    int classes = 3;
    int height = 32;
    int width = 32;
    double jitter = 0.12;
    int proposals_per_instance = 12;
    bool cam_init = true;  // seed round 1 with a CAM+CRF prior
  } detect_suite;
};

void to_json(nlohmann::json& j, const PipelineConfig& c);
void from_json(const nlohmann::json& j, PipelineConfig& c);

// FNV-1a over the canonical serialized config; changes iff a semantic field
// changes.
std::string config_hash(const PipelineConfig& config);

encoder::SgdConfig sgd_from_config(const PipelineConfig& config);

struct DetectSuiteResult {
  int scenes = 0;
  int non_decreasing = 0;  // scenes with round-1 -> final mean IoU non-decreasing
  std::vector<std::vector<double>> round_mean_iou;  // [scene][round]
  double final_mean_iou = 0.0;
  double recall_at_50 = 0.0;
  double mean_survivors = 0.0;
};

DetectSuiteResult run_detect_suite(const PipelineConfig& config,
                                   const std::filesystem::path* out_dir);

struct MineStats {
  int models = 0;
  double mean_init_score = 0.0;
  double mean_greedy_score = 0.0;
};

struct ClassifyResult {
  encoder::Dataset train, test;
  MineStats mine;
  encoder::TrainResult multi;
  std::optional<encoder::TrainResult> single;
  double multi_accuracy = 0.0;
  double single_accuracy = 0.0;
  double concat_accuracy = 0.0;
  double average_accuracy = 0.0;
  double mean_vs_whole_agreement = 0.0;  // predict aggregation comparison
};

// provider -> filter -> NMS -> mine -> sequences -> train/eval
ClassifyResult run_classify_suite(const PipelineConfig& config,
                                  const BenchmarkDataset& bench,
                                  const std::filesystem::path* out_dir);

struct RunReport {
  std::string hash;
  std::uint64_t seed = 0;
  nlohmann::json stages;
  nlohmann::json timings;

  nlohmann::json full() const;    // everything, timings included
  nlohmann::json stable() const;  // deterministic subset
};

// Full pipeline over a generated benchmark: detection/refinement suite, parts
// mining, context encoding. Writes artifacts plus report.json under out_dir.
RunReport run_pipeline(const PipelineConfig& config, const BenchmarkDataset& bench,
                       const std::filesystem::path& out_dir);

}  // namespace partsmine::pipeline
