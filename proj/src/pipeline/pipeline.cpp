// SPDX-License-Identifier: Apache-2.0

#include "partsmine/pipeline.hpp"

#include <chrono>
#include <cmath>
#include <fstream>

#include "partsmine/encoder_io.hpp"
#include "partsmine/json_io.hpp"
#include "partsmine/rng.hpp"

namespace partsmine::pipeline {
namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

void write_json_file(const nlohmann::json& j, const std::filesystem::path& path) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw std::runtime_error("pipeline: cannot write " + path.string());
  os << j.dump(2) << "\n";
}

double mean_best_iou(const std::vector<core::BBox>& survivors,
                     const detect::SyntheticScene& scene) {
  if (scene.instances.empty()) return 0.0;
  double total = 0.0;
  for (const auto& inst : scene.instances) {
    double best = 0.0;
    for (const auto& box : survivors)
      best = std::max(best, core::iou(box, inst.bbox));
    total += best;
  }
  return total / static_cast<double>(scene.instances.size());
}

// Synthetic backbone features for the CAM initialization path: one blurred
// soft-mask channel per instance plus two distractor noise channels, at half
// resolution.
crf::MarginalStack cam_init_prior(const PipelineConfig& config,
                                  const detect::SyntheticScene& scene,
                                  const core::RgbImage& image, int scene_index) {
  const int fh = std::max(2, scene.height / 2), fw = std::max(2, scene.width / 2);
  const int k = static_cast<int>(scene.instances.size()) + 2;
  core::Tensor3 features(k, fh, fw);
  auto rng = core::stream(config.seed, "cam-features",
                          static_cast<std::uint64_t>(scene_index));
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (int i = 0; i < static_cast<int>(scene.instances.size()); ++i)
    for (int y = 0; y < fh; ++y)
      for (int x = 0; x < fw; ++x) {
        const double sx = (x + 0.5) * scene.width / fw;
        const double sy = (y + 0.5) * scene.height / fh;
        features.at(i, y, x) =
            detect::instance_soft_mask(scene.instances[static_cast<std::size_t>(i)],
                                       sx, sy);
      }
  for (int i = k - 2; i < k; ++i)
    for (int y = 0; y < fh; ++y)
      for (int x = 0; x < fw; ++x)
        features.at(i, y, x) = static_cast<float>(unit(rng) * 0.2);

  // per-class CAM, split into instances, merged into one stack
  std::vector<cam::CamMap> instance_maps;
  std::vector<int> classes;
  for (const auto& inst : scene.instances)
    if (std::find(classes.begin(), classes.end(), inst.class_id) == classes.end())
      classes.push_back(inst.class_id);
  for (int c : classes) {
    std::vector<float> w(static_cast<std::size_t>(k), 0.05f);
    for (int i = 0; i < static_cast<int>(scene.instances.size()); ++i)
      w[static_cast<std::size_t>(i)] =
          scene.instances[static_cast<std::size_t>(i)].class_id == c ? 1.0f : 0.0f;
    const cam::CamMap cam_map = cam::compute_cam(
        features, core::FeatureVec{w}, c, scene.height, scene.width);
    for (auto& inst_map : cam::split_instances(cam_map, 0.3))
      instance_maps.push_back(std::move(inst_map));
  }
  if (instance_maps.empty()) {
    cam::CamMap flat;
    flat.height = scene.height;
    flat.width = scene.width;
    flat.values.assign(static_cast<std::size_t>(scene.height) * scene.width, 0.5f);
    instance_maps.push_back(std::move(flat));
  }
  const cam::ProbStack stack = cam::build_prob_stack(instance_maps);
  const cam::LabelMap labels = cam::make_label_map(stack, config.sigma_c);
  return crf::infer(labels, stack, image, config.crf).second;
}

}  // namespace

void to_json(nlohmann::json& j, const PipelineConfig& c) {
  j = nlohmann::json{
      {"seed", c.seed},
      {"sigma_c", c.sigma_c},
      {"sigma_0", c.sigma_0},
      {"tau", c.tau},
      {"n", c.n},
      {"s", c.s},
      {"lambda_0", c.lambda_0},
      {"beta_0", c.beta_0},
      {"refine_rounds", c.refine_rounds},
      {"crf", c.crf},
      {"encoder",
       {{"mode", c.encoder.mode},
        {"hidden_dim", c.encoder.hidden_dim},
        {"lr", c.encoder.lr},
        {"momentum", c.encoder.momentum},
        {"weight_decay", c.encoder.weight_decay},
        {"lr_decay", c.encoder.lr_decay},
        {"lr_step_epochs", c.encoder.lr_step_epochs},
        {"epochs", c.encoder.epochs},
        {"init_scale", c.encoder.init_scale},
        {"extractor_grid", c.encoder.extractor_grid},
        {"crop_min_scale", c.encoder.crop_min_scale}}},
      {"classify",
       {{"tau", c.classify.tau},
        {"jitter", c.classify.jitter},
        {"proposals_per_instance", c.classify.proposals_per_instance},
        {"use_crf", c.classify.use_crf},
        {"train_baselines", c.classify.train_baselines}}},
      {"detect_suite",
       {{"scenes", c.detect_suite.scenes},
        {"instances", c.detect_suite.instances},
        {"classes", c.detect_suite.classes},
        {"height", c.detect_suite.height},
        {"width", c.detect_suite.width},
        {"jitter", c.detect_suite.jitter},
        {"proposals_per_instance", c.detect_suite.proposals_per_instance},
        {"cam_init", c.detect_suite.cam_init}}}};
}

void from_json(const nlohmann::json& j, PipelineConfig& c) {
  c = PipelineConfig{};
  c.seed = j.value("seed", c.seed);
  c.sigma_c = j.value("sigma_c", c.sigma_c);
  c.sigma_0 = j.value("sigma_0", c.sigma_0);
  c.tau = j.value("tau", c.tau);
  c.n = j.value("n", c.n);
  c.s = j.value("s", c.s);
  c.lambda_0 = j.value("lambda_0", c.lambda_0);
  c.beta_0 = j.value("beta_0", c.beta_0);
  c.refine_rounds = j.value("refine_rounds", c.refine_rounds);
  if (j.contains("crf")) c.crf = j.at("crf").get<crf::CrfParams>();
  if (j.contains("encoder")) {
    const auto& e = j.at("encoder");
    c.encoder.mode = e.value("mode", c.encoder.mode);
    c.encoder.hidden_dim = e.value("hidden_dim", c.encoder.hidden_dim);
    c.encoder.lr = e.value("lr", c.encoder.lr);
    c.encoder.momentum = e.value("momentum", c.encoder.momentum);
    c.encoder.weight_decay = e.value("weight_decay", c.encoder.weight_decay);
    c.encoder.lr_decay = e.value("lr_decay", c.encoder.lr_decay);
    c.encoder.lr_step_epochs = e.value("lr_step_epochs", c.encoder.lr_step_epochs);
    c.encoder.epochs = e.value("epochs", c.encoder.epochs);
    c.encoder.init_scale = e.value("init_scale", c.encoder.init_scale);
    c.encoder.extractor_grid = e.value("extractor_grid", c.encoder.extractor_grid);
    c.encoder.crop_min_scale = e.value("crop_min_scale", c.encoder.crop_min_scale);
  }
  if (j.contains("classify")) {
    const auto& x = j.at("classify");
    c.classify.tau = x.value("tau", c.classify.tau);
    c.classify.jitter = x.value("jitter", c.classify.jitter);
    c.classify.proposals_per_instance =
        x.value("proposals_per_instance", c.classify.proposals_per_instance);
    c.classify.use_crf = x.value("use_crf", c.classify.use_crf);
    c.classify.train_baselines =
        x.value("train_baselines", c.classify.train_baselines);
  }
  if (j.contains("detect_suite")) {
    const auto& d = j.at("detect_suite");
    c.detect_suite.scenes = d.value("scenes", c.detect_suite.scenes);
    c.detect_suite.instances = d.value("instances", c.detect_suite.instances);
    c.detect_suite.classes = d.value("classes", c.detect_suite.classes);
    c.detect_suite.height = d.value("height", c.detect_suite.height);
    c.detect_suite.width = d.value("width", c.detect_suite.width);
    c.detect_suite.jitter = d.value("jitter", c.detect_suite.jitter);
    c.detect_suite.proposals_per_instance =
        d.value("proposals_per_instance", c.detect_suite.proposals_per_instance);
    c.detect_suite.cam_init = d.value("cam_init", c.detect_suite.cam_init);
  }
}

std::string config_hash(const PipelineConfig& config) {
  const std::string dump = nlohmann::json(config).dump();
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (char ch : dump) {
    h ^= static_cast<unsigned char>(ch);
    h *= 0x100000001b3ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return std::string(buf);
}

encoder::SgdConfig sgd_from_config(const PipelineConfig& config) {
  encoder::SgdConfig opt;
  opt.lr = config.encoder.lr;
  opt.momentum = config.encoder.momentum;
  opt.weight_decay = config.encoder.weight_decay;
  opt.lr_decay = config.encoder.lr_decay;
  opt.lr_step_epochs = config.encoder.lr_step_epochs;
  opt.epochs = config.encoder.epochs;
  opt.hidden_dim = config.encoder.hidden_dim;
  opt.init_scale = config.encoder.init_scale;
  opt.seed = config.seed;
  return opt;
}

DetectSuiteResult run_detect_suite(const PipelineConfig& config,
                                   const std::filesystem::path* out_dir) {
  DetectSuiteResult result;
  result.scenes = config.detect_suite.scenes;
  if (out_dir) std::filesystem::create_directories(*out_dir);

  double iou_sum = 0.0, survivors_sum = 0.0;
  int recall_hits = 0, recall_total = 0;
  for (int si = 0; si < config.detect_suite.scenes; ++si) {
    const detect::SyntheticScene scene = detect::make_detection_scene(
        config.detect_suite.height, config.detect_suite.width,
        config.detect_suite.instances, config.detect_suite.classes,
        core::mix64(config.seed + static_cast<std::uint64_t>(si)));
    const core::RgbImage image = detect::render_scene(scene);
    const auto provider = detect::synthetic_provider(
        scene, config.detect_suite.jitter,
        config.detect_suite.proposals_per_instance);

    crf::MarginalStack prior;
    const crf::MarginalStack* prior_ptr = nullptr;
    if (config.detect_suite.cam_init) {
      prior = cam_init_prior(config, scene, image, si);
      prior_ptr = &prior;
    }

    const detect::DetectParams dp{config.sigma_0, config.tau, config.sigma_c};
    const detect::RefineResult refined = detect::iterative_refine(
        image, *provider, config.crf, dp, config.refine_rounds, prior_ptr);

    std::vector<double> per_round;
    for (const auto& round : refined.rounds)
      per_round.push_back(mean_best_iou(round.survivor_boxes, scene));
    result.round_mean_iou.push_back(per_round);
    if (per_round.back() >= per_round.front() - 1e-12) ++result.non_decreasing;
    iou_sum += per_round.back();
    survivors_sum += static_cast<double>(refined.rounds.back().survivors);
    for (const auto& inst : scene.instances) {
      double best = 0.0;
      for (const auto& box : refined.rounds.back().survivor_boxes)
        best = std::max(best, core::iou(box, inst.bbox));
      ++recall_total;
      if (best >= 0.5) ++recall_hits;
    }

    if (out_dir) {
      const std::string tag = "scene" + std::to_string(si);
      refined.stack.to_tensor().save(*out_dir / (tag + "_stack.pmt"));
      refined.labels.to_tensor().save(*out_dir / (tag + "_labels.pmt"));
    }
  }
  result.final_mean_iou = iou_sum / std::max(1, result.scenes);
  result.mean_survivors = survivors_sum / std::max(1, result.scenes);
  result.recall_at_50 =
      recall_total ? static_cast<double>(recall_hits) / recall_total : 0.0;
  return result;
}

ClassifyResult run_classify_suite(const PipelineConfig& config,
                                  const BenchmarkDataset& bench,
                                  const std::filesystem::path* out_dir) {
  ClassifyResult result;
  const encoder::PoolingExtractor extractor(config.encoder.extractor_grid);
  parts::SearchConfig search;
  search.lambda_0 = config.lambda_0;
  search.beta_0 = config.beta_0;
  search.n = config.n;
  search.s = config.s;

  if (out_dir) std::filesystem::create_directories(*out_dir / "mine");

  double init_sum = 0.0, greedy_sum = 0.0;
  auto mine_split = [&](const std::vector<BenchItem>& items,
                        const char* split_name) {
    encoder::Dataset set;
    for (std::size_t i = 0; i < items.size(); ++i) {
      const BenchItem& item = items[i];
      const core::RgbImage image = render_bench_item(item, bench.spec);
      const auto provider = multiscale_provider(
          item.scene, config.classify.jitter,
          config.classify.proposals_per_instance);
      const detect::DetectParams dp{config.sigma_0, config.classify.tau,
                                    config.sigma_c};
      const detect::RefineResult refined =
          detect::iterative_refine(image, *provider, config.crf, dp, 1, nullptr,
                                   config.classify.use_crf);

      const std::size_t root_idx = refined.nms.survivors.front();
      const core::Proposal root = refined.nms.proposals[root_idx];
      const std::vector<core::Proposal> pool = refined.nms.suppressed_pool(root_idx);
      const parts::PartsModel init = parts::grid_init(root, pool, search);
      const parts::PartsModel mined = parts::greedy_search(init, pool, search);
      init_sum += parts::score_hypothesis(init, search);
      greedy_sum += parts::score_hypothesis(mined, search);
      ++result.mine.models;

      auto rng = core::stream(config.seed, std::string("crop-") + split_name,
                              static_cast<std::uint64_t>(i));
      set.sequences.push_back(encoder::build_sequence(
          image, mined, extractor, rng, config.encoder.crop_min_scale));
      set.labels.push_back(item.label);

      if (out_dir && i < 8 && std::string(split_name) == "train")
        write_json_file(nlohmann::json(mined),
                        *out_dir / "mine" / ("item" + std::to_string(i) + ".json"));
    }
    return set;
  };

  result.train = mine_split(bench.train, "train");
  result.test = mine_split(bench.test, "test");
  if (result.mine.models > 0) {
    result.mine.mean_init_score = init_sum / result.mine.models;
    result.mine.mean_greedy_score = greedy_sum / result.mine.models;
  }

  const encoder::SgdConfig opt = sgd_from_config(config);
  result.multi = encoder::train(result.train, nullptr, bench.spec.classes,
                                encoder::LossConfig::multi(config.n), opt);
  result.multi_accuracy = encoder::accuracy(result.test, result.multi.net);

  std::size_t agree = 0;
  for (std::size_t i = 0; i < result.test.size(); ++i) {
    const auto whole = encoder::predict(result.test.sequences[i], result.multi.net);
    const auto mean =
        encoder::predict(result.test.sequences[i], result.multi.net, true);
    if (whole.label == mean.label) ++agree;
  }
  result.mean_vs_whole_agreement =
      result.test.size() ? static_cast<double>(agree) / result.test.size() : 0.0;

  if (config.classify.train_baselines) {
    encoder::TrainResult single =
        encoder::train(result.train, nullptr, bench.spec.classes,
                       encoder::LossConfig::single(config.n), opt);
    result.single_accuracy = encoder::accuracy(result.test, single.net);
    result.single = std::move(single);

    const encoder::LinearSoftmax concat =
        encoder::train_concat_baseline(result.train, bench.spec.classes, opt);
    result.concat_accuracy = encoder::accuracy_concat(result.test, concat);
    const encoder::LinearSoftmax average =
        encoder::train_average_baseline(result.train, bench.spec.classes, opt);
    result.average_accuracy = encoder::accuracy_average(result.test, average);
  }

  if (out_dir) {
    encoder::save_sequences(result.train, *out_dir / "sequences" / "train");
    encoder::save_sequences(result.test, *out_dir / "sequences" / "test");
    nlohmann::json cfg_echo(config);
    encoder::save_checkpoint(result.multi.net, *out_dir / "checkpoint",
                             cfg_echo["encoder"]);
  }
  return result;
}

nlohmann::json RunReport::full() const {
  return nlohmann::json{
      {"config_hash", hash}, {"seed", seed}, {"stages", stages}, {"timings", timings}};
}

nlohmann::json RunReport::stable() const {
  return nlohmann::json{{"config_hash", hash}, {"seed", seed}, {"stages", stages}};
}

RunReport run_pipeline(const PipelineConfig& config, const BenchmarkDataset& bench,
                       const std::filesystem::path& out_dir) {
  std::filesystem::create_directories(out_dir);
  RunReport report;
  report.hash = config_hash(config);
  report.seed = config.seed;

  auto t0 = Clock::now();
  const std::filesystem::path detect_dir = out_dir / "detect";
  const DetectSuiteResult det = run_detect_suite(config, &detect_dir);
  report.timings["detect_suite_s"] = seconds_since(t0);
  report.stages["detect"] = {
      {"scenes", det.scenes},
      {"non_decreasing", det.non_decreasing},
      {"round_mean_iou", det.round_mean_iou},
      {"final_mean_iou", det.final_mean_iou},
      {"recall_at_50", det.recall_at_50},
      {"mean_survivors", det.mean_survivors},
  };

  t0 = Clock::now();
  const ClassifyResult cls = run_classify_suite(config, bench, &out_dir);
  report.timings["classify_suite_s"] = seconds_since(t0);
  report.stages["mine"] = {
      {"models", cls.mine.models},
      {"mean_init_score", cls.mine.mean_init_score},
      {"mean_greedy_score", cls.mine.mean_greedy_score},
  };
  report.stages["encode"] = {
      {"multi_accuracy", cls.multi_accuracy},
      {"single_accuracy", cls.single_accuracy},
      {"concat_accuracy", cls.concat_accuracy},
      {"average_accuracy", cls.average_accuracy},
      {"mean_vs_whole_agreement", cls.mean_vs_whole_agreement},
      {"final_train_loss", cls.multi.curve.back().train_loss},
      {"final_train_accuracy", cls.multi.curve.back().train_accuracy},
  };
  report.stages["benchmark"] = {{"classes", bench.spec.classes},
                                {"train_items", bench.train.size()},
                                {"test_items", bench.test.size()},
                                {"oracles", bench.metadata}};

  write_json_file(report.full(), out_dir / "report.json");
  return report;
}

}  // namespace partsmine::pipeline
