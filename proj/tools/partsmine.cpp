// SPDX-License-Identifier: Apache-2.0
//
// partsmine CLI: complementary-parts mining pipeline over pluggable
// detection providers. Subcommands mirror the pipeline stages; exit code 2
// flags a stage error.

#include <cstdlib>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>

#include "partsmine/detect.hpp"
#include "partsmine/encoder_io.hpp"
#include "partsmine/json_io.hpp"
#include "partsmine/kernels.hpp"
#include "partsmine/pipeline.hpp"
#include "partsmine/rng.hpp"

namespace pm = partsmine;

namespace {

nlohmann::json read_json(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open " + path);
  return nlohmann::json::parse(is);
}

void write_json(const nlohmann::json& j, const std::string& path) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw std::runtime_error("cannot write " + path);
  os << j.dump(2) << "\n";
}

std::uint64_t seed_override(std::uint64_t seed) {
  if (const char* env = std::getenv("PARTSMINE_SEED"))
    return std::strtoull(env, nullptr, 10);
  return seed;
}

int cmd_cam(const std::string& features_path, const std::string& weights_path,
            int class_id, double sigma_c, double floor, int out_h, int out_w,
            const std::string& out_prefix) {
  const pm::core::Tensor3 features = pm::core::Tensor3::load(features_path);
  const nlohmann::json wj = read_json(weights_path);
  const auto weights = wj.get<pm::core::FeatureVec>();
  const int h = out_h > 0 ? out_h : features.height();
  const int w = out_w > 0 ? out_w : features.width();

  const pm::cam::CamMap cam = pm::cam::compute_cam(features, weights, class_id, h, w);
  const auto instances = pm::cam::split_instances(cam, floor);
  if (instances.empty()) {
    std::cerr << "cam: no activation above the floor; nothing to write\n";
    return 2;
  }
  const pm::cam::ProbStack stack = pm::cam::build_prob_stack(instances);
  const pm::cam::LabelMap labels = pm::cam::make_label_map(stack, sigma_c);
  stack.to_tensor().save(out_prefix + "_stack.pmt");
  labels.to_tensor().save(out_prefix + "_labels.pmt");
  write_json(nlohmann::json{{"n", stack.n},
                            {"sigma_c", sigma_c},
                            {"activation_floor", floor},
                            {"class_id", class_id}},
             out_prefix + "_meta.json");
  std::cout << "cam: " << stack.n << " instance(s) -> " << out_prefix
            << "_{stack,labels}.pmt\n";
  return 0;
}

int cmd_crf(const std::string& labels_path, const std::string& stack_path,
            const std::string& image_path, const std::string& params_path,
            const std::string& out_path) {
  const pm::cam::LabelMap labels =
      pm::cam::LabelMap::from_tensor(pm::core::Tensor3::load(labels_path));
  const pm::cam::ProbStack stack =
      pm::cam::ProbStack::from_tensor(pm::core::Tensor3::load(stack_path));
  const pm::core::RgbImage image = pm::core::load_pnm(image_path);
  pm::crf::CrfParams params;
  if (!params_path.empty()) params = read_json(params_path).get<pm::crf::CrfParams>();

  const auto [refined, marginals] = pm::crf::infer(labels, stack, image, params);
  refined.to_tensor().save(out_path);
  std::cout << "crf: refined labels -> " << out_path << "\n";
  return 0;
}

int cmd_detect(const std::string& scene_path, int rounds, double tau,
               double sigma0, double jitter, int count,
               const std::string& out_path, bool as_json) {
  pm::detect::SyntheticScene scene =
      read_json(scene_path).get<pm::detect::SyntheticScene>();
  scene.seed = seed_override(scene.seed);
  const pm::core::RgbImage image = pm::detect::render_scene(scene);
  const auto provider = pm::detect::synthetic_provider(scene, jitter, count);
  pm::crf::CrfParams crf;
  crf.appearance_spatial_sigma = 8.0;
  crf.iterations = 5;
  const pm::detect::DetectParams dp{sigma0, tau, 0.8};
  const pm::detect::RefineResult result =
      pm::detect::iterative_refine(image, *provider, crf, dp, rounds);

  nlohmann::json report{{"rounds", nlohmann::json::array()},
                        {"nms", result.nms}};
  for (const auto& r : result.rounds)
    report["rounds"].push_back({{"round", r.round},
                                {"proposals", r.proposals},
                                {"survivors", r.survivors}});
  if (!out_path.empty()) {
    write_json(report, out_path);
    std::cout << "detect: wrote " << out_path << "\n";
  }
  if (as_json) std::cout << report.dump(2) << "\n";
  return 0;
}

int cmd_mine(const std::string& nms_path, const std::string& config_path,
             bool oracle, const std::string& out_path, bool as_json) {
  const pm::detect::NmsOutcome outcome =
      read_json(nms_path).get<pm::detect::NmsOutcome>();
  pm::parts::SearchConfig cfg;
  if (!config_path.empty())
    cfg = read_json(config_path).get<pm::parts::SearchConfig>();

  nlohmann::json models = nlohmann::json::array();
  for (std::size_t slot = 0; slot < outcome.survivors.size(); ++slot) {
    const std::size_t root_idx = outcome.survivors[slot];
    const pm::core::Proposal& root = outcome.proposals[root_idx];
    const auto pool = outcome.suppressed_pool(root_idx);
    const pm::parts::PartsModel init = pm::parts::grid_init(root, pool, cfg);
    const pm::parts::PartsModel mined = pm::parts::greedy_search(init, pool, cfg);
    nlohmann::json entry{{"root_proposal", root_idx},
                         {"candidates", pool.size()},
                         {"init_score", pm::parts::score_hypothesis(init, cfg)},
                         {"greedy_score", pm::parts::score_hypothesis(mined, cfg)},
                         {"model", mined}};
    if (oracle &&
        pm::parts::binomial(static_cast<int>(pool.size()), cfg.n,
                            cfg.brute_force_guard) <= cfg.brute_force_guard &&
        static_cast<int>(pool.size()) >= cfg.n) {
      const pm::parts::PartsModel best =
          pm::parts::brute_force_search(root, pool, cfg);
      entry["oracle_score"] = pm::parts::score_hypothesis(best, cfg);
    }
    models.push_back(std::move(entry));
  }
  nlohmann::json report{{"objects", models}};
  if (!out_path.empty()) {
    write_json(report, out_path);
    std::cout << "mine: wrote " << out_path << "\n";
  }
  if (as_json) std::cout << report.dump(2) << "\n";
  return 0;
}

int cmd_gen_benchmark(int classes, int items, int sites, double noise,
                      std::uint64_t seed, const std::string& out_dir,
                      bool measure) {
  pm::pipeline::BenchmarkSpec spec;
  spec.classes = classes;
  spec.items = items;
  spec.sites = sites;
  spec.pixel_noise = noise;
  spec.seed = seed_override(seed);
  pm::pipeline::BenchmarkDataset data = pm::pipeline::gen_benchmark(spec);
  if (measure) pm::pipeline::measure_benchmark_oracles(data);
  pm::pipeline::save_benchmark(data, out_dir);
  std::cout << "gen-benchmark: " << data.train.size() << " train / "
            << data.test.size() << " test items -> " << out_dir << "\n";
  if (measure) std::cout << data.metadata.dump(2) << "\n";
  return 0;
}

int cmd_train_encoder(const std::string& data_dir, const std::string& mode,
                      double lr, int epochs, std::uint64_t seed, int hidden,
                      const std::string& out_dir) {
  const pm::encoder::Dataset train =
      pm::encoder::load_sequences(std::filesystem::path(data_dir) / "train");
  int classes = 0;
  for (int label : train.labels) classes = std::max(classes, label + 1);
  const int n = static_cast<int>(train.sequences.front().features.size()) - 3;

  pm::encoder::SgdConfig opt;
  opt.lr = lr;
  opt.epochs = epochs;
  opt.seed = seed_override(seed);
  opt.hidden_dim = hidden;
  const pm::encoder::LossConfig loss_cfg = mode == "single"
                                               ? pm::encoder::LossConfig::single(n)
                                               : pm::encoder::LossConfig::multi(n);
  const pm::encoder::TrainResult result =
      pm::encoder::train(train, nullptr, classes, loss_cfg, opt);
  pm::encoder::save_checkpoint(
      result.net, out_dir,
      nlohmann::json{{"mode", mode}, {"lr", lr}, {"epochs", epochs},
                     {"seed", opt.seed}});
  std::cout << "train-encoder: final train loss "
            << result.curve.back().train_loss << ", accuracy "
            << result.curve.back().train_accuracy << " -> " << out_dir << "\n";
  return 0;
}

int cmd_eval(const std::string& net_dir, const std::string& data_dir,
             bool aggregate_mean, bool as_json) {
  const pm::encoder::StackedLstm<float> net = pm::encoder::load_checkpoint(net_dir);
  const pm::encoder::Dataset data = pm::encoder::load_sequences(data_dir);
  const double acc = pm::encoder::accuracy(data, net, aggregate_mean);
  nlohmann::json report{{"items", data.size()}, {"accuracy", acc},
                        {"aggregate_mean", aggregate_mean}};
  if (as_json)
    std::cout << report.dump(2) << "\n";
  else
    std::cout << "eval: accuracy " << acc << " over " << data.size()
              << " items\n";
  return 0;
}

int cmd_run(const std::string& config_path, const std::string& bench_dir,
            const std::string& out_dir, int items, bool as_json) {
  pm::pipeline::PipelineConfig config;
  if (!config_path.empty())
    config = read_json(config_path).get<pm::pipeline::PipelineConfig>();
  config.seed = seed_override(config.seed);

  pm::pipeline::BenchmarkDataset bench;
  if (!bench_dir.empty()) {
    bench = pm::pipeline::load_benchmark(bench_dir);
  } else {
    pm::pipeline::BenchmarkSpec spec;
    spec.items = items;
    spec.seed = config.seed;
    bench = pm::pipeline::gen_benchmark(spec);
  }
  const pm::pipeline::RunReport report =
      pm::pipeline::run_pipeline(config, bench, out_dir);
  if (as_json) std::cout << report.full().dump(2) << "\n";
  std::cout << "run: report -> " << (std::filesystem::path(out_dir) / "report.json")
            << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"weakly supervised complementary-parts pipeline"};
  app.require_subcommand(1);

  std::string features_path, weights_path, out_prefix = "cam_out";
  int class_id = 0, out_h = 0, out_w = 0;
  double sigma_c = 0.8, floor = 0.3;
  auto* cam = app.add_subcommand("cam", "CAM -> instances -> probability stack");
  cam->add_option("--features", features_path)->required();
  cam->add_option("--weights", weights_path)->required();
  cam->add_option("--class-id", class_id);
  cam->add_option("--sigma-c", sigma_c);
  cam->add_option("--floor", floor);
  cam->add_option("--out-height", out_h);
  cam->add_option("--out-width", out_w);
  cam->add_option("--out", out_prefix);

  std::string labels_path, stack_path, image_path, params_path, out_path;
  auto* crf = app.add_subcommand("crf", "dense-CRF refinement of a label map");
  crf->add_option("--labels", labels_path)->required();
  crf->add_option("--stack", stack_path)->required();
  crf->add_option("--image", image_path)->required();
  crf->add_option("--params", params_path);
  crf->add_option("--out", out_path)->required();

  std::string scene_path, detect_out;
  int rounds = 3, count = 12;
  double tau = 0.5, sigma0 = 0.05, jitter = 0.1;
  bool as_json = false;
  auto* detect = app.add_subcommand("detect", "provider/NMS/CRF alternation");
  detect->add_option("--scene", scene_path)->required();
  detect->add_option("--rounds", rounds);
  detect->add_option("--tau", tau);
  detect->add_option("--sigma0", sigma0);
  detect->add_option("--jitter", jitter);
  detect->add_option("--count", count);
  detect->add_option("--out", detect_out);
  detect->add_flag("--json", as_json);

  std::string nms_path, parts_config, mine_out;
  bool oracle = false;
  auto* mine = app.add_subcommand("mine", "complementary-parts search");
  mine->add_option("--nms", nms_path)->required();
  mine->add_option("--config", parts_config);
  mine->add_flag("--oracle", oracle);
  mine->add_option("--out", mine_out);
  mine->add_flag("--json", as_json);

  int classes = 4, items = 1000, sites = 6;
  double noise = 8.0;
  std::uint64_t seed = 7;
  std::string bench_out = "bench";
  bool measure = false;
  auto* gen = app.add_subcommand("gen-benchmark", "parts-informative dataset");
  gen->add_option("--classes", classes);
  gen->add_option("--items", items);
  gen->add_option("--sites", sites);
  gen->add_option("--noise", noise);
  gen->add_option("--seed", seed);
  gen->add_option("--out", bench_out)->required();
  gen->add_flag("--measure-oracles", measure);

  std::string data_dir, ckpt_dir = "ckpt", mode = "multi";
  double lr = 0.001;
  int epochs = 40, hidden = 64;
  auto* tr = app.add_subcommand("train-encoder", "stacked bi-LSTM training");
  tr->add_option("--data", data_dir)->required();
  tr->add_option("--mode", mode)->check(CLI::IsMember({"single", "multi"}));
  tr->add_option("--lr", lr);
  tr->add_option("--epochs", epochs);
  tr->add_option("--seed", seed);
  tr->add_option("--hidden", hidden);
  tr->add_option("--out", ckpt_dir);

  std::string net_dir, eval_data;
  bool aggregate_mean = false;
  auto* ev = app.add_subcommand("eval", "checkpoint evaluation");
  ev->add_option("--net", net_dir)->required();
  ev->add_option("--data", eval_data)->required();
  ev->add_flag("--mean", aggregate_mean);
  ev->add_flag("--json", as_json);

  std::string run_config, run_bench, run_out = "runs";
  int run_items = 240;
  auto* run = app.add_subcommand("run", "full pipeline over a benchmark");
  run->add_option("--config", run_config);
  run->add_option("--bench", run_bench);
  run->add_option("--out", run_out);
  run->add_option("--items", run_items);
  run->add_flag("--json", as_json);

  auto* backend = app.add_subcommand("backend", "print the active kernel backend");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*cam)
      return cmd_cam(features_path, weights_path, class_id, sigma_c, floor,
                     out_h, out_w, out_prefix);
    if (*crf) return cmd_crf(labels_path, stack_path, image_path, params_path, out_path);
    if (*detect)
      return cmd_detect(scene_path, rounds, tau, sigma0, jitter, count,
                        detect_out, as_json);
    if (*mine) return cmd_mine(nms_path, parts_config, oracle, mine_out, as_json);
    if (*gen)
      return cmd_gen_benchmark(classes, items, sites, noise, seed, bench_out,
                               measure);
    if (*tr)
      return cmd_train_encoder(data_dir, mode, lr, epochs, seed, hidden, ckpt_dir);
    if (*ev) return cmd_eval(net_dir, eval_data, aggregate_mean, as_json);
    if (*run) return cmd_run(run_config, run_bench, run_out, run_items, as_json);
    if (*backend) {
      std::cout << pm::kern::backend_name(pm::kern::active_backend()) << "\n";
      return 0;
    }
  } catch (const pm::detect::StageError& e) {
    std::cerr << "stage error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
