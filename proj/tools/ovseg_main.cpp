// Copyright 2026 The ovseg Authors.
// SPDX-License-Identifier: Apache-2.0
//
// Single-binary operator CLI: train, eval, predict, sweep, kmeans.
// Exit codes: 0 success, 2 config/usage error, 1 runtime failure.
#include "ovseg/config.hpp"
#include "ovseg/evaluate.hpp"
#include "ovseg/image_io.hpp"
#include "ovseg/inference.hpp"
#include "ovseg/trainer.hpp"

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <set>

namespace {

using namespace ovseg;
using nlohmann::json;
namespace fs = std::filesystem;

std::string resolve_out(const std::string& out) {
  fs::path p(out);
  if (!p.is_absolute()) {
    const char* root = std::getenv("OVSEG_OUTPUT_ROOT");
    if (root && *root) p = fs::path(root) / p;
  }
  fs::create_directories(p);
  return p.string();
}

struct Splits {
  Dataset train, eval;
  std::vector<Category> train_categories;
  Vocabulary train_vocab, test_vocab;
  std::vector<bool> seen_mask;
};

// Builds datasets and vocabularies from the config. `eval_split` is
// "mixed" (held-out colors appear) or "seen" (training colors only);
// the test vocabulary always covers the full category list.
Splits make_splits(const RunConfig& cfg, const std::string& eval_split, bool need_train,
                   bool need_eval) {
  Splits s;
  ToyColorTextEncoder encoder(cfg.data.seed);
  if (cfg.data.synthetic) {
    std::vector<Category> cats = color_world_categories(cfg.data.colors);
    s.train_categories.assign(cats.begin(), cats.begin() + cfg.data.colors.train_color_count());
    s.train_vocab = build_vocabulary(s.train_categories, encoder, cfg.templates);
    s.test_vocab = build_vocabulary(cats, encoder, cfg.templates);
    if (need_train)
      s.train = generate_color_world(cfg.data.seed, cfg.data.train_count, cfg.data.colors,
                                     /*include_heldout=*/false, cfg.data.size);
    if (need_eval)
      s.eval = generate_color_world(cfg.data.seed + 1000001, cfg.data.eval_count,
                                    cfg.data.colors, eval_split == "mixed", cfg.data.size);
  } else {
    const std::string dir = cfg.data.dataset_dir;
    auto load_part = [&](const std::string& part) {
      return load_coco_panoptic(dir + "/" + part + "/images",
                                dir + "/" + part + "/annotations.json");
    };
    if (need_train) s.train = load_part("train");
    if (need_eval) {
      s.eval = fs::exists(dir + "/eval") ? load_part("eval") : load_part("train");
    }
    const Dataset& any = need_train ? s.train : s.eval;
    s.train_categories = any.categories;
    s.train_vocab = build_vocabulary(s.train_categories, encoder, cfg.templates);
    s.test_vocab = s.train_vocab;
  }
  s.seen_mask = partition_seen_unseen(s.test_vocab, s.train_vocab);
  s.test_vocab.seen_mask = s.seen_mask;
  return s;
}

json report_to_json(const EvalReport& r) {
  return {{"pq", r.pq.pq},           {"sq", r.pq.sq},
          {"rq", r.pq.rq},           {"pq_seen", r.pq.pq_seen},
          {"pq_unseen", r.pq.pq_unseen}, {"n_classes", r.pq.n_classes},
          {"miou", r.miou},          {"ap50", r.ap50},
          {"ap", r.ap},              {"images", r.images}};
}

void print_report(const EvalReport& r) {
  std::cout << "images    " << r.images << "\n"
            << "PQ        " << r.pq.pq << "\n"
            << "SQ        " << r.pq.sq << "\n"
            << "RQ        " << r.pq.rq << "\n"
            << "PQ_seen   " << r.pq.pq_seen << " (" << r.pq.n_seen << " classes)\n"
            << "PQ_unseen " << r.pq.pq_unseen << " (" << r.pq.n_unseen << " classes)\n"
            << "mIoU      " << r.miou << "\n"
            << "AP50      " << r.ap50 << "\n"
            << "AP        " << r.ap << "\n";
  std::cout << "per-class PQ:\n";
  for (const auto& [c, st] : r.pq.stat.per_class)
    if (st.active())
      std::cout << "  class " << c << ": pq=" << st.pq() << " sq=" << st.sq()
                << " rq=" << st.rq() << " tp=" << st.tp << " fp=" << st.fp << " fn=" << st.fn
                << "\n";
}

const char* method_name(EnsembleMethod m) {
  return m == EnsembleMethod::kGeometric ? "geometric" : "arithmetic";
}

EnsembleMethod parse_method(const std::string& name) {
  if (name == "geometric") return EnsembleMethod::kGeometric;
  if (name == "arithmetic") return EnsembleMethod::kArithmetic;
  throw std::invalid_argument("ensemble.method must be \"geometric\" or \"arithmetic\"");
}

struct CommonArgs {
  std::string config_path;
  std::vector<std::string> overrides;
  std::string out = "run";

  void attach(CLI::App* cmd) {
    cmd->add_option("--config", config_path, "JSON config file");
    cmd->add_option("--set", overrides, "key.path=value overrides (win over the file)");
    cmd->add_option("--out", out, "output directory (under $OVSEG_OUTPUT_ROOT if relative)");
  }
  RunConfig load() const { return load_run_config(config_path, overrides); }
};

int cmd_train(const CommonArgs& common) {
  RunConfig cfg = common.load();
  std::string out = resolve_out(common.out);
  save_config_snapshot(cfg, out + "/config.json");

  Splits splits = make_splits(cfg, "mixed", /*need_train=*/true, /*need_eval=*/false);
  Model model(cfg.model, cfg.training.seed);
  TrainConfig tc = cfg.training;
  tc.out_dir = out;
  fs::create_directories(out);
  TrainResult result = train(model, splits.train, splits.train_vocab, tc);
  save_categories(splits.train_categories, out + "/train_categories.json");

  json summary = {{"steps", result.log.size()},
                  {"final_loss", result.log.empty() ? 0.0 : result.log.back().loss},
                  {"backbone_checksum_before", result.backbone_checksum_before},
                  {"backbone_checksum_after", result.backbone_checksum_after},
                  {"frozen", cfg.training.freeze_backbone},
                  {"temperature", model.temperature()}};
  std::ofstream(out + "/summary.json") << summary.dump(2) << "\n";
  std::cout << "trained " << result.log.size() << " steps, final loss "
            << (result.log.empty() ? 0.0 : result.log.back().loss) << "\n"
            << "checkpoint: " << out << "/checkpoint_final.ckpt\n";
  return 0;
}

int cmd_eval(const CommonArgs& common, const std::string& checkpoint, double alpha, double beta,
             const std::string& method, const std::string& split, bool grounding,
             bool dump_scores) {
  RunConfig cfg = common.load();
  cfg.ensemble = EnsembleParams(alpha, beta, parse_method(method));
  std::string out = resolve_out(common.out);
  save_config_snapshot(cfg, out + "/config.json");

  Model model = Model::load(checkpoint);
  Splits splits = make_splits(cfg, split, /*need_train=*/false, /*need_eval=*/true);

  EvalOptions opt;
  opt.ensemble = cfg.ensemble;
  opt.thresholds = cfg.merge;
  opt.grounding = grounding;
  opt.short_side = cfg.eval_short_side;
  EvalReport report = evaluate(model, splits.eval, splits.test_vocab, splits.seen_mask, opt);

  if (dump_scores) {
    fs::create_directories(out + "/scores");
    CachedPredictions cache =
        cache_predictions(model, splits.eval, splits.test_vocab, cfg.eval_short_side);
    for (size_t i = 0; i < cache.entries.size(); ++i) {
      const auto& e = cache.entries[i];
      dump_score_matrix(e.in_probs, out + "/scores/image" + std::to_string(i) + "_in.jsonl");
      dump_score_matrix(e.out_probs, out + "/scores/image" + std::to_string(i) + "_out.jsonl");
    }
  }

  json j = report_to_json(report);
  j["alpha"] = alpha;
  j["beta"] = beta;
  j["method"] = method;
  j["split"] = split;
  j["grounding"] = grounding;
  std::ofstream(out + "/report.json") << j.dump(2) << "\n";
  print_report(report);
  return 0;
}

int cmd_predict(const CommonArgs& common, const std::string& checkpoint,
                const std::vector<std::string>& images, bool grounding,
                const std::string& gt_table) {
  if (grounding && gt_table.empty())
    throw std::invalid_argument("--grounding requires --gt <segment table JSON>");
  RunConfig cfg = common.load();
  std::string out = resolve_out(common.out);
  save_config_snapshot(cfg, out + "/config.json");

  Model model = Model::load(checkpoint);
  Splits splits = make_splits(cfg, "mixed", false, false);

  std::vector<int> gt_categories;
  if (grounding) {
    std::ifstream is(gt_table);
    if (!is) throw std::invalid_argument("cannot open GT table: " + gt_table);
    json table;
    is >> table;
    std::set<int> cats;
    for (const auto& seg : table) cats.insert(seg.at("category_id").get<int>());
    gt_categories.assign(cats.begin(), cats.end());
  }

  for (const std::string& path : images) {
    Image img = resize_for_inference(read_png(path), cfg.eval_short_side);
    PredictionResult pred =
        grounding ? grounding_predict(model, img, splits.test_vocab, gt_categories,
                                      cfg.ensemble, cfg.merge)
                  : predict(model, img, splits.test_vocab, splits.seen_mask, cfg.ensemble,
                            cfg.merge);
    std::string stem = fs::path(path).stem().string();
    save_prediction(pred.panoptic, out + "/" + stem + "_panoptic.png",
                    out + "/" + stem + "_segments.json");
    save_overlay(img, pred.panoptic, out + "/" + stem + "_overlay.png");
    std::cout << stem << ": " << pred.panoptic.segments.size() << " segments\n";
  }
  return 0;
}

int cmd_sweep(const CommonArgs& common, const std::string& checkpoint,
              std::vector<double> grid, const std::string& split) {
  RunConfig cfg = common.load();
  std::string out = resolve_out(common.out);
  save_config_snapshot(cfg, out + "/config.json");
  if (grid.empty()) grid = {0.0, 0.25, 0.5, 0.75, 1.0};

  Model model = Model::load(checkpoint);
  Splits splits = make_splits(cfg, split, false, true);
  CachedPredictions cache =
      cache_predictions(model, splits.eval, splits.test_vocab, cfg.eval_short_side);
  std::vector<SweepCell> cells =
      ensemble_sweep(cache, splits.test_vocab, splits.seen_mask, grid, cfg.merge);

  std::ofstream os(out + "/sweep.jsonl");
  const SweepCell* best = nullptr;
  for (const auto& c : cells) {
    json j = report_to_json(c.report);
    j["alpha"] = c.alpha;
    j["beta"] = c.beta;
    j["method"] = method_name(c.method);
    os << j.dump() << "\n";
    if (!best || c.report.pq.pq > best->report.pq.pq) best = &c;
  }
  std::cout << "swept " << cells.size() << " cells (" << grid.size() << "x" << grid.size()
            << " x 2 methods)\n";
  if (best)
    std::cout << "best: PQ " << best->report.pq.pq << " at alpha=" << best->alpha
              << " beta=" << best->beta << " method=" << method_name(best->method) << "\n";
  return 0;
}

int cmd_kmeans(const CommonArgs& common, const std::string& checkpoint,
               const std::string& image_path, int k, int level,
               const std::vector<int>& resolutions, uint64_t seed) {
  if (k < 1) throw std::invalid_argument("--k must be >= 1");
  if (level < 0 || level > 3) throw std::invalid_argument("--level must be in [0, 3]");
  for (int r : resolutions)
    if (r <= 0 || r % 32 != 0)
      throw std::invalid_argument("resolutions must be positive multiples of 32");
  RunConfig cfg = common.load();
  std::string out = resolve_out(common.out);
  save_config_snapshot(cfg, out + "/config.json");

  Model model = checkpoint.empty() || checkpoint == "none"
                    ? Model(cfg.model, seed)
                    : Model::load(checkpoint);
  Image img = read_png(image_path);

  for (int res : resolutions) {
    Image scaled = resize_image(img, res, res);
    FeaturePyramid pyr = ToyBackbone::forward_values(model.store(), scaled);
    const Grid& feat = pyr.levels[level];
    std::vector<int> labels = kmeans_feature_map(feat, k, seed);
    // Nearest-neighbor upsample of the cluster map to the input size,
    // colored by the deterministic overlay palette.
    Image vis;
    vis.h = res;
    vis.w = res;
    vis.pixels.resize(static_cast<Eigen::Index>(res) * res, 3);
    for (int y = 0; y < res; ++y)
      for (int x = 0; x < res; ++x) {
        int fy = std::min(y * feat.h / res, feat.h - 1);
        int fx = std::min(x * feat.w / res, feat.w - 1);
        int r, g, b;
        overlay_color(labels[fy * feat.w + fx] + 1, r, g, b);
        int p = y * res + x;
        vis.pixels(p, 0) = r / 255.0;
        vis.pixels(p, 1) = g / 255.0;
        vis.pixels(p, 2) = b / 255.0;
      }
    std::string path = out + "/kmeans_res" + std::to_string(res) + ".png";
    write_png(path, vis);
    std::cout << "wrote " << path << "\n";
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"open-vocabulary panoptic segmentation toolkit"};
  app.require_subcommand(1);

  CommonArgs train_args, eval_args, predict_args, sweep_args, kmeans_args;

  auto* train_cmd = app.add_subcommand("train", "train a model");
  train_args.attach(train_cmd);

  auto* eval_cmd = app.add_subcommand("eval", "evaluate a checkpoint");
  eval_args.attach(eval_cmd);
  std::string eval_ckpt, eval_method = "geometric", eval_split = "mixed";
  double alpha = 0.4, beta = 0.8;
  bool grounding = false, dump_scores = false;
  eval_cmd->add_option("--checkpoint", eval_ckpt, "checkpoint file")->required();
  eval_cmd->add_option("--alpha", alpha, "seen-class ensemble exponent");
  eval_cmd->add_option("--beta", beta, "unseen-class ensemble exponent");
  eval_cmd->add_option("--method", eval_method, "geometric|arithmetic");
  eval_cmd->add_option("--split", eval_split, "mixed|seen")
      ->check(CLI::IsMember({"mixed", "seen"}));
  eval_cmd->add_flag("--grounding", grounding, "restrict vocabulary to GT classes per image");
  eval_cmd->add_flag("--dump-scores", dump_scores, "dump per-proposal score matrices");

  auto* predict_cmd = app.add_subcommand("predict", "segment images");
  predict_args.attach(predict_cmd);
  std::string pred_ckpt, gt_table;
  std::vector<std::string> image_paths;
  bool pred_grounding = false;
  predict_cmd->add_option("--checkpoint", pred_ckpt, "checkpoint file")->required();
  predict_cmd->add_option("--image", image_paths, "input PNG image(s)")->required();
  predict_cmd->add_flag("--grounding", pred_grounding, "use GT classes as the vocabulary");
  predict_cmd->add_option("--gt", gt_table, "GT segment table JSON (required with --grounding)");

  auto* sweep_cmd = app.add_subcommand("sweep", "ensemble (alpha, beta) grid sweep");
  sweep_args.attach(sweep_cmd);
  std::string sweep_ckpt, sweep_split = "mixed";
  std::vector<double> grid;
  sweep_cmd->add_option("--checkpoint", sweep_ckpt, "checkpoint file")->required();
  sweep_cmd->add_option("--grid", grid, "exponent grid values (default 0,0.25,0.5,0.75,1)");
  sweep_cmd->add_option("--split", sweep_split, "mixed|seen")
      ->check(CLI::IsMember({"mixed", "seen"}));

  auto* kmeans_cmd = app.add_subcommand("kmeans", "k-means visualization of backbone features");
  kmeans_args.attach(kmeans_cmd);
  std::string km_ckpt, km_image;
  int k = 4, level = 3;
  std::vector<int> resolutions = {64};
  uint64_t km_seed = 0;
  kmeans_cmd->add_option("--checkpoint", km_ckpt, "checkpoint file or 'none' (fresh backbone)");
  kmeans_cmd->add_option("--image", km_image, "input PNG image")->required();
  kmeans_cmd->add_option("--k", k, "number of clusters");
  kmeans_cmd->add_option("--level", level, "pyramid level 0..3 (strides 4/8/16/32)");
  kmeans_cmd->add_option("--resolutions", resolutions, "input resolutions (multiples of 32)");
  kmeans_cmd->add_option("--seed", km_seed, "clustering seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (train_cmd->parsed()) return cmd_train(train_args);
    if (eval_cmd->parsed())
      return cmd_eval(eval_args, eval_ckpt, alpha, beta, eval_method, eval_split, grounding,
                      dump_scores);
    if (predict_cmd->parsed())
      return cmd_predict(predict_args, pred_ckpt, image_paths, pred_grounding, gt_table);
    if (sweep_cmd->parsed()) return cmd_sweep(sweep_args, sweep_ckpt, grid, sweep_split);
    if (kmeans_cmd->parsed())
      return cmd_kmeans(kmeans_args, km_ckpt, km_image, k, level, resolutions, km_seed);
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
