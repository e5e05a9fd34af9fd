// Copyright 2026 The ovseg Authors.
// SPDX-License-Identifier: Apache-2.0
#include "ovseg/trainer.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <random>

namespace ovseg {

void write_metrics_log(const std::vector<StepRecord>& log, const std::string& path) {
  std::ofstream os(path);
  for (const auto& r : log) {
    nlohmann::json rec = {{"step", r.step}, {"loss", r.loss}, {"ce", r.ce},
                          {"bce", r.bce},   {"dice", r.dice}, {"lr", r.lr}};
    os << rec.dump() << "\n";
  }
}

TrainResult train(Model& model, const Dataset& dataset, const Vocabulary& train_vocab,
                  const TrainConfig& config) {
  if (dataset.samples.empty()) throw std::invalid_argument("empty training dataset");
  model.set_frozen(config.freeze_backbone);

  TrainResult result;
  result.backbone_checksum_before = model.backbone_checksum();

  AdamWConfig opt_cfg;
  opt_cfg.lr = config.lr;
  opt_cfg.weight_decay = config.weight_decay;
  AdamW optimizer(opt_cfg);

  const int n = static_cast<int>(dataset.samples.size());
  const int steps_per_epoch = (n + config.batch_size - 1) / config.batch_size;
  const int total_steps = steps_per_epoch * config.epochs;

  // Pre-rasterize ground truth at stride 4 (fixed per image).
  std::vector<GroundTruthMasks> gts(n);
  {
    const int h4 = dataset.samples[0].image.h / 4;
    const int w4 = dataset.samples[0].image.w / 4;
    for (int i = 0; i < n; ++i) gts[i] = downsample_gt(dataset.samples[i].gt, h4, w4);
  }

  int step = 0;
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    std::vector<int> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::mt19937_64 shuffle_rng(config.seed * 1000003ull + epoch);
    std::shuffle(order.begin(), order.end(), shuffle_rng);

    for (int b = 0; b < steps_per_epoch; ++b, ++step) {
      double lr_scale = 1.0;
      for (double m : config.milestones)
        if (step >= m * total_steps) lr_scale *= config.lr_gamma;

      model.store().zero_grads();
      StepRecord rec;
      rec.step = step;
      rec.lr = config.lr * lr_scale;
      int batch_n = 0;
      for (int j = b * config.batch_size; j < std::min((b + 1) * config.batch_size, n); ++j) {
        const Sample& sample = dataset.samples[order[j]];
        ag::Graph g;
        ModelOutput out = model.forward(g, sample.image, train_vocab.embeddings);
        LossBreakdown bd;
        ag::Node* loss = compute_loss(g, out, gts[order[j]], config.loss_weights, &bd);
        if (!std::isfinite(bd.total)) {
          if (!config.out_dir.empty()) {
            nlohmann::json dump = {{"step", step},  {"image", order[j]}, {"loss", bd.total},
                                   {"ce", bd.ce},   {"bce", bd.bce},     {"dice", bd.dice}};
            std::ofstream os(config.out_dir + "/diverged.json");
            os << dump.dump(2) << "\n";
          }
          throw std::runtime_error("non-finite loss at step " + std::to_string(step));
        }
        if (bd.matched > 0) {
          g.backward(loss);
          model.last_binding()->flush_grads();
        }
        rec.loss += bd.total;
        rec.ce += bd.ce;
        rec.bce += bd.bce;
        rec.dice += bd.dice;
        ++batch_n;
      }
      if (batch_n > 0) {
        for (const auto& name : model.store().names()) {
          Param& p = model.store().at(name);
          if (p.grad.size() != 0) p.grad /= batch_n;
        }
        rec.loss /= batch_n;
        rec.ce /= batch_n;
        rec.bce /= batch_n;
        rec.dice /= batch_n;
      }
      optimizer.step(model.store(), lr_scale);
      result.log.push_back(rec);
    }
    if (!config.out_dir.empty() && config.checkpoint_every > 0 &&
        (epoch + 1) % config.checkpoint_every == 0) {
      model.save(config.out_dir + "/checkpoint_epoch" + std::to_string(epoch + 1) + ".ckpt");
    }
  }

  result.backbone_checksum_after = model.backbone_checksum();
  if (!config.out_dir.empty()) {
    std::filesystem::create_directories(config.out_dir);
    model.save(config.out_dir + "/checkpoint_final.ckpt");
    write_metrics_log(result.log, config.out_dir + "/metrics.jsonl");
  }
  return result;
}

}  // namespace ovseg
