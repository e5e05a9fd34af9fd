// Copyright 2026 The ovseg Authors.
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "ovseg/data.hpp"
#include "ovseg/model.hpp"

#include <functional>
#include <string>
#include <vector>

namespace ovseg {

struct TrainConfig {
  int epochs = 20;
  int batch_size = 8;
  double lr = 1e-4;
  double weight_decay = 0.05;
  std::vector<double> milestones = {0.7, 0.9};  // fractions of total steps
  double lr_gamma = 0.1;
  uint64_t seed = 0;
  bool freeze_backbone = true;
  LossWeights loss_weights;
  int checkpoint_every = 0;        // epochs; 0 = final only
  std::string out_dir;             // empty = no checkpoints/logs written
};

struct StepRecord {
  int step = 0;
  double loss = 0.0, ce = 0.0, bce = 0.0, dice = 0.0, lr = 0.0;
};

struct TrainResult {
  std::vector<StepRecord> log;
  uint64_t backbone_checksum_before = 0;
  uint64_t backbone_checksum_after = 0;
};

// Deterministic under (config, seed): per-epoch shuffles are seeded, the
// loop is single-threaded, and batch composition never depends on timing.
// Throws on non-finite loss after writing a diagnostic dump.
TrainResult train(Model& model, const Dataset& dataset, const Vocabulary& train_vocab,
                  const TrainConfig& config);

void write_metrics_log(const std::vector<StepRecord>& log, const std::string& path);

}  // namespace ovseg
