// Copyright 2026 The ovseg Authors.
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "ovseg/data.hpp"
#include "ovseg/metrics.hpp"
#include "ovseg/model.hpp"

#include <string>
#include <vector>

namespace ovseg {

struct EvalOptions {
  EnsembleParams ensemble;
  MergeThresholds thresholds;
  bool grounding = false;  // restrict the vocabulary to GT classes per image
  int short_side = 0;      // >0: run the network on an upscaled copy (denser
                           // dense-feature grid); maps stay at GT resolution
};

struct EvalReport {
  PQReport pq;
  double miou = 0.0;
  double ap50 = 0.0;
  double ap = 0.0;  // averaged over IoU 0.5:0.05:0.95
  int images = 0;
};

EvalReport evaluate(Model& model, const Dataset& dataset, const Vocabulary& test_vocab,
                    const std::vector<bool>& seen_mask, const EvalOptions& options);

// Per-image raw predictions cached once so ensemble sweeps only redo
// fusion, merging, and metrics.
struct CachedPredictions {
  struct Entry {
    Mat mask_logits;
    int h4 = 0, w4 = 0;
    ScoreMatrix in_probs, out_probs;
    const Sample* sample = nullptr;
  };
  std::vector<Entry> entries;
};

CachedPredictions cache_predictions(Model& model, const Dataset& dataset,
                                    const Vocabulary& test_vocab, int short_side = 0);

EvalReport evaluate_cached(const CachedPredictions& cache, const Vocabulary& test_vocab,
                           const std::vector<bool>& seen_mask, const EnsembleParams& params,
                           const MergeThresholds& thresholds);

struct SweepCell {
  double alpha = 0.0, beta = 0.0;
  EnsembleMethod method = EnsembleMethod::kGeometric;
  EvalReport report;
};

std::vector<SweepCell> ensemble_sweep(const CachedPredictions& cache,
                                      const Vocabulary& test_vocab,
                                      const std::vector<bool>& seen_mask,
                                      const std::vector<double>& grid,
                                      const MergeThresholds& thresholds);

InstanceList instances_from_gt(const PanopticMap& gt);

}  // namespace ovseg
