// Copyright 2026 The ovseg Authors.
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "ovseg/classifiers.hpp"
#include "ovseg/model.hpp"

#include <string>
#include <vector>

namespace ovseg {

struct MergeThresholds {
  double object_score = 0.25;   // discard proposals below this confidence
  double overlap_ratio = 0.8;   // painted area / original mask area
};

struct InstancePrediction {
  std::vector<bool> mask;  // H*W
  int category = -1;
  double score = 0.0;
};
using InstanceList = std::vector<InstancePrediction>;

// Greedy score-ordered mask-wise merging into a non-overlapping panoptic
// map. Ties break toward the lower proposal index. Stuff segments of
// equal class are merged into one id.
PanopticMap merge(const Mat& mask_logits, int mask_h, int mask_w, const ScoreMatrix& scores,
                  const Vocabulary& vocab, const MergeThresholds& thresholds, int out_h,
                  int out_w);

// Per-pixel argmax_j of sum_i scores(i,j) * sigmoid(mask_i at pixel).
std::vector<int> semantic_map(const Mat& mask_logits, int mask_h, int mask_w,
                              const ScoreMatrix& scores, int out_h, int out_w);

// Pre-merging per-proposal instances, thing classes only; each proposal
// contributes its argmax class with the raw ensembled confidence.
InstanceList instances_from_proposals(const Mat& mask_logits, int mask_h, int mask_w,
                                      const ScoreMatrix& scores, const Vocabulary& vocab,
                                      double min_score, int out_h, int out_w);

struct PredictionResult {
  PanopticMap panoptic;
  std::vector<int> semantic;  // H*W category ids
  ScoreMatrix in_probs, out_probs, fused;
  Mat mask_logits;  // N x (h4*w4)
  int h4 = 0, w4 = 0;
};

// Full test-time pipeline: forward, both classifiers, ensemble, merge.
// out_h/out_w select the resolution of the merged maps (0 = image size),
// so the network can run on an upscaled copy of a smaller source image.
PredictionResult predict(Model& model, const Image& image, const Vocabulary& vocab,
                         const std::vector<bool>& seen_mask, const EnsembleParams& ensemble_params,
                         const MergeThresholds& thresholds, int out_h = 0, int out_w = 0);

// Identical pipeline with the vocabulary restricted to the image's
// ground-truth classes (all treated as seen).
PredictionResult grounding_predict(Model& model, const Image& image, const Vocabulary& full_vocab,
                                   const std::vector<int>& gt_categories,
                                   const EnsembleParams& ensemble_params,
                                   const MergeThresholds& thresholds,
                                   std::vector<int>* restricted_to_full = nullptr,
                                   int out_h = 0, int out_w = 0);

// Test-time resize: shorter side to `short_side` (long side capped),
// rounded to multiples of 32.
Image resize_for_inference(const Image& image, int short_side, int long_cap = 1333);

// Prediction output: paletted id-map PNG + JSON segment table.
void save_prediction(const PanopticMap& map, const std::string& png_path,
                     const std::string& table_path);
void save_overlay(const Image& image, const PanopticMap& map, const std::string& path);

}  // namespace ovseg
