// Copyright 2026 The ovseg Authors.
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "ovseg/types.hpp"
#include "ovseg/vocab.hpp"

#include <string>

namespace ovseg {

// N x |C| class probabilities. Single-classifier rows sum to 1;
// ensembled rows are products of powers and are left unnormalized.
using ScoreMatrix = Mat;

enum class EnsembleMethod { kGeometric, kArithmetic };

struct EnsembleParams {
  double alpha = 0.4;
  double beta = 0.8;
  EnsembleMethod method = EnsembleMethod::kGeometric;

  EnsembleParams() = default;
  EnsembleParams(double a, double b, EnsembleMethod m = EnsembleMethod::kGeometric);
};

// Pooling weights per proposal: mask logits (rows, at mask_h x mask_w)
// are resized bilinearly to feat_h x feat_w, sigmoid-ed, hard-thresholded
// at 0.5 to {0,1} and row-normalized. Empty hard masks fall back to soft
// weights; near-zero soft sums fall back to the global average.
Mat mask_pool_weights(const Mat& mask_logits, int mask_h, int mask_w, int feat_h, int feat_w);

// pooled_i = sum_p w_i(p) * features(p); returns N x D.
Mat mask_pool(const Grid& features, const Mat& mask_logits, int mask_h, int mask_w);

// Row i = softmax_j cos(v_i, t_j) / T (norm floor 1e-12 in the cosine).
ScoreMatrix in_vocab_probs(const Mat& pooled, const Vocabulary& vocab, double temperature);

// Test-only classifier: pools the joint-space backbone features and
// applies the same rule with a fixed temperature.
ScoreMatrix out_vocab_probs(const Grid& clip_dense, const Mat& mask_logits, int mask_h,
                            int mask_w, const Vocabulary& vocab, double t_out);

// Per entry, exponent alpha for seen classes and beta for unseen
// (geometric), or the matching linear combination (arithmetic). No
// renormalization in either case.
ScoreMatrix ensemble(const ScoreMatrix& in_probs, const ScoreMatrix& out_probs,
                     const std::vector<bool>& seen_mask, const EnsembleParams& params);

// One JSONL record per proposal: {"proposal": i, "scores": [...]}.
void dump_score_matrix(const ScoreMatrix& scores, const std::string& path);
ScoreMatrix load_score_matrix(const std::string& path);

}  // namespace ovseg
