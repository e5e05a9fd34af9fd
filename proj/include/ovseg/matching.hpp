// Copyright 2026 The ovseg Authors.
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "ovseg/types.hpp"

#include <utility>
#include <vector>

namespace ovseg {

struct LossWeights {
  double cls = 2.0;
  double bce = 5.0;
  double dice = 5.0;
};

// Ground-truth segments rasterized to the stride-4 grid.
struct GroundTruthMasks {
  Mat masks;                  // K x (h4*w4), binary
  std::vector<int> category;  // K, vocabulary indices
  int h = 0, w = 0;

  int count() const { return static_cast<int>(masks.rows()); }
};

GroundTruthMasks downsample_gt(const PanopticMap& gt, int h4, int w4);

// One-to-one assignment of size min(N, K); unmatched proposals listed
// separately (they receive no loss).
struct MatchResult {
  std::vector<std::pair<int, int>> pairs;  // (proposal, ground truth)
  std::vector<int> unmatched_proposals;
};

// cost(i,k) = cls*(1 - p_i(c_k)) + bce*BCE(sigmoid(m_i), m_k)
//           + dice*Dice(sigmoid(m_i), m_k), full-grid at stride 4.
Mat match_cost(const Mat& mask_logits, const Mat& in_probs, const GroundTruthMasks& gt,
               const LossWeights& weights);

// Minimum-cost assignment (Kuhn's algorithm with potentials, O(n^3)).
MatchResult hungarian(const Mat& cost);

// Scalar losses used by the matching cost (binary targets).
double bce_mean(const Eigen::RowVectorXd& logits, const Eigen::RowVectorXd& target);
double dice_loss(const Eigen::RowVectorXd& logits, const Eigen::RowVectorXd& target,
                 double eps = 1.0);

}  // namespace ovseg
