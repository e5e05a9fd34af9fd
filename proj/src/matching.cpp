// Copyright 2026 The ovseg Authors.
// SPDX-License-Identifier: Apache-2.0
#include "ovseg/matching.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>

namespace ovseg {

GroundTruthMasks downsample_gt(const PanopticMap& gt, int h4, int w4) {
  GroundTruthMasks out;
  out.h = h4;
  out.w = w4;
  std::vector<int> ids;
  for (const auto& [id, _] : gt.segments) ids.push_back(id);
  const double sy = static_cast<double>(gt.h) / h4;
  const double sx = static_cast<double>(gt.w) / w4;
  Mat masks = Mat::Zero(static_cast<int>(ids.size()), h4 * w4);
  for (size_t k = 0; k < ids.size(); ++k) {
    for (int y = 0; y < h4; ++y) {
      int y0 = static_cast<int>(y * sy), y1 = static_cast<int>((y + 1) * sy);
      for (int x = 0; x < w4; ++x) {
        int x0 = static_cast<int>(x * sx), x1 = static_cast<int>((x + 1) * sx);
        int inside = 0, total = 0;
        for (int yy = y0; yy < std::max(y1, y0 + 1); ++yy)
          for (int xx = x0; xx < std::max(x1, x0 + 1); ++xx) {
            ++total;
            if (gt.ids(std::min(yy, gt.h - 1), std::min(xx, gt.w - 1)) == ids[k]) ++inside;
          }
        masks(static_cast<int>(k), y * w4 + x) = (2 * inside >= total) ? 1.0 : 0.0;
      }
    }
  }
  // Drop segments that vanish at stride 4.
  for (size_t k = 0; k < ids.size(); ++k) {
    if (masks.row(static_cast<int>(k)).sum() > 0.0) {
      out.category.push_back(gt.segments.at(ids[k]).category);
      out.masks.conservativeResize(out.masks.rows() + 1, h4 * w4);
      out.masks.row(out.masks.rows() - 1) = masks.row(static_cast<int>(k));
    }
  }
  if (out.masks.size() == 0) out.masks = Mat::Zero(0, h4 * w4);
  return out;
}

double bce_mean(const Eigen::RowVectorXd& logits, const Eigen::RowVectorXd& target) {
  double total = 0.0;
  for (int j = 0; j < logits.size(); ++j) {
    double v = logits(j);
    total += std::max(v, 0.0) - v * target(j) + std::log1p(std::exp(-std::abs(v)));
  }
  return total / logits.size();
}

double dice_loss(const Eigen::RowVectorXd& logits, const Eigen::RowVectorXd& target, double eps) {
  double inter = 0.0, psum = 0.0;
  for (int j = 0; j < logits.size(); ++j) {
    double p = sigmoid(logits(j));
    psum += p;
    inter += p * target(j);
  }
  return 1.0 - (2.0 * inter + eps) / (psum + target.sum() + eps);
}

Mat match_cost(const Mat& mask_logits, const Mat& in_probs, const GroundTruthMasks& gt,
               const LossWeights& weights) {
  const int n = static_cast<int>(mask_logits.rows());
  const int k = gt.count();
  Mat cost(n, k);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < k; ++j) {
      double c = weights.cls * (1.0 - in_probs(i, gt.category[j]));
      c += weights.bce * bce_mean(mask_logits.row(i), gt.masks.row(j));
      c += weights.dice * dice_loss(mask_logits.row(i), gt.masks.row(j));
      cost(i, j) = c;
    }
  }
  return cost;
}

MatchResult hungarian(const Mat& cost) {
  if (!cost.allFinite()) throw std::invalid_argument("hungarian: non-finite cost");
  const int n = static_cast<int>(cost.rows());
  const int k = static_cast<int>(cost.cols());
  MatchResult result;
  if (k == 0 || n == 0) {
    for (int i = 0; i < n; ++i) result.unmatched_proposals.push_back(i);
    return result;
  }
  // Potentials formulation requires rows <= cols; transpose when needed.
  const bool flipped = n > k;
  const Mat& a = cost;
  const int rows = flipped ? k : n;
  const int cols = flipped ? n : k;
  auto at = [&](int i, int j) { return flipped ? a(j, i) : a(i, j); };

  const double kInf = std::numeric_limits<double>::infinity();
  std::vector<double> u(rows + 1, 0.0), v(cols + 1, 0.0);
  std::vector<int> match(cols + 1, 0);  // matched row per column (1-based)
  std::vector<int> way(cols + 1, 0);
  for (int i = 1; i <= rows; ++i) {
    match[0] = i;
    int j0 = 0;
    std::vector<double> minv(cols + 1, kInf);
    std::vector<char> used(cols + 1, false);
    do {
      used[j0] = true;
      int i0 = match[j0], j1 = -1;
      double delta = kInf;
      for (int j = 1; j <= cols; ++j) {
        if (used[j]) continue;
        double cur = at(i0 - 1, j - 1) - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (int j = 0; j <= cols; ++j) {
        if (used[j]) {
          u[match[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (match[j0] != 0);
    do {
      int j1 = way[j0];
      match[j0] = match[j1];
      j0 = j1;
    } while (j0);
  }

  std::set<int> matched_props;
  for (int j = 1; j <= cols; ++j) {
    if (match[j] == 0) continue;
    int row = match[j] - 1, col = j - 1;
    int prop = flipped ? col : row;
    int gt_idx = flipped ? row : col;
    result.pairs.emplace_back(prop, gt_idx);
    matched_props.insert(prop);
  }
  std::sort(result.pairs.begin(), result.pairs.end());
  for (int i = 0; i < n; ++i)
    if (!matched_props.count(i)) result.unmatched_proposals.push_back(i);
  return result;
}

}  // namespace ovseg
