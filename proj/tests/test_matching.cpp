// Copyright 2026 The ovseg Authors.
// SPDX-License-Identifier: Apache-2.0
#include "ovseg/matching.hpp"

#include <doctest.h>

#include <algorithm>
#include <limits>
#include <numeric>
#include <random>

using namespace ovseg;

namespace {

// Exhaustive assignment oracle over permutations; returns the minimum
// total cost of any one-to-one assignment of size min(N, K).
double brute_force_min_cost(const Mat& cost) {
  int n = static_cast<int>(cost.rows()), k = static_cast<int>(cost.cols());
  if (n <= k) {
    std::vector<int> cols(k);
    std::iota(cols.begin(), cols.end(), 0);
    double best = std::numeric_limits<double>::infinity();
    do {
      double total = 0;
      for (int i = 0; i < n; ++i) total += cost(i, cols[i]);
      best = std::min(best, total);
    } while (std::next_permutation(cols.begin(), cols.end()));
    return best;
  }
  return brute_force_min_cost(cost.transpose());
}

double match_total(const Mat& cost, const MatchResult& m) {
  double total = 0;
  for (auto [i, k] : m.pairs) total += cost(i, k);
  return total;
}

}  // namespace

TEST_CASE("hand case [[1,2],[3,0]] picks the identity assignment, total 1") {
  Mat cost(2, 2);
  cost << 1, 2, 3, 0;
  MatchResult m = hungarian(cost);
  REQUIRE(m.pairs.size() == 2);
  CHECK(m.pairs[0] == std::pair<int, int>(0, 0));
  CHECK(m.pairs[1] == std::pair<int, int>(1, 1));
  CHECK(match_total(cost, m) == doctest::Approx(1.0));
}

TEST_CASE("identity-like cost matches the identity") {
  Mat cost = Mat::Ones(4, 4) - Mat::Identity(4, 4);
  MatchResult m = hungarian(cost);
  for (auto [i, k] : m.pairs) CHECK(i == k);
  CHECK(m.unmatched_proposals.empty());
}

TEST_CASE("hungarian equals brute force on >=100 random matrices up to 6x6") {
  std::mt19937_64 rng(2024);
  std::uniform_real_distribution<double> u(-3.0, 5.0);
  std::uniform_int_distribution<int> dim(1, 6);
  for (int trial = 0; trial < 150; ++trial) {
    int n = dim(rng), k = dim(rng);
    Mat cost(n, k);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < k; ++j) cost(i, j) = u(rng);
    MatchResult m = hungarian(cost);
    CHECK(static_cast<int>(m.pairs.size()) == std::min(n, k));
    CHECK(static_cast<int>(m.pairs.size() + m.unmatched_proposals.size()) == n);
    // one-to-one
    std::vector<int> used_i, used_k;
    for (auto [i, kk] : m.pairs) {
      used_i.push_back(i);
      used_k.push_back(kk);
    }
    std::sort(used_i.begin(), used_i.end());
    std::sort(used_k.begin(), used_k.end());
    CHECK(std::adjacent_find(used_i.begin(), used_i.end()) == used_i.end());
    CHECK(std::adjacent_find(used_k.begin(), used_k.end()) == used_k.end());
    CHECK(match_total(cost, m) == doctest::Approx(brute_force_min_cost(cost)).epsilon(1e-9));
  }
}

TEST_CASE("hungarian rejects non-finite costs; K=0 leaves all unmatched") {
  Mat bad(1, 1);
  bad(0, 0) = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS(hungarian(bad));

  Mat empty(3, 0);
  MatchResult m = hungarian(empty);
  CHECK(m.pairs.empty());
  CHECK(m.unmatched_proposals == std::vector<int>{0, 1, 2});
}

TEST_CASE("match_cost is zero for a perfect proposal and invariant to GT column order") {
  const int hw = 16;
  GroundTruthMasks gt;
  gt.h = 4;
  gt.w = 4;
  gt.masks = Mat::Zero(2, hw);
  gt.masks.row(0).head(8).setOnes();
  gt.masks.row(1).tail(8).setOnes();
  gt.category = {0, 1};

  Mat logits(2, hw);
  for (int p = 0; p < hw; ++p) {
    logits(0, p) = gt.masks(0, p) > 0.5 ? 100.0 : -100.0;
    logits(1, p) = gt.masks(1, p) > 0.5 ? 100.0 : -100.0;
  }
  Mat probs(2, 2);
  probs << 1.0, 0.0, 0.0, 1.0;
  LossWeights w;
  Mat cost = match_cost(logits, probs, gt, w);
  // Dice's +1 smoothing keeps a perfect pair slightly above zero.
  CHECK(cost(0, 0) < 0.6);
  CHECK(cost(1, 1) < 0.6);
  CHECK(cost(0, 1) > cost(0, 0));

  GroundTruthMasks gt_swapped = gt;
  gt_swapped.masks.row(0) = gt.masks.row(1);
  gt_swapped.masks.row(1) = gt.masks.row(0);
  gt_swapped.category = {1, 0};
  Mat cost_swapped = match_cost(logits, probs, gt_swapped, w);
  CHECK((cost.col(0) - cost_swapped.col(1)).cwiseAbs().maxCoeff() < 1e-12);
  CHECK((cost.col(1) - cost_swapped.col(0)).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("diagonal-dominant 2x2 cost matches identity") {
  Mat cost(2, 2);
  cost << 0.1, 5.0, 7.0, 0.2;
  MatchResult m = hungarian(cost);
  CHECK(m.pairs[0] == std::pair<int, int>(0, 0));
  CHECK(m.pairs[1] == std::pair<int, int>(1, 1));
}

TEST_CASE("bce and dice scalar losses behave at exact match and worst case") {
  Eigen::RowVectorXd target(64);
  for (int i = 0; i < 64; ++i) target(i) = i % 3 == 0 ? 1.0 : 0.0;
  Eigen::RowVectorXd perfect(64), inverted(64);
  for (int i = 0; i < 64; ++i) {
    perfect(i) = target(i) > 0.5 ? 60.0 : -60.0;
    inverted(i) = target(i) > 0.5 ? -60.0 : 60.0;
  }
  CHECK(bce_mean(perfect, target) == doctest::Approx(0.0).epsilon(1e-9));
  CHECK(dice_loss(perfect, target) < 1e-3);  // smoothing eps keeps it slightly > 0
  CHECK(bce_mean(inverted, target) > 10.0);
  CHECK(dice_loss(inverted, target) > 0.9);
}

TEST_CASE("downsample_gt majority-downsamples and drops vanished segments") {
  PanopticMap gt(8, 8);
  // Segment 1: left half (category 0), segment 2: a single pixel that
  // cannot win any 2x2 majority against segment 1's region.
  for (int y = 0; y < 8; ++y)
    for (int x = 0; x < 4; ++x) gt.ids(y, x) = 1;
  gt.segments[1] = {0, true, 1.0};
  gt.segments[2] = {1, true, 1.0};
  gt.ids(0, 7) = 2;  // lone pixel in a void-majority cell -> vanishes
  GroundTruthMasks down = downsample_gt(gt, 4, 4);
  REQUIRE(down.count() == 1);
  CHECK(down.category[0] == 0);
  // Left half at 4x4: columns 0..1.
  for (int y = 0; y < 4; ++y)
    for (int x = 0; x < 4; ++x)
      CHECK(down.masks(0, y * 4 + x) == doctest::Approx(x < 2 ? 1.0 : 0.0));
}
