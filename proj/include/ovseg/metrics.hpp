// Copyright 2026 The ovseg Authors.
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "ovseg/inference.hpp"
#include "ovseg/types.hpp"

#include <map>
#include <optional>
#include <vector>

namespace ovseg {

// ---- panoptic quality ----

struct PQClassStat {
  double iou_sum = 0.0;
  int tp = 0, fp = 0, fn = 0;

  bool active() const { return tp + fp + fn > 0; }
  double pq() const { return active() ? iou_sum / (tp + 0.5 * fp + 0.5 * fn) : 0.0; }
  double sq() const { return tp > 0 ? iou_sum / tp : 0.0; }
  double rq() const { return active() ? tp / (tp + 0.5 * fp + 0.5 * fn) : 0.0; }
};

// Associatively mergeable accumulator (per-class sums).
struct PQStat {
  std::map<int, PQClassStat> per_class;
  void merge(const PQStat& other);
};

struct PQReport {
  PQStat stat;
  double pq = 0.0, sq = 0.0, rq = 0.0;
  double pq_seen = 0.0, pq_unseen = 0.0;
  int n_classes = 0, n_seen = 0, n_unseen = 0;
};

// Segments match iff same category and IoU > 0.5 (unique by that
// property). Void pixels are excluded from unions; predictions mostly
// covering void are not counted as false positives.
PQStat pq_accumulate(const PanopticMap& pred, const PanopticMap& gt);

PQReport pq_report(const PQStat& stat, const std::vector<bool>& seen_mask);

// Single-image convenience (spec surface).
PQReport panoptic_quality(const PanopticMap& pred, const PanopticMap& gt,
                          const Vocabulary& vocab);

// ---- mean IoU ----

struct MIoUAccumulator {
  // inter/pred/gt pixel counts per class
  std::map<int, std::array<long long, 3>> counts;

  // entries < 0 in either map are ignored
  void add(const std::vector<int>& pred, const std::vector<int>& gt);
  void merge(const MIoUAccumulator& other);
  std::map<int, double> per_class_iou() const;
  double miou() const;  // mean over classes present in gt or pred
};

std::vector<int> semantic_from_panoptic(const PanopticMap& map);

// ---- instance AP ----

class APAccumulator {
 public:
  void add_image(const InstanceList& predictions, const InstanceList& ground_truth);
  // 101-point interpolated AP at one IoU threshold, mean over classes
  // with at least one ground-truth instance.
  double ap(double iou_threshold) const;
  // mean over thresholds 0.5:0.05:0.95
  double ap_range() const;

 private:
  struct Det {
    double score;
    int image;
    std::vector<bool> mask;
  };
  struct Gt {
    int image;
    std::vector<bool> mask;
  };
  std::map<int, std::vector<Det>> dets_;
  std::map<int, std::vector<Gt>> gts_;
  int next_image_ = 0;
};

double mask_iou(const std::vector<bool>& a, const std::vector<bool>& b);

}  // namespace ovseg
