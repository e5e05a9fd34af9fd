// Copyright 2026 The ovseg Authors.
// SPDX-License-Identifier: Apache-2.0
#include "ovseg/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <set>

namespace ovseg {

void PQStat::merge(const PQStat& other) {
  for (const auto& [cls, s] : other.per_class) {
    PQClassStat& mine = per_class[cls];
    mine.iou_sum += s.iou_sum;
    mine.tp += s.tp;
    mine.fp += s.fp;
    mine.fn += s.fn;
  }
}

PQStat pq_accumulate(const PanopticMap& pred, const PanopticMap& gt) {
  if (pred.h != gt.h || pred.w != gt.w)
    throw std::invalid_argument("panoptic map sizes differ");
  // pixel counts per (gt_id, pred_id) pair; id 0 = void
  std::map<std::pair<int, int>, long long> inter;
  std::map<int, long long> gt_area, pred_area;
  for (int y = 0; y < gt.h; ++y)
    for (int x = 0; x < gt.w; ++x) {
      int g = gt.ids(y, x), p = pred.ids(y, x);
      ++inter[{g, p}];
      ++gt_area[g];
      ++pred_area[p];
    }

  PQStat stat;
  std::set<int> matched_gt, matched_pred;
  for (const auto& [pair, count] : inter) {
    auto [g, p] = pair;
    if (g == 0 || p == 0) continue;
    const SegmentInfo& gi = gt.segments.at(g);
    const SegmentInfo& pi = pred.segments.at(p);
    if (gi.category != pi.category) continue;
    long long void_overlap = 0;
    auto it = inter.find({0, p});
    if (it != inter.end()) void_overlap = it->second;
    double union_px =
        static_cast<double>(gt_area[g] + pred_area[p] - count - void_overlap);
    double iou = union_px > 0 ? static_cast<double>(count) / union_px : 0.0;
    if (iou > 0.5) {
      // uniqueness is implied by IoU > 0.5
      stat.per_class[gi.category].iou_sum += iou;
      stat.per_class[gi.category].tp += 1;
      matched_gt.insert(g);
      matched_pred.insert(p);
    }
  }
  for (const auto& [g, info] : gt.segments)
    if (!matched_gt.count(g)) stat.per_class[info.category].fn += 1;
  for (const auto& [p, info] : pred.segments) {
    if (matched_pred.count(p)) continue;
    long long void_overlap = 0;
    auto it = inter.find({0, p});
    if (it != inter.end()) void_overlap = it->second;
    // mostly-void predictions are not penalized
    if (pred_area[p] > 0 && static_cast<double>(void_overlap) / pred_area[p] > 0.5) continue;
    stat.per_class[info.category].fp += 1;
  }
  return stat;
}

PQReport pq_report(const PQStat& stat, const std::vector<bool>& seen_mask) {
  PQReport rep;
  rep.stat = stat;
  double pq = 0, sq = 0, rq = 0, pq_seen = 0, pq_unseen = 0;
  for (const auto& [cls, s] : stat.per_class) {
    if (!s.active()) continue;
    ++rep.n_classes;
    pq += s.pq();
    sq += s.sq();
    rq += s.rq();
    bool seen = cls < static_cast<int>(seen_mask.size()) ? seen_mask[cls] : true;
    if (seen) {
      ++rep.n_seen;
      pq_seen += s.pq();
    } else {
      ++rep.n_unseen;
      pq_unseen += s.pq();
    }
  }
  if (rep.n_classes > 0) {
    rep.pq = pq / rep.n_classes;
    rep.sq = sq / rep.n_classes;
    rep.rq = rq / rep.n_classes;
  }
  if (rep.n_seen > 0) rep.pq_seen = pq_seen / rep.n_seen;
  if (rep.n_unseen > 0) rep.pq_unseen = pq_unseen / rep.n_unseen;
  return rep;
}

PQReport panoptic_quality(const PanopticMap& pred, const PanopticMap& gt,
                          const Vocabulary& vocab) {
  return pq_report(pq_accumulate(pred, gt), vocab.seen_mask);
}

void MIoUAccumulator::add(const std::vector<int>& pred, const std::vector<int>& gt) {
  if (pred.size() != gt.size()) throw std::invalid_argument("semantic map sizes differ");
  for (size_t i = 0; i < pred.size(); ++i) {
    if (gt[i] < 0 || pred[i] < 0) continue;  // ignore label
    if (pred[i] == gt[i]) ++counts[gt[i]][0];
    ++counts[pred[i]][1];
    ++counts[gt[i]][2];
  }
}

void MIoUAccumulator::merge(const MIoUAccumulator& other) {
  for (const auto& [cls, c] : other.counts) {
    auto& mine = counts[cls];
    for (int i = 0; i < 3; ++i) mine[i] += c[i];
  }
}

std::map<int, double> MIoUAccumulator::per_class_iou() const {
  std::map<int, double> out;
  for (const auto& [cls, c] : counts) {
    long long uni = c[1] + c[2] - c[0];
    if (uni > 0) out[cls] = static_cast<double>(c[0]) / uni;
  }
  return out;
}

double MIoUAccumulator::miou() const {
  auto per = per_class_iou();
  if (per.empty()) return 0.0;
  double total = 0.0;
  for (const auto& [_, iou] : per) total += iou;
  return total / per.size();
}

std::vector<int> semantic_from_panoptic(const PanopticMap& map) {
  std::vector<int> sem(static_cast<size_t>(map.h) * map.w, -1);
  for (int y = 0; y < map.h; ++y)
    for (int x = 0; x < map.w; ++x) {
      int id = map.ids(y, x);
      if (id != 0) sem[static_cast<size_t>(y) * map.w + x] = map.segments.at(id).category;
    }
  return sem;
}

double mask_iou(const std::vector<bool>& a, const std::vector<bool>& b) {
  long long inter = 0, uni = 0;
  for (size_t i = 0; i < a.size(); ++i) {
    if (a[i] && b[i]) ++inter;
    if (a[i] || b[i]) ++uni;
  }
  return uni > 0 ? static_cast<double>(inter) / uni : 0.0;
}

void APAccumulator::add_image(const InstanceList& predictions, const InstanceList& ground_truth) {
  int image = next_image_++;
  for (const auto& p : predictions) dets_[p.category].push_back({p.score, image, p.mask});
  for (const auto& g : ground_truth) gts_[g.category].push_back({image, g.mask});
}

double APAccumulator::ap(double iou_threshold) const {
  double total = 0.0;
  int n_classes = 0;
  for (const auto& [cls, gts] : gts_) {
    if (gts.empty()) continue;
    ++n_classes;
    auto it = dets_.find(cls);
    if (it == dets_.end()) continue;
    std::vector<Det> dets = it->second;
    std::stable_sort(dets.begin(), dets.end(),
                     [](const Det& a, const Det& b) { return a.score > b.score; });
    std::vector<bool> gt_used(gts.size(), false);
    std::vector<int> tp_flags;
    tp_flags.reserve(dets.size());
    for (const auto& d : dets) {
      // greedy: highest-IoU unmatched ground truth in the same image
      int best = -1;
      double best_iou = iou_threshold;
      for (size_t g = 0; g < gts.size(); ++g) {
        if (gt_used[g] || gts[g].image != d.image) continue;
        double iou = mask_iou(d.mask, gts[g].mask);
        if (iou >= best_iou) {
          best_iou = iou;
          best = static_cast<int>(g);
        }
      }
      if (best >= 0) {
        gt_used[best] = true;
        tp_flags.push_back(1);
      } else {
        tp_flags.push_back(0);
      }
    }
    // precision/recall curve and 101-point interpolation
    const double n_gt = static_cast<double>(gts.size());
    std::vector<double> precision, recall;
    int tp = 0;
    for (size_t i = 0; i < tp_flags.size(); ++i) {
      tp += tp_flags[i];
      precision.push_back(static_cast<double>(tp) / static_cast<double>(i + 1));
      recall.push_back(tp / n_gt);
    }
    for (int i = static_cast<int>(precision.size()) - 2; i >= 0; --i)
      precision[i] = std::max(precision[i], precision[i + 1]);
    double ap_cls = 0.0;
    for (int r = 0; r <= 100; ++r) {
      double target = r / 100.0;
      auto pos = std::lower_bound(recall.begin(), recall.end(), target);
      if (pos != recall.end()) ap_cls += precision[pos - recall.begin()];
    }
    total += ap_cls / 101.0;
  }
  return n_classes > 0 ? total / n_classes : 0.0;
}

double APAccumulator::ap_range() const {
  double total = 0.0;
  int n = 0;
  for (double thr = 0.5; thr < 0.951; thr += 0.05) {
    total += ap(thr);
    ++n;
  }
  return total / n;
}

}  // namespace ovseg
