// Copyright 2026 The ovseg Authors.
// SPDX-License-Identifier: Apache-2.0
#include "ovseg/evaluate.hpp"

#include <set>

namespace ovseg {

InstanceList instances_from_gt(const PanopticMap& gt) {
  InstanceList list;
  for (const auto& [id, info] : gt.segments) {
    if (!info.is_thing) continue;
    InstancePrediction inst;
    inst.category = info.category;
    inst.score = 1.0;
    inst.mask.resize(static_cast<size_t>(gt.h) * gt.w, false);
    for (int y = 0; y < gt.h; ++y)
      for (int x = 0; x < gt.w; ++x)
        if (gt.ids(y, x) == id) inst.mask[static_cast<size_t>(y) * gt.w + x] = true;
    list.push_back(std::move(inst));
  }
  return list;
}

namespace {

std::vector<int> gt_category_list(const PanopticMap& gt) {
  std::set<int> cats;
  for (const auto& [_, info] : gt.segments) cats.insert(info.category);
  return {cats.begin(), cats.end()};
}

}  // namespace

EvalReport evaluate(Model& model, const Dataset& dataset, const Vocabulary& test_vocab,
                    const std::vector<bool>& seen_mask, const EvalOptions& options) {
  EvalReport report;
  PQStat pq_stat;
  MIoUAccumulator miou;
  APAccumulator ap;
  for (const Sample& sample : dataset.samples) {
    Image input = options.short_side > 0 ? resize_for_inference(sample.image, options.short_side)
                                         : sample.image;
    PredictionResult pred;
    if (options.grounding) {
      pred = grounding_predict(model, input, test_vocab, gt_category_list(sample.gt),
                               options.ensemble, options.thresholds, nullptr, sample.image.h,
                               sample.image.w);
    } else {
      pred = predict(model, input, test_vocab, seen_mask, options.ensemble, options.thresholds,
                     sample.image.h, sample.image.w);
    }
    pq_stat.merge(pq_accumulate(pred.panoptic, sample.gt));
    miou.add(pred.semantic, semantic_from_panoptic(sample.gt));
    // AP uses pre-merging proposal masks, thing classes only. Grounding
    // fused scores are already translated per image, so AP is reported
    // only for the standard path.
    if (!options.grounding) {
      ap.add_image(instances_from_proposals(pred.mask_logits, pred.h4, pred.w4, pred.fused,
                                            test_vocab, options.thresholds.object_score,
                                            sample.image.h, sample.image.w),
                   instances_from_gt(sample.gt));
    }
    ++report.images;
  }
  report.pq = pq_report(pq_stat, seen_mask);
  report.miou = miou.miou();
  if (!options.grounding) {
    report.ap50 = ap.ap(0.5);
    report.ap = ap.ap_range();
  }
  return report;
}

CachedPredictions cache_predictions(Model& model, const Dataset& dataset,
                                    const Vocabulary& test_vocab, int short_side) {
  CachedPredictions cache;
  for (const Sample& sample : dataset.samples) {
    Image input =
        short_side > 0 ? resize_for_inference(sample.image, short_side) : sample.image;
    ag::Graph g;
    ModelOutput out = model.forward(g, input, test_vocab.embeddings);
    CachedPredictions::Entry e;
    e.mask_logits = out.final_mask_logits();
    e.h4 = out.gen.h4;
    e.w4 = out.gen.w4;
    e.in_probs = out.final_in_probs();
    Grid clip_dense;
    clip_dense.h = out.pyramid.clip_dense.h;
    clip_dense.w = out.pyramid.clip_dense.w;
    clip_dense.data = out.pyramid.clip_dense.node->val;
    e.out_probs = out_vocab_probs(clip_dense, e.mask_logits, e.h4, e.w4, test_vocab,
                                  model.config().t_out);
    e.sample = &sample;
    cache.entries.push_back(std::move(e));
  }
  return cache;
}

EvalReport evaluate_cached(const CachedPredictions& cache, const Vocabulary& test_vocab,
                           const std::vector<bool>& seen_mask, const EnsembleParams& params,
                           const MergeThresholds& thresholds) {
  EvalReport report;
  PQStat pq_stat;
  MIoUAccumulator miou;
  APAccumulator ap;
  for (const auto& e : cache.entries) {
    ScoreMatrix fused = ensemble(e.in_probs, e.out_probs, seen_mask, params);
    const Sample& sample = *e.sample;
    PanopticMap pan = merge(e.mask_logits, e.h4, e.w4, fused, test_vocab, thresholds,
                            sample.image.h, sample.image.w);
    pq_stat.merge(pq_accumulate(pan, sample.gt));
    miou.add(semantic_map(e.mask_logits, e.h4, e.w4, fused, sample.image.h, sample.image.w),
             semantic_from_panoptic(sample.gt));
    ap.add_image(instances_from_proposals(e.mask_logits, e.h4, e.w4, fused, test_vocab,
                                          thresholds.object_score, sample.image.h,
                                          sample.image.w),
                 instances_from_gt(sample.gt));
    ++report.images;
  }
  report.pq = pq_report(pq_stat, seen_mask);
  report.miou = miou.miou();
  report.ap50 = ap.ap(0.5);
  report.ap = ap.ap_range();
  return report;
}

std::vector<SweepCell> ensemble_sweep(const CachedPredictions& cache,
                                      const Vocabulary& test_vocab,
                                      const std::vector<bool>& seen_mask,
                                      const std::vector<double>& grid,
                                      const MergeThresholds& thresholds) {
  std::vector<SweepCell> cells;
  for (EnsembleMethod method : {EnsembleMethod::kGeometric, EnsembleMethod::kArithmetic})
    for (double alpha : grid)
      for (double beta : grid) {
        SweepCell cell;
        cell.alpha = alpha;
        cell.beta = beta;
        cell.method = method;
        cell.report = evaluate_cached(cache, test_vocab, seen_mask,
                                      EnsembleParams(alpha, beta, method), thresholds);
        cells.push_back(std::move(cell));
      }
  return cells;
}

}  // namespace ovseg
