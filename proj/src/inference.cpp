// Copyright 2026 The ovseg Authors.
// SPDX-License-Identifier: Apache-2.0
#include "ovseg/inference.hpp"

#include "ovseg/image_io.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <set>

namespace ovseg {

namespace {

struct Candidate {
  int proposal;
  int category;
  double score;
};

Mat upsample_logits(const Mat& mask_logits, int mask_h, int mask_w, int out_h, int out_w) {
  if (mask_h == out_h && mask_w == out_w) return mask_logits;
  return apply_interp_rows(make_bilinear_plan(mask_h, mask_w, out_h, out_w), mask_logits);
}

}  // namespace

PanopticMap merge(const Mat& mask_logits, int mask_h, int mask_w, const ScoreMatrix& scores,
                  const Vocabulary& vocab, const MergeThresholds& thresholds, int out_h,
                  int out_w) {
  const int n = static_cast<int>(mask_logits.rows());
  Mat logits = upsample_logits(mask_logits, mask_h, mask_w, out_h, out_w);
  const int px = out_h * out_w;

  std::vector<Candidate> cands;
  for (int i = 0; i < n; ++i) {
    int cls;
    double s = scores.row(i).maxCoeff(&cls);
    if (s >= thresholds.object_score) cands.push_back({i, cls, s});
  }
  // score descending; equal confidences break toward lower proposal index
  std::stable_sort(cands.begin(), cands.end(), [](const Candidate& a, const Candidate& b) {
    return a.score > b.score;
  });

  // per-pixel winner: argmax of score * sigmoid(logit), foreground only
  std::vector<int> winner(px, -1);
  std::vector<double> best(px, 0.0);
  for (const auto& c : cands) {
    for (int p = 0; p < px; ++p) {
      double prob = sigmoid(logits(c.proposal, p));
      if (prob < 0.5) continue;
      double v = c.score * prob;
      if (v > best[p]) {
        best[p] = v;
        winner[p] = c.proposal;
      }
    }
  }

  PanopticMap map(out_h, out_w);
  std::map<int, int> stuff_segment;  // category -> segment id
  int next_id = 1;
  for (const auto& c : cands) {
    long long painted = 0, original = 0;
    for (int p = 0; p < px; ++p) {
      if (sigmoid(logits(c.proposal, p)) >= 0.5) ++original;
      if (winner[p] == c.proposal) ++painted;
    }
    if (original == 0 || static_cast<double>(painted) / original < thresholds.overlap_ratio)
      continue;
    bool is_thing = vocab.categories[c.category].is_thing;
    int id;
    if (!is_thing && stuff_segment.count(c.category)) {
      id = stuff_segment[c.category];
      map.segments[id].score = std::max(map.segments[id].score, c.score);
    } else {
      id = next_id++;
      map.segments[id] = {c.category, is_thing, c.score};
      if (!is_thing) stuff_segment[c.category] = id;
    }
    for (int p = 0; p < px; ++p)
      if (winner[p] == c.proposal) map.ids(p / out_w, p % out_w) = id;
  }
  // prune ids that ended up with zero pixels (fully overpainted)
  std::set<int> present;
  for (int p = 0; p < px; ++p)
    if (map.ids(p / out_w, p % out_w) != 0) present.insert(map.ids(p / out_w, p % out_w));
  for (auto it = map.segments.begin(); it != map.segments.end();)
    it = present.count(it->first) ? std::next(it) : map.segments.erase(it);
  return map;
}

std::vector<int> semantic_map(const Mat& mask_logits, int mask_h, int mask_w,
                              const ScoreMatrix& scores, int out_h, int out_w) {
  Mat logits = upsample_logits(mask_logits, mask_h, mask_w, out_h, out_w);
  Mat probs = (1.0 / (1.0 + (-logits.array()).exp())).matrix();  // N x px
  Mat agg = scores.transpose() * probs;                          // |C| x px
  std::vector<int> out(static_cast<size_t>(out_h) * out_w);
  for (int p = 0; p < out_h * out_w; ++p) {
    int cls;
    agg.col(p).maxCoeff(&cls);
    out[p] = cls;
  }
  return out;
}

InstanceList instances_from_proposals(const Mat& mask_logits, int mask_h, int mask_w,
                                      const ScoreMatrix& scores, const Vocabulary& vocab,
                                      double min_score, int out_h, int out_w) {
  Mat logits = upsample_logits(mask_logits, mask_h, mask_w, out_h, out_w);
  InstanceList list;
  for (int i = 0; i < logits.rows(); ++i) {
    int cls;
    double s = scores.row(i).maxCoeff(&cls);
    if (s < min_score || !vocab.categories[cls].is_thing) continue;
    InstancePrediction inst;
    inst.category = cls;
    inst.score = s;
    inst.mask.resize(static_cast<size_t>(out_h) * out_w);
    bool any = false;
    for (int p = 0; p < out_h * out_w; ++p) {
      inst.mask[p] = sigmoid(logits(i, p)) >= 0.5;
      any = any || inst.mask[p];
    }
    if (any) list.push_back(std::move(inst));
  }
  return list;
}

PredictionResult predict(Model& model, const Image& image, const Vocabulary& vocab,
                         const std::vector<bool>& seen_mask, const EnsembleParams& ensemble_params,
                         const MergeThresholds& thresholds, int out_h, int out_w) {
  if (out_h <= 0) out_h = image.h;
  if (out_w <= 0) out_w = image.w;
  ag::Graph g;
  ModelOutput out = model.forward(g, image, vocab.embeddings);

  PredictionResult res;
  res.mask_logits = out.final_mask_logits();
  res.h4 = out.gen.h4;
  res.w4 = out.gen.w4;
  res.in_probs = out.final_in_probs();

  Grid clip_dense;
  clip_dense.h = out.pyramid.clip_dense.h;
  clip_dense.w = out.pyramid.clip_dense.w;
  clip_dense.data = out.pyramid.clip_dense.node->val;
  res.out_probs = out_vocab_probs(clip_dense, res.mask_logits, res.h4, res.w4, vocab,
                                  model.config().t_out);
  res.fused = ensemble(res.in_probs, res.out_probs, seen_mask, ensemble_params);
  res.panoptic = merge(res.mask_logits, res.h4, res.w4, res.fused, vocab, thresholds, out_h,
                       out_w);
  res.semantic = semantic_map(res.mask_logits, res.h4, res.w4, res.fused, out_h, out_w);
  return res;
}

PredictionResult grounding_predict(Model& model, const Image& image, const Vocabulary& full_vocab,
                                   const std::vector<int>& gt_categories,
                                   const EnsembleParams& ensemble_params,
                                   const MergeThresholds& thresholds,
                                   std::vector<int>* restricted_to_full, int out_h, int out_w) {
  if (gt_categories.empty()) throw std::invalid_argument("grounding requires ground-truth classes");
  std::vector<int> uniq = gt_categories;
  std::sort(uniq.begin(), uniq.end());
  uniq.erase(std::unique(uniq.begin(), uniq.end()), uniq.end());

  Vocabulary restricted;
  restricted.embeddings = Mat(uniq.size(), full_vocab.dim());
  for (size_t j = 0; j < uniq.size(); ++j) {
    Category c = full_vocab.categories.at(uniq[j]);
    c.id = static_cast<int>(j);
    restricted.categories.push_back(std::move(c));
    restricted.embeddings.row(static_cast<int>(j)) = full_vocab.embeddings.row(uniq[j]);
  }
  restricted.seen_mask.assign(uniq.size(), true);

  PredictionResult res = predict(model, image, restricted, restricted.seen_mask,
                                 ensemble_params, thresholds, out_h, out_w);
  // Translate back to full-vocabulary category ids.
  for (auto& [_, info] : res.panoptic.segments) info.category = uniq[info.category];
  for (auto& s : res.semantic) s = uniq[s];
  if (restricted_to_full) *restricted_to_full = uniq;
  return res;
}

Image resize_for_inference(const Image& image, int short_side, int long_cap) {
  double scale = static_cast<double>(short_side) / std::min(image.h, image.w);
  if (scale * std::max(image.h, image.w) > long_cap)
    scale = static_cast<double>(long_cap) / std::max(image.h, image.w);
  auto round32 = [long_cap](double v) {
    int r = std::max(32, static_cast<int>(std::lround(v / 32.0)) * 32);
    if (r > long_cap) r = long_cap / 32 * 32;  // rounding must not exceed the cap
    return std::max(32, r);
  };
  int th = round32(image.h * scale), tw = round32(image.w * scale);
  if (th == image.h && tw == image.w) return image;
  return resize_image(image, th, tw);
}

void save_prediction(const PanopticMap& map, const std::string& png_path,
                     const std::string& table_path) {
  write_id_map_png(png_path, map.ids);
  nlohmann::json table = nlohmann::json::array();
  for (const auto& [id, info] : map.segments)
    table.push_back({{"id", id},
                     {"category_id", info.category},
                     {"is_thing", info.is_thing},
                     {"score", info.score}});
  std::ofstream os(table_path);
  os << table.dump(2) << "\n";
}

void save_overlay(const Image& image, const PanopticMap& map, const std::string& path) {
  Image out = image;
  for (int y = 0; y < map.h; ++y)
    for (int x = 0; x < map.w; ++x) {
      int id = map.ids(y, x);
      if (id == 0) continue;
      int r, g, b;
      overlay_color(id, r, g, b);
      int p = y * map.w + x;
      out.pixels(p, 0) = 0.5 * out.pixels(p, 0) + 0.5 * r / 255.0;
      out.pixels(p, 1) = 0.5 * out.pixels(p, 1) + 0.5 * g / 255.0;
      out.pixels(p, 2) = 0.5 * out.pixels(p, 2) + 0.5 * b / 255.0;
    }
  write_png(path, out);
}

}  // namespace ovseg
