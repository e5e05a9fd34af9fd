// Copyright 2026 The ovseg Authors.
// SPDX-License-Identifier: Apache-2.0
#include "ovseg/model.hpp"

#include <nlohmann/json.hpp>

#include <cmath>

namespace ovseg {

namespace {

Mat softmax_rows_value(const Mat& z) {
  Mat y(z.rows(), z.cols());
  for (int i = 0; i < z.rows(); ++i) {
    double m = z.row(i).maxCoeff();
    Eigen::ArrayXd e = (z.row(i).array() - m).exp();
    y.row(i) = (e / e.sum()).matrix().transpose();
  }
  return y;
}

}  // namespace

Mat ModelOutput::final_in_probs() const { return softmax_rows_value(class_logits.back()->val); }

Model::Model(const ModelConfig& cfg, uint64_t seed) : cfg_(cfg) {
  std::mt19937_64 rng(seed);
  ToyBackbone::init_params(store_, rng);
  mask_generator_init_params(store_, cfg_, rng);
  Param& w = store_.create("head.cls.w", cfg_.query_dim, cfg_.embed_dim);
  xavier_init(w.value, rng);
  store_.create("head.cls.b", 1, cfg_.embed_dim).value.setZero();
  store_.create("head.logT", 1, 1).value(0, 0) = std::log(0.07);
}

ModelOutput Model::forward(ag::Graph& g, const Image& image, const Mat& text_embeddings) {
  if (text_embeddings.cols() != cfg_.embed_dim)
    throw std::invalid_argument("text embedding dim does not match model embed dim");
  binding_.emplace(g, store_, frozen());
  GraphBinding& bind = *binding_;

  ModelOutput out;
  out.pyramid = ToyBackbone::forward(g, bind, image);
  out.gen = mask_generator_forward(g, bind, cfg_, out.pyramid);

  Mat t_norm = text_embeddings;
  for (int j = 0; j < t_norm.rows(); ++j)
    t_norm.row(j) /= std::max(t_norm.row(j).norm(), 1e-12);
  ag::Node* text_t = g.leaf(t_norm.transpose(), false);
  ag::Node* inv_temp = ag::exp(ag::scale(bind("head.logT"), -1.0));

  for (size_t l = 0; l < out.gen.mask_logits.size(); ++l) {
    Mat w_pool = mask_pool_weights(out.gen.mask_logits[l]->val, out.gen.h4, out.gen.w4,
                                   out.gen.h4, out.gen.w4);
    ag::Node* pooled = ag::matmul(g.leaf(std::move(w_pool), false), out.gen.f_pix);
    ag::Node* proj = ag::add_row_broadcast(ag::matmul(pooled, bind("head.cls.w")),
                                           bind("head.cls.b"));
    ag::Node* cosines = ag::matmul(ag::l2_normalize_rows(proj), text_t);
    out.class_logits.push_back(ag::scale_by(inv_temp, cosines));
  }
  return out;
}

double Model::temperature() const { return std::exp(store_.at("head.logT").value(0, 0)); }

uint64_t Model::decoder_checksum() const {
  return store_.checksum("pixdec.") * 1000003ull ^ store_.checksum("maskdec.") * 10007ull ^
         store_.checksum("head.");
}

void Model::save(const std::string& path) const {
  nlohmann::json meta = {{"n_queries", cfg_.n_queries},
                         {"query_dim", cfg_.query_dim},
                         {"pixel_decoder_layers", cfg_.pixel_decoder_layers},
                         {"mask_decoder_layers", cfg_.mask_decoder_layers},
                         {"ffn_dim", cfg_.ffn_dim},
                         {"embed_dim", cfg_.embed_dim},
                         {"t_out", cfg_.t_out}};
  store_.save(path, meta.dump());
}

Model Model::load(const std::string& path) {
  Model m;
  std::string meta_str = m.store_.load(path);
  auto meta = nlohmann::json::parse(meta_str);
  m.cfg_.n_queries = meta.at("n_queries").get<int>();
  m.cfg_.query_dim = meta.at("query_dim").get<int>();
  m.cfg_.pixel_decoder_layers = meta.at("pixel_decoder_layers").get<int>();
  m.cfg_.mask_decoder_layers = meta.at("mask_decoder_layers").get<int>();
  m.cfg_.ffn_dim = meta.at("ffn_dim").get<int>();
  m.cfg_.embed_dim = meta.at("embed_dim").get<int>();
  m.cfg_.t_out = meta.at("t_out").get<double>();
  return m;
}

ag::Node* compute_loss(ag::Graph& g, const ModelOutput& out, const GroundTruthMasks& gt,
                       const LossWeights& weights, LossBreakdown* breakdown,
                       const std::vector<MatchResult>* fixed_matches) {
  LossBreakdown local;
  ag::Node* total = g.leaf(Mat::Zero(1, 1), false);
  if (gt.count() == 0) {
    if (breakdown) *breakdown = local;
    return total;
  }
  for (size_t l = 0; l < out.gen.mask_logits.size(); ++l) {
    MatchResult match;
    if (fixed_matches) {
      match = (*fixed_matches)[l];
    } else {
      Mat in_probs = softmax_rows_value(out.class_logits[l]->val);
      match = hungarian(match_cost(out.gen.mask_logits[l]->val, in_probs, gt, weights));
    }
    if (match.pairs.empty()) continue;
    std::vector<int> prop_idx, gt_idx;
    std::vector<int> targets;
    for (auto& [p, k] : match.pairs) {
      prop_idx.push_back(p);
      gt_idx.push_back(k);
      targets.push_back(gt.category[k]);
    }
    Mat gt_rows(gt_idx.size(), gt.masks.cols());
    for (size_t i = 0; i < gt_idx.size(); ++i) gt_rows.row(i) = gt.masks.row(gt_idx[i]);

    ag::Node* cls_sel = ag::select_rows(out.class_logits[l], prop_idx);
    ag::Node* mask_sel = ag::select_rows(out.gen.mask_logits[l], prop_idx);
    ag::Node* ce = ag::cross_entropy_logits_mean(cls_sel, targets);
    ag::Node* bce = ag::bce_with_logits_mean(mask_sel, gt_rows);
    ag::Node* dice = ag::dice_loss_mean(mask_sel, gt_rows);
    local.ce += ce->val(0, 0);
    local.bce += bce->val(0, 0);
    local.dice += dice->val(0, 0);
    local.matched += static_cast<int>(match.pairs.size());
    ag::Node* layer_loss = ag::add(ag::scale(ce, weights.cls),
                                   ag::add(ag::scale(bce, weights.bce), ag::scale(dice, weights.dice)));
    total = ag::add(total, layer_loss);
  }
  local.total = total->val(0, 0);
  if (breakdown) *breakdown = local;
  return total;
}

}  // namespace ovseg
