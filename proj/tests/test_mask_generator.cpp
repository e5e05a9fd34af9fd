// Copyright 2026 The ovseg Authors.
// SPDX-License-Identifier: Apache-2.0
#include "ovseg/mask_generator.hpp"

#include "ovseg/model.hpp"
#include "ovseg/vocab.hpp"

#include <doctest.h>

#include <filesystem>
#include <random>

using namespace ovseg;

namespace {

Image gradient_image(int h, int w) {
  Image img(h, w);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      int p = y * w + x;
      img.pixels(p, 0) = static_cast<double>(x) / w;
      img.pixels(p, 1) = static_cast<double>(y) / h;
      img.pixels(p, 2) = 0.5;
    }
  return img;
}

Vocabulary color_vocab(const std::vector<std::string>& words) {
  ToyColorTextEncoder enc(0);
  std::vector<Category> cats;
  for (size_t i = 0; i < words.size(); ++i)
    cats.push_back({static_cast<int>(i), {words[i]}, true});
  return build_vocabulary(cats, enc, {"{}"});
}

}  // namespace

TEST_CASE("mask generator output shapes follow the config") {
  ModelConfig cfg;
  cfg.n_queries = 7;
  cfg.mask_decoder_layers = 3;
  Model model(cfg, 42);
  Vocabulary vocab = color_vocab({"red", "gray"});
  ag::Graph g;
  ModelOutput out = model.forward(g, gradient_image(64, 96), vocab.embeddings);

  const int h4 = 16, w4 = 24;
  CHECK(out.gen.h4 == h4);
  CHECK(out.gen.w4 == w4);
  // Supervised points: initial prediction + one per decoder layer.
  REQUIRE(out.gen.mask_logits.size() == static_cast<size_t>(cfg.mask_decoder_layers) + 1);
  REQUIRE(out.class_logits.size() == out.gen.mask_logits.size());
  for (ag::Node* m : out.gen.mask_logits) {
    CHECK(m->val.rows() == cfg.n_queries);
    CHECK(m->val.cols() == h4 * w4);
  }
  for (ag::Node* c : out.class_logits) {
    CHECK(c->val.rows() == cfg.n_queries);
    CHECK(c->val.cols() == vocab.size());
  }
  CHECK(out.gen.f_pix->val.rows() == h4 * w4);
  CHECK(out.gen.f_pix->val.cols() == cfg.query_dim);
  // Enhanced maps at strides 8, 16, 32.
  CHECK(out.gen.enhanced[0].h == 8);
  CHECK(out.gen.enhanced[1].h == 4);
  CHECK(out.gen.enhanced[2].h == 2);
}

TEST_CASE("forward is deterministic and seed-sensitive") {
  ModelConfig cfg;
  Vocabulary vocab = color_vocab({"red", "blue"});
  Image img = gradient_image(64, 64);

  Model m1(cfg, 1), m2(cfg, 1), m3(cfg, 2);
  ag::Graph g1, g2, g3;
  Mat a = m1.forward(g1, img, vocab.embeddings).final_mask_logits();
  Mat b = m2.forward(g2, img, vocab.embeddings).final_mask_logits();
  Mat c = m3.forward(g3, img, vocab.embeddings).final_mask_logits();
  CHECK(a == b);
  CHECK(a != c);
}

TEST_CASE("in-vocabulary probabilities are valid distributions; temperature starts at 0.07") {
  ModelConfig cfg;
  Model model(cfg, 9);
  CHECK(model.temperature() == doctest::Approx(0.07));
  Vocabulary vocab = color_vocab({"red", "green", "blue"});
  ag::Graph g;
  ModelOutput out = model.forward(g, gradient_image(64, 64), vocab.embeddings);
  Mat probs = out.final_in_probs();
  for (int i = 0; i < probs.rows(); ++i)
    CHECK(probs.row(i).sum() == doctest::Approx(1.0).epsilon(1e-5));
}

TEST_CASE("sine positional encoding is cached, resolution-dependent, bounded") {
  const Mat& a = sine_positional_encoding(4, 6, 16);
  const Mat& b = sine_positional_encoding(4, 6, 16);
  CHECK(&a == &b);  // cache returns the same object
  CHECK(a.rows() == 24);
  CHECK(a.cols() == 16);
  CHECK(a.cwiseAbs().maxCoeff() <= 1.0 + 1e-12);
  const Mat& c = sine_positional_encoding(6, 4, 16);
  CHECK(a.rows() == c.rows());
  CHECK(a != c);
}

TEST_CASE("checkpoint save/load round-trips parameters and outputs") {
  namespace fs = std::filesystem;
  ModelConfig cfg;
  cfg.n_queries = 5;
  Model model(cfg, 77);
  std::string path = (fs::temp_directory_path() / "ovseg_model.ckpt").string();
  model.save(path);
  Model back = Model::load(path);
  CHECK(back.config().n_queries == 5);
  CHECK(back.store().checksum() == model.store().checksum());
  CHECK(back.backbone_checksum() == model.backbone_checksum());

  Vocabulary vocab = color_vocab({"red", "gray"});
  Image img = gradient_image(64, 64);
  ag::Graph g1, g2;
  Mat a = model.forward(g1, img, vocab.embeddings).final_mask_logits();
  Mat b = back.forward(g2, img, vocab.embeddings).final_mask_logits();
  CHECK(a == b);
}

TEST_CASE("model gradients w.r.t. decoder parameters match finite differences") {
  // End-to-end gradient check through backbone, pixel decoder, masked
  // cross-attention, and the loss, on a 32x32 input.
  ModelConfig cfg;
  cfg.n_queries = 4;
  cfg.query_dim = 8;
  cfg.ffn_dim = 16;
  cfg.mask_decoder_layers = 2;
  Model model(cfg, 5);
  model.set_frozen(true);
  Vocabulary vocab = color_vocab({"red", "blue"});
  Image img = gradient_image(32, 32);

  GroundTruthMasks gt;
  gt.h = 8;
  gt.w = 8;
  gt.masks = Mat::Zero(2, 64);
  for (int p = 0; p < 64; ++p) {
    if (p % 8 < 4) gt.masks(0, p) = 1.0;
    else gt.masks(1, p) = 1.0;
  }
  gt.category = {0, 1};

  // Fix the matching so finite differences evaluate the same loss
  // surface on both sides of the perturbation.
  LossWeights weights;
  std::vector<MatchResult> fixed;
  {
    ag::Graph g;
    ModelOutput out = model.forward(g, img, vocab.embeddings);
    for (size_t l = 0; l < out.gen.mask_logits.size(); ++l) {
      Mat probs = ag::softmax_rows(out.class_logits[l])->val;
      Mat cost = match_cost(out.gen.mask_logits[l]->val, probs, gt, weights);
      fixed.push_back(hungarian(cost));
    }
  }

  auto loss_value = [&]() {
    ag::Graph g;
    ModelOutput out = model.forward(g, img, vocab.embeddings);
    LossBreakdown bd;
    compute_loss(g, out, gt, weights, &bd, &fixed);
    return bd.total;
  };

  // Analytic gradients.
  model.store().zero_grads();
  {
    ag::Graph g;
    ModelOutput out = model.forward(g, img, vocab.embeddings);
    LossBreakdown bd;
    ag::Node* loss = compute_loss(g, out, gt, weights, &bd, &fixed);
    g.backward(loss);
    model.last_binding()->flush_grads();
  }

  const double eps = 1e-4;
  std::mt19937_64 rng(13);
  int checked = 0;
  for (const std::string& name :
       {std::string("maskdec.query_embed"), std::string("maskdec.layer0.cross.wq"),
        std::string("pixdec.fpix.w"), std::string("head.mask.fc1.w"),
        std::string("head.cls.w"), std::string("head.logT")}) {
    Param& p = model.store().at(name);
    REQUIRE(p.grad.size() == p.value.size());
    // Sample a few entries per tensor.
    for (int s = 0; s < 4 && s < p.value.size(); ++s) {
      int r = static_cast<int>(rng() % p.value.rows());
      int c = static_cast<int>(rng() % p.value.cols());
      double keep = p.value(r, c);
      p.value(r, c) = keep + eps;
      double up = loss_value();
      p.value(r, c) = keep - eps;
      double down = loss_value();
      p.value(r, c) = keep;
      double fd = (up - down) / (2 * eps);
      double ana = p.grad(r, c);
      double denom = std::max({std::abs(fd), std::abs(ana), 1e-6});
      CHECK(std::abs(fd - ana) / denom < 1e-3);
      ++checked;
    }
  }
  CHECK(checked >= 20);
}

TEST_CASE("frozen backbone receives no gradients; trainable backbone does") {
  ModelConfig cfg;
  cfg.n_queries = 4;
  cfg.query_dim = 8;
  cfg.ffn_dim = 16;
  cfg.mask_decoder_layers = 1;
  Vocabulary vocab = color_vocab({"red", "blue"});
  Image img = gradient_image(32, 32);
  GroundTruthMasks gt;
  gt.h = 8;
  gt.w = 8;
  gt.masks = Mat::Ones(1, 64);
  gt.category = {0};

  for (bool frozen : {true, false}) {
    Model model(cfg, 3);
    model.set_frozen(frozen);
    model.store().zero_grads();
    ag::Graph g;
    ModelOutput out = model.forward(g, img, vocab.embeddings);
    ag::Node* loss = compute_loss(g, out, gt, LossWeights());
    g.backward(loss);
    model.last_binding()->flush_grads();
    double backbone_grad = 0;
    for (const auto& name : model.store().names())
      if (name.rfind("backbone.", 0) == 0 && model.store().at(name).grad.size())
        backbone_grad += model.store().at(name).grad.cwiseAbs().sum();
    if (frozen)
      CHECK(backbone_grad == 0.0);
    else
      CHECK(backbone_grad > 0.0);
  }
}
