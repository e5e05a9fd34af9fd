// Copyright 2026 The ovseg Authors.
// SPDX-License-Identifier: Apache-2.0
#include "ovseg/mask_generator.hpp"

#include <cmath>
#include <map>
#include <mutex>

namespace ovseg {

namespace {

void init_linear(ParamStore& store, const std::string& name, int in, int out,
                 std::mt19937_64& rng, bool bias = true) {
  Param& w = store.create(name + ".w", in, out);
  xavier_init(w.value, rng);
  if (bias) store.create(name + ".b", 1, out).value.setZero();
}

void init_layernorm(ParamStore& store, const std::string& name, int dim) {
  store.create(name + ".g", 1, dim).value.setOnes();
  store.create(name + ".b", 1, dim).value.setZero();
}

void init_attention(ParamStore& store, const std::string& name, int dim, std::mt19937_64& rng) {
  for (const char* part : {".wq", ".wk", ".wv", ".wo"}) {
    Param& w = store.create(name + part, dim, dim);
    xavier_init(w.value, rng);
  }
}

void init_ffn(ParamStore& store, const std::string& name, int dim, int hidden,
              std::mt19937_64& rng) {
  init_linear(store, name + ".fc1", dim, hidden, rng);
  init_linear(store, name + ".fc2", hidden, dim, rng);
}

ag::Node* linear(GraphBinding& bind, const std::string& name, ag::Node* x) {
  return ag::add_row_broadcast(ag::matmul(x, bind(name + ".w")), bind(name + ".b"));
}

ag::Node* layernorm(GraphBinding& bind, const std::string& name, ag::Node* x) {
  return ag::layernorm_rows(x, bind(name + ".g"), bind(name + ".b"));
}

ag::Node* ffn(GraphBinding& bind, const std::string& name, ag::Node* x) {
  return linear(bind, name + ".fc2", ag::relu(linear(bind, name + ".fc1", x)));
}

// Single-head scaled dot-product attention. Positional terms are added to
// queries/keys only (values stay positional-free). add_mask, when given,
// is applied before the softmax.
ag::Node* attention(GraphBinding& bind, const std::string& name, ag::Node* q_in,
                    ag::Node* kv_in, ag::Node* q_pos = nullptr, const Mat* k_pos = nullptr,
                    const Mat* add_mask = nullptr) {
  ag::Node* q_src = q_pos ? ag::add(q_in, q_pos) : q_in;
  ag::Node* k_src = k_pos ? ag::add_const(kv_in, *k_pos) : kv_in;
  ag::Node* q = ag::matmul(q_src, bind(name + ".wq"));
  ag::Node* k = ag::matmul(k_src, bind(name + ".wk"));
  ag::Node* v = ag::matmul(kv_in, bind(name + ".wv"));
  double s = 1.0 / std::sqrt(static_cast<double>(q->val.cols()));
  ag::Node* logits = ag::scale(ag::matmul(q, ag::transpose(k)), s);
  ag::Node* attn = ag::softmax_rows(logits, add_mask);
  return ag::matmul(ag::matmul(attn, v), bind(name + ".wo"));
}

std::shared_ptr<const InterpPlan> cached_plan(int sh, int sw, int dh, int dw) {
  static std::map<std::array<int, 4>, std::shared_ptr<const InterpPlan>> cache;
  static std::mutex mu;
  std::lock_guard<std::mutex> lock(mu);
  std::array<int, 4> key = {sh, sw, dh, dw};
  auto it = cache.find(key);
  if (it != cache.end()) return it->second;
  auto plan = std::make_shared<InterpPlan>(make_bilinear_plan(sh, sw, dh, dw));
  cache[key] = plan;
  return plan;
}

// Additive attention mask from the previous prediction: 0 where the
// resized sigmoid is >= 0.5, -1e9 elsewhere; empty rows fall back to
// full attention. Detached from the graph by construction.
Mat attention_mask_from_logits(const Mat& mask_logits, int h4, int w4, int lh, int lw) {
  Mat resized = apply_interp_rows(*cached_plan(h4, w4, lh, lw), mask_logits);
  Mat mask = Mat::Zero(resized.rows(), resized.cols());
  for (int i = 0; i < resized.rows(); ++i) {
    bool any = false;
    for (int j = 0; j < resized.cols(); ++j) {
      if (sigmoid(resized(i, j)) >= 0.5) {
        any = true;
      } else {
        mask(i, j) = -1e9;
      }
    }
    if (!any) mask.row(i).setZero();
  }
  return mask;
}

}  // namespace

const Mat& sine_positional_encoding(int h, int w, int dim) {
  static std::map<std::array<int, 3>, Mat> cache;
  static std::mutex mu;
  std::lock_guard<std::mutex> lock(mu);
  std::array<int, 3> key = {h, w, dim};
  auto it = cache.find(key);
  if (it != cache.end()) return it->second;
  Mat pe = Mat::Zero(h * w, dim);
  const int half = dim / 2;
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      int p = y * w + x;
      double ny = (y + 0.5) / h * 2.0 * M_PI;
      double nx = (x + 0.5) / w * 2.0 * M_PI;
      for (int i = 0; 2 * i + 1 < half; ++i) {
        double inv_freq = std::pow(10000.0, -2.0 * i / half);
        pe(p, 2 * i) = std::sin(ny * inv_freq);
        pe(p, 2 * i + 1) = std::cos(ny * inv_freq);
        pe(p, half + 2 * i) = std::sin(nx * inv_freq);
        pe(p, half + 2 * i + 1) = std::cos(nx * inv_freq);
      }
    }
  return cache.emplace(key, std::move(pe)).first->second;
}

void mask_generator_init_params(ParamStore& store, const ModelConfig& cfg, std::mt19937_64& rng) {
  if (store.has("maskdec.query_embed")) return;
  const int d = cfg.query_dim;
  // Pixel decoder
  for (int l = 1; l <= 3; ++l)
    init_linear(store, "pixdec.input_proj" + std::to_string(l), ToyBackbone::kChannels[l + 1], d,
                rng);
  Param& level_embed = store.create("pixdec.level_embed", 3, d);
  xavier_init(level_embed.value, rng);
  for (int l = 0; l < cfg.pixel_decoder_layers; ++l) {
    std::string p = "pixdec.layer" + std::to_string(l);
    init_attention(store, p + ".attn", d, rng);
    init_layernorm(store, p + ".ln1", d);
    init_ffn(store, p + ".ffn", d, cfg.ffn_dim, rng);
    init_layernorm(store, p + ".ln2", d);
  }
  init_linear(store, "pixdec.lateral4", ToyBackbone::kChannels[1], d, rng);
  init_linear(store, "pixdec.fpix", d, d, rng);

  // Mask decoder
  Param& qe = store.create("maskdec.query_embed", cfg.n_queries, d);
  xavier_init(qe.value, rng);
  Param& qp = store.create("maskdec.query_pos", cfg.n_queries, d);
  xavier_init(qp.value, rng);
  for (int l = 0; l < cfg.mask_decoder_layers; ++l) {
    std::string p = "maskdec.layer" + std::to_string(l);
    init_attention(store, p + ".cross", d, rng);
    init_layernorm(store, p + ".ln1", d);
    init_attention(store, p + ".self", d, rng);
    init_layernorm(store, p + ".ln2", d);
    init_ffn(store, p + ".ffn", d, cfg.ffn_dim, rng);
    init_layernorm(store, p + ".ln3", d);
  }
  init_layernorm(store, "maskdec.norm", d);
  init_linear(store, "head.mask.fc1", d, d, rng);
  init_linear(store, "head.mask.fc2", d, d, rng);
}

MaskGeneratorOutput mask_generator_forward(ag::Graph& g, GraphBinding& bind,
                                           const ModelConfig& cfg,
                                           const FeaturePyramidNodes& pyramid) {
  MaskGeneratorOutput out;
  const int d = cfg.query_dim;

  // ---- pixel decoder ----
  std::array<ag::Node*, 3> proj;  // strides 8, 16, 32
  std::array<int, 3> lh, lw;
  ag::Node* level_embed = bind("pixdec.level_embed");
  for (int l = 0; l < 3; ++l) {
    const auto& lvl = pyramid.levels[l + 1];
    lh[l] = lvl.h;
    lw[l] = lvl.w;
    ag::Node* x = linear(bind, "pixdec.input_proj" + std::to_string(l + 1), lvl.node);
    x = ag::add_const(x, sine_positional_encoding(lvl.h, lvl.w, d));
    x = ag::add_row_broadcast(x, ag::slice_rows(level_embed, l, 1));
    proj[l] = x;
  }
  ag::Node* tokens = ag::concat_rows({proj[0], proj[1], proj[2]});
  for (int l = 0; l < cfg.pixel_decoder_layers; ++l) {
    std::string p = "pixdec.layer" + std::to_string(l);
    ag::Node* tn = layernorm(bind, p + ".ln1", tokens);
    tokens = ag::add(tokens, attention(bind, p + ".attn", tn, tn));
    tokens = ag::add(tokens, ffn(bind, p + ".ffn", layernorm(bind, p + ".ln2", tokens)));
  }
  std::array<ag::Node*, 3> refined;
  int at = 0;
  for (int l = 0; l < 3; ++l) {
    refined[l] = ag::slice_rows(tokens, at, lh[l] * lw[l]);
    at += lh[l] * lw[l];
  }
  out.enhanced = {{{refined[0], lh[0], lw[0]},
                   {refined[1], lh[1], lw[1]},
                   {refined[2], lh[2], lw[2]}}};

  // top-down fusion down to stride 4
  ag::Node* y = refined[2];
  y = ag::add(ag::interp(y, cached_plan(lh[2], lw[2], lh[1], lw[1])), refined[1]);
  y = ag::add(ag::interp(y, cached_plan(lh[1], lw[1], lh[0], lw[0])), refined[0]);
  const auto& l4 = pyramid.levels[0];
  ag::Node* lateral = linear(bind, "pixdec.lateral4", l4.node);
  y = ag::add(ag::interp(y, cached_plan(lh[0], lw[0], l4.h, l4.w)), lateral);
  out.f_pix = linear(bind, "pixdec.fpix", y);
  out.h4 = l4.h;
  out.w4 = l4.w;

  // ---- mask decoder ----
  ag::Node* queries = bind("maskdec.query_embed");
  ag::Node* query_pos = bind("maskdec.query_pos");
  auto predict = [&](ag::Node* q) {
    ag::Node* normed = layernorm(bind, "maskdec.norm", q);
    ag::Node* embed = linear(bind, "head.mask.fc2", ag::relu(linear(bind, "head.mask.fc1", normed)));
    ag::Node* logits = ag::matmul(embed, ag::transpose(out.f_pix));
    out.mask_logits.push_back(logits);
    out.query_states.push_back(normed);
  };
  predict(queries);

  static const std::array<int, 3> cycle = {2, 1, 0};  // strides 32, 16, 8
  for (int l = 0; l < cfg.mask_decoder_layers; ++l) {
    std::string p = "maskdec.layer" + std::to_string(l);
    int lvl = cycle[l % 3];
    Mat attn_mask =
        attention_mask_from_logits(out.mask_logits.back()->val, out.h4, out.w4, lh[lvl], lw[lvl]);
    const Mat& k_pos = sine_positional_encoding(lh[lvl], lw[lvl], d);
    queries = ag::add(queries, attention(bind, p + ".cross", layernorm(bind, p + ".ln1", queries),
                                         refined[lvl], query_pos, &k_pos, &attn_mask));
    ag::Node* qn = layernorm(bind, p + ".ln2", queries);
    queries = ag::add(queries, attention(bind, p + ".self", qn, qn, query_pos));
    queries = ag::add(queries, ffn(bind, p + ".ffn", layernorm(bind, p + ".ln3", queries)));
    predict(queries);
  }
  return out;
}

}  // namespace ovseg
