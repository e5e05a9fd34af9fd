// Copyright 2026 The ovseg Authors.
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "ovseg/backbone.hpp"
#include "ovseg/params.hpp"

#include <random>
#include <vector>

namespace ovseg {

struct ModelConfig {
  int n_queries = 20;
  int query_dim = 64;
  int pixel_decoder_layers = 2;
  int mask_decoder_layers = 3;
  int ffn_dim = 128;
  int embed_dim = ToyBackbone::kEmbedDim;  // joint image-text space
  double t_out = 0.07;                     // fixed out-of-vocabulary temperature
};

// Per-query mask logits over the stride-4 grid, with query states after
// each supervised prediction point (initial queries + every decoder layer).
struct MaskGeneratorOutput {
  ag::Node* f_pix = nullptr;  // (h4*w4) x query_dim
  int h4 = 0, w4 = 0;
  // Enhanced multi-scale maps (strides 8, 16, 32) after the pixel decoder.
  std::array<FeaturePyramidNodes::Level, 3> enhanced;
  std::vector<ag::Node*> mask_logits;   // each N x (h4*w4)
  std::vector<ag::Node*> query_states;  // each N x query_dim (normed)
};

void mask_generator_init_params(ParamStore& store, const ModelConfig& cfg, std::mt19937_64& rng);

// Pixel decoder: strides 8/16/32 are projected, flattened jointly, and
// refined by dense multi-scale self-attention; a top-down pathway
// (upsample + lateral + sum) produces the stride-4 pixel features.
// Mask decoder: per layer masked cross-attention (cycling levels
// 32/16/8), self-attention, FFN; logits are query-state MLP dotted with
// the pixel features. Cross-attention is restricted to pixels whose
// previous prediction is foreground (sigmoid >= 0.5); a query with an
// empty mask attends to all pixels.
MaskGeneratorOutput mask_generator_forward(ag::Graph& g, GraphBinding& bind,
                                           const ModelConfig& cfg,
                                           const FeaturePyramidNodes& pyramid);

// Fixed 2D sine positional encoding, cached per (h, w, dim).
const Mat& sine_positional_encoding(int h, int w, int dim);

}  // namespace ovseg
