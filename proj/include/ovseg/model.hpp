// Copyright 2026 The ovseg Authors.
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "ovseg/classifiers.hpp"
#include "ovseg/mask_generator.hpp"
#include "ovseg/matching.hpp"

#include <optional>
#include <string>

namespace ovseg {

// One full forward pass: pyramid, proposals, and per-layer in-vocabulary
// class logits (cosine / T against the supplied text embeddings).
struct ModelOutput {
  FeaturePyramidNodes pyramid;
  MaskGeneratorOutput gen;
  std::vector<ag::Node*> class_logits;  // per supervised layer, N x |C|

  const Mat& final_mask_logits() const { return gen.mask_logits.back()->val; }
  Mat final_in_probs() const;  // softmax of the last layer's class logits
};

class Model {
 public:
  Model(const ModelConfig& cfg, uint64_t seed);

  ModelOutput forward(ag::Graph& g, const Image& image, const Mat& text_embeddings);

  void set_frozen(bool frozen) { ToyBackbone::set_frozen(store_, frozen); }
  bool frozen() const { return ToyBackbone::is_frozen(store_); }
  uint64_t backbone_checksum() const { return store_.checksum("backbone."); }
  uint64_t decoder_checksum() const;

  double temperature() const;

  void save(const std::string& path) const;
  static Model load(const std::string& path);

  ParamStore& store() { return store_; }
  const ParamStore& store() const { return store_; }
  const ModelConfig& config() const { return cfg_; }

  // Binding of the most recent forward (for gradient flushing).
  GraphBinding* last_binding() { return binding_ ? &*binding_ : nullptr; }

 private:
  Model() = default;
  ModelConfig cfg_;
  ParamStore store_;
  std::optional<GraphBinding> binding_;
};

struct LossBreakdown {
  double total = 0.0, ce = 0.0, bce = 0.0, dice = 0.0;
  int matched = 0;
};

// Deep-supervised set-prediction loss. Hungarian matching runs per layer
// unless fixed matches are supplied; unmatched proposals contribute
// nothing. Returns a scalar graph node (zero leaf when K == 0).
ag::Node* compute_loss(ag::Graph& g, const ModelOutput& out, const GroundTruthMasks& gt,
                       const LossWeights& weights, LossBreakdown* breakdown = nullptr,
                       const std::vector<MatchResult>* fixed_matches = nullptr);

}  // namespace ovseg
