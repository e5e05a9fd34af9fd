// Copyright 2026 The ovseg Authors.
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "ovseg/params.hpp"
#include "ovseg/types.hpp"

#include <array>
#include <random>

namespace ovseg {

// Multi-scale features at strides 4/8/16/32 plus the final-stride map
// projected into the joint image-text embedding space.
struct FeaturePyramid {
  std::vector<Grid> levels;  // strides 4, 8, 16, 32
  Grid clip_dense;           // stride 32, D channels
};

// Graph-mode counterpart carrying autodiff nodes.
struct FeaturePyramidNodes {
  struct Level {
    ag::Node* node = nullptr;
    int h = 0, w = 0;
  };
  std::array<Level, 4> levels;  // strides 4, 8, 16, 32
  Level clip_dense;
};

// Five 3x3 stride-2 convolutions (clamp padding, ReLU). Channels 0..3 of
// every stage are initialized to carry local averages of [r, g, b, 1], so
// the fixed clip_dense projection (select channels 0..3) lands in the toy
// text-encoder space: a pure-color region mask-pools to the text embedding
// of its color word. Training with an unfrozen backbone perturbs the carry
// and degrades that alignment, which is the ablation arm.
class ToyBackbone {
 public:
  static constexpr int kEmbedDim = 4;
  static constexpr std::array<int, 5> kChannels = {8, 8, 16, 24, 32};

  // Registers backbone.* parameters (idempotent per store).
  static void init_params(ParamStore& store, std::mt19937_64& rng);

  // Graph forward; h and w must be divisible by 32.
  static FeaturePyramidNodes forward(ag::Graph& g, GraphBinding& bind, const Image& image);

  // Convenience value forward for inference/visualization.
  static FeaturePyramid forward_values(ParamStore& store, const Image& image);

  // Flips the optimizer-visibility of backbone.* parameters.
  static void set_frozen(ParamStore& store, bool frozen);
  static bool is_frozen(const ParamStore& store);

  static uint64_t checksum(const ParamStore& store) { return store.checksum("backbone."); }
};

// Seeded k-means++ over the channel vectors of a feature map; iteration
// cap 100, tolerance 1e-4 on centroid movement. Returns per-pixel labels.
std::vector<int> kmeans_feature_map(const Grid& level, int k, uint64_t seed);

}  // namespace ovseg
