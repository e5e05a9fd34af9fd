// Copyright 2026 The ovseg Authors.
// SPDX-License-Identifier: Apache-2.0
#include "ovseg/backbone.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <memory>
#include <mutex>

namespace ovseg {

namespace {

// Patch plan for a 3x3 stride-2 convolution with clamp padding.
std::shared_ptr<const std::vector<int>> conv_plan(int h, int w) {
  static std::map<std::pair<int, int>, std::shared_ptr<const std::vector<int>>> cache;
  static std::mutex mu;
  std::lock_guard<std::mutex> lock(mu);
  auto key = std::make_pair(h, w);
  auto it = cache.find(key);
  if (it != cache.end()) return it->second;
  const int oh = (h + 1) / 2, ow = (w + 1) / 2;
  auto idx = std::make_shared<std::vector<int>>();
  idx->reserve(static_cast<size_t>(oh) * ow * 9);
  for (int oy = 0; oy < oh; ++oy)
    for (int ox = 0; ox < ow; ++ox)
      for (int ky = -1; ky <= 1; ++ky)
        for (int kx = -1; kx <= 1; ++kx) {
          int y = std::clamp(oy * 2 + ky, 0, h - 1);
          int x = std::clamp(ox * 2 + kx, 0, w - 1);
          idx->push_back(y * w + x);
        }
  cache[key] = idx;
  return idx;
}

ag::Node* conv3x3_s2_relu(ag::Graph& g, GraphBinding& bind, ag::Node* in, int h, int w,
                          const std::string& name) {
  ag::Node* patches = ag::gather_patches(in, conv_plan(h, w), 9);
  ag::Node* lin = ag::add_row_broadcast(ag::matmul(patches, bind(name + ".w")), bind(name + ".b"));
  return ag::relu(lin);
}

}  // namespace

void ToyBackbone::init_params(ParamStore& store, std::mt19937_64& rng) {
  if (store.has("backbone.conv0.w")) return;
  int cin = 3;
  for (int s = 0; s < 5; ++s) {
    const int cout = kChannels[s];
    std::string name = "backbone.conv" + std::to_string(s);
    Param& w = store.create(name + ".w", 9 * cin, cout);
    Param& b = store.create(name + ".b", 1, cout);
    xavier_init(w.value, rng);
    b.value.setZero();
    // Carry construction: output channel i < 4 averages input channel i
    // over the 3x3 patch. Stage 0 has only rgb inputs; channel 3 is a
    // constant-one plane supplied by the bias.
    const int carry_in = (s == 0) ? 3 : 4;
    for (int i = 0; i < 4; ++i) {
      w.value.col(i).setZero();
      if (i < carry_in)
        for (int t = 0; t < 9; ++t) w.value(t * cin + i, i) = 1.0 / 9.0;
    }
    if (s == 0) b.value(0, 3) = 1.0;
    cin = cout;
  }
}

FeaturePyramidNodes ToyBackbone::forward(ag::Graph& g, GraphBinding& bind, const Image& image) {
  if (image.h % 32 != 0 || image.w % 32 != 0)
    throw std::invalid_argument("backbone input size must be divisible by 32");
  FeaturePyramidNodes out;
  ag::Node* x = g.leaf(image.pixels, false);
  int h = image.h, w = image.w;
  for (int s = 0; s < 5; ++s) {
    x = conv3x3_s2_relu(g, bind, x, h, w, "backbone.conv" + std::to_string(s));
    h = (h + 1) / 2;
    w = (w + 1) / 2;
    if (s >= 1) out.levels[s - 1] = {x, h, w};
  }
  // Fixed joint-space projection: select the carry channels.
  Mat proj = Mat::Zero(kChannels[4], kEmbedDim);
  proj.topLeftCorner(kEmbedDim, kEmbedDim).setIdentity();
  out.clip_dense = {ag::matmul(x, g.leaf(proj, false)), h, w};
  return out;
}

FeaturePyramid ToyBackbone::forward_values(ParamStore& store, const Image& image) {
  ag::Graph g;
  GraphBinding bind(g, store, /*backbone_frozen=*/true);
  FeaturePyramidNodes nodes = forward(g, bind, image);
  FeaturePyramid pyr;
  pyr.levels.resize(4);
  for (int i = 0; i < 4; ++i) {
    pyr.levels[i].h = nodes.levels[i].h;
    pyr.levels[i].w = nodes.levels[i].w;
    pyr.levels[i].data = nodes.levels[i].node->val;
  }
  pyr.clip_dense.h = nodes.clip_dense.h;
  pyr.clip_dense.w = nodes.clip_dense.w;
  pyr.clip_dense.data = nodes.clip_dense.node->val;
  return pyr;
}

void ToyBackbone::set_frozen(ParamStore& store, bool frozen) {
  for (const auto& name : store.names())
    if (name.rfind("backbone.", 0) == 0) store.at(name).trainable = !frozen;
}

bool ToyBackbone::is_frozen(const ParamStore& store) {
  return !store.at("backbone.conv0.w").trainable;
}

std::vector<int> kmeans_feature_map(const Grid& level, int k, uint64_t seed) {
  const int n = level.pixels();
  const int d = level.channels();
  if (k < 1) throw std::invalid_argument("k must be >= 1");
  if (k > n) throw std::invalid_argument("k exceeds pixel count");
  std::mt19937_64 rng(seed);

  // k-means++ seeding
  Mat centroids(k, d);
  std::uniform_int_distribution<int> uni(0, n - 1);
  centroids.row(0) = level.data.row(uni(rng));
  Vec d2 = (level.data.rowwise() - centroids.row(0)).rowwise().squaredNorm();
  for (int c = 1; c < k; ++c) {
    double total = d2.sum();
    int pick = 0;
    if (total <= 0) {
      pick = uni(rng);
    } else {
      std::uniform_real_distribution<double> ur(0.0, total);
      double r = ur(rng), acc = 0.0;
      for (int i = 0; i < n; ++i) {
        acc += d2(i);
        if (acc >= r) {
          pick = i;
          break;
        }
      }
    }
    centroids.row(c) = level.data.row(pick);
    d2 = d2.cwiseMin((level.data.rowwise() - centroids.row(c)).rowwise().squaredNorm());
  }

  std::vector<int> labels(n, 0);
  for (int iter = 0; iter < 100; ++iter) {
    for (int i = 0; i < n; ++i) {
      double best = std::numeric_limits<double>::max();
      for (int c = 0; c < k; ++c) {
        double dist = (level.data.row(i) - centroids.row(c)).squaredNorm();
        if (dist < best) {
          best = dist;
          labels[i] = c;
        }
      }
    }
    Mat next = Mat::Zero(k, d);
    std::vector<int> counts(k, 0);
    for (int i = 0; i < n; ++i) {
      next.row(labels[i]) += level.data.row(i);
      ++counts[labels[i]];
    }
    double movement = 0.0;
    for (int c = 0; c < k; ++c) {
      if (counts[c] == 0) {
        next.row(c) = centroids.row(c);  // keep empty clusters in place
      } else {
        next.row(c) /= counts[c];
      }
      movement = std::max(movement, (next.row(c) - centroids.row(c)).norm());
    }
    centroids = next;
    if (movement < 1e-4) break;
  }
  return labels;
}

}  // namespace ovseg
