// Copyright 2026 The ovseg Authors.
// SPDX-License-Identifier: Apache-2.0
#include "ovseg/backbone.hpp"

#include "ovseg/classifiers.hpp"
#include "ovseg/vocab.hpp"

#include <doctest.h>

#include <random>

using namespace ovseg;

namespace {

Image uniform_image(int h, int w, double r, double g, double b) {
  Image img(h, w);
  for (int p = 0; p < h * w; ++p) {
    img.pixels(p, 0) = r;
    img.pixels(p, 1) = g;
    img.pixels(p, 2) = b;
  }
  return img;
}

ParamStore make_store(uint64_t seed) {
  ParamStore store;
  std::mt19937_64 rng(seed);
  ToyBackbone::init_params(store, rng);
  return store;
}

double wcss(const Grid& g, const std::vector<int>& labels, int k) {
  double total = 0.0;
  for (int c = 0; c < k; ++c) {
    Vec centroid = Vec::Zero(g.channels());
    int n = 0;
    for (int p = 0; p < g.pixels(); ++p)
      if (labels[p] == c) {
        centroid += g.data.row(p).transpose();
        ++n;
      }
    if (n == 0) continue;
    centroid /= n;
    for (int p = 0; p < g.pixels(); ++p)
      if (labels[p] == c) total += (g.data.row(p).transpose() - centroid).squaredNorm();
  }
  return total;
}

}  // namespace

TEST_CASE("pyramid shapes follow stride arithmetic for 64x64 input") {
  ParamStore store = make_store(1);
  FeaturePyramid pyr = ToyBackbone::forward_values(store, uniform_image(64, 64, 0.2, 0.4, 0.6));
  REQUIRE(pyr.levels.size() == 4);
  int expect_h[4] = {16, 8, 4, 2};
  for (int i = 0; i < 4; ++i) {
    CHECK(pyr.levels[i].h == expect_h[i]);
    CHECK(pyr.levels[i].w == expect_h[i]);
  }
  CHECK(pyr.clip_dense.h == 2);
  CHECK(pyr.clip_dense.w == 2);
  CHECK(pyr.clip_dense.channels() == ToyBackbone::kEmbedDim);
}

TEST_CASE("pyramid shape contract holds for non-square sizes") {
  ParamStore store = make_store(2);
  FeaturePyramid pyr = ToyBackbone::forward_values(store, uniform_image(96, 64, 0.1, 0.1, 0.1));
  CHECK(pyr.levels[0].h == 24);
  CHECK(pyr.levels[0].w == 16);
  CHECK(pyr.levels[3].h == 3);
  CHECK(pyr.levels[3].w == 2);
}

TEST_CASE("input size not divisible by 32 is rejected") {
  ParamStore store = make_store(3);
  CHECK_THROWS(ToyBackbone::forward_values(store, uniform_image(60, 64, 0, 0, 0)));
}

TEST_CASE("pure color images mask-pool to their color-word embeddings") {
  ParamStore store = make_store(4);
  ToyColorTextEncoder enc(0);
  for (const char* word : {"red", "green", "blue", "magenta", "white"}) {
    Eigen::Vector3d rgb = ToyColorTextEncoder::color_rgb(word);
    FeaturePyramid pyr =
        ToyBackbone::forward_values(store, uniform_image(64, 64, rgb(0), rgb(1), rgb(2)));
    Mat full_mask = Mat::Constant(1, pyr.clip_dense.pixels(), 10.0);
    Mat pooled = mask_pool(pyr.clip_dense, full_mask, pyr.clip_dense.h, pyr.clip_dense.w);
    Vec text = enc.embed(word);
    double cosine = pooled.row(0).dot(text.transpose()) /
                    std::max(pooled.row(0).norm(), 1e-12);
    CHECK(cosine >= 0.9);
  }
}

TEST_CASE("features inside a region are local to it (receptive field permitting)") {
  ParamStore store = make_store(5);
  Image a = uniform_image(64, 64, 0.8, 0.1, 0.1);
  Image b = a;
  // Differ only in the right half of the input.
  for (int y = 0; y < 64; ++y)
    for (int x = 32; x < 64; ++x) {
      b.pixels(y * 64 + x, 0) = 0.0;
      b.pixels(y * 64 + x, 2) = 0.9;
    }
  FeaturePyramid pa = ToyBackbone::forward_values(store, a);
  FeaturePyramid pb = ToyBackbone::forward_values(store, b);
  // Stride-4 features (receptive field radius < 4 pixels per output unit
  // at this level): columns well inside the identical half must match.
  const Grid& ga = pa.levels[0];
  const Grid& gb = pb.levels[0];
  for (int y = 0; y < ga.h; ++y)
    for (int x = 0; x < 5; ++x)
      CHECK((ga.data.row(y * ga.w + x) - gb.data.row(y * gb.w + x)).cwiseAbs().maxCoeff() <
            1e-12);
}

TEST_CASE("set_frozen toggles only backbone parameters") {
  ParamStore store = make_store(6);
  store.create("head.cls.w", 3, 3, true);
  ToyBackbone::set_frozen(store, true);
  CHECK(ToyBackbone::is_frozen(store));
  for (const auto& name : store.names()) {
    if (name.rfind("backbone.", 0) == 0)
      CHECK(!store.at(name).trainable);
    else
      CHECK(store.at(name).trainable);
  }
  ToyBackbone::set_frozen(store, false);
  for (const auto& name : store.names()) CHECK(store.at(name).trainable);
}

TEST_CASE("kmeans: constant map with k=1 labels everything 0") {
  Grid g(4, 4, 3);
  g.data.setConstant(0.7);
  std::vector<int> labels = kmeans_feature_map(g, 1, 9);
  for (int l : labels) CHECK(l == 0);
}

TEST_CASE("kmeans: two separable constant regions split exactly at the boundary") {
  Grid g(4, 8, 2);
  for (int y = 0; y < 4; ++y)
    for (int x = 0; x < 8; ++x) {
      g.data(y * 8 + x, 0) = x < 4 ? 0.0 : 5.0;
      g.data(y * 8 + x, 1) = x < 4 ? 1.0 : -1.0;
    }
  std::vector<int> labels = kmeans_feature_map(g, 2, 123);
  int left = labels[0], right = labels[7];
  CHECK(left != right);
  for (int y = 0; y < 4; ++y)
    for (int x = 0; x < 8; ++x) CHECK(labels[y * 8 + x] == (x < 4 ? left : right));
}

TEST_CASE("kmeans beats 20 random assignments on a random 8x8x4 map") {
  Grid g(8, 8, 4);
  std::mt19937_64 rng(77);
  std::normal_distribution<double> d(0.0, 1.0);
  for (int p = 0; p < 64; ++p)
    for (int c = 0; c < 4; ++c) g.data(p, c) = d(rng);
  const int k = 3;
  std::vector<int> labels = kmeans_feature_map(g, k, 5);
  double ours = wcss(g, labels, k);
  std::uniform_int_distribution<int> pick(0, k - 1);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<int> rand_labels(64);
    for (int p = 0; p < 64; ++p) rand_labels[p] = pick(rng);
    CHECK(ours <= wcss(g, rand_labels, k) + 1e-9);
  }
}

TEST_CASE("kmeans is deterministic under a fixed seed and validates k") {
  Grid g(4, 4, 2);
  g.data.setRandom();
  CHECK(kmeans_feature_map(g, 3, 42) == kmeans_feature_map(g, 3, 42));
  CHECK_THROWS(kmeans_feature_map(g, 0, 1));
  CHECK_THROWS(kmeans_feature_map(g, 17, 1));  // k > pixel count
}

TEST_CASE("graph forward and value forward agree") {
  ParamStore store = make_store(8);
  Image img = uniform_image(64, 64, 0.3, 0.6, 0.9);
  FeaturePyramid values = ToyBackbone::forward_values(store, img);
  ag::Graph g;
  GraphBinding bind(g, store, /*backbone_frozen=*/true);
  FeaturePyramidNodes nodes = ToyBackbone::forward(g, bind, img);
  for (int i = 0; i < 4; ++i)
    CHECK((nodes.levels[i].node->val - values.levels[i].data).cwiseAbs().maxCoeff() < 1e-12);
  CHECK((nodes.clip_dense.node->val - values.clip_dense.data).cwiseAbs().maxCoeff() < 1e-12);
}
