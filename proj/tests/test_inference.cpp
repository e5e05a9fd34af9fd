// Copyright 2026 The ovseg Authors.
// SPDX-License-Identifier: Apache-2.0
#include "ovseg/inference.hpp"

#include <doctest.h>

#include <random>

using namespace ovseg;

namespace {

Vocabulary make_vocab(std::vector<bool> is_thing) {
  Vocabulary v;
  int n = static_cast<int>(is_thing.size());
  v.embeddings = Mat::Identity(n, n);
  for (int j = 0; j < n; ++j)
    v.categories.push_back({j, {"c" + std::to_string(j)}, is_thing[j]});
  v.seen_mask.assign(n, true);
  return v;
}

// Hard rectangular mask logits over a g h x w grid.
void set_rect(Mat& logits, int row, int h, int w, int y0, int y1, int x0, int x1) {
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      logits(row, y * w + x) = (y >= y0 && y < y1 && x >= x0 && x < x1) ? 50.0 : -50.0;
}

}  // namespace

TEST_CASE("merge: two disjoint high-confidence proposals both survive") {
  const int h = 8, w = 8;
  Mat logits(2, h * w);
  set_rect(logits, 0, h, w, 0, 8, 0, 4);
  set_rect(logits, 1, h, w, 0, 8, 4, 8);
  Mat scores(2, 2);
  scores << 0.9, 0.05, 0.05, 0.8;
  Vocabulary vocab = make_vocab({true, true});
  PanopticMap out = merge(logits, h, w, scores, vocab, MergeThresholds(), h, w);
  CHECK(out.well_formed());
  REQUIRE(out.segments.size() == 2);
  CHECK(out.segments.at(1).category == 0);
  CHECK(out.segments.at(2).category == 1);
  CHECK(out.ids(0, 0) == 1);
  CHECK(out.ids(0, 7) == 2);
}

TEST_CASE("merge: the lower-scoring of two identical proposals is dropped") {
  const int h = 4, w = 4;
  Mat logits(2, h * w);
  set_rect(logits, 0, h, w, 0, 4, 0, 4);
  set_rect(logits, 1, h, w, 0, 4, 0, 4);
  Mat scores(2, 1);
  scores << 0.9, 0.6;
  Vocabulary vocab = make_vocab({true});
  PanopticMap out = merge(logits, h, w, scores, vocab, MergeThresholds(), h, w);
  REQUIRE(out.segments.size() == 1);
  CHECK(out.segments.begin()->second.score == doctest::Approx(0.9));
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) CHECK(out.ids(y, x) == out.segments.begin()->first);
}

TEST_CASE("merge: equal scores tie-break toward the lower proposal index") {
  const int h = 4, w = 4;
  Mat logits(2, h * w);
  set_rect(logits, 0, h, w, 0, 4, 0, 4);
  set_rect(logits, 1, h, w, 0, 4, 0, 4);
  Mat scores(2, 2);
  scores << 0.7, 0.0, 0.0, 0.7;
  Vocabulary vocab = make_vocab({true, true});
  PanopticMap out = merge(logits, h, w, scores, vocab, MergeThresholds(), h, w);
  REQUIRE(out.segments.size() == 1);
  CHECK(out.segments.begin()->second.category == 0);
}

TEST_CASE("merge: all scores below the object threshold yields an all-void map") {
  const int h = 4, w = 4;
  Mat logits(2, h * w);
  set_rect(logits, 0, h, w, 0, 4, 0, 4);
  set_rect(logits, 1, h, w, 0, 2, 0, 2);
  Mat scores = Mat::Constant(2, 3, 0.05);
  Vocabulary vocab = make_vocab({true, true, false});
  PanopticMap out = merge(logits, h, w, scores, vocab, MergeThresholds(), h, w);
  CHECK(out.segments.empty());
  CHECK((out.ids.array() == 0).all());
}

TEST_CASE("merge: stuff segments of the same class fuse into one id") {
  const int h = 4, w = 8;
  Mat logits(2, h * w);
  set_rect(logits, 0, h, w, 0, 4, 0, 3);
  set_rect(logits, 1, h, w, 0, 4, 5, 8);
  Mat scores(2, 1);
  scores << 0.9, 0.8;
  Vocabulary vocab = make_vocab({false});
  PanopticMap out = merge(logits, h, w, scores, vocab, MergeThresholds(), h, w);
  REQUIRE(out.segments.size() == 1);
  int id = out.segments.begin()->first;
  CHECK(out.ids(0, 0) == id);
  CHECK(out.ids(0, 7) == id);
  CHECK(out.ids(0, 4) == 0);
}

TEST_CASE("merge output is well-formed on 200 random proposal/score sets") {
  std::mt19937_64 rng(4242);
  std::normal_distribution<double> logit(0.0, 4.0);
  std::uniform_real_distribution<double> sc(0.0, 1.0);
  Vocabulary vocab = make_vocab({true, true, false, false});
  for (int trial = 0; trial < 200; ++trial) {
    int n = 1 + trial % 6;
    Mat logits(n, 8 * 8);
    Mat scores(n, 4);
    for (int i = 0; i < n; ++i) {
      for (int p = 0; p < 64; ++p) logits(i, p) = logit(rng);
      for (int j = 0; j < 4; ++j) scores(i, j) = sc(rng);
    }
    PanopticMap out = merge(logits, 8, 8, scores, vocab, MergeThresholds(), 16, 16);
    CHECK(out.well_formed());
    CHECK(out.h == 16);
    CHECK(out.w == 16);
    // Stuff fusion invariant: at most one segment per stuff category.
    std::map<int, int> stuff_count;
    for (const auto& [id, info] : out.segments)
      if (!info.is_thing) ++stuff_count[info.category];
    for (const auto& [c, cnt] : stuff_count) CHECK(cnt == 1);
  }
}

TEST_CASE("semantic_map: single all-covering proposal with a one-hot row") {
  Mat logits = Mat::Constant(1, 16, 50.0);
  Mat scores(1, 3);
  scores << 0.0, 1.0, 0.0;
  std::vector<int> sem = semantic_map(logits, 4, 4, scores, 4, 4);
  for (int v : sem) CHECK(v == 1);
}

TEST_CASE("semantic_map: disjoint hard masks with distinct one-hot rows") {
  const int h = 4, w = 4;
  Mat logits(2, h * w);
  set_rect(logits, 0, h, w, 0, 4, 0, 2);
  set_rect(logits, 1, h, w, 0, 4, 2, 4);
  Mat scores(2, 2);
  scores << 1.0, 0.0, 0.0, 1.0;
  std::vector<int> sem = semantic_map(logits, h, w, scores, h, w);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) CHECK(sem[y * w + x] == (x < 2 ? 0 : 1));
}

TEST_CASE("semantic_map matches the per-pixel brute-force oracle on random 8x8 inputs") {
  std::mt19937_64 rng(77);
  std::normal_distribution<double> d(0.0, 2.0);
  std::uniform_real_distribution<double> sc(0.0, 1.0);
  for (int trial = 0; trial < 25; ++trial) {
    const int n = 3, c = 4, h = 8, w = 8;
    Mat logits(n, h * w);
    Mat scores(n, c);
    for (int i = 0; i < n; ++i) {
      for (int p = 0; p < h * w; ++p) logits(i, p) = d(rng);
      for (int j = 0; j < c; ++j) scores(i, j) = sc(rng);
    }
    std::vector<int> sem = semantic_map(logits, h, w, scores, h, w);
    for (int p = 0; p < h * w; ++p) {
      int best = -1;
      double best_v = -1;
      for (int j = 0; j < c; ++j) {
        double v = 0;
        for (int i = 0; i < n; ++i) v += scores(i, j) * sigmoid(logits(i, p));
        if (v > best_v) {
          best_v = v;
          best = j;
        }
      }
      CHECK(sem[p] == best);
    }
  }
}

TEST_CASE("instances_from_proposals keeps things only, with argmax class") {
  const int h = 4, w = 4;
  Mat logits(2, h * w);
  set_rect(logits, 0, h, w, 0, 4, 0, 2);
  set_rect(logits, 1, h, w, 0, 4, 2, 4);
  Mat scores(2, 2);
  scores << 0.8, 0.1, 0.1, 0.9;
  Vocabulary vocab = make_vocab({true, false});
  InstanceList inst = instances_from_proposals(logits, h, w, scores, vocab, 0.25, h, w);
  REQUIRE(inst.size() == 1);  // proposal 1's argmax is a stuff class
  CHECK(inst[0].category == 0);
  CHECK(inst[0].score == doctest::Approx(0.8));
  CHECK(inst[0].mask[0] == true);
  CHECK(inst[0].mask[3] == false);
}

TEST_CASE("resize_for_inference: short side target, long cap, multiples of 32") {
  Image img(100, 200);
  img.pixels.setConstant(0.5);
  Image out = resize_for_inference(img, 64);
  CHECK(out.h % 32 == 0);
  CHECK(out.w % 32 == 0);
  CHECK(out.h == 64);
  CHECK(out.w == 128);

  Image wide(64, 6400);
  wide.pixels = Mat::Constant(64 * 6400, 3, 0.2);
  Image capped = resize_for_inference(wide, 64, 1333);
  CHECK(capped.w <= 1333);
  CHECK(capped.w % 32 == 0);
}
