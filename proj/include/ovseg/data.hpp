// Copyright 2026 The ovseg Authors.
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "ovseg/types.hpp"
#include "ovseg/vocab.hpp"

#include <string>
#include <vector>

namespace ovseg {

struct Sample {
  Image image;
  PanopticMap gt;  // segment categories index the dataset's category list
};

struct Dataset {
  std::vector<Category> categories;
  std::vector<Sample> samples;
};

// Category layout of the synthetic color world: train stuff, train
// things, held-out stuff, held-out things — so the training vocabulary is
// a prefix and ids stay valid across both vocabularies.
struct ColorWorldSpec {
  std::vector<std::string> train_stuff = {"gray"};
  std::vector<std::string> train_things = {"red", "green", "blue", "yellow", "cyan"};
  std::vector<std::string> heldout_stuff = {"white"};
  std::vector<std::string> heldout_things = {"magenta", "orange"};

  int train_color_count() const {
    return static_cast<int>(train_stuff.size() + train_things.size());
  }
};

std::vector<Category> color_world_categories(const ColorWorldSpec& spec);

// Deterministic scene generation. `include_heldout` controls whether
// held-out colors may appear (the open-vocabulary eval split mixes both).
Dataset generate_color_world(uint64_t seed, int count, const ColorWorldSpec& spec,
                             bool include_heldout, int size = 64);

// COCO-panoptic-style layout: <dir>/images/*.png, <dir>/panoptic/*.png
// (RGB-encoded segment ids), <dir>/annotations.json.
void save_coco_panoptic(const Dataset& ds, const std::string& dir);
Dataset load_coco_panoptic(const std::string& images_dir, const std::string& annotations_file);

}  // namespace ovseg
