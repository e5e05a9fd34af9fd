// Copyright 2026 The ovseg Authors.
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "ovseg/types.hpp"

#include <memory>
#include <string>
#include <vector>

namespace ovseg {

struct Category {
  int id = 0;
  std::vector<std::string> names;  // synonyms, nonempty
  bool is_thing = false;
};

// Deterministic text embedding source. Same string always yields the
// same vector.
class TextEncoder {
 public:
  virtual ~TextEncoder() = default;
  virtual Vec embed(const std::string& name) const = 0;
  virtual int dim() const = 0;
};

// Maps known color words to unit vectors proportional to [r, g, b, 1];
// unknown words get a seeded hash-derived unit vector. This gives a
// fully offline image/text pair aligned with the toy backbone.
class ToyColorTextEncoder : public TextEncoder {
 public:
  explicit ToyColorTextEncoder(uint64_t seed = 0);
  Vec embed(const std::string& name) const override;
  int dim() const override { return 4; }

  // RGB triple of a known color word; throws for unknown words.
  static Eigen::Vector3d color_rgb(const std::string& word);
  static bool is_known_color(const std::string& word);

 private:
  uint64_t seed_;
};

struct Vocabulary {
  std::vector<Category> categories;
  Mat embeddings;                // |C| x D, unit-norm rows
  std::vector<bool> seen_mask;   // length |C|

  int size() const { return static_cast<int>(categories.size()); }
  int dim() const { return static_cast<int>(embeddings.cols()); }
};

// lowercase, trim, collapse internal whitespace, strip punctuation
std::string normalize_name(const std::string& s);

// Embedding of category j = L2-normalized flat mean over all
// (template x synonym) encoder outputs. Templates carry one `{}`.
Vocabulary build_vocabulary(const std::vector<Category>& categories,
                            const TextEncoder& encoder,
                            const std::vector<std::string>& templates);

// Entry j is true iff any normalized synonym of test category j equals
// any normalized synonym of any train category.
std::vector<bool> partition_seen_unseen(const Vocabulary& test_vocab,
                                        const Vocabulary& train_vocab);

// Vocabulary file: JSON array of {id, names: "a, b", is_thing}.
std::vector<Category> load_categories(const std::string& path);
void save_categories(const std::vector<Category>& cats, const std::string& path);

// Template file: one template per line, `{}` placeholder; blank lines
// and #-comments skipped.
std::vector<std::string> load_templates(const std::string& path);

}  // namespace ovseg
