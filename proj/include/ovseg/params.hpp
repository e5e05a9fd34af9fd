// Copyright 2026 The ovseg Authors.
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "ovseg/autodiff.hpp"
#include "ovseg/types.hpp"

#include <map>
#include <random>
#include <string>
#include <vector>

namespace ovseg {

struct Param {
  Mat value;
  Mat grad;
  bool trainable = true;
};

// Named parameter registry shared by backbone, decoder, and heads.
class ParamStore {
 public:
  Param& create(const std::string& name, int rows, int cols, bool trainable = true);
  Param& at(const std::string& name);
  const Param& at(const std::string& name) const;
  bool has(const std::string& name) const { return params_.count(name) != 0; }

  void zero_grads();
  std::vector<std::string> names() const;

  // FNV-1a over raw value bytes of parameters whose name starts with `prefix`.
  uint64_t checksum(const std::string& prefix = "") const;

  void save(const std::string& path, const std::string& meta_json) const;
  // Returns the stored meta string; creates params as needed.
  std::string load(const std::string& path);

 private:
  std::map<std::string, Param> params_;
};

// Binds graph leaves to store parameters for one forward/backward pass.
class GraphBinding {
 public:
  GraphBinding(ag::Graph& g, ParamStore& store, bool backbone_frozen)
      : graph_(g), store_(store), backbone_frozen_(backbone_frozen) {}

  // Leaf node for a named parameter; gradient tracking follows the
  // trainable flag (backbone.* leaves are constants when frozen).
  ag::Node* operator()(const std::string& name);

  // Copies accumulated node grads back into the store (+=).
  void flush_grads();

  bool backbone_frozen() const { return backbone_frozen_; }

 private:
  ag::Graph& graph_;
  ParamStore& store_;
  bool backbone_frozen_;
  std::vector<std::pair<ag::Node*, Param*>> bound_;
};

struct AdamWConfig {
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.05;
};

class AdamW {
 public:
  explicit AdamW(AdamWConfig cfg) : cfg_(cfg) {}

  // One update over every trainable parameter with an accumulated grad.
  void step(ParamStore& store, double lr_scale = 1.0);

 private:
  AdamWConfig cfg_;
  int t_ = 0;
  std::map<std::string, std::pair<Mat, Mat>> moments_;
};

// Xavier-uniform init helper, deterministic in the passed engine.
void xavier_init(Mat& m, std::mt19937_64& rng);

}  // namespace ovseg
