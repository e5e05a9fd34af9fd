// Copyright 2026 The ovseg Authors.
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "ovseg/data.hpp"
#include "ovseg/inference.hpp"
#include "ovseg/trainer.hpp"

#include <nlohmann/json.hpp>

#include <string>
#include <vector>

namespace ovseg {

// Resolved run configuration with provenance: the JSON snapshot carries
// the config file contents plus any key=value overrides (overrides win).
struct RunConfig {
  ModelConfig model;
  struct DataConfig {
    bool synthetic = true;
    std::string dataset_dir;  // required when synthetic = false
    int train_count = 512;
    int eval_count = 128;
    int size = 64;
    uint64_t seed = 0;
    ColorWorldSpec colors;
  } data;
  TrainConfig training;
  EnsembleParams ensemble;
  MergeThresholds merge;
  std::vector<std::string> templates = {"{}", "a photo of a {} object"};
  int eval_short_side = 64;

  nlohmann::json snapshot;  // resolved JSON, written next to outputs
};

// Throws std::invalid_argument with a field-level message on bad input.
RunConfig parse_run_config(const nlohmann::json& j);
RunConfig load_run_config(const std::string& path, const std::vector<std::string>& overrides);
RunConfig default_run_config();
void save_config_snapshot(const RunConfig& cfg, const std::string& path);

// Applies "a.b.c=value" to a JSON document (value parsed as JSON when
// possible, else taken as a string).
void apply_override(nlohmann::json& j, const std::string& override_expr);

}  // namespace ovseg
