// Copyright 2026 The ovseg Authors.
// SPDX-License-Identifier: Apache-2.0
#include "ovseg/config.hpp"

#include <algorithm>
#include <fstream>
#include <stdexcept>

namespace ovseg {

namespace {

using nlohmann::json;

[[noreturn]] void fail(const std::string& field, const std::string& what) {
  throw std::invalid_argument("config: " + field + " " + what);
}

template <typename T>
void get(const json& j, const std::string& section, const char* key, T& out) {
  if (!j.contains(key)) return;
  const std::string field = section.empty() ? key : section + "." + key;
  try {
    out = j.at(key).get<T>();
  } catch (const json::exception&) {
    fail(field, "has the wrong type");
  }
}

void require_positive(int v, const std::string& field) {
  if (v <= 0) fail(field, "must be positive");
}

void require_positive(double v, const std::string& field) {
  if (!(v > 0.0)) fail(field, "must be positive");
}

void require_unit(double v, const std::string& field) {
  if (!(v >= 0.0 && v <= 1.0)) fail(field, "must be in [0, 1]");
}

}  // namespace

void apply_override(json& j, const std::string& expr) {
  auto eq = expr.find('=');
  if (eq == std::string::npos || eq == 0)
    throw std::invalid_argument("override must look like key.path=value: " + expr);
  std::string path = expr.substr(0, eq);
  std::string value = expr.substr(eq + 1);

  json* node = &j;
  size_t pos = 0;
  while (true) {
    size_t dot = path.find('.', pos);
    std::string key = path.substr(pos, dot == std::string::npos ? dot : dot - pos);
    if (key.empty()) throw std::invalid_argument("bad override key: " + path);
    if (dot == std::string::npos) {
      json parsed = json::parse(value, nullptr, false);
      (*node)[key] = parsed.is_discarded() ? json(value) : parsed;
      return;
    }
    node = &(*node)[key];
    pos = dot + 1;
  }
}

RunConfig parse_run_config(const json& j) {
  if (!j.is_object()) fail("<root>", "must be a JSON object");
  RunConfig cfg;

  if (j.contains("model")) {
    const json& m = j.at("model");
    get(m, "model", "n_queries", cfg.model.n_queries);
    get(m, "model", "query_dim", cfg.model.query_dim);
    get(m, "model", "pixel_decoder_layers", cfg.model.pixel_decoder_layers);
    get(m, "model", "mask_decoder_layers", cfg.model.mask_decoder_layers);
    get(m, "model", "ffn_dim", cfg.model.ffn_dim);
    get(m, "model", "t_out", cfg.model.t_out);
    require_positive(cfg.model.n_queries, "model.n_queries");
    require_positive(cfg.model.query_dim, "model.query_dim");
    require_positive(cfg.model.pixel_decoder_layers, "model.pixel_decoder_layers");
    require_positive(cfg.model.mask_decoder_layers, "model.mask_decoder_layers");
    require_positive(cfg.model.ffn_dim, "model.ffn_dim");
    require_positive(cfg.model.t_out, "model.t_out");
  }

  if (j.contains("data")) {
    const json& d = j.at("data");
    get(d, "data", "synthetic", cfg.data.synthetic);
    get(d, "data", "dataset_dir", cfg.data.dataset_dir);
    get(d, "data", "train_count", cfg.data.train_count);
    get(d, "data", "eval_count", cfg.data.eval_count);
    get(d, "data", "size", cfg.data.size);
    get(d, "data", "seed", cfg.data.seed);
    if (d.contains("colors")) {
      const json& c = d.at("colors");
      get(c, "data.colors", "train_stuff", cfg.data.colors.train_stuff);
      get(c, "data.colors", "train_things", cfg.data.colors.train_things);
      get(c, "data.colors", "heldout_stuff", cfg.data.colors.heldout_stuff);
      get(c, "data.colors", "heldout_things", cfg.data.colors.heldout_things);
    }
    require_positive(cfg.data.train_count, "data.train_count");
    require_positive(cfg.data.eval_count, "data.eval_count");
    if (cfg.data.size < 32 || cfg.data.size % 32 != 0)
      fail("data.size", "must be a positive multiple of 32");
    if (!cfg.data.synthetic && cfg.data.dataset_dir.empty())
      fail("data.dataset_dir", "is required when data.synthetic is false");
  }

  if (j.contains("training")) {
    const json& t = j.at("training");
    get(t, "training", "epochs", cfg.training.epochs);
    get(t, "training", "batch_size", cfg.training.batch_size);
    get(t, "training", "lr", cfg.training.lr);
    get(t, "training", "weight_decay", cfg.training.weight_decay);
    get(t, "training", "milestones", cfg.training.milestones);
    get(t, "training", "lr_gamma", cfg.training.lr_gamma);
    get(t, "training", "seed", cfg.training.seed);
    get(t, "training", "freeze_backbone", cfg.training.freeze_backbone);
    get(t, "training", "checkpoint_every", cfg.training.checkpoint_every);
    if (t.contains("loss_weights")) {
      const json& w = t.at("loss_weights");
      get(w, "training.loss_weights", "cls", cfg.training.loss_weights.cls);
      get(w, "training.loss_weights", "bce", cfg.training.loss_weights.bce);
      get(w, "training.loss_weights", "dice", cfg.training.loss_weights.dice);
    }
    require_positive(cfg.training.epochs, "training.epochs");
    require_positive(cfg.training.batch_size, "training.batch_size");
    require_positive(cfg.training.lr, "training.lr");
    if (cfg.training.weight_decay < 0.0) fail("training.weight_decay", "must be >= 0");
    require_unit(cfg.training.lr_gamma, "training.lr_gamma");
    for (double m : cfg.training.milestones) require_unit(m, "training.milestones");
    if (cfg.training.checkpoint_every < 0) fail("training.checkpoint_every", "must be >= 0");
  }

  if (j.contains("ensemble")) {
    const json& e = j.at("ensemble");
    get(e, "ensemble", "alpha", cfg.ensemble.alpha);
    get(e, "ensemble", "beta", cfg.ensemble.beta);
    std::string method = cfg.ensemble.method == EnsembleMethod::kGeometric ? "geometric"
                                                                           : "arithmetic";
    get(e, "ensemble", "method", method);
    if (method == "geometric") {
      cfg.ensemble.method = EnsembleMethod::kGeometric;
    } else if (method == "arithmetic") {
      cfg.ensemble.method = EnsembleMethod::kArithmetic;
    } else {
      fail("ensemble.method", "must be \"geometric\" or \"arithmetic\"");
    }
    require_unit(cfg.ensemble.alpha, "ensemble.alpha");
    require_unit(cfg.ensemble.beta, "ensemble.beta");
  }

  if (j.contains("merge")) {
    const json& m = j.at("merge");
    get(m, "merge", "object_score", cfg.merge.object_score);
    get(m, "merge", "overlap_ratio", cfg.merge.overlap_ratio);
    require_unit(cfg.merge.object_score, "merge.object_score");
    require_unit(cfg.merge.overlap_ratio, "merge.overlap_ratio");
  }

  get(j, "", "templates", cfg.templates);
  if (cfg.templates.empty()) fail("templates", "must be nonempty");
  get(j, "", "eval_short_side", cfg.eval_short_side);
  require_positive(cfg.eval_short_side, "eval_short_side");

  static const std::vector<std::string> known = {"model",     "data",  "training",
                                                 "ensemble",  "merge", "templates",
                                                 "eval_short_side"};
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (std::find(known.begin(), known.end(), it.key()) == known.end())
      fail(it.key(), "is not a recognized config key");
  }

  cfg.snapshot = j;
  return cfg;
}

RunConfig default_run_config() { return parse_run_config(json::object()); }

RunConfig load_run_config(const std::string& path, const std::vector<std::string>& overrides) {
  json j = json::object();
  if (!path.empty()) {
    std::ifstream is(path);
    if (!is) throw std::invalid_argument("config: cannot open " + path);
    try {
      is >> j;
    } catch (const json::exception& e) {
      throw std::invalid_argument("config: " + path + " is not valid JSON: " + e.what());
    }
  }
  for (const auto& ov : overrides) apply_override(j, ov);
  return parse_run_config(j);
}

void save_config_snapshot(const RunConfig& cfg, const std::string& path) {
  // Write the fully resolved values, not just the user-supplied subset.
  json j = cfg.snapshot;
  j["model"] = {{"n_queries", cfg.model.n_queries},
                {"query_dim", cfg.model.query_dim},
                {"pixel_decoder_layers", cfg.model.pixel_decoder_layers},
                {"mask_decoder_layers", cfg.model.mask_decoder_layers},
                {"ffn_dim", cfg.model.ffn_dim},
                {"t_out", cfg.model.t_out}};
  j["data"] = {{"synthetic", cfg.data.synthetic},
               {"dataset_dir", cfg.data.dataset_dir},
               {"train_count", cfg.data.train_count},
               {"eval_count", cfg.data.eval_count},
               {"size", cfg.data.size},
               {"seed", cfg.data.seed},
               {"colors",
                {{"train_stuff", cfg.data.colors.train_stuff},
                 {"train_things", cfg.data.colors.train_things},
                 {"heldout_stuff", cfg.data.colors.heldout_stuff},
                 {"heldout_things", cfg.data.colors.heldout_things}}}};
  j["training"] = {{"epochs", cfg.training.epochs},
                   {"batch_size", cfg.training.batch_size},
                   {"lr", cfg.training.lr},
                   {"weight_decay", cfg.training.weight_decay},
                   {"milestones", cfg.training.milestones},
                   {"lr_gamma", cfg.training.lr_gamma},
                   {"seed", cfg.training.seed},
                   {"freeze_backbone", cfg.training.freeze_backbone},
                   {"checkpoint_every", cfg.training.checkpoint_every},
                   {"loss_weights",
                    {{"cls", cfg.training.loss_weights.cls},
                     {"bce", cfg.training.loss_weights.bce},
                     {"dice", cfg.training.loss_weights.dice}}}};
  j["ensemble"] = {{"alpha", cfg.ensemble.alpha},
                   {"beta", cfg.ensemble.beta},
                   {"method", cfg.ensemble.method == EnsembleMethod::kGeometric ? "geometric"
                                                                                : "arithmetic"}};
  j["merge"] = {{"object_score", cfg.merge.object_score},
                {"overlap_ratio", cfg.merge.overlap_ratio}};
  j["templates"] = cfg.templates;
  j["eval_short_side"] = cfg.eval_short_side;
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot write config snapshot: " + path);
  os << j.dump(2) << "\n";
}

}  // namespace ovseg
