// Copyright 2026 The ovseg Authors.
// SPDX-License-Identifier: Apache-2.0
#include "ovseg/config.hpp"

#include <doctest.h>

#include <filesystem>
#include <fstream>

using namespace ovseg;
using nlohmann::json;

TEST_CASE("defaults parse and match the documented values") {
  RunConfig cfg = default_run_config();
  CHECK(cfg.model.n_queries == 20);
  CHECK(cfg.model.t_out == doctest::Approx(0.07));
  CHECK(cfg.training.epochs == 20);
  CHECK(cfg.training.batch_size == 8);
  CHECK(cfg.training.lr == doctest::Approx(1e-4));
  CHECK(cfg.training.weight_decay == doctest::Approx(0.05));
  CHECK(cfg.training.freeze_backbone == true);
  CHECK(cfg.ensemble.alpha == doctest::Approx(0.4));
  CHECK(cfg.ensemble.beta == doctest::Approx(0.8));
  CHECK(cfg.merge.object_score == doctest::Approx(0.25));
  CHECK(cfg.merge.overlap_ratio == doctest::Approx(0.8));
  CHECK(cfg.data.synthetic == true);
}

TEST_CASE("overrides beat the file and parse typed values") {
  json j = {{"training", {{"epochs", 5}}}};
  apply_override(j, "training.epochs=9");
  apply_override(j, "training.freeze_backbone=false");
  apply_override(j, "ensemble.method=arithmetic");
  RunConfig cfg = parse_run_config(j);
  CHECK(cfg.training.epochs == 9);
  CHECK(cfg.training.freeze_backbone == false);
  CHECK(cfg.ensemble.method == EnsembleMethod::kArithmetic);
  // The snapshot records the resolved override.
  CHECK(cfg.snapshot.at("training").at("epochs").get<int>() == 9);
}

TEST_CASE("validation errors name the offending field") {
  auto message_of = [](json j) {
    try {
      parse_run_config(j);
    } catch (const std::invalid_argument& e) {
      return std::string(e.what());
    }
    return std::string();
  };
  CHECK(message_of({{"training", {{"epochs", -1}}}}).find("training.epochs") !=
        std::string::npos);
  CHECK(message_of({{"data", {{"synthetic", false}}}}).find("data.dataset_dir") !=
        std::string::npos);
  CHECK(message_of({{"ensemble", {{"alpha", 1.5}}}}).find("ensemble.alpha") !=
        std::string::npos);
  CHECK(message_of({{"merge", {{"object_score", -0.2}}}}).find("merge.object_score") !=
        std::string::npos);
  CHECK(message_of({{"data", {{"size", 30}}}}).find("data.size") != std::string::npos);
  CHECK(message_of({{"bogus_section", 1}}).find("bogus_section") != std::string::npos);
  CHECK(message_of({{"training", {{"epochs", "ten"}}}}).find("training.epochs") !=
        std::string::npos);
}

TEST_CASE("bad override expressions are rejected") {
  json j = json::object();
  CHECK_THROWS(apply_override(j, "no_equals_sign"));
  CHECK_THROWS(apply_override(j, "=5"));
}

TEST_CASE("config file + overrides load; snapshot round-trips") {
  namespace fs = std::filesystem;
  fs::path dir = fs::temp_directory_path() / "ovseg_config_test";
  fs::create_directories(dir);
  fs::path file = dir / "config.json";
  std::ofstream(file.string()) << R"({"training": {"epochs": 3, "seed": 5}})";

  RunConfig cfg = load_run_config(file.string(), {"training.lr=0.002"});
  CHECK(cfg.training.epochs == 3);
  CHECK(cfg.training.seed == 5);
  CHECK(cfg.training.lr == doctest::Approx(0.002));

  fs::path snap = dir / "snapshot.json";
  save_config_snapshot(cfg, snap.string());
  RunConfig back = load_run_config(snap.string(), {});
  CHECK(back.training.epochs == 3);
  CHECK(back.training.lr == doctest::Approx(0.002));
  CHECK(back.model.n_queries == cfg.model.n_queries);
  CHECK(back.ensemble.alpha == doctest::Approx(cfg.ensemble.alpha));

  CHECK_THROWS(load_run_config((dir / "missing.json").string(), {}));
}
