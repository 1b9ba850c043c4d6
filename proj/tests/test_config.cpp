/*
 * Copyright 2026 The gsfloc Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 *
 */

#include <fstream>

#include "doctest.h"

#include "gsfloc/config.hpp"
#include "gsfloc/errors.hpp"
#include "test_util.hpp"

using namespace gsfloc;
using nlohmann::json;

TEST_CASE("defaults validate") {
  PipelineConfig cfg;
  CHECK_NOTHROW(cfg.validate());
  CHECK(cfg.grid.dx == cfg.graph.radius / 4);
  CHECK(cfg.graph.gsf.hyper.kappa == 2.0);
  CHECK(cfg.graph.gsf.budget == 256);
  CHECK(cfg.matching.epsilon == 0.6);
}

TEST_CASE("nested and dotted keys apply the same way") {
  PipelineConfig a, b;
  apply_config(a, json::parse(R"({"gsf":{"kappa":3.5,"grid":{"nx":7}},"matching":{"epsilon":0.4}})"));
  apply_config(b, json::parse(R"({"gsf.kappa":3.5,"gsf.grid.nx":7,"matching.epsilon":0.4})"));
  CHECK(a.graph.gsf.hyper.kappa == 3.5);
  CHECK(a.grid.nx == 7);
  CHECK(to_json(a) == to_json(b));
}

TEST_CASE("unknown keys are rejected") {
  PipelineConfig cfg;
  CHECK_THROWS_AS(apply_config(cfg, json::parse(R"({"gsf":{"kapa":1}})")), ValidationError);
  CHECK_THROWS_AS(apply_config_key(cfg, "nonsense", 1), ValidationError);
}

TEST_CASE("out of range values are rejected") {
  PipelineConfig cfg;
  CHECK_THROWS_AS(apply_config(cfg, json::parse(R"({"gsf.kappa":-1})")), ValidationError);
  PipelineConfig c2;
  CHECK_THROWS_AS(apply_config(c2, json::parse(R"({"matching.min_inliers":2})")), ValidationError);
  PipelineConfig c3;
  CHECK_THROWS_AS(apply_config(c3, json::parse(R"({"gsf.budget":"many"})")), ValidationError);
}

TEST_CASE("per-class overrides") {
  PipelineConfig cfg;
  apply_config(cfg, json::parse(R"({"taxonomy.stability.car":0.2,"cluster.threshold.pole":0.8})"));
  CHECK(cfg.taxonomy.stability(urban::kCar) == 0.2);
  CHECK(cfg.graph.cluster.threshold(cfg.taxonomy, urban::kPole) == 0.8);
  PipelineConfig c2;
  CHECK_THROWS_AS(apply_config(c2, json::parse(R"({"taxonomy.stability.unicorn":0.2})")),
                  ValidationError);
}

TEST_CASE("auto accept threshold") {
  PipelineConfig cfg;
  apply_config(cfg, json::parse(R"({"sim.accept_threshold":0.7})"));
  REQUIRE(cfg.sim.accept_threshold);
  CHECK(*cfg.sim.accept_threshold == 0.7);
  apply_config(cfg, json::parse(R"({"sim.accept_threshold":"auto"})"));
  CHECK_FALSE(cfg.sim.accept_threshold);
}

TEST_CASE("parse errors carry line and column") {
  try {
    parse_json_text("{\n  \"a\": 1,\n  oops\n}", "cfg.json");
    FAIL("expected ValidationError");
  } catch (const ValidationError& e) {
    const std::string msg = e.what();
    CHECK(msg.rfind("cfg.json:3:", 0) == 0);
  }
}

TEST_CASE("config json round trip") {
  PipelineConfig cfg;
  apply_config(cfg, json::parse(R"({"gsf.sigma_y":0.05,"sim.yaw_samples":4,"sim.sigma_w":0.3})"));
  PipelineConfig back;
  apply_config(back, to_json(cfg));
  CHECK(to_json(back) == to_json(cfg));
  CHECK(back.sim.yaw_samples == 4);
  CHECK(*back.sim.sigma_w == 0.3);
}

TEST_CASE("load_config reads files and reports missing ones") {
  gsfloc::testing::TempDir dir;
  std::ofstream(dir / "c.json") << R"({"graph":{"radius":12}})";
  CHECK(load_config((dir / "c.json").string()).graph.radius == 12);
  CHECK_THROWS_AS(load_config((dir / "none.json").string()), IoError);
}
