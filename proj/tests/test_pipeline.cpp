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

#include "gsfloc/errors.hpp"
#include "gsfloc/io.hpp"
#include "gsfloc/matching.hpp"
#include "gsfloc/pipeline.hpp"
#include "gsfloc/synth.hpp"
#include "test_util.hpp"

using namespace gsfloc;
using namespace gsfloc::testing;

namespace {

struct Fixture {
  PipelineConfig cfg;
  SyntheticScene scene;
  ReferenceMap map;
  std::vector<QuerySpec> queries;
};

const Fixture& fixture() {
  static const Fixture f = [] {
    Fixture x;
    SceneSpec spec = default_scene_spec();
    spec.seed = 3;
    x.scene = generate_scene(spec, x.cfg.taxonomy);
    x.map = build_map(x.scene.cloud, x.cfg);
    QueryPlan plan;
    plan.count = 3;
    x.queries = plan_queries(x.scene, plan, 77);
    return x;
  }();
  return f;
}

SemanticPointCloud query_scan(const Fixture& f, std::size_t q) {
  return simulate_scan(f.scene.cloud, f.queries[q].pose, ScanSpec{}, f.queries[q].seed);
}

}  // namespace

TEST_CASE("twenty instance map") {
  const auto& f = fixture();
  CHECK(f.scene.instances.size() == 20);
  CHECK(f.map.graph.size() == 20);
  CHECK(f.map.populations.size() == 20);
  for (const auto& p : f.map.populations) {
    REQUIRE(p.has_value());
    CHECK(p->grid.rows() == f.cfg.grid.size());
  }
  const std::size_t K = static_cast<std::size_t>(f.cfg.descriptor.k);
  CHECK(f.map.index.size() <= 20 * K * (K - 1) / 2);
  CHECK(f.map.index.size() > 0);
  CHECK_NOTHROW(f.map.validate());
}

TEST_CASE("map bundle round trip") {
  const auto& f = fixture();
  TempDir dir;
  save_map(f.map, dir.path());
  for (const char* name :
       {"graph.json", "graph.bin", "index.gsfi", "populations.bin", "config.json", "manifest.json"})
    CHECK(std::filesystem::exists(dir / name));
  const auto back = load_map(dir.path());
  CHECK(back.index.serialize() == f.map.index.serialize());
  REQUIRE(back.populations.size() == f.map.populations.size());
  for (std::size_t k = 0; k < back.populations.size(); ++k) {
    const auto& a = *back.populations[k];
    const auto& b = *f.map.populations[k];
    CHECK((a.mu - b.mu).cwiseAbs().maxCoeff() < 1e-7);
    CHECK((a.Sigma - b.Sigma).cwiseAbs().maxCoeff() < 1e-7);
    CHECK(a.stability_weights == b.stability_weights);
  }

  // Tampering is caught by the manifest hashes.
  {
    std::fstream io(dir / "index.gsfi", std::ios::in | std::ios::out | std::ios::binary);
    io.seekp(20);
    io.put('\x7f');
  }
  CHECK_THROWS_AS(load_map(dir.path()), FormatError);
}

TEST_CASE("non-instantiable map fails to build") {
  SceneSpec spec = default_scene_spec();
  spec.instances.clear();
  PipelineConfig cfg;
  const auto scene = generate_scene(spec, cfg.taxonomy);
  CHECK_THROWS_AS(build_map(scene.cloud, cfg), BuildError);
}

TEST_CASE("query scans localize within tolerance") {
  const auto& f = fixture();
  for (std::size_t q = 0; q < f.queries.size(); ++q) {
    const auto scan = query_scan(f, q);
    const auto r = localize(scan, f.map, f.cfg);
    REQUIRE(r.success());
    CHECK(r.inlier_count >= 3);
    CHECK(r.gsf_filter);
    const auto e = pose_error(r.pose, f.queries[q].pose);
    CHECK(e.trans_m <= 0.5);
    CHECK(e.rot_deg <= 2.0);

    // Inliers are pairwise consistent at epsilon.
    const auto ds = voxel_downsample(scan, f.cfg.query_voxel, f.cfg.taxonomy.size(),
                                     f.cfg.graph.one_hot_confidence);
    const auto qi = cluster_instances(ds, f.cfg.taxonomy, f.cfg.graph.cluster);
    std::vector<Vec3> qc, mc;
    for (const auto& I : qi) qc.push_back(I.centroid);
    for (const auto& I : f.map.graph.instances) mc.push_back(I.centroid);
    for (std::size_t a = 0; a < r.inliers.size(); ++a)
      for (std::size_t b = a + 1; b < r.inliers.size(); ++b) {
        const Correspondence ca{r.inliers[a].first, r.inliers[a].second, 1.0, 1};
        const Correspondence cb{r.inliers[b].first, r.inliers[b].second, 1.0, 1};
        CHECK(consistency_check(ca, cb, qc, mc, f.cfg.matching.epsilon));
      }
  }
}

TEST_CASE("localization is deterministic") {
  const auto& f = fixture();
  const auto scan = query_scan(f, 0);
  const auto a = localize(scan, f.map, f.cfg), b = localize(scan, f.map, f.cfg);
  CHECK(to_json(a, false).dump() == to_json(b, false).dump());
  CHECK(a.pose.R == b.pose.R);
  CHECK(a.pose.t == b.pose.t);
}

TEST_CASE("disabling the gsf filter keeps a centroid-only pipeline") {
  const auto& f = fixture();
  auto cfg = f.cfg;
  cfg.sim.gsf_filter = false;
  const auto r = localize(query_scan(f, 1), f.map, cfg);
  CHECK_FALSE(r.gsf_filter);
  CHECK(to_json(r, false)["gsf_filter"] == false);
  CHECK(r.stats.candidates_after_filter >= r.stats.coarse_candidates);
}

TEST_CASE("query from a disjoint scene gives no match") {
  PipelineConfig cfg;
  SceneSpec map_spec = default_scene_spec();
  map_spec.instances.erase(map_spec.instances.begin() + 2, map_spec.instances.end());  // poles, trunks
  map_spec.seed = 8;
  const auto map_scene = generate_scene(map_spec, cfg.taxonomy);
  const auto map = build_map(map_scene.cloud, cfg);

  SceneSpec q_spec = default_scene_spec();
  q_spec.instances.erase(q_spec.instances.begin(), q_spec.instances.begin() + 2);  // cars, signs
  q_spec.instances[0].count = 6;
  q_spec.seed = 9;
  const auto q_scene = generate_scene(q_spec, cfg.taxonomy);
  const auto r = localize(q_scene.cloud, map, cfg);
  CHECK(r.status == LocalizationStatus::kNoMatch);
  CHECK_FALSE(r.success());
  CHECK(to_string(r.status) == "no-match");
}

TEST_CASE("incompatible config is rejected") {
  const auto& f = fixture();
  auto cfg = f.cfg;
  cfg.grid.nx = 3;
  CHECK_THROWS_AS(localize(query_scan(f, 0), f.map, cfg), ValidationError);
}

TEST_CASE("voxel downsample averages per cell and label") {
  SemanticPointCloud c;
  c.points.resize(4, 3);
  c.points << 0.01, 0.01, 0.01, 0.09, 0.05, 0.03, 0.05, 0.05, 0.05, 1.0, 1.0, 1.0;
  c.labels = {1, 1, 2, 1};
  const auto d = voxel_downsample(c, 0.2, 3, 0.9);
  REQUIRE(d.size() == 3);
  CHECK((d.point(0) - Vec3(0.05, 0.03, 0.02)).norm() < 1e-12);
  CHECK(d.labels == std::vector<ClassId>{1, 2, 1});
  REQUIRE(d.logits);
  CHECK(std::abs((*d.logits)(0, 1) - 0.9) < 1e-12);
  CHECK_THROWS_AS(voxel_downsample(c, 0.0, 3, 0.9), ValidationError);
}

TEST_CASE("population serialization") {
  const auto& f = fixture();
  auto pops = f.map.populations;
  pops[1].reset();
  const auto bytes = serialize_populations(pops);
  const auto back = deserialize_populations(bytes, "p");
  REQUIRE(back.size() == pops.size());
  CHECK_FALSE(back[1].has_value());
  CHECK(serialize_populations(back) == bytes);
  auto bad = bytes;
  bad.resize(bad.size() - 8);
  CHECK_THROWS_AS(deserialize_populations(bad, "p"), FormatError);
}
