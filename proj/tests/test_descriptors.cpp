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

#include <algorithm>
#include <set>

#include "doctest.h"

#include "gsfloc/descriptors.hpp"
#include "gsfloc/errors.hpp"
#include "gsfloc/oracles.hpp"
#include "test_util.hpp"

using namespace gsfloc;
using namespace gsfloc::testing;

namespace {

Instance inst(int id, const Vec3& c, ClassId label = urban::kPole) {
  Instance I;
  I.id = id;
  I.centroid = c;
  I.label = label;
  return I;
}

std::vector<Instance> random_instances(Rng& rng, int n, double extent) {
  std::vector<Instance> out;
  const ClassId classes[] = {urban::kPole, urban::kTrunk, urban::kCar};
  for (int i = 0; i < n; ++i)
    out.push_back(inst(i, Vec3(uniform(rng, -extent, extent), uniform(rng, -extent, extent),
                               uniform(rng, 0, 2)),
                       classes[std::uniform_int_distribution<int>(0, 2)(rng)]));
  return out;
}

std::vector<std::array<int, 3>> sorted_triples(const std::vector<TriangleDescriptor>& ds) {
  std::vector<std::array<int, 3>> out;
  for (const auto& d : ds) {
    auto ids = d.vertex_ids;
    std::sort(ids.begin(), ids.end());
    out.push_back(ids);
  }
  std::sort(out.begin(), out.end());
  return out;
}

TriangleDescriptor desc_with_sides(double a, double b, double c,
                                   std::array<ClassId, 3> labels = {6, 6, 6}) {
  TriangleDescriptor d;
  d.vertex_ids = {0, 1, 2};
  d.sides = {a, b, c};
  d.labels = labels;
  return d;
}

}  // namespace

TEST_CASE("three instances give one descriptor") {
  const std::vector<Instance> v = {inst(0, {0, 0, 0}), inst(1, {3, 0, 0}), inst(2, {0, 4, 0})};
  const auto ds = triangulate(v, 2);
  REQUIRE(ds.size() == 1);
  CHECK(std::abs(ds[0].sides[0] - 3) < 1e-12);
  CHECK(std::abs(ds[0].sides[1] - 4) < 1e-12);
  CHECK(std::abs(ds[0].sides[2] - 5) < 1e-12);
  // v0 joins the shortest and longest sides.
  CHECK(ds[0].vertex_ids == std::array<int, 3>{1, 0, 2});
  CHECK(side_bins(ds[0], 0.5) == std::array<std::int64_t, 3>{6, 8, 10});
}

TEST_CASE("fewer than three instances or collinear input") {
  CHECK(triangulate({inst(0, {0, 0, 0}), inst(1, {1, 0, 0})}, 2).empty());
  CHECK_FALSE(make_descriptor(inst(0, {0, 0, 0}), inst(1, {1, 0, 0}), inst(2, {2, 0, 0})));
}

TEST_CASE("descriptor is invariant to vertex relabeling") {
  Rng rng(1);
  for (int t = 0; t < 50; ++t) {
    auto v = random_instances(rng, 3, 10.0);
    std::array<int, 3> perm = {0, 1, 2};
    const auto base = make_descriptor(v[0], v[1], v[2]);
    REQUIRE(base);
    do {
      const auto d = make_descriptor(v[perm[0]], v[perm[1]], v[perm[2]]);
      REQUIRE(d);
      CHECK(hash_key(*d, 0.5) == hash_key(*base, 0.5));
      CHECK(d->sides == base->sides);
      CHECK(d->vertex_ids == base->vertex_ids);
      CHECK(d->sides[0] <= d->sides[1]);
      CHECK(d->sides[1] <= d->sides[2]);
      CHECK(d->sides[2] < d->sides[0] + d->sides[1] + kDegeneracySlack);
    } while (std::next_permutation(perm.begin(), perm.end()));
  }
}

TEST_CASE("hash key bin boundaries") {
  CHECK(hash_key(desc_with_sides(3.01, 4.2, 5.3), 0.5) == hash_key(desc_with_sides(3.49, 4.4, 5.0), 0.5));
  CHECK(hash_key(desc_with_sides(3.49, 4.2, 5.3), 0.5) != hash_key(desc_with_sides(3.5, 4.2, 5.3), 0.5));
  CHECK(pack_bins({1, 2, 3}) == ((1ull << 42) | (2ull << 21) | 3ull));
}

TEST_CASE("triangulation equals brute-force enumeration") {
  Rng rng(2);
  for (int t = 0; t < 30; ++t) {
    const int n = std::uniform_int_distribution<int>(3, 25)(rng);
    const int K = std::uniform_int_distribution<int>(2, 8)(rng);
    const auto v = random_instances(rng, n, 30.0);
    CHECK(sorted_triples(triangulate(v, K)) == oracle::brute_force_triangles(v, K));
  }
}

TEST_CASE("triangulation is invariant under rigid transforms") {
  Rng rng(3);
  for (int t = 0; t < 10; ++t) {
    auto v = random_instances(rng, 15, 20.0);
    const auto T = random_transform(rng);
    auto w = v;
    for (auto& I : w) I.centroid = T.apply(I.centroid);
    const auto a = triangulate(v, 6), b = triangulate(w, 6);
    REQUIRE(sorted_triples(a) == sorted_triples(b));
    for (std::size_t k = 0; k < a.size(); ++k)
      for (int s = 0; s < 3; ++s) CHECK(std::abs(a[k].sides[s] - b[k].sides[s]) < 1e-6);
  }
}

TEST_CASE("index query contains itself and respects labels") {
  Rng rng(4);
  const auto v = random_instances(rng, 20, 25.0);
  const auto ds = triangulate(v, 5);
  const DescriptorIndex idx(ds, 0.5);
  for (std::size_t k = 0; k < ds.size(); ++k) {
    const auto hits = idx.query(ds[k]);
    CHECK(std::find(hits.begin(), hits.end(), k) != hits.end());
    CHECK(std::is_sorted(hits.begin(), hits.end()));
  }
  auto q = ds[0];
  q.labels = {urban::kPerson, urban::kPerson, urban::kPerson};
  CHECK(idx.query(q).empty());
}

TEST_CASE("index has no false negatives near bin edges") {
  Rng rng(5);
  const double delta = 0.5;
  std::vector<TriangleDescriptor> stored;
  for (int i = 0; i < 1000; ++i) {
    const double a = 0.5 * std::uniform_int_distribution<int>(4, 12)(rng) + uniform(rng, -0.02, 0.02);
    const double b = a + uniform(rng, 0, 3), c = b + uniform(rng, 0, std::min(a, 3.0));
    std::array<ClassId, 3> labels = {6, 8, 9};
    std::shuffle(labels.begin(), labels.end(), rng);
    stored.push_back(desc_with_sides(a, b, c, labels));
  }
  const DescriptorIndex idx(stored, delta);
  for (int t = 0; t < 300; ++t) {
    auto q = stored[std::uniform_int_distribution<std::size_t>(0, stored.size() - 1)(rng)];
    for (auto& s : q.sides) s += uniform(rng, -delta, delta);
    std::sort(q.sides.begin(), q.sides.end());
    CHECK(idx.query(q) == oracle::linear_index_query(stored, q, delta));
  }
}

TEST_CASE("index serialization round trip") {
  Rng rng(6);
  const auto ds = triangulate(random_instances(rng, 12, 20.0), 4);
  const DescriptorIndex idx(ds, 0.35);
  const auto bytes = idx.serialize();
  const auto back = DescriptorIndex::deserialize(bytes);
  CHECK(back.serialize() == bytes);
  CHECK(back.delta_d() == 0.35);
  REQUIRE(back.size() == ds.size());
  for (std::size_t k = 0; k < ds.size(); ++k) {
    CHECK(back.descriptors()[k].sides == ds[k].sides);
    CHECK(back.query(ds[k]) == idx.query(ds[k]));
  }
  auto bad = bytes;
  bad[0] = 'X';
  CHECK_THROWS_AS(DescriptorIndex::deserialize(bad), FormatError);
  bad = bytes;
  bad.pop_back();
  CHECK_THROWS_AS(DescriptorIndex::deserialize(bad), FormatError);
}

TEST_CASE("vertex pairings cover equal sides") {
  const auto scalene = desc_with_sides(3, 4, 5);
  CHECK(vertex_pairings(scalene, scalene).size() == 1);
  const auto iso = desc_with_sides(3, 4, 4);
  const auto p = vertex_pairings(iso, scalene);
  CHECK(p.size() == 2);
  CHECK(p[0] == std::array<int, 3>{0, 1, 2});
}

TEST_CASE("gsf filter scoring") {
  std::vector<TriangleDescriptor> map;
  for (int c = 0; c < 4; ++c) {
    auto d = desc_with_sides(3, 4, 5);
    d.vertex_ids = {3 * c, 3 * c + 1, 3 * c + 2};
    map.push_back(d);
  }
  const auto query = desc_with_sides(3, 4, 5);
  SimilarityConfig cfg;
  cfg.sigma_w = 1.0;
  cfg.accept_threshold = 1.0;

  // Map candidate 0 and 2 mirror the query exactly, 1 has one far vertex,
  // 3 is mildly off everywhere.
  const VertexDistance dist = [](int q, int m) -> std::optional<double> {
    const int cand = m / 3;
    if (cand == 0 || cand == 2) return q == m % 3 ? 0.0 : 5.0;
    if (cand == 1) return m % 3 == 1 ? 100.0 : 0.0;
    return 0.5;
  };
  std::size_t skipped = 0;
  const auto out = gsf_filter(query, {3, 2, 1, 0}, map, dist, cfg, &skipped);
  REQUIRE(out.size() == 3);
  CHECK(out[0].candidate == 0);
  CHECK(out[0].score == 0.0);
  CHECK(out[0].omega == std::array<double, 3>{1.0, 1.0, 1.0});
  CHECK(out[1].candidate == 2);
  CHECK(out[2].candidate == 3);
  CHECK(std::abs(out[2].score - 1.5) < 1e-15);
  CHECK(std::abs(out[2].omega[0] - std::exp(-0.25)) < 1e-15);
  CHECK(out[0].pairs[1] == std::pair<int, int>{1, 1});
  CHECK(skipped == 0);

  const VertexDistance missing = [](int, int m) -> std::optional<double> {
    if (m == 4) return std::nullopt;
    return 0.0;
  };
  const auto out2 = gsf_filter(query, {0, 1}, map, missing, cfg, &skipped);
  CHECK(out2.size() == 1);
  CHECK(skipped == 1);
}
