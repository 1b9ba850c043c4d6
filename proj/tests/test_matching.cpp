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

#include "doctest.h"

#include "gsfloc/errors.hpp"
#include "gsfloc/matching.hpp"
#include "gsfloc/oracles.hpp"
#include "test_util.hpp"

using namespace gsfloc;
using namespace gsfloc::testing;

namespace {

TriangleMatch tri(std::array<std::pair<int, int>, 3> pairs, std::array<double, 3> omega = {1, 1, 1}) {
  TriangleMatch m;
  m.pairs = pairs;
  m.omega = omega;
  return m;
}

ConsistencyGraph random_graph(Rng& rng, int n, double density) {
  AdjacencyMatrix A(static_cast<std::size_t>(n));
  std::vector<double> omega;
  for (int i = 0; i < n; ++i) {
    omega.push_back(std::uniform_int_distribution<int>(1, 4)(rng) * 0.25);
    for (int j = i + 1; j < n; ++j)
      if (uniform(rng, 0, 1) < density) A.set(i, j);
  }
  return make_graph(A, omega);
}

bool is_clique(const ConsistencyGraph& g, const std::vector<int>& ids) {
  for (std::size_t a = 0; a < ids.size(); ++a)
    for (std::size_t b = a + 1; b < ids.size(); ++b)
      if (!g.adjacency.test(ids[a], ids[b])) return false;
  return true;
}

}  // namespace

TEST_CASE("collecting correspondences") {
  const auto one = collect_correspondences({tri({{{0, 10}, {1, 11}, {2, 12}}})});
  REQUIRE(one.size() == 3);
  for (const auto& c : one) CHECK(c.support == 1);

  const auto two = collect_correspondences(
      {tri({{{0, 10}, {1, 11}, {2, 12}}}, {0.2, 0.5, 0.9}), tri({{{3, 13}, {0, 10}, {4, 14}}}, {1, 0.7, 1})});
  REQUIRE(two.size() == 5);
  CHECK(two[0].query_id == 0);
  CHECK(two[0].map_id == 10);
  CHECK(two[0].support == 2);
  CHECK(two[0].omega == 0.7);
  for (std::size_t k = 1; k < two.size(); ++k)
    CHECK(std::pair(two[k - 1].query_id, two[k - 1].map_id) < std::pair(two[k].query_id, two[k].map_id));
}

TEST_CASE("merge equals the linear-search oracle") {
  Rng rng(1);
  for (int t = 0; t < 50; ++t) {
    std::vector<TriangleMatch> ms;
    const int n = std::uniform_int_distribution<int>(1, 30)(rng);
    for (int k = 0; k < n; ++k) {
      TriangleMatch m;
      for (int v = 0; v < 3; ++v) {
        m.pairs[v] = {std::uniform_int_distribution<int>(0, 6)(rng),
                      std::uniform_int_distribution<int>(0, 6)(rng)};
        m.omega[v] = uniform(rng, 0.01, 1.0);
      }
      ms.push_back(m);
    }
    const auto a = collect_correspondences(ms), b = oracle::merge_loop(ms);
    REQUIRE(a.size() == b.size());
    for (std::size_t k = 0; k < a.size(); ++k) {
      CHECK(a[k].query_id == b[k].query_id);
      CHECK(a[k].map_id == b[k].map_id);
      CHECK(a[k].support == b[k].support);
      CHECK(a[k].omega == b[k].omega);
    }
  }
}

TEST_CASE("consistency check examples") {
  Rng rng(2);
  std::vector<Vec3> qc, mc;
  const auto T = random_transform(rng);
  for (int i = 0; i < 6; ++i) {
    qc.push_back(random_vec(rng, 10.0));
    mc.push_back(T.apply(qc.back()));
  }
  std::vector<Correspondence> corr;
  for (int i = 0; i < 6; ++i) corr.push_back({i, i, 1.0, 1});
  const auto g = build_consistency_graph(corr, qc, mc, 1e-9);
  CHECK(g.adjacency.edge_count() == 15);
  CHECK(max_clique(g).size() == 6);

  // One query instance to two map instances.
  CHECK_FALSE(consistency_check({0, 0, 1, 1}, {0, 1, 1, 1}, qc, mc, 100.0));
  CHECK_FALSE(consistency_check({0, 1, 1, 1}, {2, 1, 1, 1}, qc, mc, 100.0));

  // Planted 2 epsilon discrepancy.
  const double eps = 0.6;
  auto mc2 = mc;
  const Vec3 dir = (mc[1] - mc[0]).normalized();
  mc2[1] = mc[1] + 2 * eps * dir;
  CHECK_FALSE(consistency_check({0, 0, 1, 1}, {1, 1, 1, 1}, qc, mc2, eps));

  const auto single = build_consistency_graph({corr[0]}, qc, mc, eps);
  CHECK(single.nodes.size() == 1);
  CHECK(single.adjacency.edge_count() == 0);
}

TEST_CASE("adjacency equals the double-loop oracle and is rigid invariant") {
  Rng rng(3);
  for (int t = 0; t < 30; ++t) {
    std::vector<Vec3> qc, mc;
    for (int i = 0; i < 8; ++i) qc.push_back(random_vec(rng, 8.0));
    for (int i = 0; i < 8; ++i) mc.push_back(random_vec(rng, 8.0));
    std::vector<Correspondence> corr;
    for (int k = 0; k < 20; ++k)
      corr.push_back({std::uniform_int_distribution<int>(0, 7)(rng),
                      std::uniform_int_distribution<int>(0, 7)(rng), 1.0, 1});
    const double eps = uniform(rng, 0.5, 5.0);
    const auto g = build_consistency_graph(corr, qc, mc, eps);
    const auto ref = oracle::adjacency_loop(corr, qc, mc, eps);
    const auto T = random_transform(rng);
    auto qt = qc;
    for (auto& p : qt) p = T.apply(p);
    const auto gt = build_consistency_graph(corr, qt, mc, eps);
    for (std::size_t i = 0; i < corr.size(); ++i) {
      CHECK_FALSE(g.adjacency.test(i, i));
      for (std::size_t j = 0; j < corr.size(); ++j) {
        CHECK(g.adjacency.test(i, j) == ref[i][j]);
        CHECK(g.adjacency.test(i, j) == g.adjacency.test(j, i));
        if (std::abs(std::abs((qc[corr[i].query_id] - qc[corr[j].query_id]).norm() -
                              (mc[corr[i].map_id] - mc[corr[j].map_id]).norm()) - eps) > 1e-9)
          CHECK(gt.adjacency.test(i, j) == g.adjacency.test(i, j));
      }
    }
  }
}

TEST_CASE("clique examples") {
  AdjacencyMatrix k5(5);
  for (int i = 0; i < 5; ++i)
    for (int j = i + 1; j < 5; ++j) k5.set(i, j);
  CHECK(max_clique(make_graph(k5, std::vector<double>(5, 1.0))) == std::vector<int>{0, 1, 2, 3, 4});

  AdjacencyMatrix path(3);
  path.set(0, 1);
  path.set(1, 2);
  const auto pg = make_graph(path, {1, 1, 1});
  CHECK(max_clique(pg) == std::vector<int>{0, 1});
  CHECK(brute_force_max_clique(pg) == std::vector<int>{0, 1});

  AdjacencyMatrix tri3(3);
  tri3.set(0, 1);
  tri3.set(1, 2);
  tri3.set(0, 2);
  CHECK(brute_force_max_clique(make_graph(tri3, {1, 1, 1})).size() == 3);

  // Two disjoint triangles; the second carries more omega.
  AdjacencyMatrix two(6);
  for (int base : {0, 3})
    for (int i = 0; i < 3; ++i)
      for (int j = i + 1; j < 3; ++j) two.set(base + i, base + j);
  const auto tg = make_graph(two, {0.5, 0.5, 0.5, 0.9, 0.9, 0.9});
  CHECK(max_clique(tg) == std::vector<int>{3, 4, 5});
  CHECK(brute_force_max_clique(tg) == std::vector<int>{3, 4, 5});

  CHECK(max_clique(ConsistencyGraph{}).empty());
}

TEST_CASE("planted clique among distractors") {
  Rng rng(4);
  for (int t = 0; t < 20; ++t) {
    AdjacencyMatrix A(10);
    std::vector<int> nodes = {0, 1, 2, 3, 4, 5, 6, 7, 8, 9};
    std::shuffle(nodes.begin(), nodes.end(), rng);
    std::vector<int> planted(nodes.begin(), nodes.begin() + 4);
    std::sort(planted.begin(), planted.end());
    for (int i = 0; i < 4; ++i)
      for (int j = i + 1; j < 4; ++j) A.set(planted[i], planted[j]);
    // Distractors form a matching: no triangle outside the plant.
    for (int k = 4; k + 1 < 10; k += 2) A.set(nodes[k], nodes[k + 1]);
    A.set(nodes[4], planted[0]);
    const auto g = make_graph(A, std::vector<double>(10, 1.0));
    CHECK(max_clique(g) == planted);
    CHECK(brute_force_max_clique(g) == planted);
  }
}

TEST_CASE("branch and bound equals exhaustive enumeration") {
  Rng rng(5);
  for (int t = 0; t < 100; ++t) {
    const int n = std::uniform_int_distribution<int>(1, 20)(rng);
    const double dens[] = {0.2, 0.5, 0.8};
    const auto g = random_graph(rng, n, dens[t % 3]);
    const auto a = max_clique(g);
    CHECK(a == brute_force_max_clique(g));
    CHECK(is_clique(g, a));
    CHECK(std::is_sorted(a.begin(), a.end()));
  }
}

TEST_CASE("exhaustive solver guard") {
  Rng rng(6);
  const auto g = random_graph(rng, 26, 0.3);
  CHECK_THROWS_AS(brute_force_max_clique(g), ValidationError);
  CHECK_NOTHROW(max_clique(g));
}

TEST_CASE("tie-break helpers") {
  CHECK(clique_better({0, 1, 2}, 1.0, {0, 1}, 5.0));
  CHECK(clique_better({2, 3}, 2.0, {0, 1}, 1.0));
  CHECK(clique_better({0, 3}, 1.0, {1, 2}, 1.0));
  CHECK_FALSE(clique_better({1, 2}, 1.0, {1, 2}, 1.0));
}

TEST_CASE("graph dump mentions every node") {
  AdjacencyMatrix A(2);
  A.set(0, 1);
  const auto s = dump_graph(make_graph(A, {0.5, 1.0}));
  CHECK(s.find("nodes") != std::string::npos);
}
