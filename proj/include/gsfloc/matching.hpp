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

#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "gsfloc/types.hpp"

namespace gsfloc {

struct Correspondence {
  int query_id = 0;
  int map_id = 0;
  double omega = 1.0;  ///< (0,1]
  int support = 1;     ///< number of triangle matches voting for the pair
};

/// One matched triangle pair, vertex-paired in canonical order.
struct TriangleMatch {
  std::array<std::pair<int, int>, 3> pairs{};  ///< (query id, map id)
  std::array<double, 3> omega{1.0, 1.0, 1.0};
};

/// Merges vertex pairs across matches: support counts votes, omega keeps
/// the maximum. Ordered by (query_id, map_id).
std::vector<Correspondence> collect_correspondences(const std::vector<TriangleMatch>& matches);

/// Dense symmetric boolean adjacency stored as 64-bit row bitsets.
class AdjacencyMatrix {
 public:
  AdjacencyMatrix() = default;
  explicit AdjacencyMatrix(std::size_t n);

  std::size_t size() const noexcept { return n_; }
  bool test(std::size_t i, std::size_t j) const noexcept {
    return (rows_[i * words_ + j / 64] >> (j % 64)) & 1u;
  }
  /// Sets both (i,j) and (j,i). Self-loops are ignored.
  void set(std::size_t i, std::size_t j, bool value = true);
  std::size_t degree(std::size_t i) const;
  std::size_t edge_count() const;
  const std::uint64_t* row(std::size_t i) const noexcept { return rows_.data() + i * words_; }
  std::size_t words() const noexcept { return words_; }

 private:
  std::size_t n_ = 0;
  std::size_t words_ = 0;
  std::vector<std::uint64_t> rows_;
};

struct ConsistencyGraph {
  std::vector<Correspondence> nodes;
  AdjacencyMatrix adjacency;
  double epsilon = 0.6;
};

/// Pairwise centroid-distance agreement within epsilon, with one-to-one
/// enforcement (pairs sharing a query or map instance are inconsistent).
bool consistency_check(const Correspondence& ci, const Correspondence& cj,
                       const std::vector<Vec3>& query_centroids,
                       const std::vector<Vec3>& map_centroids, double epsilon);

ConsistencyGraph build_consistency_graph(const std::vector<Correspondence>& corrs,
                                         const std::vector<Vec3>& query_centroids,
                                         const std::vector<Vec3>& map_centroids, double epsilon);

/// Builds a graph directly from an adjacency matrix and per-node weights
/// (used by tests and the self-test).
ConsistencyGraph make_graph(const AdjacencyMatrix& adjacency, const std::vector<double>& omega);

/// Sum of node omegas in ascending id order. Both clique solvers use this
/// exact reduction so weight ties compare identically.
double clique_weight(const ConsistencyGraph& g, const std::vector<int>& sorted_ids);

/// True if (a_size, a_weight, a_ids) ranks strictly before b: larger size,
/// then larger weight, then lexicographically smaller ids.
bool clique_better(const std::vector<int>& a, double a_weight, const std::vector<int>& b,
                   double b_weight);

/// Exact maximum clique by branch and bound with a greedy-coloring bound.
/// Returns ascending node ids.
std::vector<int> max_clique(const ConsistencyGraph& graph);

inline constexpr std::size_t kBruteForceMaxNodes = 25;

/// Exhaustive clique enumeration with the same tie-breaks. Throws
/// ValidationError above kBruteForceMaxNodes nodes.
std::vector<int> brute_force_max_clique(const ConsistencyGraph& graph);

/// Structured-text dump of nodes and adjacency for debugging.
std::string dump_graph(const ConsistencyGraph& graph);

}  // namespace gsfloc
