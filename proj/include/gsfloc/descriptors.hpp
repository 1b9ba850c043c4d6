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
#include <filesystem>
#include <functional>
#include <optional>
#include <unordered_map>
#include <vector>

#include "gsfloc/scene_graph.hpp"
#include "gsfloc/wasserstein.hpp"

namespace gsfloc {

/// Triangle over three instances. Vertex 0 joins the shortest and longest
/// sides, vertex 1 the shortest and middle, vertex 2 the middle and longest,
/// so sides = (|v0 v1|, |v1 v2|, |v2 v0|) is ascending.
struct TriangleDescriptor {
  std::array<int, 3> vertex_ids{};
  std::array<double, 3> sides{};
  std::array<ClassId, 3> labels{};
};

inline constexpr double kDegeneracySlack = 1e-6;

/// Canonical descriptor for three instances, or nullopt when collinear.
std::optional<TriangleDescriptor> make_descriptor(const Instance& a, const Instance& b,
                                                  const Instance& c);

/// All C(K,2) triangles of each anchor with its K nearest instances,
/// deduplicated by vertex set and ordered by sorted vertex ids.
std::vector<TriangleDescriptor> triangulate(const std::vector<Instance>& instances, int K);

using IndexKey = std::uint64_t;

/// Quantized side bins floor(d / delta_d).
std::array<std::int64_t, 3> side_bins(const TriangleDescriptor& d, double delta_d);

/// Packs three 21-bit side bins: (b0 << 42) | (b1 << 21) | b2.
IndexKey pack_bins(const std::array<std::int64_t, 3>& bins);
IndexKey hash_key(const TriangleDescriptor& d, double delta_d);

bool labels_multiset_equal(const std::array<ClassId, 3>& a, const std::array<ClassId, 3>& b);

class DescriptorIndex {
 public:
  DescriptorIndex() = default;
  DescriptorIndex(std::vector<TriangleDescriptor> descriptors, double delta_d);

  double delta_d() const noexcept { return delta_d_; }
  const std::vector<TriangleDescriptor>& descriptors() const noexcept { return descriptors_; }
  std::size_t size() const noexcept { return descriptors_.size(); }

  /// Ids of stored descriptors within delta_d per side whose label multiset
  /// matches, ascending.
  std::vector<std::size_t> query(const TriangleDescriptor& d) const;

  /// "GSFI" | u32 version | f64 delta_d | u64 count | count records of
  /// (3 x i32 vertex id, 3 x f64 side, 3 x u16 label).
  std::vector<std::uint8_t> serialize() const;
  static DescriptorIndex deserialize(const std::vector<std::uint8_t>& bytes,
                                     const std::string& source = "index");

 private:
  void rebuild_table();
  std::vector<TriangleDescriptor> descriptors_;
  double delta_d_ = 0.5;
  std::unordered_map<IndexKey, std::vector<std::size_t>> table_;
};

/// Vertex pairings to score between two descriptors: perm[k] is the
/// candidate vertex paired with query vertex k. Always contains the
/// identity; sides equal within 1e-9 in either descriptor add the swap of
/// the two vertices that equality makes interchangeable.
std::vector<std::array<int, 3>> vertex_pairings(const TriangleDescriptor& query,
                                                const TriangleDescriptor& candidate);

struct ScoredCandidate {
  std::size_t candidate = 0;                     ///< map descriptor id
  double score = 0.0;                            ///< summed vertex W2^2
  std::array<std::pair<int, int>, 3> pairs{};    ///< (query instance, map instance)
  std::array<double, 3> vertex_w2{};
  std::array<double, 3> omega{};
};

/// W2^2 between query instance i and map instance j, or nullopt if either
/// lacks a population.
using VertexDistance = std::function<std::optional<double>(int query_id, int map_id)>;

/// Scores each candidate by its summed per-vertex W2^2 (best pairing), drops
/// those above 3 * accept_threshold and returns survivors ascending by
/// score, ties by candidate id. Candidates whose vertices lack fields are
/// skipped and counted in `skipped`.
std::vector<ScoredCandidate> gsf_filter(const TriangleDescriptor& query,
                                        const std::vector<std::size_t>& candidates,
                                        const std::vector<TriangleDescriptor>& map_descriptors,
                                        const VertexDistance& distance, const SimilarityConfig& cfg,
                                        std::size_t* skipped = nullptr);

}  // namespace gsfloc
