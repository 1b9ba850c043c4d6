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

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "gsfloc/config.hpp"
#include "gsfloc/descriptors.hpp"
#include "gsfloc/gsf.hpp"
#include "gsfloc/scene_graph.hpp"
#include "gsfloc/types.hpp"
#include "gsfloc/wasserstein.hpp"

namespace gsfloc {

/// Prebuilt map: scene graph, descriptor index and one yaw-0 population
/// per instance (empty where the field fit failed). Immutable once built.
struct ReferenceMap {
  SceneGraph graph;
  DescriptorIndex index;
  std::vector<std::optional<GpPopulation>> populations;
  PipelineConfig config;

  /// Derived from `populations` for the configured stability mode.
  std::vector<std::optional<PreparedPopulation>> prepared;

  void prepare();
  void validate() const;
};

/// Throws BuildError when fewer than three instances are found.
ReferenceMap build_map(const SemanticPointCloud& map_cloud, const PipelineConfig& config);

/// Bundle directory: graph.json, graph.bin, index.gsfi, populations.bin,
/// config.json and manifest.json (SHA-256 of every other file).
void save_map(const ReferenceMap& map, const std::filesystem::path& dir);
/// Verifies manifest hashes before loading; a mismatch is a FormatError.
ReferenceMap load_map(const std::filesystem::path& dir);

/// "GSFP" | u32 version | u64 count | per instance: u8 present, then
/// u32 G, u32 D and f64 grid (G x 3), mu (G x D), Sigma (G x G), weights (G).
std::vector<std::uint8_t> serialize_populations(const std::vector<std::optional<GpPopulation>>& pops);
std::vector<std::optional<GpPopulation>> deserialize_populations(const std::vector<std::uint8_t>& bytes,
                                                                 const std::string& source);

/// Averages points and logits per occupied (voxel, label) cell. Cells appear
/// in order of their first point.
SemanticPointCloud voxel_downsample(const SemanticPointCloud& cloud, double voxel, int num_classes,
                                    double one_hot_confidence);

enum class LocalizationStatus { kSuccess, kDegenerate, kNoMatch };

std::string to_string(LocalizationStatus s);

struct LocalizationStats {
  std::size_t query_points = 0;
  std::size_t query_instances = 0;
  std::size_t triangles_queried = 0;
  std::size_t coarse_candidates = 0;
  std::size_t candidates_after_filter = 0;
  std::size_t candidates_skipped = 0;
  std::size_t correspondences = 0;
  std::size_t clique_size = 0;
  double sigma_w = 0.0;
  double accept_threshold = 0.0;
};

struct StageTimings {
  double graph_ms = 0.0;
  double descriptor_ms = 0.0;
  double gsf_ms = 0.0;
  double clique_ms = 0.0;
  double solve_ms = 0.0;
  double total_ms = 0.0;
};

struct LocalizationResult {
  RigidTransform pose;  ///< maps query-frame points into the map frame
  LocalizationStatus status = LocalizationStatus::kNoMatch;
  std::size_t inlier_count = 0;
  /// (query instance, map instance) pairs kept by the solver.
  std::vector<std::pair<int, int>> inliers;
  LocalizationStats stats;
  StageTimings timings;
  bool gsf_filter = true;
  std::string message;

  bool success() const noexcept { return status == LocalizationStatus::kSuccess; }
};

/// Runs query graph build, triangulation, index lookup, GSF filtering,
/// correspondence collection, the consistency clique and the robust solve.
/// Failures are reported through `status`.
LocalizationResult localize(const SemanticPointCloud& query_cloud, const ReferenceMap& map,
                            const PipelineConfig& config);

/// Timings omitted when `with_timings` is false.
nlohmann::json to_json(const LocalizationResult& r, bool with_timings = true);

}  // namespace gsfloc
