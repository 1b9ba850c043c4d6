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

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "gsfloc/gsf.hpp"
#include "gsfloc/types.hpp"

namespace gsfloc {

/// Uniform-cell spatial hash over a fixed point set.
class VoxelIndex {
 public:
  VoxelIndex(const PointMatrix& points, double cell);

  /// Indices i with |x_i - center| <= r, ascending.
  std::vector<Eigen::Index> radius(const Vec3& center, double r) const;

  /// Calls fn(j) for every stored j within the 27 cells around `p`.
  template <typename Fn>
  void for_each_neighbor_cell(const Vec3& p, Fn&& fn) const {
    const Cell c = cell_of(p);
    for (int dx = -1; dx <= 1; ++dx)
      for (int dy = -1; dy <= 1; ++dy)
        for (int dz = -1; dz <= 1; ++dz) {
          auto it = cells_.find(pack({c.x + dx, c.y + dy, c.z + dz}));
          if (it == cells_.end()) continue;
          for (auto j : it->second) fn(j);
        }
  }

 private:
  struct Cell {
    std::int64_t x, y, z;
  };
  Cell cell_of(const Vec3& p) const;
  static std::uint64_t pack(const Cell& c);

  const PointMatrix& points_;
  double cell_;
  std::unordered_map<std::uint64_t, std::vector<Eigen::Index>> cells_;
};

/// Indices of points within `r` of `center`, ascending.
std::vector<Eigen::Index> radius_query(const SemanticPointCloud& cloud, const Vec3& center,
                                       double r);

struct Instance {
  int id = 0;
  Vec3 centroid = Vec3::Zero();
  ClassId label = 0;
  std::vector<Eigen::Index> point_indices;
};

struct ClusterParams {
  /// Per-class single-linkage threshold overrides; taxonomy values otherwise.
  std::map<ClassId, double> thresholds;
  int min_cluster_size = 10;

  double threshold(const LabelTaxonomy& taxonomy, ClassId id) const;
};

/// Euclidean single-linkage clustering of instantiable-class points.
/// Instances are ordered by label, then centroid (x, y, z); ids follow.
std::vector<Instance> cluster_instances(const SemanticPointCloud& cloud,
                                        const LabelTaxonomy& taxonomy, const ClusterParams& params);

struct GraphConfig {
  ClusterParams cluster;
  double radius = 10.0;
  GsfFitOptions gsf;
  double one_hot_confidence = 0.9;
};

/// Object layer (instances), field layer (one GP per instance) and the
/// metric-semantic point layer (the source cloud).
struct SceneGraph {
  SemanticPointCloud cloud;
  std::vector<Instance> instances;
  /// Empty where the fit failed; such instances do not take part in GSF
  /// filtering.
  std::vector<std::optional<GaussianSemanticField>> fields;
  GraphConfig config;
  std::vector<std::string> warnings;

  std::size_t size() const noexcept { return instances.size(); }
  void validate(const LabelTaxonomy& taxonomy) const;
};

/// Per-instance GP seed derived from the base seed and instance id.
std::uint64_t instance_seed(std::uint64_t base, int instance_id);

SceneGraph build_scene_graph(const SemanticPointCloud& cloud, const LabelTaxonomy& taxonomy,
                             const GraphConfig& config);

/// Writes `<stem>.json` (structured document) and `<stem>.bin` (training
/// buffers). The point cloud itself is not stored.
void save_scene_graph(const SceneGraph& graph, const std::filesystem::path& json_path,
                      const std::filesystem::path& bin_path);
SceneGraph load_scene_graph(const std::filesystem::path& json_path,
                            const std::filesystem::path& bin_path);

}  // namespace gsfloc
