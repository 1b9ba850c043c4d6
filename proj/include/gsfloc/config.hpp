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

#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "gsfloc/gsf.hpp"
#include "gsfloc/scene_graph.hpp"
#include "gsfloc/types.hpp"

namespace gsfloc {

struct DescriptorConfig {
  double delta_d = 0.5;  ///< side quantization and match tolerance (m)
  int k = 10;            ///< nearest neighbors per anchor
};

struct SimilarityOptions {
  /// Unset: median candidate W2 distance of the current query.
  std::optional<double> sigma_w;
  /// Unset: 3x the median candidate W2^2 of the current query.
  std::optional<double> accept_threshold;
  bool use_stability = true;
  /// Yaw rotations at which query fields are probed; the minimum W2 wins.
  int yaw_samples = 8;
  /// Off reduces localization to centroid-only matching.
  bool gsf_filter = true;
};

struct MatchingConfig {
  double epsilon = 0.6;  ///< pairwise distance consistency (m)
  int min_inliers = 3;
};

struct SolverConfig {
  double tau0 = 1.0;  ///< m^2
  int max_iters = 20;
  double rel_tol = 1e-6;
};

struct EvalConfig {
  double success_trans = 5.0;  ///< m
  double success_rot = 10.0;   ///< deg
};

/// Every tunable of the pipeline. Loaded from nested JSON whose flattened
/// dotted keys must all be known; see `config_keys()`.
struct PipelineConfig {
  LabelTaxonomy taxonomy = LabelTaxonomy::default_urban();
  GraphConfig graph;
  GridSpec grid;
  DescriptorConfig descriptor;
  SimilarityOptions sim;
  MatchingConfig matching;
  SolverConfig solver;
  double query_voxel = 0.2;  ///< 0 disables query downsampling
  EvalConfig eval;

  void validate() const;
};

using RunConfig = PipelineConfig;

/// Documented flat keys (class-name keys shown with <class>).
std::vector<std::string> config_keys();

/// Applies one dotted key. Throws ValidationError on unknown keys or
/// ill-typed values.
void apply_config_key(PipelineConfig& cfg, const std::string& key, const nlohmann::json& value);

/// Applies a nested JSON object (taxonomy.classes may hold a full class
/// list and is applied first).
void apply_config(PipelineConfig& cfg, const nlohmann::json& doc);

PipelineConfig load_config(const std::string& path);

nlohmann::json to_json(const PipelineConfig& cfg);
nlohmann::json to_json(const GraphConfig& cfg);
GraphConfig graph_config_from_json(const nlohmann::json& j);

nlohmann::json taxonomy_to_json(const LabelTaxonomy& t);
LabelTaxonomy taxonomy_from_json(const nlohmann::json& j);

/// Parses JSON, reporting syntax errors as "<source>:<line>:<col>: ..."
/// through ValidationError.
nlohmann::json parse_json_text(const std::string& text, const std::string& source);

/// Flattens nested objects into dotted keys (arrays are leaves).
std::vector<std::pair<std::string, nlohmann::json>> flatten(const nlohmann::json& doc);

}  // namespace gsfloc
