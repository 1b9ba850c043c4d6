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
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "gsfloc/config.hpp"
#include "gsfloc/pipeline.hpp"
#include "gsfloc/types.hpp"

namespace gsfloc {

// ---------------------------------------------------------------------------
// Scene description

enum class Primitive { kCylinder, kBox };

struct InstanceTemplate {
  ClassId label = urban::kPole;
  int count = 0;
  Primitive primitive = Primitive::kCylinder;
  /// Cylinder: (radius, unused, height). Box: (length, width, height).
  Vec3 size{0.15, 0.15, 6.0};
  double base_z = 0.0;    ///< height of the primitive's bottom
  double density = 150.0; ///< surface points per m^2
};

struct GroundSpec {
  double spacing = 0.5;  ///< grid pitch (m)
  double jitter = 0.1;   ///< uniform xy jitter amplitude (m)
};

/// Vegetation density v(x) in [0,1] is a 2D Gaussian mixture. Ground points
/// get terrain/road scores from v; vegetation candidates are kept with
/// probability v.
struct VegetationSpec {
  int blobs = 6;
  double sigma_min = 4.0;
  double sigma_max = 10.0;
  double amplitude_min = 0.6;
  double amplitude_max = 1.0;
  double candidate_density = 0.5;  ///< candidates per m^2
  double z_min = 0.3;
  double z_max = 3.0;
};

enum class SymmetryMode { kNone, kMirroredTwin };

/// Twin B is twin A turned by pi about the vertical axis through the scene
/// origin. Its vegetation field is (1 - p) v_A + p v_C with v_C independent.
struct SymmetrySpec {
  SymmetryMode mode = SymmetryMode::kNone;
  double separation = 140.0;  ///< distance between twin centers (m)
  double perturbation = 0.0;  ///< p in [0,1]
};

struct SceneSpec {
  double extent_x = 80.0;  ///< per twin when mirrored
  double extent_y = 80.0;
  GroundSpec ground;
  VegetationSpec vegetation;
  std::vector<InstanceTemplate> instances;
  /// Minimum gap between instance footprints; raised to twice the largest
  /// clustering threshold of the placed classes.
  double min_gap = 3.0;
  double margin = 4.0;  ///< keep footprints this far inside the extent
  int max_attempts = 5000;
  SymmetrySpec symmetry;
  std::uint64_t seed = 1;

  void validate(const LabelTaxonomy& taxonomy) const;
};

/// 20 instances (8 poles, 6 trunks, 4 cars, 2 signs) on an 80 m square.
SceneSpec default_scene_spec();

struct GroundTruthInstance {
  ClassId label = 0;
  Vec3 centroid = Vec3::Zero();  ///< mean of the generated points
  int twin = 0;
};

struct SyntheticScene {
  SemanticPointCloud cloud;
  std::vector<GroundTruthInstance> instances;
  /// One center without symmetry, two (A then B) for mirrored twins.
  std::vector<Vec3> twin_centers;
  /// Mean over paired ground points of the largest class-score difference
  /// between the twins (0 without symmetry).
  double background_deviation = 0.0;
};

/// Throws GenerationError when the instances cannot be placed.
SyntheticScene generate_scene(const SceneSpec& spec, const LabelTaxonomy& taxonomy);
/// As generate_scene with the mirrored-twin directive forced on.
SyntheticScene generate_mirrored_twin(const SceneSpec& spec, const LabelTaxonomy& taxonomy);

/// Half-turn about the vertical axis through the origin (maps twin A to B).
RigidTransform twin_isometry();

struct ScanSpec {
  double range_max = 60.0;
  double dropout = 0.3;
  double noise_sigma = 0.03;
};

/// Points within range of the sensor, independently dropped, perturbed and
/// expressed in the sensor frame. `sensor_pose` maps sensor to world.
SemanticPointCloud simulate_scan(const SemanticPointCloud& scene, const RigidTransform& sensor_pose,
                                 const ScanSpec& scan, std::uint64_t seed);

// ---------------------------------------------------------------------------
// Benchmark

struct QuerySpec {
  RigidTransform pose;  ///< sensor to world
  int twin = 0;
  std::uint64_t seed = 0;
};

struct QueryPlan {
  int count = 50;
  double sensor_height = 1.8;
  /// Half-width of the square around each twin center holding the sensors.
  double region_half = 10.0;
  bool random_yaw = true;
};

struct BenchmarkSpec {
  SceneSpec scene = default_scene_spec();
  ScanSpec scan;
  QueryPlan queries;
  /// Pipeline overrides (flattened dotted keys).
  nlohmann::json config = nlohmann::json::object();
  std::uint64_t seed = 1;
};

/// Queries alternate between twins when mirrored.
std::vector<QuerySpec> plan_queries(const SyntheticScene& scene, const QueryPlan& plan,
                                    std::uint64_t seed);

struct EvalRow {
  int query = 0;
  std::uint64_t seed = 0;
  int twin = 0;
  RigidTransform truth;
  RigidTransform estimate;
  LocalizationStatus status = LocalizationStatus::kNoMatch;
  bool success = false;
  /// Infinite when no pose was produced.
  double trans_err = 0.0;
  double rot_err = 0.0;
  /// 1 if the estimate lies nearer the true twin center, 0 if nearer the
  /// other one, -1 without twins.
  int correct_twin = -1;
  std::size_t inliers = 0;
  std::size_t clique = 0;
  StageTimings timings;
};

struct EvalAggregates {
  std::size_t queries = 0;
  std::size_t successes = 0;
  double success_rate = 0.0;
  /// Mean errors over successful rows (NaN if none).
  double mean_ate = 0.0;
  double mean_are = 0.0;
  /// Percentiles over all rows; failures count as infinite error.
  double p50_trans = 0.0;
  double p90_trans = 0.0;
  double p50_rot = 0.0;
  double p90_rot = 0.0;
  /// Fraction of rows on the correct twin (NaN without twins).
  double correct_twin_rate = 0.0;
};

struct EvalReport {
  std::vector<EvalRow> rows;
  EvalAggregates aggregates;
  EvalConfig thresholds;
  bool gsf_filter = true;
};

/// Nearest-rank percentile (q in [0,1]) of the values.
double percentile(std::vector<double> values, double q);

EvalAggregates compute_aggregates(const std::vector<EvalRow>& rows);

/// Localizes one simulated scan per query against the shared map.
EvalReport run_benchmark(const SyntheticScene& scene, const ReferenceMap& map,
                         const std::vector<QuerySpec>& queries, const ScanSpec& scan,
                         const PipelineConfig& config);

/// Builds the config, scene and map, plans queries and evaluates them.
EvalReport run_benchmark(const BenchmarkSpec& spec, const PipelineConfig& base);

/// Fills a row from a localization result.
EvalRow evaluate_result(const LocalizationResult& r, const QuerySpec& q, const SyntheticScene* scene,
                        const EvalConfig& thresholds, int index);

/// One row per query; numbers printed with "%.9g".
std::string report_csv(const EvalReport& report, bool with_timings = true);
nlohmann::json report_json(const EvalReport& report, const PipelineConfig& config);

// ---------------------------------------------------------------------------
// Sparsification ablation

struct AblationSpec {
  int neighborhoods = 20;
  std::vector<int> budgets{64, 128, 256};
  double eval_fraction = 0.3;
  double radius = 10.0;
  GpHyperParams hyper;
  std::uint64_t seed = 7;
};

struct AblationRow {
  int neighborhood = 0;
  int budget = 0;
  std::size_t kept = 0;  ///< points kept by both strategies
  double miou_semantic = 0.0;
  double miou_random = 0.0;
};

/// Fits each neighborhood's training pool with semantic and random
/// subsampling of equal size and scores held-out reconstruction mIoU.
std::vector<AblationRow> sparsification_ablation(const AblationSpec& spec);

// ---------------------------------------------------------------------------
// JSON specs

/// Unknown or ill-typed fields raise ValidationError naming the field path.
SceneSpec scene_spec_from_json(const nlohmann::json& j, const LabelTaxonomy& taxonomy);
nlohmann::json to_json(const SceneSpec& s, const LabelTaxonomy& taxonomy);
BenchmarkSpec benchmark_spec_from_json(const nlohmann::json& j, const LabelTaxonomy& taxonomy);
nlohmann::json to_json(const BenchmarkSpec& s, const LabelTaxonomy& taxonomy);

/// splitmix64 step, used to derive independent seeds.
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream);

}  // namespace gsfloc
