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

#include "gsfloc/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <unordered_map>

#include "gsfloc/errors.hpp"
#include "gsfloc/io.hpp"
#include "gsfloc/matching.hpp"
#include "gsfloc/parallel.hpp"
#include "gsfloc/pose_solver.hpp"

namespace gsfloc {

namespace {

constexpr char kPopMagic[4] = {'G', 'S', 'F', 'P'};
constexpr std::uint32_t kPopVersion = 1;
constexpr int kBundleVersion = 1;

const char* const kBundleFiles[] = {"graph.json", "graph.bin", "index.gsfi", "populations.bin",
                                    "config.json"};

using Clock = std::chrono::steady_clock;

double ms_since(Clock::time_point t0) {
  return std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
}

double median_of(std::vector<double> v) {
  const std::size_t n = v.size();
  std::sort(v.begin(), v.end());
  return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

std::vector<std::optional<GpPopulation>> probe_all(const SceneGraph& graph, const GridSpec& grid,
                                                   const LabelTaxonomy& taxonomy) {
  std::vector<std::optional<GpPopulation>> pops(graph.size());
  parallel_for(graph.size(), [&](std::size_t k) {
    if (graph.fields[k]) pops[k] = grid_probe(*graph.fields[k], grid, taxonomy);
  });
  return pops;
}

void check_compatible(const ReferenceMap& map, const PipelineConfig& config) {
  const GridSpec& a = map.config.grid;
  const GridSpec& b = config.grid;
  if (a.nx != b.nx || a.ny != b.ny || a.dx != b.dx || a.dy != b.dy || a.z_mode != b.z_mode ||
      a.z_offset != b.z_offset) {
    throw ValidationError("query grid geometry differs from the map's");
  }
  if (map.config.taxonomy.size() != config.taxonomy.size()) {
    throw ValidationError("query taxonomy size differs from the map's");
  }
  if (map.config.sim.use_stability != config.sim.use_stability) {
    throw ValidationError("sim.use_stability differs from the map's");
  }
}

}  // namespace

// ---------------------------------------------------------------------------
// Map

void ReferenceMap::prepare() {
  prepared.assign(populations.size(), std::nullopt);
  parallel_for(populations.size(), [&](std::size_t k) {
    if (populations[k]) prepared[k] = prepare_population(*populations[k], config.sim.use_stability);
  });
}

void ReferenceMap::validate() const {
  const int n = static_cast<int>(graph.size());
  if (populations.size() != graph.size()) throw ValidationError("population count != instance count");
  for (const auto& d : index.descriptors()) {
    for (int id : d.vertex_ids) {
      if (id < 0 || id >= n) throw ValidationError("descriptor references unknown instance");
    }
  }
  const PointMatrix ref = probe_grid(config.grid);
  for (const auto& p : populations) {
    if (!p) continue;
    if (p->grid.rows() != ref.rows() || (p->grid - ref).cwiseAbs().maxCoeff() > 1e-12) {
      throw ValidationError("population grid geometry differs across instances");
    }
  }
}

ReferenceMap build_map(const SemanticPointCloud& map_cloud, const PipelineConfig& config) {
  config.validate();
  ReferenceMap map;
  map.config = config;
  map.graph = build_scene_graph(map_cloud, config.taxonomy, config.graph);
  if (map.graph.size() < 3) {
    throw BuildError("map has " + std::to_string(map.graph.size()) +
                     " instances; at least 3 are required");
  }
  map.index = DescriptorIndex(triangulate(map.graph.instances, config.descriptor.k),
                              config.descriptor.delta_d);
  map.populations = probe_all(map.graph, config.grid, config.taxonomy);
  map.prepare();
  return map;
}

std::vector<std::uint8_t> serialize_populations(const std::vector<std::optional<GpPopulation>>& pops) {
  ByteWriter w;
  w.raw(kPopMagic, 4);
  w.u32(kPopVersion);
  w.u64(pops.size());
  for (const auto& p : pops) {
    const std::uint8_t present = p ? 1 : 0;
    w.raw(&present, 1);
    if (!p) continue;
    w.u32(static_cast<std::uint32_t>(p->mu.rows()));
    w.u32(static_cast<std::uint32_t>(p->mu.cols()));
    for (Eigen::Index i = 0; i < p->grid.rows(); ++i)
      for (int c = 0; c < 3; ++c) w.f64(p->grid(i, c));
    for (Eigen::Index i = 0; i < p->mu.rows(); ++i)
      for (Eigen::Index j = 0; j < p->mu.cols(); ++j) w.f64(p->mu(i, j));
    for (Eigen::Index i = 0; i < p->Sigma.rows(); ++i)
      for (Eigen::Index j = 0; j < p->Sigma.cols(); ++j) w.f64(p->Sigma(i, j));
    for (Eigen::Index i = 0; i < p->stability_weights.size(); ++i) w.f64(p->stability_weights(i));
  }
  return w.take();
}

std::vector<std::optional<GpPopulation>> deserialize_populations(const std::vector<std::uint8_t>& bytes,
                                                                 const std::string& source) {
  ByteReader r(bytes, source);
  char magic[4];
  r.raw(magic, 4);
  if (!std::equal(magic, magic + 4, kPopMagic)) throw FormatError(source + ": bad magic");
  if (const auto v = r.u32(); v != kPopVersion) {
    throw FormatError(source + ": unsupported version " + std::to_string(v));
  }
  const std::uint64_t count = r.u64();
  if (count > bytes.size()) throw FormatError(source + ": implausible population count");
  std::vector<std::optional<GpPopulation>> pops(count);
  for (auto& p : pops) {
    std::uint8_t present = 0;
    r.raw(&present, 1);
    if (present == 0) continue;
    const Eigen::Index G = r.u32();
    const Eigen::Index D = r.u32();
    if (static_cast<std::size_t>(G * (3 + D + G + 1)) * 8 > r.remaining()) {
      throw FormatError(source + ": truncated population");
    }
    GpPopulation pop;
    pop.grid.resize(G, 3);
    pop.mu.resize(G, D);
    pop.Sigma.resize(G, G);
    pop.stability_weights.resize(G);
    for (Eigen::Index i = 0; i < G; ++i)
      for (int c = 0; c < 3; ++c) pop.grid(i, c) = r.f64();
    for (Eigen::Index i = 0; i < G; ++i)
      for (Eigen::Index j = 0; j < D; ++j) pop.mu(i, j) = r.f64();
    for (Eigen::Index i = 0; i < G; ++i)
      for (Eigen::Index j = 0; j < G; ++j) pop.Sigma(i, j) = r.f64();
    for (Eigen::Index i = 0; i < G; ++i) pop.stability_weights(i) = r.f64();
    p = std::move(pop);
  }
  if (r.remaining() != 0) throw FormatError(source + ": trailing bytes");
  return pops;
}

void save_map(const ReferenceMap& map, const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create directory " + dir.string() + ": " + ec.message());
  save_scene_graph(map.graph, dir / "graph.json", dir / "graph.bin");
  write_bytes(dir / "index.gsfi", map.index.serialize());
  write_bytes(dir / "populations.bin", serialize_populations(map.populations));
  write_text(dir / "config.json", to_json(map.config).dump(2) + "\n");
  nlohmann::json manifest;
  manifest["format"] = "gsfloc.map_bundle";
  manifest["version"] = kBundleVersion;
  manifest["instances"] = map.graph.size();
  manifest["descriptors"] = map.index.size();
  for (const char* name : kBundleFiles) manifest["files"][name] = sha256_file(dir / name);
  write_text(dir / "manifest.json", manifest.dump(2) + "\n");
}

ReferenceMap load_map(const std::filesystem::path& dir) {
  const auto manifest_path = dir / "manifest.json";
  const auto manifest = parse_json_text(read_text(manifest_path), manifest_path.string());
  if (manifest.value("format", "") != "gsfloc.map_bundle") {
    throw FormatError(manifest_path.string() + ": not a map bundle manifest");
  }
  for (const char* name : kBundleFiles) {
    const auto it = manifest.find("files");
    if (it == manifest.end() || !it->contains(name)) {
      throw FormatError(manifest_path.string() + ": missing entry for " + name);
    }
    const std::string actual = sha256_file(dir / name);
    if ((*it)[name].get<std::string>() != actual) {
      throw FormatError((dir / name).string() + ": content hash does not match the manifest");
    }
  }
  ReferenceMap map;
  apply_config(map.config, parse_json_text(read_text(dir / "config.json"), (dir / "config.json").string()));
  map.graph = load_scene_graph(dir / "graph.json", dir / "graph.bin");
  map.config.graph = map.graph.config;
  map.index = DescriptorIndex::deserialize(read_bytes(dir / "index.gsfi"), (dir / "index.gsfi").string());
  map.populations = deserialize_populations(read_bytes(dir / "populations.bin"),
                                            (dir / "populations.bin").string());
  map.validate();
  map.prepare();
  return map;
}

// ---------------------------------------------------------------------------
// Query preprocessing

SemanticPointCloud voxel_downsample(const SemanticPointCloud& cloud, double voxel, int num_classes,
                                    double one_hot_confidence) {
  if (!(voxel > 0.0)) throw ValidationError("voxel size must be > 0");
  const MatrixX logits =
      cloud.logits ? *cloud.logits : synthesize_logits(cloud.labels, num_classes, one_hot_confidence);
  struct Key {
    std::int64_t x, y, z;
    ClassId label;
    bool operator==(const Key& o) const noexcept {
      return x == o.x && y == o.y && z == o.z && label == o.label;
    }
  };
  struct KeyHash {
    std::size_t operator()(const Key& k) const noexcept {
      std::uint64_t h = static_cast<std::uint64_t>(k.x) * 0x9E3779B97F4A7C15ULL;
      h ^= static_cast<std::uint64_t>(k.y) * 0xC2B2AE3D27D4EB4FULL + (h << 6) + (h >> 2);
      h ^= static_cast<std::uint64_t>(k.z) * 0x165667B19E3779F9ULL + (h << 6) + (h >> 2);
      h ^= static_cast<std::uint64_t>(k.label) + (h << 6) + (h >> 2);
      return static_cast<std::size_t>(h);
    }
  };
  std::unordered_map<Key, std::size_t, KeyHash> cell_of;
  std::vector<Vec3> psum;
  std::vector<VectorX> lsum;
  std::vector<ClassId> labels;
  std::vector<int> count;
  for (Eigen::Index i = 0; i < cloud.size(); ++i) {
    const Vec3 p = cloud.point(i);
    const Key key{static_cast<std::int64_t>(std::floor(p.x() / voxel)),
                  static_cast<std::int64_t>(std::floor(p.y() / voxel)),
                  static_cast<std::int64_t>(std::floor(p.z() / voxel)),
                  cloud.labels[static_cast<std::size_t>(i)]};
    auto [it, inserted] = cell_of.try_emplace(key, psum.size());
    if (inserted) {
      psum.push_back(p);
      lsum.push_back(logits.row(i).transpose());
      labels.push_back(key.label);
      count.push_back(1);
    } else {
      psum[it->second] += p;
      lsum[it->second] += logits.row(i).transpose();
      ++count[it->second];
    }
  }
  SemanticPointCloud out;
  const auto n = static_cast<Eigen::Index>(psum.size());
  out.points.resize(n, 3);
  MatrixX out_logits(n, logits.cols());
  for (Eigen::Index k = 0; k < n; ++k) {
    const double c = count[static_cast<std::size_t>(k)];
    out.points.row(k) = (psum[static_cast<std::size_t>(k)] / c).transpose();
    out_logits.row(k) = (lsum[static_cast<std::size_t>(k)] / c).transpose();
  }
  out.labels = std::move(labels);
  out.logits = std::move(out_logits);
  return out;
}

// ---------------------------------------------------------------------------
// Localization

std::string to_string(LocalizationStatus s) {
  switch (s) {
    case LocalizationStatus::kSuccess:
      return "success";
    case LocalizationStatus::kDegenerate:
      return "degenerate";
    case LocalizationStatus::kNoMatch:
      return "no-match";
  }
  return "unknown";
}

LocalizationResult localize(const SemanticPointCloud& query_cloud, const ReferenceMap& map,
                            const PipelineConfig& config) {
  const auto t_start = Clock::now();
  check_compatible(map, config);
  LocalizationResult result;
  result.gsf_filter = config.sim.gsf_filter;
  auto finish = [&](LocalizationStatus s, std::string msg) {
    result.status = s;
    result.message = std::move(msg);
    result.timings.total_ms = ms_since(t_start);
    return result;
  };

  // Stage 1: query scene graph and triangles.
  auto t0 = Clock::now();
  const SemanticPointCloud query =
      config.query_voxel > 0.0 ? voxel_downsample(query_cloud, config.query_voxel,
                                                  config.taxonomy.size(),
                                                  config.graph.one_hot_confidence)
                               : query_cloud;
  result.stats.query_points = static_cast<std::size_t>(query.size());
  const SceneGraph qgraph = build_scene_graph(query, config.taxonomy, config.graph);
  result.stats.query_instances = qgraph.size();
  result.timings.graph_ms = ms_since(t0);
  if (qgraph.size() < 3) return finish(LocalizationStatus::kNoMatch, "fewer than 3 query instances");

  t0 = Clock::now();
  const auto qtris = triangulate(qgraph.instances, config.descriptor.k);
  std::vector<std::vector<std::size_t>> coarse(qtris.size());
  for (std::size_t t = 0; t < qtris.size(); ++t) {
    coarse[t] = map.index.query(qtris[t]);
    result.stats.coarse_candidates += coarse[t].size();
  }
  result.stats.triangles_queried = qtris.size();
  result.timings.descriptor_ms = ms_since(t0);

  // Stage 2/3: population comparison and filtering.
  t0 = Clock::now();
  const auto& mdesc = map.index.descriptors();
  std::vector<TriangleMatch> matches;
  if (config.sim.gsf_filter) {
    const std::size_t nq = qgraph.size();
    const std::size_t nm = map.graph.size();
    const int Y = config.sim.yaw_samples;
    std::vector<std::vector<PreparedPopulation>> qpops(nq);
    parallel_for(nq, [&](std::size_t i) {
      if (!qgraph.fields[i]) return;
      qpops[i].reserve(static_cast<std::size_t>(Y));
      for (int y = 0; y < Y; ++y) {
        const double yaw = 2.0 * M_PI * y / Y;
        qpops[i].push_back(prepare_population(
            grid_probe(*qgraph.fields[i], config.grid, config.taxonomy, Vec3::Zero(), yaw),
            config.sim.use_stability));
      }
    });

    const double kUnset = -1.0;
    const double kMissing = -2.0;
    std::vector<double> dist(nq * nm, kUnset);
    std::vector<std::size_t> needed;
    for (std::size_t t = 0; t < qtris.size(); ++t) {
      for (std::size_t c : coarse[t]) {
        for (const auto& perm : vertex_pairings(qtris[t], mdesc[c])) {
          for (int k = 0; k < 3; ++k) {
            const auto q = static_cast<std::size_t>(qtris[t].vertex_ids[static_cast<std::size_t>(k)]);
            const auto m = static_cast<std::size_t>(
                mdesc[c].vertex_ids[static_cast<std::size_t>(perm[static_cast<std::size_t>(k)])]);
            double& slot = dist[q * nm + m];
            if (slot == kUnset) {
              slot = kMissing;
              needed.push_back(q * nm + m);
            }
          }
        }
      }
    }
    std::sort(needed.begin(), needed.end());
    parallel_for(needed.size(), [&](std::size_t k) {
      const std::size_t q = needed[k] / nm;
      const std::size_t m = needed[k] % nm;
      if (qpops[q].empty() || !map.prepared[m]) return;
      double best = std::numeric_limits<double>::infinity();
      for (const auto& qp : qpops[q]) best = std::min(best, w2_squared(qp, *map.prepared[m]));
      dist[needed[k]] = best;
    });

    std::vector<double> observed;
    for (std::size_t key : needed) {
      if (dist[key] >= 0.0) observed.push_back(dist[key]);
    }
    SimilarityConfig sim;
    const double med = observed.empty() ? 1.0 : std::max(median_of(observed), 1e-12);
    sim.sigma_w = config.sim.sigma_w.value_or(std::sqrt(med));
    sim.accept_threshold = config.sim.accept_threshold.value_or(3.0 * med);
    result.stats.sigma_w = sim.sigma_w;
    result.stats.accept_threshold = sim.accept_threshold;

    const VertexDistance lookup = [&](int q, int m) -> std::optional<double> {
      const double d = dist[static_cast<std::size_t>(q) * nm + static_cast<std::size_t>(m)];
      if (d < 0.0) return std::nullopt;
      return d;
    };
    for (std::size_t t = 0; t < qtris.size(); ++t) {
      std::size_t skipped = 0;
      const auto scored = gsf_filter(qtris[t], coarse[t], mdesc, lookup, sim, &skipped);
      result.stats.candidates_skipped += skipped;
      result.stats.candidates_after_filter += scored.size();
      for (const auto& s : scored) {
        TriangleMatch tm;
        tm.pairs = s.pairs;
        tm.omega = s.omega;
        matches.push_back(tm);
      }
    }
  } else {
    for (std::size_t t = 0; t < qtris.size(); ++t) {
      for (std::size_t c : coarse[t]) {
        for (const auto& perm : vertex_pairings(qtris[t], mdesc[c])) {
          TriangleMatch tm;
          for (std::size_t k = 0; k < 3; ++k) {
            tm.pairs[k] = {qtris[t].vertex_ids[k],
                           mdesc[c].vertex_ids[static_cast<std::size_t>(perm[k])]};
          }
          matches.push_back(tm);
        }
        ++result.stats.candidates_after_filter;
      }
    }
  }
  result.timings.gsf_ms = ms_since(t0);

  // Stage 4: consistency unification and pose.
  t0 = Clock::now();
  const auto corrs = collect_correspondences(matches);
  result.stats.correspondences = corrs.size();
  std::vector<Vec3> qc, mc;
  for (const auto& inst : qgraph.instances) qc.push_back(inst.centroid);
  for (const auto& inst : map.graph.instances) mc.push_back(inst.centroid);
  const ConsistencyGraph cgraph = build_consistency_graph(corrs, qc, mc, config.matching.epsilon);
  const auto clique = max_clique(cgraph);
  result.stats.clique_size = clique.size();
  result.timings.clique_ms = ms_since(t0);
  if (clique.size() < static_cast<std::size_t>(std::max(3, config.matching.min_inliers))) {
    return finish(LocalizationStatus::kNoMatch,
                  "consistent set of " + std::to_string(clique.size()) + " is below min_inliers");
  }

  t0 = Clock::now();
  WeightedCorrespondenceSet set;
  set.tau0 = config.solver.tau0;
  for (int id : clique) {
    const auto& c = cgraph.nodes[static_cast<std::size_t>(id)];
    set.add(mc[static_cast<std::size_t>(c.map_id)], qc[static_cast<std::size_t>(c.query_id)], c.omega);
  }
  IrlsOptions opts;
  opts.max_iters = config.solver.max_iters;
  opts.rel_tol = config.solver.rel_tol;
  IrlsResult irls;
  try {
    irls = robust_irls(set, opts);
  } catch (const DegenerateError& e) {
    result.timings.solve_ms = ms_since(t0);
    return finish(LocalizationStatus::kDegenerate, e.what());
  }
  result.timings.solve_ms = ms_since(t0);
  result.pose = irls.pose;
  for (std::size_t k = 0; k < clique.size(); ++k) {
    if (!irls.inliers[k]) continue;
    const auto& c = cgraph.nodes[static_cast<std::size_t>(clique[k])];
    result.inliers.emplace_back(c.query_id, c.map_id);
  }
  result.inlier_count = result.inliers.size();
  if (!irls.ok() || result.inlier_count < 3) {
    return finish(LocalizationStatus::kDegenerate, "solver kept fewer than 3 inliers");
  }
  return finish(LocalizationStatus::kSuccess, "");
}

nlohmann::json to_json(const LocalizationResult& r, bool with_timings) {
  nlohmann::json j;
  j["status"] = to_string(r.status);
  j["gsf_filter"] = r.gsf_filter;
  j["inlier_count"] = r.inlier_count;
  j["pose"] = format_pose(r.pose);
  nlohmann::json inl = nlohmann::json::array();
  for (const auto& [q, m] : r.inliers) inl.push_back({q, m});
  j["inliers"] = inl;
  j["stats"] = {{"query_points", r.stats.query_points},
                {"query_instances", r.stats.query_instances},
                {"triangles_queried", r.stats.triangles_queried},
                {"coarse_candidates", r.stats.coarse_candidates},
                {"candidates_after_filter", r.stats.candidates_after_filter},
                {"candidates_skipped", r.stats.candidates_skipped},
                {"correspondences", r.stats.correspondences},
                {"clique_size", r.stats.clique_size},
                {"sigma_w", r.stats.sigma_w},
                {"accept_threshold", r.stats.accept_threshold}};
  if (!r.message.empty()) j["message"] = r.message;
  if (with_timings) {
    j["timings_ms"] = {{"graph", r.timings.graph_ms},     {"descriptor", r.timings.descriptor_ms},
                       {"gsf", r.timings.gsf_ms},         {"clique", r.timings.clique_ms},
                       {"solve", r.timings.solve_ms},     {"total", r.timings.total_ms}};
  }
  return j;
}

}  // namespace gsfloc
