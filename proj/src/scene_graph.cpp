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

#include "gsfloc/scene_graph.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <tuple>

#include "json.hpp"

#include "gsfloc/config.hpp"
#include "gsfloc/errors.hpp"
#include "gsfloc/io.hpp"
#include "gsfloc/parallel.hpp"

namespace gsfloc {

namespace {

constexpr std::int64_t kCellBias = std::int64_t{1} << 20;
constexpr std::uint64_t kCellMask = (std::uint64_t{1} << 21) - 1;
constexpr char kGraphMagic[4] = {'G', 'S', 'F', 'G'};
constexpr std::uint32_t kGraphVersion = 1;

class UnionFind {
 public:
  explicit UnionFind(std::size_t n) : parent_(n) { std::iota(parent_.begin(), parent_.end(), 0); }
  std::size_t find(std::size_t x) {
    while (parent_[x] != x) {
      parent_[x] = parent_[parent_[x]];
      x = parent_[x];
    }
    return x;
  }
  void unite(std::size_t a, std::size_t b) {
    a = find(a);
    b = find(b);
    if (a == b) return;
    if (a < b) std::swap(a, b);
    parent_[a] = b;
  }

 private:
  std::vector<std::size_t> parent_;
};

}  // namespace

VoxelIndex::VoxelIndex(const PointMatrix& points, double cell) : points_(points), cell_(cell) {
  if (!(cell > 0.0)) throw ValidationError("voxel cell size must be > 0");
  for (Eigen::Index i = 0; i < points.rows(); ++i) {
    cells_[pack(cell_of(points.row(i).transpose()))].push_back(i);
  }
}

VoxelIndex::Cell VoxelIndex::cell_of(const Vec3& p) const {
  return {static_cast<std::int64_t>(std::floor(p.x() / cell_)),
          static_cast<std::int64_t>(std::floor(p.y() / cell_)),
          static_cast<std::int64_t>(std::floor(p.z() / cell_))};
}

std::uint64_t VoxelIndex::pack(const Cell& c) {
  auto part = [](std::int64_t v) { return static_cast<std::uint64_t>(v + kCellBias) & kCellMask; };
  return (part(c.x) << 42) | (part(c.y) << 21) | part(c.z);
}

std::vector<Eigen::Index> VoxelIndex::radius(const Vec3& center, double r) const {
  if (!(r > 0.0)) throw ValidationError("radius must be > 0");
  std::vector<Eigen::Index> out;
  const double r2 = r * r;
  const auto span = static_cast<std::int64_t>(std::ceil(r / cell_));
  const Cell c = cell_of(center);
  for (std::int64_t dx = -span; dx <= span; ++dx)
    for (std::int64_t dy = -span; dy <= span; ++dy)
      for (std::int64_t dz = -span; dz <= span; ++dz) {
        auto it = cells_.find(pack({c.x + dx, c.y + dy, c.z + dz}));
        if (it == cells_.end()) continue;
        for (auto j : it->second) {
          if ((points_.row(j).transpose() - center).squaredNorm() <= r2) out.push_back(j);
        }
      }
  std::sort(out.begin(), out.end());
  return out;
}

std::vector<Eigen::Index> radius_query(const SemanticPointCloud& cloud, const Vec3& center,
                                       double r) {
  return VoxelIndex(cloud.points, r).radius(center, r);
}

double ClusterParams::threshold(const LabelTaxonomy& taxonomy, ClassId id) const {
  if (auto it = thresholds.find(id); it != thresholds.end()) return it->second;
  return taxonomy.at(id).cluster_threshold;
}

std::vector<Instance> cluster_instances(const SemanticPointCloud& cloud,
                                        const LabelTaxonomy& taxonomy,
                                        const ClusterParams& params) {
  std::map<ClassId, std::vector<Eigen::Index>> by_class;
  for (Eigen::Index i = 0; i < cloud.size(); ++i) {
    const ClassId c = cloud.labels[static_cast<std::size_t>(i)];
    if (taxonomy.instantiable(c)) by_class[c].push_back(i);
  }

  std::vector<Instance> out;
  for (const auto& [cls, members] : by_class) {
    const double thr = params.threshold(taxonomy, cls);
    const double thr2 = thr * thr;
    PointMatrix sub(static_cast<Eigen::Index>(members.size()), 3);
    for (std::size_t k = 0; k < members.size(); ++k) {
      sub.row(static_cast<Eigen::Index>(k)) = cloud.points.row(members[k]);
    }
    VoxelIndex index(sub, thr);
    UnionFind uf(members.size());
    for (Eigen::Index a = 0; a < sub.rows(); ++a) {
      const Vec3 pa = sub.row(a).transpose();
      index.for_each_neighbor_cell(pa, [&](Eigen::Index b) {
        if (b > a && (sub.row(b).transpose() - pa).squaredNorm() <= thr2) {
          uf.unite(static_cast<std::size_t>(a), static_cast<std::size_t>(b));
        }
      });
    }
    std::map<std::size_t, std::vector<Eigen::Index>> components;
    for (std::size_t k = 0; k < members.size(); ++k) components[uf.find(k)].push_back(members[k]);
    for (auto& [root, idx] : components) {
      if (static_cast<int>(idx.size()) < params.min_cluster_size) continue;
      std::sort(idx.begin(), idx.end());
      Instance inst;
      inst.label = cls;
      for (auto i : idx) inst.centroid += cloud.point(i);
      inst.centroid /= static_cast<double>(idx.size());
      inst.point_indices = std::move(idx);
      out.push_back(std::move(inst));
    }
  }
  std::sort(out.begin(), out.end(), [](const Instance& a, const Instance& b) {
    return std::make_tuple(a.label, a.centroid.x(), a.centroid.y(), a.centroid.z()) <
           std::make_tuple(b.label, b.centroid.x(), b.centroid.y(), b.centroid.z());
  });
  for (std::size_t k = 0; k < out.size(); ++k) out[k].id = static_cast<int>(k);
  return out;
}

void SceneGraph::validate(const LabelTaxonomy& taxonomy) const {
  if (fields.size() != instances.size()) throw ValidationError("graph: field/instance count mismatch");
  for (std::size_t k = 0; k < instances.size(); ++k) {
    if (instances[k].id != static_cast<int>(k)) throw ValidationError("graph: instance ids not dense");
    if (!taxonomy.instantiable(instances[k].label)) {
      throw ValidationError("graph: instance " + std::to_string(k) + " has non-instantiable label");
    }
  }
}

std::uint64_t instance_seed(std::uint64_t base, int instance_id) {
  // splitmix64 finalizer
  std::uint64_t z = base + 0x9E3779B97F4A7C15ull * (static_cast<std::uint64_t>(instance_id) + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

SceneGraph build_scene_graph(const SemanticPointCloud& cloud, const LabelTaxonomy& taxonomy,
                             const GraphConfig& config) {
  cloud.validate(taxonomy.size());
  SceneGraph graph;
  graph.cloud = cloud;
  if (!graph.cloud.logits) {
    graph.cloud.logits = synthesize_logits(cloud.labels, taxonomy.size(), config.one_hot_confidence);
  }
  graph.config = config;
  graph.instances = cluster_instances(cloud, taxonomy, config.cluster);
  graph.fields.resize(graph.instances.size());
  if (graph.instances.empty()) return graph;

  const VoxelIndex index(graph.cloud.points, config.radius);
  std::vector<std::string> errors(graph.instances.size());
  parallel_for(graph.instances.size(), [&](std::size_t k) {
    const Instance& inst = graph.instances[k];
    const auto neigh = index.radius(inst.centroid, config.radius);
    PointMatrix X(static_cast<Eigen::Index>(neigh.size()), 3);
    MatrixX Y(static_cast<Eigen::Index>(neigh.size()), graph.cloud.logits->cols());
    std::vector<ClassId> labels(neigh.size());
    for (std::size_t m = 0; m < neigh.size(); ++m) {
      const auto row = static_cast<Eigen::Index>(m);
      X.row(row) = graph.cloud.points.row(neigh[m]) - inst.centroid.transpose();
      Y.row(row) = graph.cloud.logits->row(neigh[m]);
      labels[m] = graph.cloud.labels[static_cast<std::size_t>(neigh[m])];
    }
    GsfFitOptions opts = config.gsf;
    opts.seed = instance_seed(config.gsf.seed, inst.id);
    try {
      graph.fields[k] = fit_gsf(X, Y, labels, opts);
    } catch (const FitError& e) {
      errors[k] = "instance " + std::to_string(inst.id) + ": " + e.what();
    }
  });
  for (auto& e : errors) {
    if (!e.empty()) graph.warnings.push_back(std::move(e));
  }
  return graph;
}

void save_scene_graph(const SceneGraph& graph, const std::filesystem::path& json_path,
                      const std::filesystem::path& bin_path) {
  using nlohmann::json;
  json doc;
  doc["format"] = "gsfloc.scene_graph";
  doc["version"] = kGraphVersion;
  doc["num_points"] = graph.cloud.size();
  doc["config"] = to_json(graph.config);
  doc["warnings"] = graph.warnings;
  json insts = json::array();

  ByteWriter bin;
  bin.raw(kGraphMagic, 4);
  bin.u32(kGraphVersion);
  bin.u32(static_cast<std::uint32_t>(graph.instances.size()));
  for (std::size_t k = 0; k < graph.instances.size(); ++k) {
    const Instance& inst = graph.instances[k];
    json ji;
    ji["id"] = inst.id;
    ji["label"] = inst.label;
    ji["centroid"] = {inst.centroid.x(), inst.centroid.y(), inst.centroid.z()};
    ji["num_points"] = inst.point_indices.size();
    bin.u64(inst.point_indices.size());
    for (auto i : inst.point_indices) bin.u64(static_cast<std::uint64_t>(i));
    const auto& field = graph.fields[k];
    bin.u32(field ? 1u : 0u);
    if (field) {
      ji["field"] = {{"support", field->support_size()},
                     {"outputs", field->output_dim()},
                     {"kappa", field->hyper().kappa},
                     {"sigma_y", field->hyper().sigma_y},
                     {"jitter", field->jitter()}};
      bin.u64(static_cast<std::uint64_t>(field->support_size()));
      bin.u64(static_cast<std::uint64_t>(field->output_dim()));
      bin.f64(field->hyper().kappa);
      bin.f64(field->hyper().sigma_y);
      const auto& X = field->inputs();
      const auto& Y = field->targets();
      for (Eigen::Index i = 0; i < X.rows(); ++i)
        for (int c = 0; c < 3; ++c) bin.f64(X(i, c));
      for (Eigen::Index i = 0; i < Y.rows(); ++i)
        for (Eigen::Index c = 0; c < Y.cols(); ++c) bin.f64(Y(i, c));
    } else {
      ji["field"] = nullptr;
    }
    insts.push_back(std::move(ji));
  }
  doc["instances"] = std::move(insts);
  write_text(json_path, doc.dump(2) + "\n");
  write_bytes(bin_path, bin.bytes());
}

SceneGraph load_scene_graph(const std::filesystem::path& json_path,
                            const std::filesystem::path& bin_path) {
  using nlohmann::json;
  json doc;
  try {
    doc = json::parse(read_text(json_path));
  } catch (const json::exception& e) {
    throw FormatError(json_path.string() + ": " + e.what());
  }
  if (doc.value("format", "") != "gsfloc.scene_graph" || doc.value("version", 0u) != kGraphVersion) {
    throw FormatError(json_path.string() + ": not a version-1 scene graph document");
  }
  SceneGraph graph;
  graph.config = graph_config_from_json(doc.at("config"));
  graph.warnings = doc.at("warnings").get<std::vector<std::string>>();

  const auto bytes = read_bytes(bin_path);
  ByteReader in(bytes, bin_path.string());
  char magic[4];
  in.raw(magic, 4);
  if (std::string(magic, 4) != "GSFG" || in.u32() != kGraphVersion) {
    throw FormatError(bin_path.string() + ": bad magic or version");
  }
  const std::uint32_t count = in.u32();
  const auto& insts = doc.at("instances");
  if (insts.size() != count) throw FormatError("scene graph document and sidecar disagree on instance count");
  graph.instances.resize(count);
  graph.fields.resize(count);
  for (std::uint32_t k = 0; k < count; ++k) {
    const auto& ji = insts[k];
    Instance& inst = graph.instances[k];
    inst.id = ji.at("id").get<int>();
    inst.label = ji.at("label").get<ClassId>();
    const auto c = ji.at("centroid").get<std::vector<double>>();
    if (c.size() != 3) throw FormatError("centroid must have 3 components");
    inst.centroid = Vec3(c[0], c[1], c[2]);
    inst.point_indices.resize(in.u64());
    for (auto& i : inst.point_indices) i = static_cast<Eigen::Index>(in.u64());
    if (in.u32() == 1u) {
      const auto m = static_cast<Eigen::Index>(in.u64());
      const auto d = static_cast<Eigen::Index>(in.u64());
      GpHyperParams hyper;
      hyper.kappa = in.f64();
      hyper.sigma_y = in.f64();
      PointMatrix X(m, 3);
      MatrixX Y(m, d);
      for (Eigen::Index i = 0; i < m; ++i)
        for (int cc = 0; cc < 3; ++cc) X(i, cc) = in.f64();
      for (Eigen::Index i = 0; i < m; ++i)
        for (Eigen::Index cc = 0; cc < d; ++cc) Y(i, cc) = in.f64();
      graph.fields[k] = GaussianSemanticField(std::move(X), std::move(Y), hyper);
    }
  }
  if (in.remaining() != 0) throw FormatError(bin_path.string() + ": trailing bytes");
  return graph;
}

}  // namespace gsfloc
