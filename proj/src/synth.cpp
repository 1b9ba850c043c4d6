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

#include "gsfloc/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <random>
#include <set>
#include <sstream>

#include "gsfloc/errors.hpp"
#include "gsfloc/gsf.hpp"
#include "gsfloc/io.hpp"
#include "gsfloc/parallel.hpp"

namespace gsfloc {

using nlohmann::json;

std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream) {
  std::uint64_t z = base + 0x9E3779B97F4A7C15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

namespace {

using Rng = std::mt19937_64;

double uniform(Rng& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

struct Blob {
  double cx, cy, sigma, amp;
};

std::vector<Blob> make_field(const SceneSpec& spec, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<Blob> blobs;
  for (int b = 0; b < spec.vegetation.blobs; ++b) {
    Blob bl;
    bl.cx = uniform(rng, -spec.extent_x / 2, spec.extent_x / 2);
    bl.cy = uniform(rng, -spec.extent_y / 2, spec.extent_y / 2);
    bl.sigma = uniform(rng, spec.vegetation.sigma_min, spec.vegetation.sigma_max);
    bl.amp = uniform(rng, spec.vegetation.amplitude_min, spec.vegetation.amplitude_max);
    blobs.push_back(bl);
  }
  return blobs;
}

double field_value(const std::vector<Blob>& blobs, double x, double y) {
  double v = 0.0;
  for (const auto& b : blobs) {
    const double dx = x - b.cx, dy = y - b.cy;
    v += b.amp * std::exp(-(dx * dx + dy * dy) / (2.0 * b.sigma * b.sigma));
  }
  return std::min(1.0, v);
}

double footprint_radius(const InstanceTemplate& t) {
  if (t.primitive == Primitive::kCylinder) return t.size.x();
  return 0.5 * std::hypot(t.size.x(), t.size.y());
}

struct Placed {
  const InstanceTemplate* tmpl;
  double x, y, yaw, radius;
};

std::vector<Vec3> surface_points(const InstanceTemplate& t, const Placed& p, Rng& rng) {
  std::vector<Vec3> pts;
  auto count = [&](double area) { return static_cast<int>(std::llround(t.density * area)); };
  if (t.primitive == Primitive::kCylinder) {
    const double r = t.size.x(), h = t.size.z();
    const int n = count(2.0 * M_PI * r * h);
    for (int k = 0; k < n; ++k) {
      const double th = uniform(rng, 0.0, 2.0 * M_PI);
      const double z = uniform(rng, 0.0, h);
      pts.emplace_back(p.x + r * std::cos(th), p.y + r * std::sin(th), t.base_z + z);
    }
    return pts;
  }
  const double L = t.size.x(), W = t.size.y(), H = t.size.z();
  const double c = std::cos(p.yaw), s = std::sin(p.yaw);
  auto emit = [&](double lx, double ly, double lz) {
    pts.emplace_back(p.x + c * lx - s * ly, p.y + s * lx + c * ly, t.base_z + lz);
  };
  // Four sides and the top; the bottom faces the ground.
  for (int face = 0; face < 5; ++face) {
    const double area = face < 2 ? L * H : face < 4 ? W * H : L * W;
    const int n = count(area);
    for (int k = 0; k < n; ++k) {
      const double a = uniform(rng, -0.5, 0.5), b = uniform(rng, 0.0, 1.0);
      switch (face) {
        case 0: emit(a * L, -W / 2, b * H); break;
        case 1: emit(a * L, W / 2, b * H); break;
        case 2: emit(-L / 2, a * W, b * H); break;
        case 3: emit(L / 2, a * W, b * H); break;
        default: emit(a * L, (b - 0.5) * W, H); break;
      }
    }
  }
  return pts;
}

struct LocalPoint {
  Vec3 p;
  ClassId label;
  int instance = -1;
};

ClassId require_class(const LabelTaxonomy& t, const char* name) {
  const auto id = t.find(name);
  if (!id) throw ValidationError(std::string("synthetic scenes need a '") + name + "' class");
  return *id;
}

SyntheticScene generate(const SceneSpec& spec, const LabelTaxonomy& taxonomy) {
  spec.validate(taxonomy);
  const int D = taxonomy.size();
  const ClassId road = require_class(taxonomy, "road");
  const ClassId terrain = require_class(taxonomy, "terrain");
  const ClassId veg = require_class(taxonomy, "vegetation");
  const bool twin = spec.symmetry.mode == SymmetryMode::kMirroredTwin;
  const double p = twin ? spec.symmetry.perturbation : 0.0;

  const auto field_a = make_field(spec, derive_seed(spec.seed, 1));
  const auto field_c = make_field(spec, derive_seed(spec.seed, 2));
  auto vA = [&](double x, double y) { return field_value(field_a, x, y); };
  auto vB = [&](double x, double y) { return (1.0 - p) * vA(x, y) + p * field_value(field_c, x, y); };

  // Instance placement.
  double gap = spec.min_gap;
  for (const auto& t : spec.instances) {
    if (t.count > 0) gap = std::max(gap, 2.0 * taxonomy.at(t.label).cluster_threshold);
  }
  Rng place_rng(derive_seed(spec.seed, 3));
  std::vector<Placed> placed;
  for (const auto& t : spec.instances) {
    for (int k = 0; k < t.count; ++k) {
      const double R = footprint_radius(t);
      const double hx = spec.extent_x / 2 - spec.margin - R;
      const double hy = spec.extent_y / 2 - spec.margin - R;
      if (hx <= 0 || hy <= 0) throw GenerationError("instance footprint does not fit the extent");
      bool ok = false;
      for (int attempt = 0; attempt < spec.max_attempts && !ok; ++attempt) {
        Placed cand{&t, uniform(place_rng, -hx, hx), uniform(place_rng, -hy, hy),
                    uniform(place_rng, 0.0, 2.0 * M_PI), R};
        ok = std::all_of(placed.begin(), placed.end(), [&](const Placed& o) {
          return std::hypot(o.x - cand.x, o.y - cand.y) >= o.radius + cand.radius + gap;
        });
        if (ok) placed.push_back(cand);
      }
      if (!ok) {
        throw GenerationError("could not place instance " + std::to_string(placed.size()) + " after " +
                              std::to_string(spec.max_attempts) + " attempts");
      }
    }
  }

  // Local geometry shared by both twins.
  std::vector<Vec3> ground;
  {
    Rng rng(derive_seed(spec.seed, 5));
    const int nx = static_cast<int>(std::floor(spec.extent_x / spec.ground.spacing));
    const int ny = static_cast<int>(std::floor(spec.extent_y / spec.ground.spacing));
    for (int j = 0; j < ny; ++j) {
      for (int i = 0; i < nx; ++i) {
        const double jx = uniform(rng, -spec.ground.jitter, spec.ground.jitter);
        const double jy = uniform(rng, -spec.ground.jitter, spec.ground.jitter);
        ground.emplace_back(-spec.extent_x / 2 + (i + 0.5) * spec.ground.spacing + jx,
                            -spec.extent_y / 2 + (j + 0.5) * spec.ground.spacing + jy, 0.0);
      }
    }
  }
  struct Candidate {
    Vec3 p;
    double u;
  };
  std::vector<Candidate> veg_cands;
  {
    Rng rng(derive_seed(spec.seed, 6));
    const auto n = static_cast<long long>(
        std::llround(spec.vegetation.candidate_density * spec.extent_x * spec.extent_y));
    for (long long k = 0; k < n; ++k) {
      Candidate c;
      c.p = Vec3(uniform(rng, -spec.extent_x / 2, spec.extent_x / 2),
                 uniform(rng, -spec.extent_y / 2, spec.extent_y / 2),
                 uniform(rng, spec.vegetation.z_min, spec.vegetation.z_max));
      c.u = uniform(rng, 0.0, 1.0);
      veg_cands.push_back(c);
    }
  }
  std::vector<std::vector<Vec3>> inst_pts;
  {
    Rng rng(derive_seed(spec.seed, 4));
    for (const auto& pl : placed) inst_pts.push_back(surface_points(*pl.tmpl, pl, rng));
  }

  const double rest = 0.02;
  auto ground_row = [&](double v, Eigen::Ref<VectorX> row) {
    row.setConstant(rest);
    row(road) = 0.1 + 0.8 * (1.0 - v);
    row(terrain) = 0.1 + 0.8 * v;
  };
  auto onehot_row = [&](ClassId c, Eigen::Ref<VectorX> row) {
    row.setConstant(D > 1 ? 0.1 / (D - 1) : 0.0);
    row(c) = 0.9;
  };

  const int twins = twin ? 2 : 1;
  const Vec3 center_a = twin ? Vec3(-spec.symmetry.separation / 2, 0, 0) : Vec3::Zero();
  std::vector<Vec3> pts;
  std::vector<ClassId> labels;
  std::vector<VectorX> rows;
  SyntheticScene scene;
  double dev_sum = 0.0;
  for (int tw = 0; tw < twins; ++tw) {
    auto to_world = [&](const Vec3& local) {
      Vec3 w = local + center_a;
      if (tw == 1) {
        w.x() = -w.x();
        w.y() = -w.y();
      }
      return w;
    };
    auto v = [&](double x, double y) { return tw == 0 ? vA(x, y) : vB(x, y); };
    for (const auto& g : ground) {
      VectorX row(D);
      const double val = v(g.x(), g.y());
      ground_row(val, row);
      pts.push_back(to_world(g));
      labels.push_back(static_cast<ClassId>(argmax_lowest(row)));
      rows.push_back(row);
      if (tw == 1) dev_sum += 0.8 * std::abs(val - vA(g.x(), g.y()));
    }
    for (const auto& c : veg_cands) {
      if (!(c.u < v(c.p.x(), c.p.y()))) continue;
      VectorX row(D);
      onehot_row(veg, row);
      pts.push_back(to_world(c.p));
      labels.push_back(veg);
      rows.push_back(row);
    }
    for (std::size_t k = 0; k < placed.size(); ++k) {
      const ClassId label = placed[k].tmpl->label;
      Vec3 sum = Vec3::Zero();
      for (const auto& lp : inst_pts[k]) {
        VectorX row(D);
        onehot_row(label, row);
        const Vec3 w = to_world(lp);
        sum += w;
        pts.push_back(w);
        labels.push_back(label);
        rows.push_back(row);
      }
      GroundTruthInstance gt;
      gt.label = label;
      gt.centroid = inst_pts[k].empty() ? to_world(Vec3(placed[k].x, placed[k].y, 0))
                                        : Vec3(sum / static_cast<double>(inst_pts[k].size()));
      gt.twin = tw;
      scene.instances.push_back(gt);
    }
    scene.twin_centers.push_back(to_world(Vec3::Zero()));
  }
  if (twin && !ground.empty()) scene.background_deviation = dev_sum / static_cast<double>(ground.size());

  const auto n = static_cast<Eigen::Index>(pts.size());
  scene.cloud.points.resize(n, 3);
  MatrixX logits(n, D);
  for (Eigen::Index i = 0; i < n; ++i) {
    scene.cloud.points.row(i) = pts[static_cast<std::size_t>(i)].transpose();
    logits.row(i) = rows[static_cast<std::size_t>(i)].transpose();
  }
  scene.cloud.labels = std::move(labels);
  scene.cloud.logits = std::move(logits);
  return scene;
}

}  // namespace

void SceneSpec::validate(const LabelTaxonomy& taxonomy) const {
  if (!(extent_x > 0 && extent_y > 0)) throw ValidationError("scene extent must be > 0");
  if (!(ground.spacing > 0)) throw ValidationError("ground.spacing must be > 0");
  if (!(ground.jitter >= 0)) throw ValidationError("ground.jitter must be >= 0");
  if (vegetation.blobs < 0) throw ValidationError("vegetation.blobs must be >= 0");
  if (!(vegetation.sigma_min > 0 && vegetation.sigma_max >= vegetation.sigma_min)) {
    throw ValidationError("vegetation sigma range invalid");
  }
  if (!(vegetation.amplitude_max >= vegetation.amplitude_min && vegetation.amplitude_min >= 0)) {
    throw ValidationError("vegetation amplitude range invalid");
  }
  if (!(vegetation.candidate_density > 0)) throw ValidationError("vegetation density must be > 0");
  if (!(vegetation.z_max >= vegetation.z_min)) throw ValidationError("vegetation height range invalid");
  for (const auto& t : instances) {
    if (t.count < 0) throw ValidationError("instance count must be >= 0");
    if (!(t.density > 0)) throw ValidationError("instance density must be > 0");
    if (t.label >= taxonomy.size()) throw ValidationError("instance class outside the taxonomy");
    if (!(t.size.x() > 0 && t.size.z() > 0) ||
        (t.primitive == Primitive::kBox && !(t.size.y() > 0))) {
      throw ValidationError("instance size must be > 0");
    }
  }
  if (!(min_gap >= 0) || !(margin >= 0)) throw ValidationError("min_gap and margin must be >= 0");
  if (max_attempts < 1) throw ValidationError("max_attempts must be >= 1");
  if (symmetry.mode == SymmetryMode::kMirroredTwin) {
    if (!(symmetry.perturbation >= 0 && symmetry.perturbation <= 1)) {
      throw ValidationError("symmetry.perturbation must lie in [0,1]");
    }
    if (!(symmetry.separation >= std::hypot(extent_x, extent_y))) {
      throw ValidationError("symmetry.separation must exceed the twin diagonal");
    }
  }
}

SceneSpec default_scene_spec() {
  SceneSpec s;
  InstanceTemplate pole{urban::kPole, 8, Primitive::kCylinder, Vec3(0.15, 0.15, 6.0), 0.0, 150.0};
  InstanceTemplate trunk{urban::kTrunk, 6, Primitive::kCylinder, Vec3(0.3, 0.3, 3.0), 0.0, 150.0};
  InstanceTemplate car{urban::kCar, 4, Primitive::kBox, Vec3(4.2, 1.8, 1.5), 0.0, 60.0};
  InstanceTemplate sign{urban::kTrafficSign, 2, Primitive::kBox, Vec3(0.8, 0.1, 0.8), 2.2, 250.0};
  s.instances = {pole, trunk, car, sign};
  return s;
}

SyntheticScene generate_scene(const SceneSpec& spec, const LabelTaxonomy& taxonomy) {
  return generate(spec, taxonomy);
}

SyntheticScene generate_mirrored_twin(const SceneSpec& spec, const LabelTaxonomy& taxonomy) {
  SceneSpec s = spec;
  s.symmetry.mode = SymmetryMode::kMirroredTwin;
  return generate(s, taxonomy);
}

RigidTransform twin_isometry() {
  RigidTransform T;
  T.R = Vec3(-1.0, -1.0, 1.0).asDiagonal();
  return T;
}

SemanticPointCloud simulate_scan(const SemanticPointCloud& scene, const RigidTransform& sensor_pose,
                                 const ScanSpec& scan, std::uint64_t seed) {
  if (!(scan.dropout >= 0.0 && scan.dropout < 1.0)) throw ValidationError("dropout must lie in [0,1)");
  if (!(scan.noise_sigma >= 0.0)) throw ValidationError("noise_sigma must be >= 0");
  Rng rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> noise(0.0, 1.0);
  const double r2 = scan.range_max * scan.range_max;
  const RigidTransform inv = sensor_pose.inverse();
  std::vector<Eigen::Index> keep;
  std::vector<Vec3> out;
  for (Eigen::Index i = 0; i < scene.size(); ++i) {
    const Vec3 p = scene.point(i);
    if ((p - sensor_pose.t).squaredNorm() > r2) continue;
    if (scan.dropout > 0.0 && unit(rng) < scan.dropout) continue;
    Vec3 q = p;
    if (scan.noise_sigma > 0.0) {
      const double nx = noise(rng), ny = noise(rng), nz = noise(rng);
      q += scan.noise_sigma * Vec3(nx, ny, nz);
    }
    keep.push_back(i);
    out.push_back(inv.apply(q));
  }
  SemanticPointCloud cloud = scene.subset(keep);
  for (std::size_t k = 0; k < out.size(); ++k) {
    cloud.points.row(static_cast<Eigen::Index>(k)) = out[k].transpose();
  }
  return cloud;
}

// ---------------------------------------------------------------------------
// Benchmark

std::vector<QuerySpec> plan_queries(const SyntheticScene& scene, const QueryPlan& plan,
                                    std::uint64_t seed) {
  if (plan.count < 0) throw ValidationError("query count must be >= 0");
  std::vector<QuerySpec> out;
  const int twins = static_cast<int>(scene.twin_centers.size());
  for (int q = 0; q < plan.count; ++q) {
    Rng rng(derive_seed(seed, 100 + static_cast<std::uint64_t>(q)));
    QuerySpec spec;
    spec.twin = twins > 1 ? q % twins : 0;
    const Vec3& c = scene.twin_centers[static_cast<std::size_t>(spec.twin)];
    const double x = c.x() + uniform(rng, -plan.region_half, plan.region_half);
    const double y = c.y() + uniform(rng, -plan.region_half, plan.region_half);
    const double yaw = plan.random_yaw ? uniform(rng, 0.0, 2.0 * M_PI) : 0.0;
    spec.pose = RigidTransform::from_yaw(yaw, Vec3(x, y, plan.sensor_height));
    spec.seed = derive_seed(seed, 10000 + static_cast<std::uint64_t>(q));
    out.push_back(spec);
  }
  return out;
}

double percentile(std::vector<double> values, double q) {
  if (values.empty()) return std::numeric_limits<double>::quiet_NaN();
  std::sort(values.begin(), values.end());
  const auto n = static_cast<double>(values.size());
  std::size_t rank = static_cast<std::size_t>(std::ceil(q * n));
  rank = std::clamp<std::size_t>(rank, 1, values.size());
  return values[rank - 1];
}

EvalAggregates compute_aggregates(const std::vector<EvalRow>& rows) {
  EvalAggregates a;
  a.queries = rows.size();
  double ate = 0.0, are = 0.0;
  std::size_t twin_rows = 0, twin_ok = 0;
  std::vector<double> te, re;
  for (const auto& r : rows) {
    te.push_back(r.trans_err);
    re.push_back(r.rot_err);
    if (r.success) {
      ++a.successes;
      ate += r.trans_err;
      are += r.rot_err;
    }
    if (r.correct_twin >= 0) {
      ++twin_rows;
      twin_ok += static_cast<std::size_t>(r.correct_twin);
    }
  }
  const double nan = std::numeric_limits<double>::quiet_NaN();
  a.success_rate = a.queries ? static_cast<double>(a.successes) / static_cast<double>(a.queries) : nan;
  a.mean_ate = a.successes ? ate / static_cast<double>(a.successes) : nan;
  a.mean_are = a.successes ? are / static_cast<double>(a.successes) : nan;
  a.p50_trans = percentile(te, 0.5);
  a.p90_trans = percentile(te, 0.9);
  a.p50_rot = percentile(re, 0.5);
  a.p90_rot = percentile(re, 0.9);
  a.correct_twin_rate = twin_rows ? static_cast<double>(twin_ok) / static_cast<double>(twin_rows) : nan;
  return a;
}

EvalRow evaluate_result(const LocalizationResult& r, const QuerySpec& q, const SyntheticScene* scene,
                        const EvalConfig& thresholds, int index) {
  EvalRow row;
  row.query = index;
  row.seed = q.seed;
  row.twin = q.twin;
  row.truth = q.pose;
  row.estimate = r.pose;
  row.status = r.status;
  row.inliers = r.inlier_count;
  row.clique = r.stats.clique_size;
  row.timings = r.timings;
  const double inf = std::numeric_limits<double>::infinity();
  if (r.success()) {
    const PoseError e = pose_error(r.pose, q.pose);
    row.trans_err = e.trans_m;
    row.rot_err = e.rot_deg;
    row.success = e.trans_m <= thresholds.success_trans && e.rot_deg <= thresholds.success_rot;
  } else {
    row.trans_err = inf;
    row.rot_err = inf;
  }
  if (scene != nullptr && scene->twin_centers.size() > 1) {
    if (!r.success()) {
      row.correct_twin = 0;
    } else {
      std::size_t nearest = 0;
      double best = inf;
      for (std::size_t k = 0; k < scene->twin_centers.size(); ++k) {
        const double d = (r.pose.t - scene->twin_centers[k]).head<2>().norm();
        if (d < best) {
          best = d;
          nearest = k;
        }
      }
      row.correct_twin = nearest == static_cast<std::size_t>(q.twin) ? 1 : 0;
    }
  }
  return row;
}

EvalReport run_benchmark(const SyntheticScene& scene, const ReferenceMap& map,
                         const std::vector<QuerySpec>& queries, const ScanSpec& scan,
                         const PipelineConfig& config) {
  EvalReport report;
  report.thresholds = config.eval;
  report.gsf_filter = config.sim.gsf_filter;
  report.rows.resize(queries.size());
  parallel_for(queries.size(), [&](std::size_t k) {
    const auto cloud = simulate_scan(scene.cloud, queries[k].pose, scan, queries[k].seed);
    const auto result = localize(cloud, map, config);
    report.rows[k] = evaluate_result(result, queries[k], &scene, config.eval, static_cast<int>(k));
  });
  report.aggregates = compute_aggregates(report.rows);
  return report;
}

EvalReport run_benchmark(const BenchmarkSpec& spec, const PipelineConfig& base) {
  PipelineConfig config = base;
  apply_config(config, spec.config);
  const auto scene = generate_scene(spec.scene, config.taxonomy);
  const auto map = build_map(scene.cloud, config);
  const auto queries = plan_queries(scene, spec.queries, derive_seed(spec.seed, 11));
  return run_benchmark(scene, map, queries, spec.scan, config);
}

namespace {

std::string fmt(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

double yaw_deg(const RigidTransform& T) { return std::atan2(T.R(1, 0), T.R(0, 0)) * 180.0 / M_PI; }

json num(double v) {
  if (std::isfinite(v)) return v;
  return fmt(v);
}

}  // namespace

std::string report_csv(const EvalReport& report, bool with_timings) {
  std::ostringstream os;
  os << "query,seed,twin,status,success,correct_twin,trans_err_m,rot_err_deg,inliers,clique,"
        "gt_x,gt_y,gt_z,gt_yaw_deg,est_x,est_y,est_z,est_yaw_deg";
  if (with_timings) os << ",graph_ms,descriptor_ms,gsf_ms,clique_ms,solve_ms,total_ms";
  os << "\n";
  for (const auto& r : report.rows) {
    os << r.query << ',' << r.seed << ',' << r.twin << ',' << to_string(r.status) << ','
       << (r.success ? 1 : 0) << ',' << r.correct_twin << ',' << fmt(r.trans_err) << ','
       << fmt(r.rot_err) << ',' << r.inliers << ',' << r.clique << ',' << fmt(r.truth.t.x()) << ','
       << fmt(r.truth.t.y()) << ',' << fmt(r.truth.t.z()) << ',' << fmt(yaw_deg(r.truth)) << ','
       << fmt(r.estimate.t.x()) << ',' << fmt(r.estimate.t.y()) << ',' << fmt(r.estimate.t.z())
       << ',' << fmt(yaw_deg(r.estimate));
    if (with_timings) {
      os << ',' << fmt(r.timings.graph_ms) << ',' << fmt(r.timings.descriptor_ms) << ','
         << fmt(r.timings.gsf_ms) << ',' << fmt(r.timings.clique_ms) << ','
         << fmt(r.timings.solve_ms) << ',' << fmt(r.timings.total_ms);
    }
    os << "\n";
  }
  return os.str();
}

json report_json(const EvalReport& report, const PipelineConfig& config) {
  const auto& a = report.aggregates;
  json j;
  j["queries"] = a.queries;
  j["successes"] = a.successes;
  j["success_rate"] = num(a.success_rate);
  j["mean_ate_m"] = num(a.mean_ate);
  j["mean_are_deg"] = num(a.mean_are);
  j["p50_trans_m"] = num(a.p50_trans);
  j["p90_trans_m"] = num(a.p90_trans);
  j["p50_rot_deg"] = num(a.p50_rot);
  j["p90_rot_deg"] = num(a.p90_rot);
  j["correct_twin_rate"] = num(a.correct_twin_rate);
  j["gsf_filter"] = report.gsf_filter;
  j["success_threshold"] = {{"trans_m", report.thresholds.success_trans},
                            {"rot_deg", report.thresholds.success_rot},
                            {"note", "artifact default, configurable via eval.*"}};
  j["config"] = to_json(config);
  return j;
}

// ---------------------------------------------------------------------------
// Sparsification ablation

std::vector<AblationRow> sparsification_ablation(const AblationSpec& spec) {
  if (spec.neighborhoods < 1) throw ValidationError("ablation needs >= 1 neighborhood");
  if (!(spec.eval_fraction > 0.0 && spec.eval_fraction < 1.0)) {
    throw ValidationError("eval_fraction must lie in (0,1)");
  }
  const LabelTaxonomy taxonomy = LabelTaxonomy::default_urban();
  std::vector<std::vector<AblationRow>> per(static_cast<std::size_t>(spec.neighborhoods));
  parallel_for(per.size(), [&](std::size_t n) {
    SceneSpec ss;
    ss.extent_x = ss.extent_y = 40.0;
    ss.instances = {
        InstanceTemplate{urban::kPole, 2, Primitive::kCylinder, Vec3(0.15, 0.15, 6.0), 0.0, 150.0},
        InstanceTemplate{urban::kTrunk, 2, Primitive::kCylinder, Vec3(0.3, 0.3, 3.0), 0.0, 150.0},
        InstanceTemplate{urban::kCar, 1, Primitive::kBox, Vec3(4.2, 1.8, 1.5), 0.0, 60.0}};
    ss.seed = derive_seed(spec.seed, n);
    const auto scene = generate_scene(ss, taxonomy);
    const Vec3 c = scene.instances.front().centroid;
    const auto neigh = radius_query(scene.cloud, c, spec.radius);
    std::vector<Eigen::Index> order = neigh;
    Rng rng(derive_seed(spec.seed, 1000 + n));
    std::shuffle(order.begin(), order.end(), rng);
    const auto n_eval = static_cast<std::size_t>(std::llround(spec.eval_fraction * order.size()));
    std::vector<Eigen::Index> eval(order.begin(), order.begin() + static_cast<long>(n_eval));
    std::vector<Eigen::Index> pool(order.begin() + static_cast<long>(n_eval), order.end());
    std::sort(eval.begin(), eval.end());
    std::sort(pool.begin(), pool.end());

    PointMatrix eval_pts(static_cast<Eigen::Index>(eval.size()), 3);
    std::vector<ClassId> eval_labels;
    for (std::size_t k = 0; k < eval.size(); ++k) {
      eval_pts.row(static_cast<Eigen::Index>(k)) = scene.cloud.points.row(eval[k]) - c.transpose();
      eval_labels.push_back(scene.cloud.labels[static_cast<std::size_t>(eval[k])]);
    }
    std::vector<ClassId> pool_labels;
    for (auto i : pool) pool_labels.push_back(scene.cloud.labels[static_cast<std::size_t>(i)]);

    auto fit_on = [&](const std::vector<Eigen::Index>& sel) {
      PointMatrix X(static_cast<Eigen::Index>(sel.size()), 3);
      MatrixX Y(static_cast<Eigen::Index>(sel.size()), scene.cloud.logits->cols());
      for (std::size_t k = 0; k < sel.size(); ++k) {
        const Eigen::Index src = pool[static_cast<std::size_t>(sel[k])];
        X.row(static_cast<Eigen::Index>(k)) = scene.cloud.points.row(src) - c.transpose();
        Y.row(static_cast<Eigen::Index>(k)) = scene.cloud.logits->row(src);
      }
      return GaussianSemanticField(std::move(X), std::move(Y), spec.hyper);
    };
    for (int budget : spec.budgets) {
      const auto bseed = derive_seed(ss.seed, static_cast<std::uint64_t>(budget));
      const auto sem = semantic_sparsify(pool_labels, budget, bseed);
      const auto rnd = random_sparsify(static_cast<Eigen::Index>(pool.size()),
                                       static_cast<int>(sem.size()), derive_seed(bseed, 1));
      AblationRow row;
      row.neighborhood = static_cast<int>(n);
      row.budget = budget;
      row.kept = sem.size();
      row.miou_semantic = reconstruction_miou(fit_on(sem), eval_pts, eval_labels);
      row.miou_random = reconstruction_miou(fit_on(rnd), eval_pts, eval_labels);
      per[n].push_back(row);
    }
  });
  std::vector<AblationRow> out;
  for (auto& v : per) out.insert(out.end(), v.begin(), v.end());
  return out;
}

// ---------------------------------------------------------------------------
// JSON specs

namespace {

/// Typed field access with path-qualified errors and unknown-key checks.
class Fields {
 public:
  Fields(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j.is_object()) fail("", "expected an object");
  }

  [[noreturn]] void fail(const std::string& key, const std::string& msg) const {
    std::string where = path_;
    if (!key.empty()) where += (where.empty() ? "" : ".") + key;
    throw ValidationError((where.empty() ? std::string("spec") : where) + ": " + msg);
  }

  const json* find(const std::string& key) {
    seen_.insert(key);
    auto it = j_.find(key);
    return it == j_.end() ? nullptr : &*it;
  }

  void get(const std::string& key, double& out) {
    if (const json* v = find(key)) {
      if (!v->is_number()) fail(key, "expected a number");
      out = v->get<double>();
    }
  }
  void get(const std::string& key, int& out) {
    if (const json* v = find(key)) {
      if (!v->is_number_integer()) fail(key, "expected an integer");
      out = v->get<int>();
    }
  }
  void get(const std::string& key, std::uint64_t& out) {
    if (const json* v = find(key)) {
      if (!v->is_number_unsigned()) fail(key, "expected a non-negative integer");
      out = v->get<std::uint64_t>();
    }
  }
  void get(const std::string& key, bool& out) {
    if (const json* v = find(key)) {
      if (!v->is_boolean()) fail(key, "expected true or false");
      out = v->get<bool>();
    }
  }
  void get_range(const std::string& key, double& lo, double& hi) {
    if (const json* v = find(key)) {
      if (!v->is_array() || v->size() != 2 || !(*v)[0].is_number() || !(*v)[1].is_number()) {
        fail(key, "expected [min, max]");
      }
      lo = (*v)[0].get<double>();
      hi = (*v)[1].get<double>();
    }
  }
  std::string path(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it) {
      if (!seen_.count(it.key())) fail(it.key(), "unknown field");
    }
  }

 private:
  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

const char* primitive_name(Primitive p) { return p == Primitive::kCylinder ? "cylinder" : "box"; }

}  // namespace

SceneSpec scene_spec_from_json(const json& j, const LabelTaxonomy& taxonomy) {
  SceneSpec s;
  s.instances.clear();
  Fields f(j, "scene");
  if (const json* e = f.find("extent")) {
    if (!e->is_array() || e->size() != 2 || !(*e)[0].is_number() || !(*e)[1].is_number()) {
      f.fail("extent", "expected [x, y]");
    }
    s.extent_x = (*e)[0].get<double>();
    s.extent_y = (*e)[1].get<double>();
  }
  if (const json* g = f.find("ground")) {
    Fields gf(*g, f.path("ground"));
    gf.get("spacing", s.ground.spacing);
    gf.get("jitter", s.ground.jitter);
    gf.finish();
  }
  if (const json* v = f.find("vegetation")) {
    Fields vf(*v, f.path("vegetation"));
    vf.get("blobs", s.vegetation.blobs);
    vf.get_range("sigma", s.vegetation.sigma_min, s.vegetation.sigma_max);
    vf.get_range("amplitude", s.vegetation.amplitude_min, s.vegetation.amplitude_max);
    vf.get("candidate_density", s.vegetation.candidate_density);
    vf.get_range("height", s.vegetation.z_min, s.vegetation.z_max);
    vf.finish();
  }
  if (const json* arr = f.find("instances")) {
    if (!arr->is_array()) f.fail("instances", "expected an array");
    for (std::size_t k = 0; k < arr->size(); ++k) {
      Fields tf((*arr)[k], f.path("instances[" + std::to_string(k) + "]"));
      InstanceTemplate t;
      if (const json* c = tf.find("class")) {
        if (c->is_string()) {
          const auto id = taxonomy.find(c->get<std::string>());
          if (!id) tf.fail("class", "unknown class '" + c->get<std::string>() + "'");
          t.label = *id;
        } else if (c->is_number_unsigned() && c->get<int>() < taxonomy.size()) {
          t.label = static_cast<ClassId>(c->get<int>());
        } else {
          tf.fail("class", "expected a class name or id");
        }
      } else {
        tf.fail("class", "required");
      }
      tf.get("count", t.count);
      if (const json* p = tf.find("primitive")) {
        if (*p == "cylinder") t.primitive = Primitive::kCylinder;
        else if (*p == "box") t.primitive = Primitive::kBox;
        else tf.fail("primitive", "expected \"cylinder\" or \"box\"");
      }
      if (const json* sz = tf.find("size")) {
        if (!sz->is_array() || sz->size() != 3) tf.fail("size", "expected [a, b, height]");
        for (int i = 0; i < 3; ++i) {
          if (!(*sz)[static_cast<std::size_t>(i)].is_number()) tf.fail("size", "expected numbers");
          t.size(i) = (*sz)[static_cast<std::size_t>(i)].get<double>();
        }
      }
      tf.get("base_z", t.base_z);
      tf.get("density", t.density);
      tf.finish();
      s.instances.push_back(t);
    }
  }
  f.get("min_gap", s.min_gap);
  f.get("margin", s.margin);
  f.get("max_attempts", s.max_attempts);
  if (const json* sym = f.find("symmetry")) {
    Fields sf(*sym, f.path("symmetry"));
    if (const json* m = sf.find("mode")) {
      if (*m == "none") s.symmetry.mode = SymmetryMode::kNone;
      else if (*m == "mirrored-twin") s.symmetry.mode = SymmetryMode::kMirroredTwin;
      else sf.fail("mode", "expected \"none\" or \"mirrored-twin\"");
    }
    sf.get("separation", s.symmetry.separation);
    sf.get("perturbation", s.symmetry.perturbation);
    sf.finish();
  }
  f.get("seed", s.seed);
  f.finish();
  try {
    s.validate(taxonomy);
  } catch (const ValidationError& e) {
    throw ValidationError(std::string("scene: ") + e.what());
  }
  return s;
}

json to_json(const SceneSpec& s, const LabelTaxonomy& taxonomy) {
  json inst = json::array();
  for (const auto& t : s.instances) {
    inst.push_back({{"class", taxonomy.at(t.label).name},
                    {"count", t.count},
                    {"primitive", primitive_name(t.primitive)},
                    {"size", {t.size.x(), t.size.y(), t.size.z()}},
                    {"base_z", t.base_z},
                    {"density", t.density}});
  }
  return {{"extent", {s.extent_x, s.extent_y}},
          {"ground", {{"spacing", s.ground.spacing}, {"jitter", s.ground.jitter}}},
          {"vegetation",
           {{"blobs", s.vegetation.blobs},
            {"sigma", {s.vegetation.sigma_min, s.vegetation.sigma_max}},
            {"amplitude", {s.vegetation.amplitude_min, s.vegetation.amplitude_max}},
            {"candidate_density", s.vegetation.candidate_density},
            {"height", {s.vegetation.z_min, s.vegetation.z_max}}}},
          {"instances", inst},
          {"min_gap", s.min_gap},
          {"margin", s.margin},
          {"max_attempts", s.max_attempts},
          {"symmetry",
           {{"mode", s.symmetry.mode == SymmetryMode::kNone ? "none" : "mirrored-twin"},
            {"separation", s.symmetry.separation},
            {"perturbation", s.symmetry.perturbation}}},
          {"seed", s.seed}};
}

BenchmarkSpec benchmark_spec_from_json(const json& j, const LabelTaxonomy& taxonomy) {
  BenchmarkSpec b;
  Fields f(j, "");
  if (const json* s = f.find("scene")) b.scene = scene_spec_from_json(*s, taxonomy);
  if (const json* s = f.find("scan")) {
    Fields sf(*s, "scan");
    sf.get("range_max", b.scan.range_max);
    sf.get("dropout", b.scan.dropout);
    sf.get("noise_sigma", b.scan.noise_sigma);
    sf.finish();
    if (!(b.scan.dropout >= 0 && b.scan.dropout < 1)) sf.fail("dropout", "must lie in [0,1)");
    if (!(b.scan.noise_sigma >= 0)) sf.fail("noise_sigma", "must be >= 0");
    if (!(b.scan.range_max > 0)) sf.fail("range_max", "must be > 0");
  }
  if (const json* q = f.find("queries")) {
    Fields qf(*q, "queries");
    qf.get("count", b.queries.count);
    qf.get("sensor_height", b.queries.sensor_height);
    qf.get("region_half", b.queries.region_half);
    qf.get("random_yaw", b.queries.random_yaw);
    qf.finish();
    if (b.queries.count < 0) qf.fail("count", "must be >= 0");
    if (!(b.queries.region_half >= 0)) qf.fail("region_half", "must be >= 0");
  }
  if (const json* c = f.find("config")) {
    if (!c->is_object()) f.fail("config", "expected an object");
    PipelineConfig probe;
    try {
      apply_config(probe, *c);
    } catch (const ValidationError& e) {
      throw ValidationError(std::string("config: ") + e.what());
    }
    b.config = *c;
  }
  f.get("seed", b.seed);
  f.finish();
  return b;
}

json to_json(const BenchmarkSpec& s, const LabelTaxonomy& taxonomy) {
  return {{"scene", to_json(s.scene, taxonomy)},
          {"scan",
           {{"range_max", s.scan.range_max},
            {"dropout", s.scan.dropout},
            {"noise_sigma", s.scan.noise_sigma}}},
          {"queries",
           {{"count", s.queries.count},
            {"sensor_height", s.queries.sensor_height},
            {"region_half", s.queries.region_half},
            {"random_yaw", s.queries.random_yaw}}},
          {"config", s.config},
          {"seed", s.seed}};
}

}  // namespace gsfloc
