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

// gsfloc command-line interface.
//
// Exit codes: 0 ok, 1 IO error, 2 validation/format error, 3 build or
// generation failure, 4 no match (or degenerate solve), 5 selftest failure.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "gsfloc/config.hpp"
#include "gsfloc/errors.hpp"
#include "gsfloc/io.hpp"
#include "gsfloc/oracles.hpp"
#include "gsfloc/parallel.hpp"
#include "gsfloc/pipeline.hpp"
#include "gsfloc/synth.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace gsfloc;

namespace {

constexpr int kExitIo = 1;
constexpr int kExitValidation = 2;
constexpr int kExitBuild = 3;
constexpr int kExitNoMatch = 4;
constexpr int kExitSelftest = 5;

struct Common {
  unsigned threads = 0;
  std::string config_path;
  std::vector<std::string> sets;
  std::optional<std::uint64_t> seed;
  bool no_gsf = false;
  bool no_timings = false;
};

struct CloudArgs {
  std::string points, labels, logits;
};

PipelineConfig effective_config(const Common& c) {
  PipelineConfig cfg;
  if (!c.config_path.empty()) cfg = load_config(c.config_path);
  for (const auto& kv : c.sets) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw ValidationError("--set expects key=value, got '" + kv + "'");
    const std::string key = kv.substr(0, eq);
    const std::string text = kv.substr(eq + 1);
    json value;
    try {
      value = json::parse(text);
    } catch (const json::parse_error&) {
      value = text;
    }
    apply_config_key(cfg, key, value);
  }
  if (c.no_gsf) cfg.sim.gsf_filter = false;
  cfg.validate();
  return cfg;
}

SemanticPointCloud load_cloud_args(const CloudArgs& a, const PipelineConfig& cfg) {
  CloudLoadOptions opts;
  opts.num_classes = cfg.taxonomy.size();
  opts.one_hot_confidence = cfg.graph.one_hot_confidence;
  std::optional<fs::path> logits;
  if (!a.logits.empty()) logits = a.logits;
  return load_cloud(a.points, a.labels, logits, opts);
}

json input_hashes(const std::vector<std::string>& paths) {
  json j = json::object();
  for (const auto& p : paths) {
    if (!p.empty()) j[p] = sha256_file(p);
  }
  return j;
}

void write_manifest(const fs::path& path, const std::string& command, const PipelineConfig& cfg,
                    const json& inputs, const json& extra = json::object()) {
  json m;
  m["tool"] = "gsfloc";
  m["command"] = command;
  m["config"] = to_json(cfg);
  m["inputs"] = inputs;
  for (auto it = extra.begin(); it != extra.end(); ++it) m[it.key()] = it.value();
  write_text(path, m.dump(2) + "\n");
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create directory " + dir.string() + ": " + ec.message());
}

// ---------------------------------------------------------------------------

int cmd_build_map(const Common& c, const CloudArgs& in, const std::string& out) {
  PipelineConfig cfg = effective_config(c);
  if (c.seed) cfg.graph.gsf.seed = *c.seed;
  const auto cloud = load_cloud_args(in, cfg);
  const auto map = build_map(cloud, cfg);
  save_map(map, out);
  for (const auto& w : map.graph.warnings) std::cerr << "warning: " << w << "\n";
  write_manifest(fs::path(out) / "run_manifest.json", "build-map", cfg,
                 input_hashes({in.points, in.labels, in.logits}));
  json summary = {{"instances", map.graph.size()},
                  {"descriptors", map.index.size()},
                  {"warnings", map.graph.warnings.size()},
                  {"bundle", out}};
  std::cout << summary.dump() << "\n";
  return 0;
}

int cmd_localize(const Common& c, const std::string& map_dir, const CloudArgs& in,
                 const std::string& out) {
  const ReferenceMap map = load_map(map_dir);
  PipelineConfig cfg = c.config_path.empty() && c.sets.empty() ? map.config : effective_config(c);
  if (c.no_gsf) cfg.sim.gsf_filter = false;
  const auto cloud = load_cloud_args(in, cfg);
  const auto result = localize(cloud, map, cfg);
  std::cout << format_pose(result.pose) << "\n";
  std::cout << to_json(result, !c.no_timings).dump() << "\n";
  if (!out.empty()) {
    ensure_dir(out);
    json inputs = input_hashes({in.points, in.labels, in.logits});
    inputs[(fs::path(map_dir) / "manifest.json").string()] = sha256_file(fs::path(map_dir) / "manifest.json");
    write_manifest(fs::path(out) / "localize_manifest.json", "localize", cfg, inputs,
                   {{"result", to_json(result, !c.no_timings)}});
  }
  return result.success() ? 0 : kExitNoMatch;
}

BenchmarkSpec load_benchmark_spec(const std::string& path, const PipelineConfig& cfg,
                                  const std::optional<std::uint64_t>& seed) {
  auto spec = benchmark_spec_from_json(parse_json_text(read_text(path), path), cfg.taxonomy);
  if (seed) {
    spec.seed = *seed;
    spec.scene.seed = *seed;
  }
  return spec;
}

std::string cloud_stem(const fs::path& dir, const std::string& name) { return (dir / name).string(); }

int cmd_synth(const Common& c, const std::string& spec_path, const std::string& out) {
  const PipelineConfig base = effective_config(c);
  const auto spec = load_benchmark_spec(spec_path, base, c.seed);
  PipelineConfig cfg = base;
  apply_config(cfg, spec.config);
  const auto scene = generate_scene(spec.scene, cfg.taxonomy);
  const auto queries = plan_queries(scene, spec.queries, derive_seed(spec.seed, 11));
  const fs::path dir(out);
  ensure_dir(dir / "queries");
  save_cloud(scene.cloud, cloud_stem(dir, "map_points.bin"), cloud_stem(dir, "map_labels.bin"),
             fs::path(cloud_stem(dir, "map_logits.gsfl")));

  json seq;
  seq["format"] = "gsfloc.sequence";
  seq["map"] = {{"points", "map_points.bin"}, {"labels", "map_labels.bin"}, {"logits", "map_logits.gsfl"}};
  json centers = json::array();
  for (const auto& tc : scene.twin_centers) centers.push_back({tc.x(), tc.y(), tc.z()});
  seq["twin_centers"] = centers;
  json qs = json::array();
  std::vector<RigidTransform> poses;
  for (std::size_t k = 0; k < queries.size(); ++k) {
    char stem[64];
    std::snprintf(stem, sizeof stem, "queries/q%04zu", k);
    const auto scan = simulate_scan(scene.cloud, queries[k].pose, spec.scan, queries[k].seed);
    const std::string s(stem);
    save_cloud(scan, cloud_stem(dir, s + "_points.bin"), cloud_stem(dir, s + "_labels.bin"),
               fs::path(cloud_stem(dir, s + "_logits.gsfl")));
    qs.push_back({{"points", s + "_points.bin"},
                  {"labels", s + "_labels.bin"},
                  {"logits", s + "_logits.gsfl"},
                  {"twin", queries[k].twin},
                  {"seed", queries[k].seed},
                  {"pose", format_pose(queries[k].pose)}});
    poses.push_back(queries[k].pose);
  }
  seq["queries"] = qs;
  write_text(dir / "sequence.json", seq.dump(2) + "\n");
  write_poses(dir / "gt_poses.txt", poses);

  json gt = json::array();
  for (const auto& inst : scene.instances) {
    gt.push_back({{"label", inst.label},
                  {"class", cfg.taxonomy.at(inst.label).name},
                  {"centroid", {inst.centroid.x(), inst.centroid.y(), inst.centroid.z()}},
                  {"twin", inst.twin}});
  }
  write_text(dir / "instances.json", json{{"instances", gt}, {"background_deviation", scene.background_deviation}}.dump(2) + "\n");
  write_manifest(dir / "manifest.json", "synth", cfg, input_hashes({spec_path}),
                 {{"spec", to_json(spec, cfg.taxonomy)},
                  {"outputs",
                   {{"map_points.bin", sha256_file(dir / "map_points.bin")},
                    {"sequence.json", sha256_file(dir / "sequence.json")}}}});
  std::cout << json{{"points", scene.cloud.size()},
                    {"instances", scene.instances.size()},
                    {"queries", queries.size()},
                    {"background_deviation", scene.background_deviation},
                    {"out", out}}
                   .dump()
            << "\n";
  return 0;
}

int write_report(const EvalReport& report, const PipelineConfig& cfg, const std::string& out,
                 bool with_timings, const json& inputs, const json& extra) {
  const fs::path dir(out);
  ensure_dir(dir);
  write_text(dir / "report.csv", report_csv(report, with_timings));
  const json summary = report_json(report, cfg);
  write_text(dir / "summary.json", summary.dump(2) + "\n");
  json ex = extra;
  ex["outputs"] = {{"report.csv", sha256_file(dir / "report.csv")}};
  write_manifest(dir / "manifest.json", "evaluate", cfg, inputs, ex);
  json brief = summary;
  brief.erase("config");
  std::cout << brief.dump() << "\n";
  return 0;
}

int cmd_evaluate(const Common& c, const std::string& spec_path, const std::string& map_dir,
                 const std::string& seq_path, const std::string& out) {
  if (!spec_path.empty()) {
    const PipelineConfig base = effective_config(c);
    const auto spec = load_benchmark_spec(spec_path, base, c.seed);
    PipelineConfig cfg = base;
    apply_config(cfg, spec.config);
    if (c.no_gsf) cfg.sim.gsf_filter = false;
    const auto report = run_benchmark(spec, cfg);
    return write_report(report, cfg, out, !c.no_timings, input_hashes({spec_path}),
                        {{"spec", to_json(spec, cfg.taxonomy)}});
  }
  if (map_dir.empty() || seq_path.empty()) {
    throw ValidationError("evaluate needs --spec, or --map with --sequence");
  }
  const ReferenceMap map = load_map(map_dir);
  PipelineConfig cfg = c.config_path.empty() && c.sets.empty() ? map.config : effective_config(c);
  if (c.no_gsf) cfg.sim.gsf_filter = false;
  const json seq = parse_json_text(read_text(seq_path), seq_path);
  const fs::path base_dir = fs::path(seq_path).parent_path();
  SyntheticScene frame;
  try {
    for (const auto& tc : seq.at("twin_centers")) {
      frame.twin_centers.emplace_back(tc.at(0).get<double>(), tc.at(1).get<double>(), tc.at(2).get<double>());
    }
    EvalReport report;
    report.thresholds = cfg.eval;
    report.gsf_filter = cfg.sim.gsf_filter;
    const auto& qs = seq.at("queries");
    for (std::size_t k = 0; k < qs.size(); ++k) {
      const auto& q = qs[k];
      CloudArgs in{(base_dir / q.at("points").get<std::string>()).string(),
                   (base_dir / q.at("labels").get<std::string>()).string(),
                   q.contains("logits") ? (base_dir / q["logits"].get<std::string>()).string() : ""};
      QuerySpec spec;
      spec.pose = parse_pose(q.at("pose").get<std::string>());
      spec.twin = q.value("twin", 0);
      spec.seed = q.value("seed", std::uint64_t{0});
      const auto result = localize(load_cloud_args(in, cfg), map, cfg);
      report.rows.push_back(evaluate_result(result, spec, &frame, cfg.eval, static_cast<int>(k)));
    }
    report.aggregates = compute_aggregates(report.rows);
    json inputs = input_hashes({seq_path});
    inputs[(fs::path(map_dir) / "manifest.json").string()] = sha256_file(fs::path(map_dir) / "manifest.json");
    return write_report(report, cfg, out, !c.no_timings, inputs, json::object());
  } catch (const json::exception& e) {
    throw ValidationError(seq_path + ": " + e.what());
  }
}

int cmd_selftest(const Common& c) {
  bool ok = true;
  for (const auto& r : oracle::run_selftest(c.seed.value_or(1))) {
    std::cout << (r.passed ? "PASS " : "FAIL ") << r.name << " (" << r.detail << ")\n";
    ok = ok && r.passed;
  }
  return ok ? 0 : kExitSelftest;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Global localization on Gaussian semantic fields"};
  app.require_subcommand(1);
  app.fallthrough();
  Common common;
  app.add_option("--threads", common.threads, "Cap on worker threads (0 = all cores)");
  app.add_option("--config", common.config_path, "JSON config file");
  app.add_option("--set", common.sets, "Override a config key (key=value), repeatable");
  app.add_option("--seed", common.seed, "Seed override");
  app.add_flag("--no-gsf", common.no_gsf, "Disable GSF filtering (centroid-only matching)");
  app.add_flag("--no-timings", common.no_timings, "Omit timing fields from outputs");

  CloudArgs cloud;
  std::string out, map_dir, spec_path, seq_path;

  auto* build = app.add_subcommand("build-map", "Build a map bundle from a labeled cloud");
  build->add_option("--points", cloud.points, "float32 xyz file")->required();
  build->add_option("--labels", cloud.labels, "uint32 label file")->required();
  build->add_option("--logits", cloud.logits, "GSFL logits file");
  build->add_option("--out", out, "Bundle directory")->required();

  auto* loc = app.add_subcommand("localize", "Localize one scan against a map bundle");
  loc->add_option("--map", map_dir, "Bundle directory")->required();
  loc->add_option("--points", cloud.points, "float32 xyz file")->required();
  loc->add_option("--labels", cloud.labels, "uint32 label file")->required();
  loc->add_option("--logits", cloud.logits, "GSFL logits file");
  loc->add_option("--out", out, "Directory for the run manifest");

  auto* synth = app.add_subcommand("synth", "Generate a synthetic scene and query scans");
  synth->add_option("--spec", spec_path, "Benchmark spec (JSON)")->required();
  synth->add_option("--out", out, "Output directory")->required();

  auto* eval = app.add_subcommand("evaluate", "Run a benchmark and write report.csv/summary.json");
  eval->add_option("--spec", spec_path, "Benchmark spec (JSON), evaluated in memory");
  eval->add_option("--map", map_dir, "Bundle directory (with --sequence)");
  eval->add_option("--sequence", seq_path, "sequence.json written by synth");
  eval->add_option("--out", out, "Output directory")->required();

  auto* self = app.add_subcommand("selftest", "Run the oracle-equivalence checks");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitValidation;
  }

  try {
    set_max_threads(common.threads);
    if (*build) return cmd_build_map(common, cloud, out);
    if (*loc) return cmd_localize(common, map_dir, cloud, out);
    if (*synth) return cmd_synth(common, spec_path, out);
    if (*eval) return cmd_evaluate(common, spec_path, map_dir, seq_path, out);
    if (*self) return cmd_selftest(common);
  } catch (const IoError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitIo;
  } catch (const BuildError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitBuild;
  } catch (const GenerationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitBuild;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitValidation;
  }
  return kExitValidation;
}
