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

#include "gsfloc/config.hpp"

#include <functional>
#include <map>
#include <sstream>

#include "gsfloc/errors.hpp"
#include "gsfloc/io.hpp"

namespace gsfloc {

using nlohmann::json;

namespace {

double as_double(const std::string& key, const json& v) {
  if (!v.is_number()) throw ValidationError("config key '" + key + "' expects a number");
  return v.get<double>();
}

int as_int(const std::string& key, const json& v) {
  if (!v.is_number_integer()) throw ValidationError("config key '" + key + "' expects an integer");
  return v.get<int>();
}

std::uint64_t as_u64(const std::string& key, const json& v) {
  if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<std::int64_t>() >= 0)) {
    throw ValidationError("config key '" + key + "' expects a non-negative integer");
  }
  return v.get<std::uint64_t>();
}

bool as_bool(const std::string& key, const json& v) {
  if (!v.is_boolean()) throw ValidationError("config key '" + key + "' expects true/false");
  return v.get<bool>();
}

std::optional<double> as_auto_double(const std::string& key, const json& v) {
  if (v.is_null() || (v.is_string() && v.get<std::string>() == "auto")) return std::nullopt;
  return as_double(key, v);
}

ClassId class_from_key(const LabelTaxonomy& t, const std::string& key, const std::string& name) {
  if (auto id = t.find(name)) return *id;
  try {
    std::size_t pos = 0;
    const int id = std::stoi(name, &pos);
    if (pos == name.size() && id >= 0 && id < t.size()) return static_cast<ClassId>(id);
  } catch (const std::exception&) {
  }
  throw ValidationError("config key '" + key + "' names unknown class '" + name + "'");
}

using Setter = std::function<void(PipelineConfig&, const std::string&, const json&)>;

const std::map<std::string, Setter>& setters() {
  static const std::map<std::string, Setter> table = {
      {"gsf.kappa", [](auto& c, auto& k, auto& v) { c.graph.gsf.hyper.kappa = as_double(k, v); }},
      {"gsf.sigma_y", [](auto& c, auto& k, auto& v) { c.graph.gsf.hyper.sigma_y = as_double(k, v); }},
      {"gsf.budget", [](auto& c, auto& k, auto& v) { c.graph.gsf.budget = as_int(k, v); }},
      {"gsf.seed", [](auto& c, auto& k, auto& v) { c.graph.gsf.seed = as_u64(k, v); }},
      {"gsf.softmax", [](auto& c, auto& k, auto& v) { c.graph.gsf.softmax = as_bool(k, v); }},
      {"gsf.one_hot_confidence",
       [](auto& c, auto& k, auto& v) { c.graph.one_hot_confidence = as_double(k, v); }},
      {"gsf.grid.nx", [](auto& c, auto& k, auto& v) { c.grid.nx = as_int(k, v); }},
      {"gsf.grid.ny", [](auto& c, auto& k, auto& v) { c.grid.ny = as_int(k, v); }},
      {"gsf.grid.dx", [](auto& c, auto& k, auto& v) { c.grid.dx = as_double(k, v); }},
      {"gsf.grid.dy", [](auto& c, auto& k, auto& v) { c.grid.dy = as_double(k, v); }},
      {"gsf.grid.z_mode",
       [](auto& c, auto& k, auto& v) {
         if (v == "local-zero") c.grid.z_mode = ZMode::kLocalZero;
         else if (v == "offset") c.grid.z_mode = ZMode::kOffset;
         else throw ValidationError("config key '" + k + "' expects \"local-zero\" or \"offset\"");
       }},
      {"gsf.grid.z_offset", [](auto& c, auto& k, auto& v) { c.grid.z_offset = as_double(k, v); }},
      {"graph.radius", [](auto& c, auto& k, auto& v) { c.graph.radius = as_double(k, v); }},
      {"cluster.min_cluster_size",
       [](auto& c, auto& k, auto& v) { c.graph.cluster.min_cluster_size = as_int(k, v); }},
      {"descriptor.delta_d", [](auto& c, auto& k, auto& v) { c.descriptor.delta_d = as_double(k, v); }},
      {"descriptor.k", [](auto& c, auto& k, auto& v) { c.descriptor.k = as_int(k, v); }},
      {"sim.sigma_w", [](auto& c, auto& k, auto& v) { c.sim.sigma_w = as_auto_double(k, v); }},
      {"sim.accept_threshold",
       [](auto& c, auto& k, auto& v) { c.sim.accept_threshold = as_auto_double(k, v); }},
      {"sim.use_stability", [](auto& c, auto& k, auto& v) { c.sim.use_stability = as_bool(k, v); }},
      {"sim.yaw_samples", [](auto& c, auto& k, auto& v) { c.sim.yaw_samples = as_int(k, v); }},
      {"sim.gsf_filter", [](auto& c, auto& k, auto& v) { c.sim.gsf_filter = as_bool(k, v); }},
      {"matching.epsilon", [](auto& c, auto& k, auto& v) { c.matching.epsilon = as_double(k, v); }},
      {"matching.min_inliers", [](auto& c, auto& k, auto& v) { c.matching.min_inliers = as_int(k, v); }},
      {"solver.tau0", [](auto& c, auto& k, auto& v) { c.solver.tau0 = as_double(k, v); }},
      {"solver.max_iters", [](auto& c, auto& k, auto& v) { c.solver.max_iters = as_int(k, v); }},
      {"solver.rel_tol", [](auto& c, auto& k, auto& v) { c.solver.rel_tol = as_double(k, v); }},
      {"query.voxel", [](auto& c, auto& k, auto& v) { c.query_voxel = as_double(k, v); }},
      {"eval.success_trans", [](auto& c, auto& k, auto& v) { c.eval.success_trans = as_double(k, v); }},
      {"eval.success_rot", [](auto& c, auto& k, auto& v) { c.eval.success_rot = as_double(k, v); }},
  };
  return table;
}

const std::string kThresholdPrefix = "cluster.threshold.";
const std::string kStabilityPrefix = "taxonomy.stability.";
const std::string kInstantiablePrefix = "taxonomy.instantiable.";

json opt_to_json(const std::optional<double>& v) { return v ? json(*v) : json("auto"); }

}  // namespace

void PipelineConfig::validate() const {
  graph.gsf.hyper.validate();
  grid.validate();
  if (graph.gsf.budget < 1) throw ValidationError("gsf.budget must be >= 1");
  if (!(graph.radius > 0.0)) throw ValidationError("graph.radius must be > 0");
  if (graph.cluster.min_cluster_size < 1) throw ValidationError("cluster.min_cluster_size must be >= 1");
  if (!(graph.one_hot_confidence > 0.0 && graph.one_hot_confidence <= 1.0)) {
    throw ValidationError("gsf.one_hot_confidence must lie in (0,1]");
  }
  for (const auto& [id, thr] : graph.cluster.thresholds) {
    if (!(thr > 0.0)) throw ValidationError("cluster thresholds must be > 0");
  }
  if (!(descriptor.delta_d > 0.0)) throw ValidationError("descriptor.delta_d must be > 0");
  if (descriptor.k < 2) throw ValidationError("descriptor.k must be >= 2");
  if (sim.sigma_w && !(*sim.sigma_w > 0.0)) throw ValidationError("sim.sigma_w must be > 0");
  if (sim.accept_threshold && !(*sim.accept_threshold > 0.0)) {
    throw ValidationError("sim.accept_threshold must be > 0");
  }
  if (sim.yaw_samples < 1) throw ValidationError("sim.yaw_samples must be >= 1");
  if (!(matching.epsilon > 0.0)) throw ValidationError("matching.epsilon must be > 0");
  if (matching.min_inliers < 3) throw ValidationError("matching.min_inliers must be >= 3");
  if (!(solver.tau0 > 0.0)) throw ValidationError("solver.tau0 must be > 0");
  if (solver.max_iters < 1) throw ValidationError("solver.max_iters must be >= 1");
  if (!(solver.rel_tol >= 0.0)) throw ValidationError("solver.rel_tol must be >= 0");
  if (!(query_voxel >= 0.0)) throw ValidationError("query.voxel must be >= 0");
  if (!(eval.success_trans > 0.0) || !(eval.success_rot > 0.0)) {
    throw ValidationError("eval thresholds must be > 0");
  }
}

std::vector<std::string> config_keys() {
  std::vector<std::string> keys;
  for (const auto& [k, s] : setters()) keys.push_back(k);
  keys.push_back(kThresholdPrefix + "<class>");
  keys.push_back(kStabilityPrefix + "<class>");
  keys.push_back(kInstantiablePrefix + "<class>");
  keys.push_back("taxonomy.classes");
  return keys;
}

void apply_config_key(PipelineConfig& cfg, const std::string& key, const json& value) {
  if (auto it = setters().find(key); it != setters().end()) {
    it->second(cfg, key, value);
    return;
  }
  if (key.rfind(kThresholdPrefix, 0) == 0) {
    const ClassId id = class_from_key(cfg.taxonomy, key, key.substr(kThresholdPrefix.size()));
    cfg.graph.cluster.thresholds[id] = as_double(key, value);
    return;
  }
  if (key.rfind(kStabilityPrefix, 0) == 0) {
    const ClassId id = class_from_key(cfg.taxonomy, key, key.substr(kStabilityPrefix.size()));
    cfg.taxonomy.set_stability(id, as_double(key, value));
    return;
  }
  if (key.rfind(kInstantiablePrefix, 0) == 0) {
    const ClassId id = class_from_key(cfg.taxonomy, key, key.substr(kInstantiablePrefix.size()));
    auto classes = cfg.taxonomy.classes();
    classes[id].instantiable = as_bool(key, value);
    cfg.taxonomy = LabelTaxonomy(std::move(classes));
    return;
  }
  if (key == "taxonomy.classes") {
    cfg.taxonomy = taxonomy_from_json(value);
    return;
  }
  throw ValidationError("unknown config key '" + key + "'");
}

std::vector<std::pair<std::string, json>> flatten(const json& doc) {
  std::vector<std::pair<std::string, json>> out;
  std::function<void(const json&, const std::string&)> walk = [&](const json& j, const std::string& prefix) {
    if (j.is_object()) {
      for (auto it = j.begin(); it != j.end(); ++it) {
        walk(it.value(), prefix.empty() ? it.key() : prefix + "." + it.key());
      }
    } else {
      out.emplace_back(prefix, j);
    }
  };
  walk(doc, "");
  return out;
}

void apply_config(PipelineConfig& cfg, const json& doc) {
  if (!doc.is_object()) throw ValidationError("config document must be a JSON object");
  auto flat = flatten(doc);
  // Class lists first so name-based keys resolve against them.
  for (const auto& [k, v] : flat) {
    if (k == "taxonomy.classes") apply_config_key(cfg, k, v);
  }
  for (const auto& [k, v] : flat) {
    if (k != "taxonomy.classes") apply_config_key(cfg, k, v);
  }
  cfg.validate();
}

json parse_json_text(const std::string& text, const std::string& source) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    std::size_t line = 1, col = 1;
    for (std::size_t i = 0; i + 1 < e.byte && i < text.size(); ++i) {
      if (text[i] == '\n') {
        ++line;
        col = 1;
      } else {
        ++col;
      }
    }
    std::ostringstream os;
    os << source << ":" << line << ":" << col << ": " << e.what();
    throw ValidationError(os.str());
  }
}

PipelineConfig load_config(const std::string& path) {
  PipelineConfig cfg;
  apply_config(cfg, parse_json_text(read_text(path), path));
  return cfg;
}

json taxonomy_to_json(const LabelTaxonomy& t) {
  json arr = json::array();
  for (const auto& c : t.classes()) {
    arr.push_back({{"name", c.name},
                   {"instantiable", c.instantiable},
                   {"stability", c.stability},
                   {"cluster_threshold", c.cluster_threshold}});
  }
  return arr;
}

LabelTaxonomy taxonomy_from_json(const json& j) {
  if (!j.is_array() || j.empty()) throw ValidationError("taxonomy.classes must be a non-empty array");
  std::vector<ClassInfo> classes;
  for (const auto& c : j) {
    ClassInfo info;
    try {
      info.name = c.at("name").get<std::string>();
      info.instantiable = c.value("instantiable", false);
      info.stability = c.value("stability", Stability::kLongTerm);
      info.cluster_threshold = c.value("cluster_threshold", 0.5);
    } catch (const json::exception& e) {
      throw ValidationError(std::string("taxonomy.classes entry: ") + e.what());
    }
    classes.push_back(std::move(info));
  }
  return LabelTaxonomy(std::move(classes));
}

json to_json(const GraphConfig& g) {
  json thr = json::object();
  for (const auto& [id, v] : g.cluster.thresholds) thr[std::to_string(id)] = v;
  return {{"radius", g.radius},
          {"min_cluster_size", g.cluster.min_cluster_size},
          {"thresholds", thr},
          {"kappa", g.gsf.hyper.kappa},
          {"sigma_y", g.gsf.hyper.sigma_y},
          {"budget", g.gsf.budget},
          {"seed", g.gsf.seed},
          {"softmax", g.gsf.softmax},
          {"one_hot_confidence", g.one_hot_confidence}};
}

GraphConfig graph_config_from_json(const json& j) {
  GraphConfig g;
  try {
    g.radius = j.at("radius").get<double>();
    g.cluster.min_cluster_size = j.at("min_cluster_size").get<int>();
    for (auto it = j.at("thresholds").begin(); it != j.at("thresholds").end(); ++it) {
      g.cluster.thresholds[static_cast<ClassId>(std::stoi(it.key()))] = it.value().get<double>();
    }
    g.gsf.hyper.kappa = j.at("kappa").get<double>();
    g.gsf.hyper.sigma_y = j.at("sigma_y").get<double>();
    g.gsf.budget = j.at("budget").get<int>();
    g.gsf.seed = j.at("seed").get<std::uint64_t>();
    g.gsf.softmax = j.at("softmax").get<bool>();
    g.one_hot_confidence = j.at("one_hot_confidence").get<double>();
  } catch (const json::exception& e) {
    throw FormatError(std::string("graph config: ") + e.what());
  }
  return g;
}

json to_json(const PipelineConfig& c) {
  json thr = json::object();
  for (const auto& [id, v] : c.graph.cluster.thresholds) thr[c.taxonomy.at(id).name] = v;
  return {
      {"gsf",
       {{"kappa", c.graph.gsf.hyper.kappa},
        {"sigma_y", c.graph.gsf.hyper.sigma_y},
        {"budget", c.graph.gsf.budget},
        {"seed", c.graph.gsf.seed},
        {"softmax", c.graph.gsf.softmax},
        {"one_hot_confidence", c.graph.one_hot_confidence},
        {"grid",
         {{"nx", c.grid.nx},
          {"ny", c.grid.ny},
          {"dx", c.grid.dx},
          {"dy", c.grid.dy},
          {"z_mode", c.grid.z_mode == ZMode::kLocalZero ? "local-zero" : "offset"},
          {"z_offset", c.grid.z_offset}}}}},
      {"graph", {{"radius", c.graph.radius}}},
      {"cluster", {{"min_cluster_size", c.graph.cluster.min_cluster_size}, {"threshold", thr}}},
      {"descriptor", {{"delta_d", c.descriptor.delta_d}, {"k", c.descriptor.k}}},
      {"sim",
       {{"sigma_w", opt_to_json(c.sim.sigma_w)},
        {"accept_threshold", opt_to_json(c.sim.accept_threshold)},
        {"use_stability", c.sim.use_stability},
        {"yaw_samples", c.sim.yaw_samples},
        {"gsf_filter", c.sim.gsf_filter}}},
      {"matching", {{"epsilon", c.matching.epsilon}, {"min_inliers", c.matching.min_inliers}}},
      {"solver",
       {{"tau0", c.solver.tau0}, {"max_iters", c.solver.max_iters}, {"rel_tol", c.solver.rel_tol}}},
      {"query", {{"voxel", c.query_voxel}}},
      {"eval", {{"success_trans", c.eval.success_trans}, {"success_rot", c.eval.success_rot}}},
      {"taxonomy", {{"classes", taxonomy_to_json(c.taxonomy)}}},
  };
}

}  // namespace gsfloc
