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

#include "gsfloc/descriptors.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "gsfloc/errors.hpp"
#include "gsfloc/io.hpp"

namespace gsfloc {

namespace {

constexpr char kIndexMagic[4] = {'G', 'S', 'F', 'I'};
constexpr std::uint32_t kIndexVersion = 1;
constexpr std::uint64_t kBinMask = (std::uint64_t{1} << 21) - 1;
constexpr double kEqualSideTol = 1e-9;

}  // namespace

std::optional<TriangleDescriptor> make_descriptor(const Instance& a, const Instance& b,
                                                  const Instance& c) {
  const std::array<const Instance*, 3> v = {&a, &b, &c};
  struct Edge {
    double len;
    int i, j;
  };
  std::array<Edge, 3> e = {Edge{(a.centroid - b.centroid).norm(), 0, 1},
                           Edge{(b.centroid - c.centroid).norm(), 1, 2},
                           Edge{(c.centroid - a.centroid).norm(), 2, 0}};
  std::sort(e.begin(), e.end(), [&](const Edge& x, const Edge& y) {
    if (x.len != y.len) return x.len < y.len;
    const auto kx = std::minmax(v[x.i]->id, v[x.j]->id);
    const auto ky = std::minmax(v[y.i]->id, v[y.j]->id);
    return kx < ky;
  });
  if (e[0].len + e[1].len - e[2].len <= kDegeneracySlack) return std::nullopt;

  // Shared vertex of the two shorter sides.
  const int mid = (e[0].i == e[1].i || e[0].i == e[1].j) ? e[0].i : e[0].j;
  const int first = e[0].i == mid ? e[0].j : e[0].i;
  const int last = e[1].i == mid ? e[1].j : e[1].i;

  TriangleDescriptor d;
  const std::array<int, 3> order = {first, mid, last};
  for (int k = 0; k < 3; ++k) {
    d.vertex_ids[k] = v[order[k]]->id;
    d.labels[k] = v[order[k]]->label;
  }
  d.sides = {e[0].len, e[1].len, e[2].len};
  return d;
}

std::vector<TriangleDescriptor> triangulate(const std::vector<Instance>& instances, int K) {
  if (K < 2) throw ValidationError("triangulation needs K >= 2");
  std::vector<TriangleDescriptor> out;
  const auto n = instances.size();
  if (n < 3) return out;

  std::set<std::array<int, 3>> seen;
  std::vector<std::pair<double, std::size_t>> dist;
  for (std::size_t a = 0; a < n; ++a) {
    dist.clear();
    for (std::size_t b = 0; b < n; ++b) {
      if (b == a) continue;
      dist.emplace_back((instances[a].centroid - instances[b].centroid).squaredNorm(), b);
    }
    const auto k = std::min<std::size_t>(static_cast<std::size_t>(K), dist.size());
    std::partial_sort(dist.begin(), dist.begin() + static_cast<std::ptrdiff_t>(k), dist.end());
    for (std::size_t i = 0; i < k; ++i) {
      for (std::size_t j = i + 1; j < k; ++j) {
        std::array<int, 3> key = {instances[a].id, instances[dist[i].second].id,
                                  instances[dist[j].second].id};
        std::sort(key.begin(), key.end());
        if (!seen.insert(key).second) continue;
        if (auto d = make_descriptor(instances[a], instances[dist[i].second],
                                     instances[dist[j].second])) {
          out.push_back(*d);
        }
      }
    }
  }
  std::sort(out.begin(), out.end(), [](const TriangleDescriptor& x, const TriangleDescriptor& y) {
    auto kx = x.vertex_ids, ky = y.vertex_ids;
    std::sort(kx.begin(), kx.end());
    std::sort(ky.begin(), ky.end());
    return kx < ky;
  });
  return out;
}

std::array<std::int64_t, 3> side_bins(const TriangleDescriptor& d, double delta_d) {
  if (!(delta_d > 0.0)) throw ValidationError("delta_d must be > 0");
  return {static_cast<std::int64_t>(std::floor(d.sides[0] / delta_d)),
          static_cast<std::int64_t>(std::floor(d.sides[1] / delta_d)),
          static_cast<std::int64_t>(std::floor(d.sides[2] / delta_d))};
}

IndexKey pack_bins(const std::array<std::int64_t, 3>& b) {
  auto part = [](std::int64_t v) { return static_cast<std::uint64_t>(v) & kBinMask; };
  return (part(b[0]) << 42) | (part(b[1]) << 21) | part(b[2]);
}

IndexKey hash_key(const TriangleDescriptor& d, double delta_d) {
  return pack_bins(side_bins(d, delta_d));
}

bool labels_multiset_equal(const std::array<ClassId, 3>& a, const std::array<ClassId, 3>& b) {
  auto x = a, y = b;
  std::sort(x.begin(), x.end());
  std::sort(y.begin(), y.end());
  return x == y;
}

DescriptorIndex::DescriptorIndex(std::vector<TriangleDescriptor> descriptors, double delta_d)
    : descriptors_(std::move(descriptors)), delta_d_(delta_d) {
  if (!(delta_d > 0.0)) throw ValidationError("delta_d must be > 0");
  rebuild_table();
}

void DescriptorIndex::rebuild_table() {
  table_.clear();
  for (std::size_t i = 0; i < descriptors_.size(); ++i) {
    table_[hash_key(descriptors_[i], delta_d_)].push_back(i);
  }
}

std::vector<std::size_t> DescriptorIndex::query(const TriangleDescriptor& d) const {
  // Bin range of [side - delta, side + delta]; normally the +-1 neighbors,
  // wider only when rounding lands exactly on a bin edge.
  std::array<std::int64_t, 3> lo, hi;
  for (int k = 0; k < 3; ++k) {
    lo[k] = static_cast<std::int64_t>(std::floor((d.sides[k] - delta_d_) / delta_d_));
    hi[k] = static_cast<std::int64_t>(std::floor((d.sides[k] + delta_d_) / delta_d_));
    lo[k] = std::max<std::int64_t>(lo[k], 0);
  }
  std::vector<std::size_t> out;
  for (auto b0 = lo[0]; b0 <= hi[0]; ++b0)
    for (auto b1 = lo[1]; b1 <= hi[1]; ++b1)
      for (auto b2 = lo[2]; b2 <= hi[2]; ++b2) {
        auto it = table_.find(pack_bins({b0, b1, b2}));
        if (it == table_.end()) continue;
        for (auto id : it->second) {
          const auto& c = descriptors_[id];
          bool close = true;
          for (int k = 0; k < 3; ++k) close = close && std::abs(c.sides[k] - d.sides[k]) <= delta_d_;
          if (close && labels_multiset_equal(c.labels, d.labels)) out.push_back(id);
        }
      }
  std::sort(out.begin(), out.end());
  return out;
}

std::vector<std::uint8_t> DescriptorIndex::serialize() const {
  ByteWriter w;
  w.raw(kIndexMagic, 4);
  w.u32(kIndexVersion);
  w.f64(delta_d_);
  w.u64(descriptors_.size());
  for (const auto& d : descriptors_) {
    for (int v : d.vertex_ids) w.u32(static_cast<std::uint32_t>(v));
    for (double s : d.sides) w.f64(s);
    for (ClassId l : d.labels) w.raw(&l, 2);
  }
  return w.take();
}

DescriptorIndex DescriptorIndex::deserialize(const std::vector<std::uint8_t>& bytes,
                                             const std::string& source) {
  ByteReader r(bytes, source);
  char magic[4];
  r.raw(magic, 4);
  if (std::string(magic, 4) != "GSFI") throw FormatError(source + ": bad magic, expected GSFI");
  if (const auto v = r.u32(); v != kIndexVersion) {
    throw FormatError(source + ": unsupported index version " + std::to_string(v));
  }
  DescriptorIndex idx;
  idx.delta_d_ = r.f64();
  if (!(idx.delta_d_ > 0.0)) throw FormatError(source + ": delta_d must be > 0");
  const auto count = r.u64();
  constexpr std::size_t kRecord = 3 * 4 + 3 * 8 + 3 * 2;
  if (r.remaining() != count * kRecord) {
    throw FormatError(source + ": expected " + std::to_string(count * kRecord) +
                      " record bytes, got " + std::to_string(r.remaining()));
  }
  idx.descriptors_.resize(count);
  for (auto& d : idx.descriptors_) {
    for (int& v : d.vertex_ids) v = static_cast<int>(r.u32());
    for (double& s : d.sides) s = r.f64();
    for (ClassId& l : d.labels) r.raw(&l, 2);
  }
  idx.rebuild_table();
  return idx;
}

std::vector<std::array<int, 3>> vertex_pairings(const TriangleDescriptor& query,
                                                const TriangleDescriptor& candidate) {
  std::vector<std::array<int, 3>> out = {{0, 1, 2}};
  auto equal = [](double a, double b) { return std::abs(a - b) <= kEqualSideTol; };
  // sides[0] == sides[1]: vertex 1 is fixed, vertices 0 and 2 interchange.
  // sides[1] == sides[2]: vertex 2 is fixed, vertices 0 and 1 interchange.
  const bool swap02 = equal(query.sides[0], query.sides[1]) ||
                      equal(candidate.sides[0], candidate.sides[1]);
  const bool swap01 = equal(query.sides[1], query.sides[2]) ||
                      equal(candidate.sides[1], candidate.sides[2]);
  if (swap02) out.push_back({2, 1, 0});
  if (swap01) out.push_back({1, 0, 2});
  if (swap02 && swap01) {
    // Equilateral: every permutation.
    out = {{0, 1, 2}, {0, 2, 1}, {1, 0, 2}, {1, 2, 0}, {2, 0, 1}, {2, 1, 0}};
  }
  return out;
}

std::vector<ScoredCandidate> gsf_filter(const TriangleDescriptor& query,
                                        const std::vector<std::size_t>& candidates,
                                        const std::vector<TriangleDescriptor>& map_descriptors,
                                        const VertexDistance& distance, const SimilarityConfig& cfg,
                                        std::size_t* skipped) {
  cfg.validate();
  std::vector<ScoredCandidate> out;
  std::size_t n_skipped = 0;
  for (auto cid : candidates) {
    const auto& cand = map_descriptors.at(cid);
    std::optional<ScoredCandidate> best;
    bool missing = false;
    for (const auto& perm : vertex_pairings(query, cand)) {
      ScoredCandidate sc;
      sc.candidate = cid;
      for (int k = 0; k < 3 && !missing; ++k) {
        const int qi = query.vertex_ids[k];
        const int mj = cand.vertex_ids[perm[k]];
        const auto w2 = distance(qi, mj);
        if (!w2) {
          missing = true;
          break;
        }
        sc.pairs[k] = {qi, mj};
        sc.vertex_w2[k] = *w2;
        sc.score += *w2;
      }
      if (missing) break;
      if (!best || sc.score < best->score) best = sc;
    }
    if (missing) {
      ++n_skipped;
      continue;
    }
    if (best->score > 3.0 * cfg.accept_threshold) continue;
    for (int k = 0; k < 3; ++k) best->omega[k] = similarity_weight(best->vertex_w2[k], cfg);
    out.push_back(*best);
  }
  std::stable_sort(out.begin(), out.end(), [](const ScoredCandidate& a, const ScoredCandidate& b) {
    if (a.score != b.score) return a.score < b.score;
    return a.candidate < b.candidate;
  });
  if (skipped) *skipped = n_skipped;
  return out;
}

}  // namespace gsfloc
