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

#include "gsfloc/matching.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <functional>
#include <map>
#include <numeric>
#include <sstream>

#include "gsfloc/errors.hpp"

namespace gsfloc {

std::vector<Correspondence> collect_correspondences(const std::vector<TriangleMatch>& matches) {
  std::map<std::pair<int, int>, Correspondence> merged;
  for (const auto& m : matches) {
    for (int k = 0; k < 3; ++k) {
      const auto key = m.pairs[k];
      auto [it, inserted] = merged.try_emplace(key, Correspondence{key.first, key.second, m.omega[k], 1});
      if (!inserted) {
        it->second.support += 1;
        it->second.omega = std::max(it->second.omega, m.omega[k]);
      }
    }
  }
  std::vector<Correspondence> out;
  out.reserve(merged.size());
  for (auto& [key, c] : merged) out.push_back(c);
  return out;
}

AdjacencyMatrix::AdjacencyMatrix(std::size_t n)
    : n_(n), words_((n + 63) / 64), rows_(n * ((n + 63) / 64), 0) {}

void AdjacencyMatrix::set(std::size_t i, std::size_t j, bool value) {
  if (i == j) return;
  auto apply = [&](std::size_t a, std::size_t b) {
    auto& w = rows_[a * words_ + b / 64];
    const std::uint64_t bit = std::uint64_t{1} << (b % 64);
    w = value ? (w | bit) : (w & ~bit);
  };
  apply(i, j);
  apply(j, i);
}

std::size_t AdjacencyMatrix::degree(std::size_t i) const {
  std::size_t d = 0;
  for (std::size_t w = 0; w < words_; ++w) d += static_cast<std::size_t>(std::popcount(row(i)[w]));
  return d;
}

std::size_t AdjacencyMatrix::edge_count() const {
  std::size_t e = 0;
  for (std::size_t i = 0; i < n_; ++i) e += degree(i);
  return e / 2;
}

bool consistency_check(const Correspondence& ci, const Correspondence& cj,
                       const std::vector<Vec3>& query_centroids,
                       const std::vector<Vec3>& map_centroids, double epsilon) {
  if (ci.query_id == cj.query_id || ci.map_id == cj.map_id) return false;
  const double a = (query_centroids.at(ci.query_id) - query_centroids.at(cj.query_id)).norm();
  const double b = (map_centroids.at(ci.map_id) - map_centroids.at(cj.map_id)).norm();
  return std::abs(a - b) <= epsilon;
}

ConsistencyGraph build_consistency_graph(const std::vector<Correspondence>& corrs,
                                         const std::vector<Vec3>& query_centroids,
                                         const std::vector<Vec3>& map_centroids, double epsilon) {
  ConsistencyGraph g;
  g.nodes = corrs;
  g.epsilon = epsilon;
  g.adjacency = AdjacencyMatrix(corrs.size());
  for (std::size_t i = 0; i < corrs.size(); ++i) {
    for (std::size_t j = i + 1; j < corrs.size(); ++j) {
      if (consistency_check(corrs[i], corrs[j], query_centroids, map_centroids, epsilon)) {
        g.adjacency.set(i, j);
      }
    }
  }
  return g;
}

ConsistencyGraph make_graph(const AdjacencyMatrix& adjacency, const std::vector<double>& omega) {
  if (omega.size() != adjacency.size()) throw ValidationError("make_graph: omega size mismatch");
  ConsistencyGraph g;
  g.adjacency = adjacency;
  g.nodes.resize(omega.size());
  for (std::size_t i = 0; i < omega.size(); ++i) {
    g.nodes[i] = Correspondence{static_cast<int>(i), static_cast<int>(i), omega[i], 1};
  }
  return g;
}

double clique_weight(const ConsistencyGraph& g, const std::vector<int>& sorted_ids) {
  double w = 0.0;
  for (int id : sorted_ids) w += g.nodes[static_cast<std::size_t>(id)].omega;
  return w;
}

bool clique_better(const std::vector<int>& a, double a_weight, const std::vector<int>& b,
                   double b_weight) {
  if (a.size() != b.size()) return a.size() > b.size();
  if (a_weight != b_weight) return a_weight > b_weight;
  return std::lexicographical_compare(a.begin(), a.end(), b.begin(), b.end());
}

namespace {

using Bits = std::vector<std::uint64_t>;

bool any(const Bits& b) {
  return std::any_of(b.begin(), b.end(), [](std::uint64_t w) { return w != 0; });
}

class CliqueSolver {
 public:
  explicit CliqueSolver(const ConsistencyGraph& g) : g_(g), n_(g.nodes.size()), words_((n_ + 63) / 64) {
    order_.resize(n_);
    std::iota(order_.begin(), order_.end(), 0);
    std::stable_sort(order_.begin(), order_.end(), [&](std::size_t a, std::size_t b) {
      return g.adjacency.degree(a) > g.adjacency.degree(b);
    });
    adj_.assign(n_, Bits(words_, 0));
    omega_.resize(n_);
    for (std::size_t p = 0; p < n_; ++p) {
      omega_[p] = g.nodes[order_[p]].omega;
      for (std::size_t q = 0; q < n_; ++q) {
        if (g.adjacency.test(order_[p], order_[q])) adj_[p][q / 64] |= std::uint64_t{1} << (q % 64);
      }
    }
  }

  std::vector<int> solve() {
    if (n_ == 0) return {};
    Bits all(words_, 0);
    for (std::size_t p = 0; p < n_; ++p) all[p / 64] |= std::uint64_t{1} << (p % 64);
    expand(all, 0.0);
    return best_;
  }

 private:
  void color_sort(const Bits& P, std::vector<std::size_t>& verts, std::vector<std::size_t>& colors) const {
    Bits uncolored = P;
    std::size_t color = 0;
    while (any(uncolored)) {
      ++color;
      Bits avail = uncolored;
      for (std::size_t w = 0; w < words_; ++w) {
        while (avail[w]) {
          const auto bit = static_cast<std::size_t>(std::countr_zero(avail[w]));
          const std::size_t v = w * 64 + bit;
          uncolored[w] &= ~(std::uint64_t{1} << bit);
          for (std::size_t k = 0; k < words_; ++k) avail[k] &= ~adj_[v][k];
          avail[w] &= ~(std::uint64_t{1} << bit);
          verts.push_back(v);
          colors.push_back(color);
        }
      }
    }
  }

  // Sum of the `k` largest weights in P.
  double top_weights(const Bits& P, std::size_t k) const {
    std::vector<double> w;
    for (std::size_t p = 0; p < n_; ++p) {
      if ((P[p / 64] >> (p % 64)) & 1u) w.push_back(omega_[p]);
    }
    k = std::min(k, w.size());
    std::partial_sort(w.begin(), w.begin() + static_cast<std::ptrdiff_t>(k), w.end(), std::greater<>());
    return std::accumulate(w.begin(), w.begin() + static_cast<std::ptrdiff_t>(k), 0.0);
  }

  void expand(Bits P, double cur_w) {
    std::vector<std::size_t> verts, colors;
    color_sort(P, verts, colors);
    for (std::size_t i = verts.size(); i-- > 0;) {
      const std::size_t v = verts[i];
      const std::size_t reach = cur_.size() + colors[i];
      if (reach < best_.size()) return;
      if (reach == best_.size() && !best_.empty()) {
        const double bound = cur_w + top_weights(P, best_.size() - cur_.size());
        if (bound < best_w_ - 1e-9 * std::max(1.0, best_w_)) return;
      }
      cur_.push_back(v);
      Bits next(words_);
      for (std::size_t k = 0; k < words_; ++k) next[k] = P[k] & adj_[v][k];
      if (any(next)) {
        expand(std::move(next), cur_w + omega_[v]);
      } else {
        consider();
      }
      cur_.pop_back();
      P[v / 64] &= ~(std::uint64_t{1} << (v % 64));
    }
  }

  void consider() {
    std::vector<int> ids;
    ids.reserve(cur_.size());
    for (auto p : cur_) ids.push_back(static_cast<int>(order_[p]));
    std::sort(ids.begin(), ids.end());
    const double w = clique_weight(g_, ids);
    if (best_.empty() || clique_better(ids, w, best_, best_w_)) {
      best_ = std::move(ids);
      best_w_ = w;
    }
  }

  const ConsistencyGraph& g_;
  std::size_t n_, words_;
  std::vector<std::size_t> order_;
  std::vector<Bits> adj_;
  std::vector<double> omega_;
  std::vector<std::size_t> cur_;
  std::vector<int> best_;
  double best_w_ = 0.0;
};

}  // namespace

std::vector<int> max_clique(const ConsistencyGraph& graph) { return CliqueSolver(graph).solve(); }

std::vector<int> brute_force_max_clique(const ConsistencyGraph& graph) {
  const std::size_t n = graph.nodes.size();
  if (n > kBruteForceMaxNodes) {
    throw ValidationError("brute_force_max_clique: " + std::to_string(n) + " nodes exceeds guard of " +
                          std::to_string(kBruteForceMaxNodes));
  }
  std::vector<int> best;
  double best_w = 0.0;
  std::vector<int> cur;
  // Enumerates every clique once, extending only with larger ids.
  std::function<void(int)> extend = [&](int from) {
    if (!cur.empty()) {
      const double w = clique_weight(graph, cur);
      if (best.empty() || clique_better(cur, w, best, best_w)) {
        best = cur;
        best_w = w;
      }
    }
    for (int v = from; v < static_cast<int>(n); ++v) {
      bool ok = true;
      for (int u : cur) ok = ok && graph.adjacency.test(static_cast<std::size_t>(u), static_cast<std::size_t>(v));
      if (!ok) continue;
      cur.push_back(v);
      extend(v + 1);
      cur.pop_back();
    }
  };
  extend(0);
  return best;
}

std::string dump_graph(const ConsistencyGraph& graph) {
  std::ostringstream os;
  os << "epsilon " << graph.epsilon << "\n";
  os << "nodes " << graph.nodes.size() << "\n";
  for (std::size_t i = 0; i < graph.nodes.size(); ++i) {
    const auto& c = graph.nodes[i];
    os << i << " query " << c.query_id << " map " << c.map_id << " omega " << c.omega
       << " support " << c.support << "\n";
  }
  os << "edges " << graph.adjacency.edge_count() << "\n";
  for (std::size_t i = 0; i < graph.nodes.size(); ++i) {
    for (std::size_t j = i + 1; j < graph.nodes.size(); ++j) {
      if (graph.adjacency.test(i, j)) os << i << " " << j << "\n";
    }
  }
  return os.str();
}

}  // namespace gsfloc
