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

#include "gsfloc/oracles.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <set>
#include <sstream>

#include <Eigen/Eigenvalues>
#include <Eigen/LU>

#include "gsfloc/pose_solver.hpp"
#include "gsfloc/wasserstein.hpp"

namespace gsfloc::oracle {

MatrixX kernel_loop(const PointMatrix& A, const PointMatrix& B, double kappa) {
  MatrixX K(A.rows(), B.rows());
  for (Eigen::Index i = 0; i < A.rows(); ++i) {
    for (Eigen::Index j = 0; j < B.rows(); ++j) {
      const double dx = A(i, 0) - B(j, 0), dy = A(i, 1) - B(j, 1), dz = A(i, 2) - B(j, 2);
      const double d = std::sqrt(dx * dx + dy * dy + dz * dz);
      const double s = std::sqrt(3.0) * d / kappa;
      K(i, j) = (1.0 + s) * std::exp(-s);
    }
  }
  return K;
}

GsfPrediction explicit_inverse_predict(const PointMatrix& X, const MatrixX& Y, double kappa,
                                       double noise_var, const PointMatrix& Q) {
  MatrixX K = kernel_loop(X, X, kappa);
  K += noise_var * MatrixX::Identity(X.rows(), X.rows());
  const MatrixX Kinv = K.fullPivLu().inverse();
  const MatrixX Kqx = kernel_loop(Q, X, kappa);
  GsfPrediction p;
  p.mu = Kqx * Kinv * Y;
  p.Sigma = kernel_loop(Q, Q, kappa) - Kqx * Kinv * Kqx.transpose();
  p.Sigma = 0.5 * (p.Sigma + p.Sigma.transpose()).eval();
  return p;
}

std::vector<Eigen::Index> linear_radius(const PointMatrix& points, const Vec3& center, double r) {
  std::vector<Eigen::Index> out;
  for (Eigen::Index i = 0; i < points.rows(); ++i) {
    if ((points.row(i).transpose() - center).norm() <= r) out.push_back(i);
  }
  return out;
}

std::vector<std::size_t> linear_index_query(const std::vector<TriangleDescriptor>& stored,
                                            const TriangleDescriptor& q, double delta) {
  std::vector<std::size_t> out;
  auto ql = q.labels;
  std::sort(ql.begin(), ql.end());
  for (std::size_t i = 0; i < stored.size(); ++i) {
    bool ok = true;
    for (int k = 0; k < 3; ++k) ok = ok && std::abs(stored[i].sides[k] - q.sides[k]) <= delta;
    auto sl = stored[i].labels;
    std::sort(sl.begin(), sl.end());
    if (ok && sl == ql) out.push_back(i);
  }
  return out;
}

std::vector<Instance> brute_force_clusters(const SemanticPointCloud& cloud,
                                           const LabelTaxonomy& taxonomy, const ClusterParams& params) {
  const auto n = static_cast<std::size_t>(cloud.size());
  std::vector<std::size_t> comp(n);
  std::iota(comp.begin(), comp.end(), 0);
  // Label propagation to a fixed point: each point takes the minimum
  // component id among its linked neighbors.
  bool changed = true;
  while (changed) {
    changed = false;
    for (std::size_t a = 0; a < n; ++a) {
      const ClassId ca = cloud.labels[a];
      if (!taxonomy.instantiable(ca)) continue;
      const double thr = params.threshold(taxonomy, ca);
      for (std::size_t b = 0; b < n; ++b) {
        if (b == a || cloud.labels[b] != ca) continue;
        const double d = (cloud.point(static_cast<Eigen::Index>(a)) -
                          cloud.point(static_cast<Eigen::Index>(b))).squaredNorm();
        if (d <= thr * thr && comp[b] < comp[a]) {
          comp[a] = comp[b];
          changed = true;
        }
      }
    }
  }
  std::map<std::size_t, std::vector<Eigen::Index>> groups;
  for (std::size_t i = 0; i < n; ++i) {
    if (taxonomy.instantiable(cloud.labels[i])) groups[comp[i]].push_back(static_cast<Eigen::Index>(i));
  }
  std::vector<Instance> out;
  for (auto& [root, idx] : groups) {
    if (static_cast<int>(idx.size()) < params.min_cluster_size) continue;
    Instance inst;
    inst.label = cloud.labels[static_cast<std::size_t>(idx.front())];
    for (auto i : idx) inst.centroid += cloud.point(i);
    inst.centroid /= static_cast<double>(idx.size());
    inst.point_indices = idx;
    out.push_back(inst);
  }
  std::sort(out.begin(), out.end(), [](const Instance& a, const Instance& b) {
    if (a.label != b.label) return a.label < b.label;
    for (int k = 0; k < 3; ++k) {
      if (a.centroid(k) != b.centroid(k)) return a.centroid(k) < b.centroid(k);
    }
    return false;
  });
  for (std::size_t k = 0; k < out.size(); ++k) out[k].id = static_cast<int>(k);
  return out;
}

std::vector<std::array<int, 3>> brute_force_triangles(const std::vector<Instance>& instances, int K) {
  const std::size_t n = instances.size();
  // rank[a][b]: position of b in a's neighbor order.
  std::vector<std::vector<std::size_t>> rank(n, std::vector<std::size_t>(n, 0));
  for (std::size_t a = 0; a < n; ++a) {
    for (std::size_t b = 0; b < n; ++b) {
      if (a == b) continue;
      const double dab = (instances[a].centroid - instances[b].centroid).squaredNorm();
      std::size_t r = 0;
      for (std::size_t c = 0; c < n; ++c) {
        if (c == a || c == b) continue;
        const double dac = (instances[a].centroid - instances[c].centroid).squaredNorm();
        if (dac < dab || (dac == dab && c < b)) ++r;
      }
      rank[a][b] = r;
    }
  }
  const auto k = static_cast<std::size_t>(K);
  std::vector<std::array<int, 3>> out;
  for (std::size_t a = 0; a < n; ++a)
    for (std::size_t b = a + 1; b < n; ++b)
      for (std::size_t c = b + 1; c < n; ++c) {
        const bool covered = (rank[a][b] < k && rank[a][c] < k) ||
                             (rank[b][a] < k && rank[b][c] < k) ||
                             (rank[c][a] < k && rank[c][b] < k);
        if (!covered) continue;
        const double d0 = (instances[a].centroid - instances[b].centroid).norm();
        const double d1 = (instances[b].centroid - instances[c].centroid).norm();
        const double d2 = (instances[c].centroid - instances[a].centroid).norm();
        std::array<double, 3> s = {d0, d1, d2};
        std::sort(s.begin(), s.end());
        if (s[0] + s[1] - s[2] <= kDegeneracySlack) continue;
        std::array<int, 3> ids = {instances[a].id, instances[b].id, instances[c].id};
        std::sort(ids.begin(), ids.end());
        out.push_back(ids);
      }
  std::sort(out.begin(), out.end());
  return out;
}

std::vector<std::vector<bool>> adjacency_loop(const std::vector<Correspondence>& corrs,
                                              const std::vector<Vec3>& qc,
                                              const std::vector<Vec3>& mc, double epsilon) {
  const std::size_t n = corrs.size();
  std::vector<std::vector<bool>> adj(n, std::vector<bool>(n, false));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      if (i == j) continue;
      const auto& a = corrs[i];
      const auto& b = corrs[j];
      if (a.query_id == b.query_id || a.map_id == b.map_id) continue;
      const double dq = (qc[static_cast<std::size_t>(a.query_id)] - qc[static_cast<std::size_t>(b.query_id)]).norm();
      const double dm = (mc[static_cast<std::size_t>(a.map_id)] - mc[static_cast<std::size_t>(b.map_id)]).norm();
      adj[i][j] = std::abs(dq - dm) <= epsilon;
    }
  }
  return adj;
}

std::vector<Correspondence> merge_loop(const std::vector<TriangleMatch>& matches) {
  std::vector<Correspondence> out;
  for (const auto& m : matches) {
    for (int k = 0; k < 3; ++k) {
      auto it = std::find_if(out.begin(), out.end(), [&](const Correspondence& c) {
        return c.query_id == m.pairs[k].first && c.map_id == m.pairs[k].second;
      });
      if (it == out.end()) {
        out.push_back({m.pairs[k].first, m.pairs[k].second, m.omega[k], 1});
      } else {
        ++it->support;
        if (m.omega[k] > it->omega) it->omega = m.omega[k];
      }
    }
  }
  std::sort(out.begin(), out.end(), [](const Correspondence& a, const Correspondence& b) {
    return std::tie(a.query_id, a.map_id) < std::tie(b.query_id, b.map_id);
  });
  return out;
}

double w2_eigen_product(const MatrixX& mu1, const MatrixX& S1, const MatrixX& mu2, const MatrixX& S2) {
  const Eigen::EigenSolver<MatrixX> es(S1 * S2, false);
  double cross = 0.0;
  for (Eigen::Index i = 0; i < es.eigenvalues().size(); ++i) {
    cross += std::sqrt(std::max(0.0, es.eigenvalues()(i).real()));
  }
  const double v = (mu1 - mu2).squaredNorm() + S1.trace() + S2.trace() - 2.0 * cross;
  return std::max(0.0, v);
}

// ---------------------------------------------------------------------------
// Self-test

namespace {

using Rng = std::mt19937_64;

PointMatrix random_points(Rng& rng, Eigen::Index n, double scale) {
  std::uniform_real_distribution<double> u(-scale, scale);
  PointMatrix P(n, 3);
  for (Eigen::Index i = 0; i < n; ++i)
    for (int c = 0; c < 3; ++c) P(i, c) = u(rng);
  return P;
}

MatrixX random_matrix(Rng& rng, Eigen::Index r, Eigen::Index c) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  MatrixX M(r, c);
  for (Eigen::Index i = 0; i < r; ++i)
    for (Eigen::Index j = 0; j < c; ++j) M(i, j) = u(rng);
  return M;
}

CheckResult check_gp(Rng& rng) {
  double worst = 0.0;
  std::uniform_int_distribution<int> m(1, 20), g(1, 10), d(1, 4);
  for (int c = 0; c < 30; ++c) {
    const PointMatrix X = random_points(rng, m(rng), 3.0);
    const MatrixX Y = random_matrix(rng, X.rows(), d(rng));
    const PointMatrix Q = random_points(rng, g(rng), 4.0);
    const GaussianSemanticField f(X, Y, GpHyperParams{2.0, 0.1});
    const auto p = gsf_predict(f, Q);
    const auto o = explicit_inverse_predict(X, Y, 2.0, 0.01 + f.jitter(), Q);
    worst = std::max({worst, (p.mu - o.mu).cwiseAbs().maxCoeff(), (p.Sigma - o.Sigma).cwiseAbs().maxCoeff()});
  }
  std::ostringstream os;
  os << "max abs diff " << worst;
  return {"gp-explicit-inverse", worst <= 1e-9, os.str()};
}

CheckResult check_index(Rng& rng) {
  std::uniform_real_distribution<double> side(1.0, 20.0);
  std::uniform_int_distribution<int> lab(0, 2);
  const double delta = 0.5;
  std::vector<TriangleDescriptor> stored;
  for (int i = 0; i < 300; ++i) {
    std::array<double, 3> s = {side(rng), side(rng), side(rng)};
    std::sort(s.begin(), s.end());
    TriangleDescriptor t;
    t.sides = s;
    t.vertex_ids = {i, i + 1, i + 2};
    t.labels = {static_cast<ClassId>(lab(rng)), static_cast<ClassId>(lab(rng)),
                static_cast<ClassId>(lab(rng))};
    stored.push_back(t);
  }
  const DescriptorIndex index(stored, delta);
  std::size_t missing = 0, extra = 0;
  std::uniform_real_distribution<double> jit(-0.6, 0.6);
  for (int i = 0; i < 300; ++i) {
    TriangleDescriptor q = stored[static_cast<std::size_t>(i)];
    for (auto& s : q.sides) s += jit(rng);
    std::sort(q.sides.begin(), q.sides.end());
    const auto a = index.query(q);
    const auto b = linear_index_query(stored, q, delta);
    for (auto x : b) missing += std::find(a.begin(), a.end(), x) == a.end();
    for (auto x : a) extra += std::find(b.begin(), b.end(), x) == b.end();
  }
  return {"index-linear-scan", missing == 0 && extra == 0,
          "false negatives " + std::to_string(missing) + ", false positives " + std::to_string(extra)};
}

CheckResult check_clique(Rng& rng) {
  std::uniform_int_distribution<int> nn(1, 16);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  int mismatches = 0;
  for (int c = 0; c < 60; ++c) {
    const auto n = static_cast<std::size_t>(nn(rng));
    const double dens = (c % 3 == 0) ? 0.2 : (c % 3 == 1 ? 0.5 : 0.8);
    AdjacencyMatrix adj(n);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i + 1; j < n; ++j)
        if (u(rng) < dens) adj.set(i, j);
    std::vector<double> w(n);
    for (auto& x : w) x = std::round(u(rng) * 4.0) / 4.0 + 0.25;
    const auto g = make_graph(adj, w);
    if (max_clique(g) != brute_force_max_clique(g)) ++mismatches;
  }
  return {"clique-brute-force", mismatches == 0, std::to_string(mismatches) + " mismatches / 60"};
}

CheckResult check_kabsch(Rng& rng) {
  std::normal_distribution<double> n01(0.0, 1.0);
  double worst_t = 0.0, worst_r = 0.0;
  for (int c = 0; c < 30; ++c) {
    const Vec3 axis(n01(rng), n01(rng), n01(rng));
    const RigidTransform T{rot_axis_angle(axis, n01(rng) * 2.0), Vec3(n01(rng), n01(rng), n01(rng)) * 20.0};
    WeightedCorrespondenceSet set;
    for (int i = 0; i < 10; ++i) {
      const Vec3 q(n01(rng) * 10, n01(rng) * 10, n01(rng) * 10);
      set.add(T.apply(q), q, 0.1 + std::abs(n01(rng)));
    }
    const auto e = pose_error(weighted_kabsch(set), T);
    worst_t = std::max(worst_t, e.trans_m);
    worst_r = std::max(worst_r, e.rot_deg);
  }
  std::ostringstream os;
  os << "max trans " << worst_t << " m, max rot " << worst_r << " deg";
  return {"kabsch-recovery", worst_t <= 1e-9 && worst_r <= 1e-7, os.str()};
}

CheckResult check_w2(Rng& rng) {
  double worst = 0.0;
  for (int c = 0; c < 30; ++c) {
    const Eigen::Index G = 1 + c % 6, D = 1 + c % 3;
    const MatrixX A = random_matrix(rng, G, G), B = random_matrix(rng, G, G);
    const MatrixX S1 = A * A.transpose() + 0.1 * MatrixX::Identity(G, G);
    const MatrixX S2 = B * B.transpose() + 0.1 * MatrixX::Identity(G, G);
    const MatrixX m1 = random_matrix(rng, G, D), m2 = random_matrix(rng, G, D);
    worst = std::max(worst, std::abs(w2_squared(m1, S1, m2, S2) - w2_eigen_product(m1, S1, m2, S2)));
  }
  std::ostringstream os;
  os << "max abs diff " << worst;
  return {"w2-eigen-product", worst <= 1e-8, os.str()};
}

}  // namespace

std::vector<CheckResult> run_selftest(std::uint64_t seed) {
  Rng rng(seed);
  return {check_gp(rng), check_index(rng), check_clique(rng), check_kabsch(rng), check_w2(rng)};
}

}  // namespace gsfloc::oracle
