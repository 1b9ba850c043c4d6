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

#include <string>
#include <vector>

#include "gsfloc/descriptors.hpp"
#include "gsfloc/gsf.hpp"
#include "gsfloc/matching.hpp"
#include "gsfloc/scene_graph.hpp"
#include "gsfloc/types.hpp"

// Slow, direct reference implementations. Used by the test suites and the
// `selftest` subcommand to cross-check the production code paths.
namespace gsfloc::oracle {

/// Kernel matrix by a double loop over explicit distances.
MatrixX kernel_loop(const PointMatrix& A, const PointMatrix& B, double kappa);

/// GP posterior through an explicit inverse of k(X,X) + (sigma_y^2 + jitter) I.
GsfPrediction explicit_inverse_predict(const PointMatrix& X, const MatrixX& Y, double kappa,
                                       double noise_var, const PointMatrix& Q);

/// Linear scan radius query.
std::vector<Eigen::Index> linear_radius(const PointMatrix& points, const Vec3& center, double r);

/// Linear scan over descriptors: per-side tolerance delta and equal label
/// multisets (sorted comparison).
std::vector<std::size_t> linear_index_query(const std::vector<TriangleDescriptor>& stored,
                                            const TriangleDescriptor& q, double delta);

/// O(n^2) single-linkage clustering with the same ordering rules.
std::vector<Instance> brute_force_clusters(const SemanticPointCloud& cloud,
                                           const LabelTaxonomy& taxonomy, const ClusterParams& params);

/// Enumerates every triple and keeps those with a vertex whose K nearest
/// neighbors (ties toward lower index) contain the other two.
std::vector<std::array<int, 3>> brute_force_triangles(const std::vector<Instance>& instances, int K);

/// Consistency adjacency by a plain double loop.
std::vector<std::vector<bool>> adjacency_loop(const std::vector<Correspondence>& corrs,
                                              const std::vector<Vec3>& qc,
                                              const std::vector<Vec3>& mc, double epsilon);

/// Correspondence merge by linear search.
std::vector<Correspondence> merge_loop(const std::vector<TriangleMatch>& matches);

/// W2^2 with the cross term from the eigenvalues of S1 S2.
double w2_eigen_product(const MatrixX& mu1, const MatrixX& S1, const MatrixX& mu2, const MatrixX& S2);

struct CheckResult {
  std::string name;
  bool passed = false;
  std::string detail;
};

/// Randomized oracle-equivalence suites at reduced sizes.
std::vector<CheckResult> run_selftest(std::uint64_t seed);

}  // namespace gsfloc::oracle
