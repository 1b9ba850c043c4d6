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

#include <vector>

#include <Eigen/SVD>

#include "gsfloc/errors.hpp"
#include "gsfloc/types.hpp"

namespace gsfloc {

/// Pairs (target p_i, source q_i, weight w_i). Solvers estimate T with
/// p ~ R q + t.
struct WeightedCorrespondenceSet {
  std::vector<Vec3> target;
  std::vector<Vec3> source;
  std::vector<double> weight;
  double tau0 = 1.0;  ///< truncation base (m^2)

  std::size_t size() const noexcept { return target.size(); }
  void add(const Vec3& p, const Vec3& q, double w = 1.0) {
    target.push_back(p);
    source.push_back(q);
    weight.push_back(w);
  }
  void validate() const;
};

/// Lower bound on the second singular value of the weighted centered source
/// points; below it the set is treated as collinear.
inline constexpr double kCollinearTol = 1e-9;

/// Closed-form minimizer of sum w ||p - R q - t||^2 over SO(3) x R^3.
/// Operates on any scalar type; `mask` selects the participating pairs.
template <typename Scalar>
RigidTransform weighted_kabsch(const std::vector<Vec3>& target, const std::vector<Vec3>& source,
                               const std::vector<double>& weight, const std::vector<bool>* mask) {
  using V3 = Eigen::Matrix<Scalar, 3, 1>;
  using M3 = Eigen::Matrix<Scalar, 3, 3>;
  const std::size_t n = target.size();
  auto active = [&](std::size_t i) { return mask == nullptr || (*mask)[i]; };
  std::size_t count = 0;
  Scalar wsum(0);
  V3 p_bar = V3::Zero(), q_bar = V3::Zero();
  for (std::size_t i = 0; i < n; ++i) {
    if (!active(i)) continue;
    ++count;
    const Scalar w(weight[i]);
    wsum += w;
    p_bar += w * target[i].cast<Scalar>();
    q_bar += w * source[i].cast<Scalar>();
  }
  if (count < 3) throw ValidationError("weighted_kabsch needs >= 3 pairs, got " + std::to_string(count));
  p_bar /= wsum;
  q_bar /= wsum;

  M3 H = M3::Zero();
  Eigen::Matrix<Scalar, 3, Eigen::Dynamic> Qc(3, static_cast<Eigen::Index>(count));
  Eigen::Index col = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (!active(i)) continue;
    const Scalar w(weight[i]);
    const V3 dq = source[i].cast<Scalar>() - q_bar;
    const V3 dp = target[i].cast<Scalar>() - p_bar;
    H += w * dq * dp.transpose();
    Qc.col(col++) = std::sqrt(w) * dq;
  }
  const Eigen::JacobiSVD<Eigen::Matrix<Scalar, 3, Eigen::Dynamic>> qsvd(Qc);
  if (qsvd.singularValues()(1) < Scalar(kCollinearTol)) {
    throw DegenerateError("weighted_kabsch: source points are collinear (rank < 2, sigma_2 = " +
                          std::to_string(static_cast<double>(qsvd.singularValues()(1))) + ")");
  }
  const Eigen::JacobiSVD<M3> svd(H, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const M3 U = svd.matrixU();
  const M3 V = svd.matrixV();
  M3 D = M3::Identity();
  D(2, 2) = (V * U.transpose()).determinant() < Scalar(0) ? Scalar(-1) : Scalar(1);
  const M3 R = V * D * U.transpose();
  const V3 t = p_bar - R * q_bar;
  return {R.template cast<double>(), t.template cast<double>()};
}

RigidTransform weighted_kabsch(const WeightedCorrespondenceSet& set);

/// sum w ||p - R q - t||^2 over the (masked) set.
double weighted_objective(const WeightedCorrespondenceSet& set, const RigidTransform& T);

/// sum w min(||p - R q - t||^2, tau0 / w).
double truncated_objective(const WeightedCorrespondenceSet& set, const RigidTransform& T);

struct IrlsOptions {
  int max_iters = 20;
  double rel_tol = 1e-6;
  /// Cap on the candidate triples tried for initialization.
  std::size_t max_init_triples = 5000;
};

enum class IrlsStatus { kConverged, kMaxIters, kAllTruncated };

struct IrlsResult {
  RigidTransform pose;
  std::vector<bool> inliers;
  std::vector<double> objective_trace;
  IrlsStatus status = IrlsStatus::kConverged;
  int iterations = 0;

  bool ok() const noexcept { return status != IrlsStatus::kAllTruncated; }
  std::size_t inlier_count() const;
};

/// Alternates truncation (keep pairs with residual^2 <= tau0 / w) and
/// weighted_kabsch on the survivors. Initialized by the best truncated
/// objective over the all-pairs solve and minimal triples. The trace
/// holds the truncated objective after every accepted solve and never
/// increases. Throws DegenerateError if survivors are collinear.
IrlsResult robust_irls(const WeightedCorrespondenceSet& set, const IrlsOptions& opts = {});

}  // namespace gsfloc
