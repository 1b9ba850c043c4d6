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

#include "gsfloc/pose_solver.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <random>

namespace gsfloc {

void WeightedCorrespondenceSet::validate() const {
  if (source.size() != target.size() || weight.size() != target.size()) {
    throw ValidationError("correspondence set: target/source/weight sizes differ");
  }
  if (target.size() < 3) {
    throw ValidationError("correspondence set needs >= 3 pairs, got " + std::to_string(target.size()));
  }
  for (double w : weight) {
    if (!(w > 0.0)) throw ValidationError("correspondence weights must be positive");
  }
  if (!(tau0 > 0.0)) throw ValidationError("tau0 must be positive");
}

RigidTransform weighted_kabsch(const WeightedCorrespondenceSet& set) {
  set.validate();
  return weighted_kabsch<double>(set.target, set.source, set.weight, nullptr);
}

double weighted_objective(const WeightedCorrespondenceSet& set, const RigidTransform& T) {
  double f = 0.0;
  for (std::size_t i = 0; i < set.size(); ++i) {
    f += set.weight[i] * (set.target[i] - T.apply(set.source[i])).squaredNorm();
  }
  return f;
}

double truncated_objective(const WeightedCorrespondenceSet& set, const RigidTransform& T) {
  double f = 0.0;
  for (std::size_t i = 0; i < set.size(); ++i) {
    const double r2 = (set.target[i] - T.apply(set.source[i])).squaredNorm();
    f += set.weight[i] * std::min(r2, set.tau0 / set.weight[i]);
  }
  return f;
}

std::size_t IrlsResult::inlier_count() const {
  return static_cast<std::size_t>(std::count(inliers.begin(), inliers.end(), true));
}

namespace {

std::vector<bool> truncation_mask(const WeightedCorrespondenceSet& set, const RigidTransform& T) {
  std::vector<bool> mask(set.size());
  for (std::size_t i = 0; i < set.size(); ++i) {
    const double r2 = (set.target[i] - T.apply(set.source[i])).squaredNorm();
    mask[i] = r2 <= set.tau0 / set.weight[i];
  }
  return mask;
}

std::size_t count_true(const std::vector<bool>& m) {
  return static_cast<std::size_t>(std::count(m.begin(), m.end(), true));
}

// Best truncated objective over the all-pairs solve and minimal triples.
std::optional<RigidTransform> initial_pose(const WeightedCorrespondenceSet& set,
                                           std::size_t max_triples) {
  std::optional<RigidTransform> best;
  double best_f = std::numeric_limits<double>::infinity();
  auto consider = [&](const std::vector<bool>* mask) {
    try {
      const auto T = weighted_kabsch<double>(set.target, set.source, set.weight, mask);
      const double f = truncated_objective(set, T);
      if (!best || f < best_f) {
        best = T;
        best_f = f;
      }
    } catch (const DegenerateError&) {
    }
  };
  consider(nullptr);

  const std::size_t n = set.size();
  const std::size_t total = n * (n - 1) * (n - 2) / 6;
  std::vector<bool> mask(n, false);
  auto try_triple = [&](std::size_t a, std::size_t b, std::size_t c) {
    mask[a] = mask[b] = mask[c] = true;
    consider(&mask);
    mask[a] = mask[b] = mask[c] = false;
  };
  if (total <= max_triples) {
    for (std::size_t a = 0; a < n; ++a)
      for (std::size_t b = a + 1; b < n; ++b)
        for (std::size_t c = b + 1; c < n; ++c) try_triple(a, b, c);
  } else {
    std::mt19937_64 rng(0x5eed);
    std::uniform_int_distribution<std::size_t> pick(0, n - 1);
    for (std::size_t k = 0; k < max_triples; ++k) {
      const std::size_t a = pick(rng), b = pick(rng), c = pick(rng);
      if (a == b || b == c || a == c) continue;
      try_triple(a, b, c);
    }
  }
  return best;
}

}  // namespace

IrlsResult robust_irls(const WeightedCorrespondenceSet& set, const IrlsOptions& opts) {
  set.validate();
  if (opts.max_iters < 1) throw ValidationError("max_iters must be >= 1");
  IrlsResult res;
  auto init = initial_pose(set, opts.max_init_triples);
  if (!init) throw DegenerateError("robust_irls: every candidate subset is collinear");
  RigidTransform pose = *init;
  res.status = IrlsStatus::kMaxIters;

  for (int it = 0; it < opts.max_iters; ++it) {
    const auto mask = truncation_mask(set, pose);
    if (count_true(mask) == 0) {
      res.pose = pose;
      res.inliers.assign(set.size(), false);
      res.status = IrlsStatus::kAllTruncated;
      return res;
    }
    if (count_true(mask) < 3) {
      throw DegenerateError("robust_irls: only " + std::to_string(count_true(mask)) +
                            " pairs survive truncation");
    }
    const auto next = weighted_kabsch<double>(set.target, set.source, set.weight, &mask);
    const double f = truncated_objective(set, next);
    res.iterations = it + 1;
    if (!res.objective_trace.empty() && f > res.objective_trace.back()) {
      res.status = IrlsStatus::kConverged;
      break;
    }
    pose = next;
    res.objective_trace.push_back(f);
    if (res.objective_trace.size() >= 2) {
      const double prev = res.objective_trace[res.objective_trace.size() - 2];
      if (std::abs(prev - f) <= opts.rel_tol * std::max(prev, std::numeric_limits<double>::min())) {
        res.status = IrlsStatus::kConverged;
        break;
      }
    }
  }
  res.pose = pose;
  res.inliers = truncation_mask(set, pose);
  if (count_true(res.inliers) == 0) res.status = IrlsStatus::kAllTruncated;
  return res;
}

}  // namespace gsfloc
