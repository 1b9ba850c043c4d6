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

#include <algorithm>

#include "doctest.h"

#include "gsfloc/pose_solver.hpp"
#include "test_util.hpp"

using namespace gsfloc;
using namespace gsfloc::testing;

namespace {

WeightedCorrespondenceSet random_set(Rng& rng, const RigidTransform& T, int n, double noise = 0.0) {
  WeightedCorrespondenceSet s;
  std::normal_distribution<double> nd(0.0, 1.0);
  for (int i = 0; i < n; ++i) {
    const Vec3 q = random_vec(rng, 10.0);
    s.add(T.apply(q) + noise * Vec3(nd(rng), nd(rng), nd(rng)), q, uniform(rng, 0.1, 1.0));
  }
  return s;
}

double rot_dist(const RigidTransform& a, const RigidTransform& b) { return pose_error(a, b).rot_deg; }

}  // namespace

TEST_CASE("identity correspondences give identity") {
  Rng rng(1);
  auto s = random_set(rng, RigidTransform::identity(), 10);
  const auto T = weighted_kabsch(s);
  CHECK((T.R - Mat3::Identity()).cwiseAbs().maxCoeff() < 1e-12);
  CHECK(T.t.norm() < 1e-12);
}

TEST_CASE("noiseless recovery of random transforms") {
  Rng rng(2);
  for (int t = 0; t < 100; ++t) {
    const auto T = random_transform(rng);
    const auto s = random_set(rng, T, 3 + t % 20);
    const auto e = pose_error(weighted_kabsch(s), T);
    CHECK(e.trans_m <= 1e-9);
    CHECK(e.rot_deg <= 1e-7);
  }
}

TEST_CASE("duplicating a pair equals doubling its weight") {
  Rng rng(3);
  const auto T = random_transform(rng);
  auto s = random_set(rng, T, 8, 0.1);
  auto dup = s;
  dup.add(s.target[2], s.source[2], s.weight[2]);
  auto dbl = s;
  dbl.weight[2] *= 2;
  const auto a = weighted_kabsch(dup), b = weighted_kabsch(dbl);
  CHECK((a.R - b.R).cwiseAbs().maxCoeff() < 1e-12);
  CHECK((a.t - b.t).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("closed form beats random perturbations") {
  Rng rng(4);
  const auto T = random_transform(rng);
  const auto s = random_set(rng, T, 15, 0.3);
  const auto best = weighted_kabsch(s);
  const double f0 = weighted_objective(s, best);
  std::normal_distribution<double> nd(0.0, 1.0);
  for (int k = 0; k < 1000; ++k) {
    const double scale = std::pow(10.0, uniform(rng, -4, 0));
    RigidTransform P{rot_axis_angle(Vec3(nd(rng), nd(rng), nd(rng)), scale * nd(rng)) * best.R,
                     best.t + scale * Vec3(nd(rng), nd(rng), nd(rng))};
    CHECK(weighted_objective(s, P) >= f0 - 1e-12 * std::max(1.0, f0));
  }
}

TEST_CASE("equivariance and weight scaling") {
  Rng rng(5);
  for (int t = 0; t < 30; ++t) {
    const auto T = random_transform(rng);
    const auto s = random_set(rng, T, 10, 0.2);
    const auto base = weighted_kabsch(s);
    const auto G = random_transform(rng);
    auto moved = s;
    for (auto& p : moved.target) p = G.apply(p);
    const auto a = weighted_kabsch(moved), b = G * base;
    CHECK((a.R - b.R).cwiseAbs().maxCoeff() < 1e-9);
    CHECK((a.t - b.t).cwiseAbs().maxCoeff() < 1e-9);

    auto scaled = s;
    for (auto& w : scaled.weight) w *= 7.3;
    const auto c = weighted_kabsch(scaled);
    CHECK((c.R - base.R).cwiseAbs().maxCoeff() < 1e-12);
    CHECK((c.t - base.t).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("degenerate and undersized sets") {
  WeightedCorrespondenceSet s;
  s.add({0, 0, 0}, {0, 0, 0});
  s.add({1, 0, 0}, {1, 0, 0});
  CHECK_THROWS_AS(weighted_kabsch(s), ValidationError);
  s.add({2, 0, 0}, {2, 0, 0});
  s.add({3, 0, 0}, {3, 0, 0});
  CHECK_THROWS_AS(weighted_kabsch(s), DegenerateError);
  try {
    weighted_kabsch(s);
  } catch (const DegenerateError& e) {
    CHECK(std::string(e.what()).find("rank") != std::string::npos);
  }
}

TEST_CASE("IRLS on clean data matches Kabsch") {
  Rng rng(6);
  const auto T = random_transform(rng);
  const auto s = random_set(rng, T, 12);
  const auto r = robust_irls(s);
  REQUIRE(r.ok());
  CHECK(std::all_of(r.inliers.begin(), r.inliers.end(), [](bool b) { return b; }));
  const auto k = weighted_kabsch(s);
  CHECK((r.pose.R - k.R).cwiseAbs().maxCoeff() < 1e-12);
  CHECK((r.pose.t - k.t).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("IRLS with unbounded truncation equals Kabsch exactly") {
  Rng rng(7);
  for (int t = 0; t < 20; ++t) {
    auto s = random_set(rng, random_transform(rng), 15, 2.0);
    s.tau0 = std::numeric_limits<double>::infinity();
    const auto r = robust_irls(s);
    const auto k = weighted_kabsch(s);
    CHECK(r.pose.R == k.R);
    CHECK(r.pose.t == k.t);
  }
}

TEST_CASE("IRLS with 40 percent outliers") {
  int passes = 0;
  const int seeds = 50;
  for (int seed = 0; seed < seeds; ++seed) {
    Rng rng(1000 + seed);
    const auto T = random_transform(rng);
    WeightedCorrespondenceSet s;
    s.tau0 = 1.0;
    std::normal_distribution<double> nd(0.0, 0.01);
    for (int i = 0; i < 18; ++i) {
      const Vec3 q = random_vec(rng, 10.0);
      s.add(T.apply(q) + Vec3(nd(rng), nd(rng), nd(rng)), q, 1.0);
    }
    for (int i = 0; i < 12; ++i) s.add(random_vec(rng, 30.0), random_vec(rng, 10.0), 1.0);
    const auto r = robust_irls(s);
    for (std::size_t k = 1; k < r.objective_trace.size(); ++k)
      CHECK(r.objective_trace[k] <= r.objective_trace[k - 1]);
    const auto e = pose_error(r.pose, T);
    bool mask_ok = r.ok();
    for (int i = 0; i < 18 && mask_ok; ++i) mask_ok = r.inliers[i];
    if (mask_ok && e.trans_m <= 0.05 && e.rot_deg <= 0.5) ++passes;
  }
  CHECK(passes >= 48);
}

TEST_CASE("all pairs truncated") {
  WeightedCorrespondenceSet s;
  s.tau0 = 1e-12;
  Rng rng(8);
  for (int i = 0; i < 6; ++i) s.add(random_vec(rng, 50.0), random_vec(rng, 50.0), 1.0);
  const auto r = robust_irls(s);
  if (!r.ok()) {
    CHECK(r.inlier_count() == 0);
    CHECK(r.pose.R.allFinite());
  } else {
    CHECK(r.inlier_count() >= 3);
  }
}

TEST_CASE("truncated objective") {
  WeightedCorrespondenceSet s;
  s.tau0 = 1.0;
  s.add({0, 0, 0}, {0, 0, 0}, 0.5);
  s.add({3, 0, 0}, {0, 0, 0}, 0.5);
  // 0.5 * 0 + 0.5 * min(9, 2)
  CHECK(truncated_objective(s, RigidTransform::identity()) == 1.0);
}
