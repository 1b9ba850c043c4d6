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

#include <cmath>
#include <cstring>
#include <fstream>

#include "doctest.h"

#include "gsfloc/errors.hpp"
#include "gsfloc/io.hpp"
#include "gsfloc/types.hpp"
#include "test_util.hpp"

using namespace gsfloc;
using namespace gsfloc::testing;

namespace {

SemanticPointCloud small_cloud() {
  SemanticPointCloud c;
  c.points.resize(3, 3);
  c.points << 1, 2, 3, -4, 5.5, 6, 0.25, -0.5, 9;
  c.labels = {1, 1, 2};
  return c;
}

void write_raw(const std::filesystem::path& p, const void* data, std::size_t n) {
  std::ofstream f(p, std::ios::binary);
  f.write(static_cast<const char*>(data), static_cast<std::streamsize>(n));
}

}  // namespace

TEST_CASE("synthesized logits follow the one-hot rule") {
  TempDir dir;
  const auto c = small_cloud();
  save_cloud(c, dir / "p.bin", dir / "l.bin");
  const auto loaded = load_cloud(dir / "p.bin", dir / "l.bin", std::nullopt, {3, 0.9});
  REQUIRE(loaded.logits);
  MatrixX expected(3, 3);
  expected << .05, .9, .05, .05, .9, .05, .05, .05, .9;
  CHECK((*loaded.logits - expected).cwiseAbs().maxCoeff() < 1e-15);
}

TEST_CASE("empty files load as an empty cloud") {
  TempDir dir;
  write_raw(dir / "p.bin", nullptr, 0);
  write_raw(dir / "l.bin", nullptr, 0);
  const auto c = load_cloud(dir / "p.bin", dir / "l.bin");
  CHECK(c.empty());
  CHECK(c.labels.empty());
}

TEST_CASE("label/point count mismatch is a validation error") {
  TempDir dir;
  const float pts[9] = {0, 0, 0, 1, 1, 1, 2, 2, 2};
  const std::uint32_t labels[4] = {0, 0, 0, 0};
  write_raw(dir / "p.bin", pts, sizeof pts);
  write_raw(dir / "l.bin", labels, sizeof labels);
  CHECK_THROWS_AS(load_cloud(dir / "p.bin", dir / "l.bin"), ValidationError);
}

TEST_CASE("truncated files name the file and byte counts") {
  TempDir dir;
  const float pts[4] = {0, 0, 0, 1};
  write_raw(dir / "p.bin", pts, sizeof pts);
  const std::uint32_t labels[1] = {0};
  write_raw(dir / "l.bin", labels, sizeof labels);
  try {
    load_cloud(dir / "p.bin", dir / "l.bin");
    FAIL("expected FormatError");
  } catch (const FormatError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("p.bin") != std::string::npos);
    CHECK(msg.find("16") != std::string::npos);
    CHECK(msg.find("24") != std::string::npos);
  }

  // Logits whose payload disagrees with the header.
  const float pts3[3] = {0, 0, 0};
  write_raw(dir / "p1.bin", pts3, sizeof pts3);
  std::vector<std::uint8_t> hdr = {'G', 'S', 'F', 'L', 1, 0, 0, 0, 3, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0};
  write_raw(dir / "g.gsfl", hdr.data(), hdr.size());
  CHECK_THROWS_AS(load_cloud(dir / "p1.bin", dir / "l.bin", std::filesystem::path(dir / "g.gsfl")),
                  FormatError);
}

TEST_CASE("missing file is an IO error naming the path") {
  TempDir dir;
  try {
    load_cloud(dir / "nope.bin", dir / "l.bin");
    FAIL("expected IoError");
  } catch (const IoError& e) {
    CHECK(std::string(e.what()).find("nope.bin") != std::string::npos);
  }
}

TEST_CASE("label/logit argmax mismatch reports the first offending index") {
  TempDir dir;
  auto c = small_cloud();
  MatrixX lg(3, 3);
  lg << 0, 1, 0, 0, 0, 1, 0, 0, 1;  // row 1 says class 2, label says 1
  c.logits = lg;
  c.labels = {1, 2, 2};
  save_cloud(c, dir / "p.bin", dir / "l.bin", std::filesystem::path(dir / "g.gsfl"));
  c.labels = {1, 1, 2};
  save_cloud(c, dir / "p2.bin", dir / "l2.bin");
  try {
    load_cloud(dir / "p.bin", dir / "l2.bin", std::filesystem::path(dir / "g.gsfl"), {3, 0.9});
    FAIL("expected ValidationError");
  } catch (const ValidationError& e) {
    CHECK(std::string(e.what()).find("index 1") != std::string::npos);
  }
}

TEST_CASE("load/save/load round trip is bit identical") {
  TempDir dir;
  Rng rng(3);
  SemanticPointCloud c;
  c.points = random_points(rng, 50, 30.0).cast<float>().cast<double>();
  MatrixX lg = random_matrix(rng, 50, 4).cast<float>().cast<double>();
  for (int i = 0; i < 50; ++i) c.labels.push_back(static_cast<ClassId>(argmax_lowest(lg.row(i))));
  c.logits = lg;
  save_cloud(c, dir / "p.bin", dir / "l.bin", std::filesystem::path(dir / "g.gsfl"));
  const auto a = load_cloud(dir / "p.bin", dir / "l.bin", std::filesystem::path(dir / "g.gsfl"), {4, 0.9});
  save_cloud(a, dir / "p2.bin", dir / "l2.bin", std::filesystem::path(dir / "g2.gsfl"));
  CHECK(read_bytes(dir / "p.bin") == read_bytes(dir / "p2.bin"));
  CHECK(read_bytes(dir / "l.bin") == read_bytes(dir / "l2.bin"));
  CHECK(read_bytes(dir / "g.gsfl") == read_bytes(dir / "g2.gsfl"));
  CHECK(a.points == c.points);
  CHECK(*a.logits == *c.logits);
  CHECK(a.labels == c.labels);
}

TEST_CASE("labels keep only the low 16 bits") {
  TempDir dir;
  const float pts[3] = {0, 0, 0};
  const std::uint32_t labels[1] = {0x00050003u};
  write_raw(dir / "p.bin", pts, sizeof pts);
  write_raw(dir / "l.bin", labels, sizeof labels);
  CHECK(load_cloud(dir / "p.bin", dir / "l.bin").labels[0] == 3);
}

TEST_CASE("transform_cloud examples") {
  const auto c = small_cloud();
  const auto same = transform_cloud(c, RigidTransform::identity());
  CHECK(same.points == c.points);
  CHECK(same.labels == c.labels);

  SemanticPointCloud one;
  one.points.resize(1, 3);
  one.points << 1, 0, 0;
  one.labels = {0};
  const auto r = transform_cloud(one, {rot_z(M_PI / 2), Vec3::Zero()});
  CHECK((r.point(0) - Vec3(0, 1, 0)).norm() < 1e-12);
}

TEST_CASE("transform_cloud is a group action") {
  Rng rng(11);
  SemanticPointCloud c;
  c.points = random_points(rng, 100, 10.0);
  c.labels.assign(100, 0);
  for (int trial = 0; trial < 20; ++trial) {
    const auto T1 = random_transform(rng), T2 = random_transform(rng);
    const auto a = transform_cloud(transform_cloud(c, T1), T2);
    const auto b = transform_cloud(c, T2 * T1);
    CHECK((a.points - b.points).cwiseAbs().maxCoeff() < 1e-9);
  }
}

TEST_CASE("pose_error examples") {
  const RigidTransform gt{rot_z(0.3), Vec3(1, 2, 3)};
  auto e = pose_error(gt, gt);
  CHECK(e.trans_m == 0.0);
  CHECK(e.rot_deg < 1e-12);

  RigidTransform est = gt;
  est.t += Vec3(3, 4, 0);
  e = pose_error(est, gt);
  CHECK(e.trans_m == doctest::Approx(5.0));
  CHECK(e.rot_deg == 0.0);

  est = gt;
  est.R = rot_z(10.0 * M_PI / 180.0) * gt.R;
  e = pose_error(est, gt);
  CHECK(e.trans_m == 0.0);
  CHECK(std::abs(e.rot_deg - 10.0) < 1e-9);
}

TEST_CASE("pose_error is symmetric in rotation and zero only on equality") {
  Rng rng(5);
  for (int k = 0; k < 50; ++k) {
    const auto a = random_transform(rng), b = random_transform(rng);
    CHECK(std::abs(pose_error(a, b).rot_deg - pose_error(b, a).rot_deg) < 1e-9);
    CHECK(pose_error(a, b).rot_deg > 0.0);
    CHECK(pose_error(a, a).rot_deg < 1e-9);
  }
  // Half turn stays finite under drift.
  RigidTransform flip{rot_z(M_PI), Vec3::Zero()};
  CHECK(std::abs(pose_error(flip, RigidTransform::identity()).rot_deg - 180.0) < 1e-9);
}

TEST_CASE("rigid transform validation") {
  RigidTransform T;
  CHECK_NOTHROW(T.validate());
  T.R(0, 0) = 1.1;
  CHECK_THROWS_AS(T.validate(), ValidationError);
  RigidTransform M;
  M.R = Vec3(1, 1, -1).asDiagonal();
  CHECK_THROWS_AS(M.validate(), ValidationError);
}

TEST_CASE("pose text round trip") {
  Rng rng(2);
  TempDir dir;
  std::vector<RigidTransform> poses = {random_transform(rng), random_transform(rng)};
  write_poses(dir / "poses.txt", poses);
  const auto back = read_poses(dir / "poses.txt");
  REQUIRE(back.size() == 2);
  for (int k = 0; k < 2; ++k) {
    CHECK(back[k].R == poses[k].R);
    CHECK(back[k].t == poses[k].t);
  }
  CHECK_THROWS_AS(parse_pose("1 2 3"), FormatError);
}

TEST_CASE("default taxonomy stability values") {
  const auto t = LabelTaxonomy::default_urban();
  CHECK(t.size() == 12);
  for (const auto& c : t.classes()) {
    CHECK((c.stability == 0.1 || c.stability == 0.5 || c.stability == 1.0));
  }
  CHECK(t.stability(urban::kCar) == 0.5);
  CHECK(t.stability(urban::kPole) == 1.0);
  CHECK(t.stability(urban::kPerson) == 0.1);
  CHECK(t.instantiable(urban::kPole));
  CHECK_FALSE(t.instantiable(urban::kRoad));
  auto u = t;
  u.set_stability(urban::kCar, 0.37);
  CHECK(u.stability(urban::kCar) == 0.37);
  CHECK_THROWS_AS(u.set_stability(urban::kCar, 0.0), ValidationError);
  CHECK_THROWS_AS(u.set_stability(urban::kCar, 1.5), ValidationError);
}

TEST_CASE("sha256 of a known string") {
  const std::string s = "abc";
  const std::vector<std::uint8_t> bytes(s.begin(), s.end());
  CHECK(sha256_hex(bytes) == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}
