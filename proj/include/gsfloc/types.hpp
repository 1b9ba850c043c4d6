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

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <Eigen/Geometry>

namespace gsfloc {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using Mat34 = Eigen::Matrix<double, 3, 4>;
using PointMatrix = Eigen::Matrix<double, Eigen::Dynamic, 3, Eigen::RowMajor>;
using MatrixX = Eigen::MatrixXd;
using VectorX = Eigen::VectorXd;

using ClassId = std::uint16_t;

/// Points with per-point class labels and optional per-point class scores.
///
/// When `logits` is present it has one row per point and one column per
/// class, and `labels[i]` is the row argmax (lowest class id on ties).
struct SemanticPointCloud {
  PointMatrix points;
  std::vector<ClassId> labels;
  std::optional<MatrixX> logits;

  Eigen::Index size() const noexcept { return points.rows(); }
  bool empty() const noexcept { return points.rows() == 0; }
  Vec3 point(Eigen::Index i) const { return points.row(i).transpose(); }

  /// Throws ValidationError on any invariant violation. `num_classes` of 0
  /// skips the label range check.
  void validate(int num_classes = 0) const;

  /// Copies the rows listed in `indices`.
  SemanticPointCloud subset(const std::vector<Eigen::Index>& indices) const;
};

/// Argmax with ties broken toward the lowest index.
template <typename Derived>
Eigen::Index argmax_lowest(const Eigen::DenseBase<Derived>& row) {
  Eigen::Index best = 0;
  for (Eigen::Index j = 1; j < row.size(); ++j) {
    if (row(j) > row(best)) best = j;
  }
  return best;
}

/// Proper rigid motion x -> R x + t.
struct RigidTransform {
  Mat3 R = Mat3::Identity();
  Vec3 t = Vec3::Zero();

  static RigidTransform identity() { return {}; }
  static RigidTransform from_yaw(double yaw_rad, const Vec3& t = Vec3::Zero());
  static RigidTransform from_matrix(const Mat34& m);

  Vec3 apply(const Vec3& x) const { return R * x + t; }
  RigidTransform inverse() const { return {R.transpose(), -(R.transpose() * t)}; }
  Mat34 matrix() const;

  /// Throws ValidationError unless R is orthonormal with det 1 (within tol).
  void validate(double tol = 1e-9) const;
};

/// Composition: (a * b).apply(x) == a.apply(b.apply(x)).
inline RigidTransform operator*(const RigidTransform& a, const RigidTransform& b) {
  return {a.R * b.R, a.R * b.t + a.t};
}

Mat3 rot_z(double rad);

/// Rotation from an axis-angle pair; `axis` need not be normalized.
Mat3 rot_axis_angle(const Vec3& axis, double rad);

SemanticPointCloud transform_cloud(const SemanticPointCloud& cloud, const RigidTransform& T);

struct PoseError {
  double trans_m = 0.0;
  double rot_deg = 0.0;
};

/// Translation distance and the angle of R_gt^-1 R_est.
PoseError pose_error(const RigidTransform& est, const RigidTransform& gt);

/// Stability values of the three class groups.
struct Stability {
  static constexpr double kVolatile = 0.1;
  static constexpr double kShortTerm = 0.5;
  static constexpr double kLongTerm = 1.0;
};

struct ClassInfo {
  std::string name;
  bool instantiable = false;
  double stability = Stability::kLongTerm;
  /// Single-linkage distance for instance clustering (meters).
  double cluster_threshold = 0.5;
};

/// Class id -> properties. Ids are dense 0..D-1.
class LabelTaxonomy {
 public:
  LabelTaxonomy() = default;
  explicit LabelTaxonomy(std::vector<ClassInfo> classes);

  /// 12-class urban taxonomy used by the synthetic scenes.
  static LabelTaxonomy default_urban();

  int size() const noexcept { return static_cast<int>(classes_.size()); }
  const ClassInfo& at(ClassId id) const;
  const std::vector<ClassInfo>& classes() const noexcept { return classes_; }
  bool instantiable(ClassId id) const { return at(id).instantiable; }
  double stability(ClassId id) const { return at(id).stability; }
  std::optional<ClassId> find(const std::string& name) const;
  ClassId id_of(const std::string& name) const;

  void set_stability(ClassId id, double w);

 private:
  std::vector<ClassInfo> classes_;
};

/// Ids of the default urban taxonomy.
namespace urban {
enum : ClassId {
  kRoad = 0,
  kSidewalk,
  kBuilding,
  kFence,
  kVegetation,
  kTerrain,
  kPole,
  kTrafficSign,
  kTrunk,
  kCar,
  kTruck,
  kPerson,
  kNumClasses
};
}  // namespace urban

}  // namespace gsfloc
