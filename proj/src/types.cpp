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

#include "gsfloc/types.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "gsfloc/errors.hpp"

namespace gsfloc {

void SemanticPointCloud::validate(int num_classes) const {
  const auto n = points.rows();
  if (static_cast<Eigen::Index>(labels.size()) != n) {
    std::ostringstream os;
    os << "cloud has " << n << " points but " << labels.size() << " labels";
    throw ValidationError(os.str());
  }
  if (num_classes > 0) {
    for (std::size_t i = 0; i < labels.size(); ++i) {
      if (labels[i] >= num_classes) {
        std::ostringstream os;
        os << "label " << labels[i] << " at index " << i << " outside taxonomy of "
           << num_classes << " classes";
        throw ValidationError(os.str());
      }
    }
  }
  if (!logits) return;
  if (logits->rows() != n) {
    std::ostringstream os;
    os << "logits have " << logits->rows() << " rows, expected " << n;
    throw ValidationError(os.str());
  }
  if (num_classes > 0 && logits->cols() != num_classes) {
    std::ostringstream os;
    os << "logits have " << logits->cols() << " columns, expected " << num_classes;
    throw ValidationError(os.str());
  }
  for (Eigen::Index i = 0; i < n; ++i) {
    if (!logits->row(i).allFinite()) {
      std::ostringstream os;
      os << "non-finite logits at index " << i;
      throw ValidationError(os.str());
    }
    if (argmax_lowest(logits->row(i)) != labels[i]) {
      std::ostringstream os;
      os << "label/logit argmax mismatch at index " << i << ": label " << labels[i]
         << ", argmax " << argmax_lowest(logits->row(i));
      throw ValidationError(os.str());
    }
  }
}

SemanticPointCloud SemanticPointCloud::subset(const std::vector<Eigen::Index>& indices) const {
  SemanticPointCloud out;
  const auto m = static_cast<Eigen::Index>(indices.size());
  out.points.resize(m, 3);
  out.labels.resize(indices.size());
  if (logits) out.logits = MatrixX(m, logits->cols());
  for (Eigen::Index k = 0; k < m; ++k) {
    const auto i = indices[k];
    out.points.row(k) = points.row(i);
    out.labels[k] = labels[i];
    if (logits) out.logits->row(k) = logits->row(i);
  }
  return out;
}

Mat3 rot_z(double rad) {
  return Eigen::AngleAxisd(rad, Vec3::UnitZ()).toRotationMatrix();
}

Mat3 rot_axis_angle(const Vec3& axis, double rad) {
  return Eigen::AngleAxisd(rad, axis.normalized()).toRotationMatrix();
}

RigidTransform RigidTransform::from_yaw(double yaw_rad, const Vec3& t) {
  return {rot_z(yaw_rad), t};
}

RigidTransform RigidTransform::from_matrix(const Mat34& m) {
  return {m.leftCols<3>(), m.col(3)};
}

Mat34 RigidTransform::matrix() const {
  Mat34 m;
  m.leftCols<3>() = R;
  m.col(3) = t;
  return m;
}

void RigidTransform::validate(double tol) const {
  const double ortho = (R.transpose() * R - Mat3::Identity()).norm();
  const double det = R.determinant();
  if (!(ortho <= tol) || !(std::abs(det - 1.0) <= tol) || !t.allFinite()) {
    std::ostringstream os;
    os << "not a proper rotation: |R^T R - I| = " << ortho << ", det = " << det;
    throw ValidationError(os.str());
  }
}

SemanticPointCloud transform_cloud(const SemanticPointCloud& cloud, const RigidTransform& T) {
  SemanticPointCloud out = cloud;
  out.points = (cloud.points * T.R.transpose()).rowwise() + T.t.transpose();
  return out;
}

PoseError pose_error(const RigidTransform& est, const RigidTransform& gt) {
  const Mat3 dR = gt.R.transpose() * est.R;
  const double c = (dR.trace() - 1.0) / 2.0;
  const Vec3 axis(dR(2, 1) - dR(1, 2), dR(0, 2) - dR(2, 0), dR(1, 0) - dR(0, 1));
  return {(est.t - gt.t).norm(), std::atan2(0.5 * axis.norm(), c) * 180.0 / M_PI};
}

LabelTaxonomy::LabelTaxonomy(std::vector<ClassInfo> classes) : classes_(std::move(classes)) {
  for (std::size_t i = 0; i < classes_.size(); ++i) {
    const double w = classes_[i].stability;
    if (!(w > 0.0 && w <= 1.0)) {
      throw ValidationError("stability of class '" + classes_[i].name + "' must lie in (0,1]");
    }
    if (!(classes_[i].cluster_threshold > 0.0)) {
      throw ValidationError("cluster threshold of class '" + classes_[i].name + "' must be > 0");
    }
  }
  if (classes_.size() > 0xFFFF) throw ValidationError("taxonomy exceeds 16-bit class ids");
}

LabelTaxonomy LabelTaxonomy::default_urban() {
  using S = Stability;
  return LabelTaxonomy({
      {"road", false, S::kLongTerm, 0.5},
      {"sidewalk", false, S::kLongTerm, 0.5},
      {"building", false, S::kLongTerm, 0.5},
      {"fence", false, S::kLongTerm, 0.5},
      {"vegetation", false, S::kShortTerm, 1.0},
      {"terrain", false, S::kShortTerm, 0.5},
      {"pole", true, S::kLongTerm, 0.5},
      {"traffic-sign", true, S::kLongTerm, 0.5},
      {"trunk", true, S::kShortTerm, 0.5},
      {"car", true, S::kShortTerm, 1.0},
      {"truck", false, S::kVolatile, 1.0},
      {"person", false, S::kVolatile, 0.5},
  });
}

const ClassInfo& LabelTaxonomy::at(ClassId id) const {
  if (id >= classes_.size()) {
    throw ValidationError("class id " + std::to_string(id) + " outside taxonomy");
  }
  return classes_[id];
}

std::optional<ClassId> LabelTaxonomy::find(const std::string& name) const {
  for (std::size_t i = 0; i < classes_.size(); ++i) {
    if (classes_[i].name == name) return static_cast<ClassId>(i);
  }
  return std::nullopt;
}

ClassId LabelTaxonomy::id_of(const std::string& name) const {
  if (auto id = find(name)) return *id;
  throw ValidationError("unknown class '" + name + "'");
}

void LabelTaxonomy::set_stability(ClassId id, double w) {
  if (!(w > 0.0 && w <= 1.0)) throw ValidationError("stability must lie in (0,1]");
  classes_.at(id).stability = w;
}

}  // namespace gsfloc
