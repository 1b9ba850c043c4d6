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

#include <cmath>
#include <cstdint>
#include <optional>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Core>

#include "gsfloc/types.hpp"

namespace gsfloc {

/// Matern kernel with smoothness fixed at 3/2.
struct GpHyperParams {
  static constexpr double kNu = 1.5;
  double kappa = 2.0;    ///< length scale (m)
  double sigma_y = 0.1;  ///< observation noise std

  void validate() const;
};

/// (1 + s) exp(-s), s = sqrt(3) d / kappa.
template <typename Scalar>
Scalar matern32_from_distance(Scalar d, Scalar kappa) {
  const Scalar s = std::sqrt(Scalar(3)) * d / kappa;
  return (Scalar(1) + s) * std::exp(-s);
}

template <typename DerivedA, typename DerivedB>
typename DerivedA::Scalar matern32(const Eigen::MatrixBase<DerivedA>& a,
                                   const Eigen::MatrixBase<DerivedB>& b,
                                   typename DerivedA::Scalar kappa) {
  return matern32_from_distance((a - b).norm(), kappa);
}

/// Cross-covariance between the rows of A (n x 3) and B (m x 3).
template <typename DerivedA, typename DerivedB>
Eigen::Matrix<typename DerivedA::Scalar, Eigen::Dynamic, Eigen::Dynamic> matern32_matrix(
    const Eigen::MatrixBase<DerivedA>& A, const Eigen::MatrixBase<DerivedB>& B,
    typename DerivedA::Scalar kappa) {
  using Scalar = typename DerivedA::Scalar;
  Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> K(A.rows(), B.rows());
  for (Eigen::Index j = 0; j < B.rows(); ++j) {
    for (Eigen::Index i = 0; i < A.rows(); ++i) {
      K(i, j) = matern32_from_distance((A.row(i) - B.row(j)).norm(), kappa);
    }
  }
  return K;
}

// ---------------------------------------------------------------------------
// Sparsification

/// Class-proportional subsampling. Class c keeps round(n_c / M * N) points
/// (capped at n_c), drawn uniformly without replacement. Returned indices
/// are ascending.
std::vector<Eigen::Index> semantic_sparsify(const std::vector<ClassId>& labels, int budget,
                                            std::uint64_t seed);

/// Plain uniform subsampling of `budget` indices (ascending). Baseline for
/// the sparsification ablation.
std::vector<Eigen::Index> random_sparsify(Eigen::Index count, int budget, std::uint64_t seed);

// ---------------------------------------------------------------------------
// Field

struct GsfFitOptions {
  GpHyperParams hyper;
  int budget = 256;
  std::uint64_t seed = 0;
  /// Train on softmax(logits) instead of raw logits.
  bool softmax = false;
};

/// Zero-mean GP over local 3D coordinates with D independent output
/// channels sharing one kernel matrix.
class GaussianSemanticField {
 public:
  GaussianSemanticField() = default;

  /// Factorizes K = k(X,X) + sigma_y^2 I. On failure, jitter starting at
  /// 1e-8 is doubled up to 1e-2 before throwing FitError.
  GaussianSemanticField(PointMatrix X, MatrixX Y, GpHyperParams hyper);

  const PointMatrix& inputs() const noexcept { return X_; }
  const MatrixX& targets() const noexcept { return Y_; }
  const GpHyperParams& hyper() const noexcept { return hyper_; }
  /// Diagonal jitter added on top of sigma_y^2 (0 if none was needed).
  double jitter() const noexcept { return jitter_; }
  Eigen::Index support_size() const noexcept { return X_.rows(); }
  Eigen::Index output_dim() const noexcept { return Y_.cols(); }

  /// Regularized training covariance k(X,X) + (sigma_y^2 + jitter) I.
  MatrixX regularized_kernel() const;
  const Eigen::LLT<MatrixX>& factor() const noexcept { return llt_; }

  /// K^-1 Y, cached at construction.
  const MatrixX& weights() const noexcept { return alpha_; }

  MatrixX predict_mean(const PointMatrix& Q) const;

 private:
  PointMatrix X_;
  MatrixX Y_;
  GpHyperParams hyper_;
  double jitter_ = 0.0;
  Eigen::LLT<MatrixX> llt_;
  MatrixX alpha_;  // K^-1 Y
};

/// Sparsifies, optionally softmaxes, and fits.
GaussianSemanticField fit_gsf(const PointMatrix& X_local, const MatrixX& logits,
                              const std::vector<ClassId>& labels, const GsfFitOptions& opts);

struct GsfPrediction {
  MatrixX mu;     ///< G x D
  MatrixX Sigma;  ///< G x G, symmetrized
};

GsfPrediction gsf_predict(const GaussianSemanticField& field, const PointMatrix& Q);

// ---------------------------------------------------------------------------
// Grid probing

enum class ZMode {
  kLocalZero,  ///< probe plane at the centroid height
  kOffset,     ///< probe plane at centroid height + z_offset
};

struct GridSpec {
  int nx = 5;
  int ny = 5;
  double dx = 2.5;
  double dy = 2.5;
  ZMode z_mode = ZMode::kLocalZero;
  double z_offset = 0.0;

  int size() const noexcept { return nx * ny; }
  void validate() const;
};

/// Finite Gaussian obtained by evaluating a field on a probe grid.
struct GpPopulation {
  PointMatrix grid;          ///< G x 3 probe locations (local frame)
  MatrixX mu;                ///< G x D
  MatrixX Sigma;             ///< G x G
  VectorX stability_weights; ///< G, in (0,1]
};

/// Probe locations centered on `center`, x index fastest, rotated about the
/// vertical axis through `center` by `yaw`.
PointMatrix probe_grid(const GridSpec& spec, const Vec3& center = Vec3::Zero(), double yaw = 0.0);

GpPopulation grid_probe(const GaussianSemanticField& field, const GridSpec& spec,
                        const LabelTaxonomy& taxonomy, const Vec3& center = Vec3::Zero(),
                        double yaw = 0.0);

// ---------------------------------------------------------------------------
// Stability and evaluation

/// diag(w)^1/2 Sigma diag(w)^1/2. Throws ValidationError on a weight <= 0.
MatrixX apply_stability_mask(const MatrixX& Sigma, const VectorX& weights);

/// Mean IoU over the classes present in prediction or truth.
double mean_iou(const std::vector<ClassId>& predicted, const std::vector<ClassId>& truth);

/// mIoU of argmax-mean predictions at held-out points.
double reconstruction_miou(const GaussianSemanticField& field, const PointMatrix& heldout_points,
                           const std::vector<ClassId>& heldout_labels);

/// Row-wise softmax.
MatrixX softmax_rows(const MatrixX& logits);

}  // namespace gsfloc
