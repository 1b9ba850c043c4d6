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

#include <algorithm>
#include <cmath>
#include <optional>

#include <Eigen/Core>
#include <Eigen/Eigenvalues>

#include "gsfloc/errors.hpp"
#include "gsfloc/gsf.hpp"

namespace gsfloc {

template <typename Scalar>
using DenseMatrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

namespace detail {

template <typename Derived>
void require_symmetric(const Eigen::MatrixBase<Derived>& S, double tol) {
  if (S.rows() != S.cols()) throw ValidationError("matrix is not square");
  const double scale = std::max(1.0, static_cast<double>(S.cwiseAbs().maxCoeff()));
  const double asym = static_cast<double>((S - S.transpose()).cwiseAbs().maxCoeff());
  if (asym > tol * scale) throw ValidationError("matrix is not symmetric");
}

}  // namespace detail

/// Principal square root of a symmetric PSD matrix. Negative eigenvalues
/// from round-off are clamped to zero.
template <typename Derived>
DenseMatrix<typename Derived::Scalar> psd_sqrt(const Eigen::MatrixBase<Derived>& S,
                                               double sym_tol = 1e-8) {
  using Scalar = typename Derived::Scalar;
  detail::require_symmetric(S, sym_tol);
  if (S.rows() == 0) return DenseMatrix<Scalar>();
  const DenseMatrix<Scalar> sym = (S + S.transpose()) / Scalar(2);
  Eigen::SelfAdjointEigenSolver<DenseMatrix<Scalar>> es(sym);
  const auto roots = es.eigenvalues().cwiseMax(Scalar(0)).cwiseSqrt();
  return es.eigenvectors() * roots.asDiagonal() * es.eigenvectors().transpose();
}

/// Tr((A^1/2 B A^1/2)^1/2) given A^1/2.
template <typename DA, typename DB>
typename DA::Scalar sqrt_product_trace(const Eigen::MatrixBase<DA>& A_sqrt,
                                       const Eigen::MatrixBase<DB>& B) {
  using Scalar = typename DA::Scalar;
  DenseMatrix<Scalar> M = A_sqrt * B * A_sqrt;
  M = (M + M.transpose()) / Scalar(2);
  Eigen::SelfAdjointEigenSolver<DenseMatrix<Scalar>> es(M, Eigen::EigenvaluesOnly);
  return es.eigenvalues().cwiseMax(Scalar(0)).cwiseSqrt().sum();
}

/// Squared 2-Wasserstein distance between N(mu1 (flattened), I (x) S1) style
/// populations: ||mu1 - mu2||_F^2 + Tr(S1 + S2) - 2 Tr((S1^1/2 S2 S1^1/2)^1/2),
/// clamped at zero.
template <typename DM1, typename DS1, typename DM2, typename DS2>
typename DM1::Scalar w2_squared(const Eigen::MatrixBase<DM1>& mu1, const Eigen::MatrixBase<DS1>& S1,
                                const Eigen::MatrixBase<DM2>& mu2, const Eigen::MatrixBase<DS2>& S2) {
  using Scalar = typename DM1::Scalar;
  if (mu1.rows() != mu2.rows() || mu1.cols() != mu2.cols() || S1.rows() != S2.rows() ||
      S1.cols() != S2.cols() || S1.rows() != mu1.rows()) {
    throw ValidationError("w2_squared: population shape mismatch");
  }
  const DenseMatrix<Scalar> S1_sqrt = psd_sqrt(S1);
  const Scalar mean_term = (mu1 - mu2).squaredNorm();
  const Scalar cov_term = S1.trace() + S2.trace() - Scalar(2) * sqrt_product_trace(S1_sqrt, S2);
  return std::max(Scalar(0), mean_term + cov_term);
}

/// Population with precomputed covariance root; reused across many pairings.
struct PreparedPopulation {
  MatrixX mu;
  MatrixX cov;       ///< Sigma, or W^1/2 Sigma W^1/2 when stability-weighted
  MatrixX cov_sqrt;
  VectorX weights;   ///< stability weights (all ones when unweighted)
  bool weighted = false;
};

PreparedPopulation prepare_population(const GpPopulation& pop, bool use_stability);

/// W2^2 between prepared populations. With stability weighting, the squared
/// mean differences at grid point i are scaled by sqrt(wA_i wB_i).
double w2_squared(const PreparedPopulation& a, const PreparedPopulation& b);

double w2_squared(const GpPopulation& a, const GpPopulation& b, bool use_stability);

struct SimilarityConfig {
  /// Scale of the squared distance in the confidence mapping.
  double sigma_w = 1.0;
  /// Per-vertex W2^2 acceptance level for GSF filtering.
  double accept_threshold = 1.0;

  void validate() const;
};

/// exp(-w2sq / (2 sigma_w^2)), floored at the smallest positive double.
double similarity_weight(double w2sq, const SimilarityConfig& cfg);

}  // namespace gsfloc
