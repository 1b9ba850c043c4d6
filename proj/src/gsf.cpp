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

#include "gsfloc/gsf.hpp"

#include <algorithm>
#include <map>
#include <random>
#include <set>
#include <sstream>

#include <Eigen/Eigenvalues>

#include "gsfloc/errors.hpp"

namespace gsfloc {

namespace {

constexpr double kJitterStart = 1e-8;
constexpr double kJitterMax = 1e-2;
// Relative floor on squared Cholesky pivots; smaller pivots mean K is
// numerically singular even if LLT reported success.
constexpr double kPivotFloor = 1e-13;

// Draws `k` distinct entries of `pool` (partial Fisher-Yates).
void draw_without_replacement(std::vector<Eigen::Index>& pool, std::size_t k, std::mt19937_64& rng,
                              std::vector<Eigen::Index>& out) {
  k = std::min(k, pool.size());
  for (std::size_t i = 0; i < k; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, pool.size() - 1);
    std::swap(pool[i], pool[pick(rng)]);
    out.push_back(pool[i]);
  }
}

}  // namespace

void GpHyperParams::validate() const {
  if (!(kappa > 0.0)) throw ValidationError("gsf.kappa must be > 0");
  if (!(sigma_y >= 0.0)) throw ValidationError("gsf.sigma_y must be >= 0");
}

void GridSpec::validate() const {
  if (nx < 1 || ny < 1) throw ValidationError("grid nx, ny must be >= 1");
  if (!(dx > 0.0) || !(dy > 0.0)) throw ValidationError("grid dx, dy must be > 0");
}

std::vector<Eigen::Index> semantic_sparsify(const std::vector<ClassId>& labels, int budget,
                                            std::uint64_t seed) {
  if (budget < 1) throw ValidationError("sparsification budget must be >= 1");
  const double m = static_cast<double>(labels.size());
  std::map<ClassId, std::vector<Eigen::Index>> by_class;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    by_class[labels[i]].push_back(static_cast<Eigen::Index>(i));
  }
  std::mt19937_64 rng(seed);
  std::vector<Eigen::Index> keep;
  for (auto& [cls, pool] : by_class) {
    const double proportion = static_cast<double>(pool.size()) / m;
    const auto n_c = static_cast<std::size_t>(std::llround(proportion * budget));
    draw_without_replacement(pool, n_c, rng, keep);
  }
  std::sort(keep.begin(), keep.end());
  return keep;
}

std::vector<Eigen::Index> random_sparsify(Eigen::Index count, int budget, std::uint64_t seed) {
  if (budget < 1) throw ValidationError("sparsification budget must be >= 1");
  std::vector<Eigen::Index> pool(static_cast<std::size_t>(count));
  for (Eigen::Index i = 0; i < count; ++i) pool[i] = i;
  std::mt19937_64 rng(seed);
  std::vector<Eigen::Index> keep;
  draw_without_replacement(pool, static_cast<std::size_t>(budget), rng, keep);
  std::sort(keep.begin(), keep.end());
  return keep;
}

GaussianSemanticField::GaussianSemanticField(PointMatrix X, MatrixX Y, GpHyperParams hyper)
    : X_(std::move(X)), Y_(std::move(Y)), hyper_(hyper) {
  hyper_.validate();
  if (X_.rows() < 1) throw ValidationError("field needs at least one training point");
  if (Y_.rows() != X_.rows()) throw ValidationError("field inputs/targets row mismatch");
  if (!Y_.allFinite() || !X_.allFinite()) throw ValidationError("field training data not finite");

  const MatrixX base = matern32_matrix(X_, X_, hyper_.kappa);
  const double noise = hyper_.sigma_y * hyper_.sigma_y;
  double jitter = 0.0;
  for (;;) {
    MatrixX K = base;
    K.diagonal().array() += noise + jitter;
    llt_.compute(K);
    if (llt_.info() == Eigen::Success) {
      const double min_pivot = llt_.matrixLLT().diagonal().minCoeff();
      if (min_pivot * min_pivot >= kPivotFloor * K.diagonal().maxCoeff()) break;
    }
    jitter = jitter == 0.0 ? kJitterStart : 2.0 * jitter;
    if (jitter > kJitterMax) {
      std::ostringstream os;
      os << "kernel matrix not positive definite after jitter escalation (last jitter "
         << jitter / 2.0 << ")";
      throw FitError(os.str(), jitter / 2.0);
    }
  }
  jitter_ = jitter;
  alpha_ = llt_.solve(Y_);
}

MatrixX GaussianSemanticField::regularized_kernel() const {
  MatrixX K = matern32_matrix(X_, X_, hyper_.kappa);
  K.diagonal().array() += hyper_.sigma_y * hyper_.sigma_y + jitter_;
  return K;
}

MatrixX GaussianSemanticField::predict_mean(const PointMatrix& Q) const {
  return matern32_matrix(Q, X_, hyper_.kappa) * alpha_;
}

MatrixX softmax_rows(const MatrixX& logits) {
  MatrixX out(logits.rows(), logits.cols());
  for (Eigen::Index i = 0; i < logits.rows(); ++i) {
    const double mx = logits.row(i).maxCoeff();
    const Eigen::ArrayXd e = (logits.row(i).array() - mx).exp();
    out.row(i) = (e / e.sum()).matrix().transpose();
  }
  return out;
}

GaussianSemanticField fit_gsf(const PointMatrix& X_local, const MatrixX& logits,
                              const std::vector<ClassId>& labels, const GsfFitOptions& opts) {
  if (X_local.rows() < 1) throw ValidationError("fit_gsf needs at least one point");
  if (logits.rows() != X_local.rows() ||
      static_cast<Eigen::Index>(labels.size()) != X_local.rows()) {
    throw ValidationError("fit_gsf: points, logits and labels differ in length");
  }
  const auto keep = semantic_sparsify(labels, opts.budget, opts.seed);
  PointMatrix X(static_cast<Eigen::Index>(keep.size()), 3);
  MatrixX Y(static_cast<Eigen::Index>(keep.size()), logits.cols());
  for (std::size_t k = 0; k < keep.size(); ++k) {
    X.row(static_cast<Eigen::Index>(k)) = X_local.row(keep[k]);
    Y.row(static_cast<Eigen::Index>(k)) = logits.row(keep[k]);
  }
  if (opts.softmax) Y = softmax_rows(Y);
  return GaussianSemanticField(std::move(X), std::move(Y), opts.hyper);
}

GsfPrediction gsf_predict(const GaussianSemanticField& field, const PointMatrix& Q) {
  const double kappa = field.hyper().kappa;
  const MatrixX Kqx = matern32_matrix(Q, field.inputs(), kappa);
  GsfPrediction out;
  out.mu = Kqx * field.weights();
  // V = L^-1 k(X,Q), so k(Q,X) K^-1 k(X,Q) = V^T V.
  const MatrixX V = field.factor().matrixL().solve(Kqx.transpose());
  MatrixX S = matern32_matrix(Q, Q, kappa);
  S.noalias() -= V.transpose() * V;
  out.Sigma = 0.5 * (S + S.transpose());
  return out;
}

PointMatrix probe_grid(const GridSpec& spec, const Vec3& center, double yaw) {
  spec.validate();
  const double x0 = -0.5 * (spec.nx - 1) * spec.dx;
  const double y0 = -0.5 * (spec.ny - 1) * spec.dy;
  const double z = spec.z_mode == ZMode::kOffset ? spec.z_offset : 0.0;
  const Mat3 R = rot_z(yaw);
  PointMatrix grid(spec.size(), 3);
  for (int j = 0; j < spec.ny; ++j) {
    for (int i = 0; i < spec.nx; ++i) {
      const Vec3 local(x0 + i * spec.dx, y0 + j * spec.dy, z);
      grid.row(j * spec.nx + i) = (center + R * local).transpose();
    }
  }
  return grid;
}

GpPopulation grid_probe(const GaussianSemanticField& field, const GridSpec& spec,
                        const LabelTaxonomy& taxonomy, const Vec3& center, double yaw) {
  GpPopulation pop;
  pop.grid = probe_grid(spec, center, yaw);
  auto pred = gsf_predict(field, pop.grid);
  pop.mu = std::move(pred.mu);
  pop.Sigma = std::move(pred.Sigma);
  // Clamp small negative predictive variances from round-off.
  for (Eigen::Index g = 0; g < pop.Sigma.rows(); ++g) {
    pop.Sigma(g, g) = std::max(pop.Sigma(g, g), 0.0);
  }
  pop.stability_weights.resize(pop.mu.rows());
  for (Eigen::Index g = 0; g < pop.mu.rows(); ++g) {
    const auto cls = static_cast<ClassId>(argmax_lowest(pop.mu.row(g)));
    pop.stability_weights(g) = taxonomy.stability(cls);
  }
  return pop;
}

MatrixX apply_stability_mask(const MatrixX& Sigma, const VectorX& weights) {
  if (Sigma.rows() != Sigma.cols() || Sigma.rows() != weights.size()) {
    throw ValidationError("stability mask: shape mismatch");
  }
  for (Eigen::Index i = 0; i < weights.size(); ++i) {
    if (!(weights(i) > 0.0)) {
      throw ValidationError("stability weight at index " + std::to_string(i) + " is not positive");
    }
  }
  const VectorX s = weights.cwiseSqrt();
  return s.asDiagonal() * Sigma * s.asDiagonal();
}

double mean_iou(const std::vector<ClassId>& predicted, const std::vector<ClassId>& truth) {
  if (predicted.size() != truth.size()) throw ValidationError("mean_iou: length mismatch");
  if (truth.empty()) throw ValidationError("mean_iou: empty input");
  std::map<ClassId, std::pair<std::size_t, std::size_t>> counts;  // (intersection, union)
  std::set<ClassId> present(predicted.begin(), predicted.end());
  present.insert(truth.begin(), truth.end());
  for (ClassId c : present) {
    std::size_t inter = 0, uni = 0;
    for (std::size_t i = 0; i < truth.size(); ++i) {
      const bool p = predicted[i] == c, t = truth[i] == c;
      inter += p && t;
      uni += p || t;
    }
    counts[c] = {inter, uni};
  }
  double sum = 0.0;
  for (const auto& [c, iu] : counts) sum += static_cast<double>(iu.first) / iu.second;
  return sum / static_cast<double>(counts.size());
}

double reconstruction_miou(const GaussianSemanticField& field, const PointMatrix& heldout_points,
                           const std::vector<ClassId>& heldout_labels) {
  if (heldout_points.rows() == 0) throw ValidationError("reconstruction_miou: no held-out points");
  const MatrixX mu = field.predict_mean(heldout_points);
  std::vector<ClassId> pred(static_cast<std::size_t>(mu.rows()));
  for (Eigen::Index i = 0; i < mu.rows(); ++i) {
    pred[static_cast<std::size_t>(i)] = static_cast<ClassId>(argmax_lowest(mu.row(i)));
  }
  return mean_iou(pred, heldout_labels);
}

}  // namespace gsfloc
