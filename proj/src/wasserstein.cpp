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

#include "gsfloc/wasserstein.hpp"

#include <limits>

namespace gsfloc {

PreparedPopulation prepare_population(const GpPopulation& pop, bool use_stability) {
  PreparedPopulation out;
  out.mu = pop.mu;
  out.weighted = use_stability;
  if (use_stability) {
    out.weights = pop.stability_weights;
    out.cov = apply_stability_mask(pop.Sigma, pop.stability_weights);
  } else {
    out.weights = VectorX::Ones(pop.mu.rows());
    out.cov = pop.Sigma;
  }
  out.cov_sqrt = psd_sqrt(out.cov);
  return out;
}

double w2_squared(const PreparedPopulation& a, const PreparedPopulation& b) {
  if (a.mu.rows() != b.mu.rows() || a.mu.cols() != b.mu.cols() || a.cov.rows() != b.cov.rows()) {
    throw ValidationError("w2_squared: population shape mismatch");
  }
  if (a.weighted != b.weighted) {
    throw ValidationError("w2_squared: mixing stability-weighted and unweighted populations");
  }
  // Same reduction order in both modes, so unit weights reproduce the
  // unweighted value bit for bit.
  const VectorX row_sq = (a.mu - b.mu).rowwise().squaredNorm();
  const VectorX w = (a.weights.array() * b.weights.array()).sqrt().matrix();
  const double mean_term = w.dot(row_sq);
  const double cov_term =
      a.cov.trace() + b.cov.trace() - 2.0 * sqrt_product_trace(a.cov_sqrt, b.cov);
  return std::max(0.0, mean_term + cov_term);
}

double w2_squared(const GpPopulation& a, const GpPopulation& b, bool use_stability) {
  return w2_squared(prepare_population(a, use_stability), prepare_population(b, use_stability));
}

void SimilarityConfig::validate() const {
  if (!(sigma_w > 0.0)) throw ValidationError("sim.sigma_w must be > 0");
  if (!(accept_threshold > 0.0)) throw ValidationError("sim.accept_threshold must be > 0");
}

double similarity_weight(double w2sq, const SimilarityConfig& cfg) {
  if (!(w2sq >= 0.0)) throw ValidationError("similarity_weight: w2sq must be >= 0");
  const double w = std::exp(-w2sq / (2.0 * cfg.sigma_w * cfg.sigma_w));
  return std::max(w, std::numeric_limits<double>::min());
}

}  // namespace gsfloc
