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

#include "doctest.h"

#include "gsfloc/errors.hpp"
#include "gsfloc/oracles.hpp"
#include "gsfloc/wasserstein.hpp"
#include "test_util.hpp"

using namespace gsfloc;
using namespace gsfloc::testing;

namespace {

GpPopulation random_population(Rng& rng, int G, int D, bool unit_weights = false) {
  GpPopulation p;
  p.grid = PointMatrix::Zero(G, 3);
  p.mu = random_matrix(rng, G, D);
  p.Sigma = random_psd(rng, G, 0.01);
  p.stability_weights.resize(G);
  const double choices[] = {0.1, 0.5, 1.0};
  for (int i = 0; i < G; ++i)
    p.stability_weights(i) = unit_weights ? 1.0 : choices[std::uniform_int_distribution<int>(0, 2)(rng)];
  return p;
}

GpPopulation scalar_population(double mu, double var) {
  GpPopulation p;
  p.grid = PointMatrix::Zero(1, 3);
  p.mu = MatrixX::Constant(1, 1, mu);
  p.Sigma = MatrixX::Constant(1, 1, var);
  p.stability_weights = VectorX::Ones(1);
  return p;
}

}  // namespace

TEST_CASE("psd_sqrt examples") {
  CHECK((psd_sqrt(MatrixX::Identity(4, 4)) - MatrixX::Identity(4, 4)).cwiseAbs().maxCoeff() < 1e-15);
  const MatrixX D = Eigen::Vector2d(4, 9).asDiagonal();
  CHECK((psd_sqrt(D) - MatrixX(Eigen::Vector2d(2, 3).asDiagonal())).cwiseAbs().maxCoeff() < 1e-14);
  Rng rng(1);
  for (int t = 0; t < 50; ++t) {
    const MatrixX S = random_psd(rng, 10);
    const MatrixX R = psd_sqrt(S);
    CHECK((R - R.transpose()).cwiseAbs().maxCoeff() < 1e-12);
    CHECK((R * R - S).norm() / S.norm() < 1e-6);
  }
  MatrixX asym = MatrixX::Identity(2, 2);
  asym(0, 1) = 0.1;
  CHECK_THROWS_AS(psd_sqrt(asym), ValidationError);
}

TEST_CASE("psd_sqrt clamps round-off negatives") {
  MatrixX S(2, 2);
  S << 1, 1, 1, 1;
  S(1, 1) -= 1e-12;
  const MatrixX R = psd_sqrt(S);
  CHECK(R.allFinite());
  CHECK((R * R - S).norm() < 1e-6);
}

TEST_CASE("one-dimensional analytic cases") {
  CHECK(std::abs(w2_squared(scalar_population(0, 1), scalar_population(3, 1), false) - 9.0) < 1e-10);
  CHECK(std::abs(w2_squared(scalar_population(0.5, 1), scalar_population(0.5, 4), false) - 1.0) <
        1e-10);
}

TEST_CASE("frozen multivariate reference") {
  // Reference computed with an independent dense matrix square root.
  MatrixX mu1(3, 2), mu2(3, 2), S1(3, 3), S2(3, 3);
  mu1 << 0, 1, 2, 0, 1, 1;
  mu2 << 1, 0, 0, 0, 1, 2;
  S1 << 2, 0.5, 0.1, 0.5, 1, 0.2, 0.1, 0.2, 0.8;
  S2 << 1, 0.3, 0, 0.3, 1.5, -0.2, 0, -0.2, 0.6;
  CHECK(std::abs(w2_squared(mu1, S1, mu2, S2) - 7.328654057301623) < 1e-10);
  CHECK(std::abs(oracle::w2_eigen_product(mu1, S1, mu2, S2) - 7.328654057301623) < 1e-9);
}

TEST_CASE("metric axioms") {
  Rng rng(2);
  for (int t = 0; t < 100; ++t) {
    const auto a = random_population(rng, 6, 3), b = random_population(rng, 6, 3),
               c = random_population(rng, 6, 3);
    for (bool stab : {false, true}) {
      CHECK(w2_squared(a, a, stab) < 1e-8);
      const double ab = w2_squared(a, b, stab), ba = w2_squared(b, a, stab);
      CHECK(ab >= 0.0);
      CHECK(std::abs(ab - ba) < 1e-9);
    }
    const double ab = std::sqrt(w2_squared(a, b, false));
    const double bc = std::sqrt(w2_squared(b, c, false));
    const double ac = std::sqrt(w2_squared(a, c, false));
    CHECK(ac <= ab + bc + 1e-7);
    CHECK(std::abs(w2_squared(a, b, false) - oracle::w2_eigen_product(a.mu, a.Sigma, b.mu, b.Sigma)) <
          1e-8);
  }
}

TEST_CASE("unit weights make stability a no-op") {
  Rng rng(3);
  for (int t = 0; t < 50; ++t) {
    const auto a = random_population(rng, 5, 2, true), b = random_population(rng, 5, 2, true);
    CHECK(w2_squared(a, b, true) == w2_squared(a, b, false));
  }
}

TEST_CASE("stability weighting scales mean rows by the geometric mean weight") {
  GpPopulation a = scalar_population(0, 1), b = scalar_population(2, 1);
  a.stability_weights(0) = 0.25;
  b.stability_weights(0) = 1.0;
  // sqrt(0.25 * 1) * 4 + (0.5 - 1)^2
  CHECK(std::abs(w2_squared(a, b, true) - (0.5 * 4.0 + 0.25)) < 1e-12);
}

TEST_CASE("covariance scaling scales the trace terms") {
  Rng rng(4);
  for (int t = 0; t < 20; ++t) {
    auto a = random_population(rng, 5, 2), b = random_population(rng, 5, 2);
    b.mu = a.mu;
    const double s2 = uniform(rng, 0.1, 9.0);
    auto as = a, bs = b;
    as.Sigma *= s2;
    bs.Sigma *= s2;
    const double base = w2_squared(a, b, false);
    CHECK(std::abs(w2_squared(as, bs, false) - s2 * base) < 1e-9 * std::max(1.0, s2 * base));
  }
}

TEST_CASE("prepared populations agree with the direct form") {
  Rng rng(5);
  for (int t = 0; t < 20; ++t) {
    const auto a = random_population(rng, 7, 3), b = random_population(rng, 7, 3);
    for (bool stab : {false, true}) {
      const auto pa = prepare_population(a, stab), pb = prepare_population(b, stab);
      CHECK(std::abs(w2_squared(pa, pb) - w2_squared(a, b, stab)) < 1e-12);
    }
  }
}

TEST_CASE("shape mismatch is rejected") {
  Rng rng(6);
  const auto a = random_population(rng, 4, 2), b = random_population(rng, 5, 2),
             c = random_population(rng, 4, 3);
  CHECK_THROWS_AS(w2_squared(a, b, false), ValidationError);
  CHECK_THROWS_AS(w2_squared(a, c, true), ValidationError);
}

TEST_CASE("similarity weight mapping") {
  SimilarityConfig cfg;
  cfg.sigma_w = 0.7;
  CHECK(similarity_weight(0.0, cfg) == 1.0);
  CHECK(std::abs(similarity_weight(2 * 0.49, cfg) - std::exp(-1.0)) < 1e-15);
  double prev = 1.0;
  for (int i = 1; i <= 200; ++i) {
    const double w = similarity_weight(0.05 * i, cfg);
    CHECK(w < prev);
    CHECK(w > 0.0);
    prev = w;
  }
  CHECK(similarity_weight(1e9, cfg) > 0.0);
  SimilarityConfig bad;
  bad.sigma_w = 0;
  CHECK_THROWS_AS(bad.validate(), ValidationError);
}
