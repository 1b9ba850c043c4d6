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

#include "doctest.h"

#include "gsfloc/oracles.hpp"

using namespace gsfloc;

TEST_CASE("self-test suites pass") {
  for (std::uint64_t seed : {1ull, 2ull}) {
    const auto results = oracle::run_selftest(seed);
    CHECK(results.size() >= 5);
    for (const auto& r : results) {
      INFO(r.name << ": " << r.detail);
      CHECK(r.passed);
    }
  }
}
