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

#include <stdexcept>
#include <string>

namespace gsfloc {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// File could not be opened, read or written.
class IoError : public Error {
 public:
  using Error::Error;
};

/// Malformed or truncated file contents.
class FormatError : public Error {
 public:
  using Error::Error;
};

/// Inputs violate a documented invariant or precondition.
class ValidationError : public Error {
 public:
  using Error::Error;
};

/// Kernel matrix could not be factorized even after jitter escalation.
class FitError : public Error {
 public:
  FitError(const std::string& what, double last_jitter)
      : Error(what), last_jitter_(last_jitter) {}
  double last_jitter() const noexcept { return last_jitter_; }

 private:
  double last_jitter_;
};

/// Rank-deficient geometry for a pose solve.
class DegenerateError : public Error {
 public:
  using Error::Error;
};

/// Map construction failed (e.g. too few instances).
class BuildError : public Error {
 public:
  using Error::Error;
};

/// Synthetic scene could not be generated (e.g. placement infeasible).
class GenerationError : public Error {
 public:
  using Error::Error;
};

}  // namespace gsfloc
