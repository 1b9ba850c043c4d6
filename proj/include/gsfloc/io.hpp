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
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "gsfloc/types.hpp"

namespace gsfloc {

// On-disk cloud layout:
//   points  raw little-endian float32, x y z interleaved
//   labels  raw little-endian uint32, low 16 bits = class id
//   logits  "GSFL" | u32 N | u32 D | u32 reserved | N*D float32 row-major

struct CloudLoadOptions {
  /// Number of classes used when logits must be synthesized.
  int num_classes = urban::kNumClasses;
  /// Score put on the labeled class of a synthesized logit row.
  double one_hot_confidence = 0.9;
};

SemanticPointCloud load_cloud(const std::filesystem::path& points_path,
                              const std::filesystem::path& labels_path,
                              const std::optional<std::filesystem::path>& logits_path = std::nullopt,
                              const CloudLoadOptions& opts = {});

/// Writes all three files; logits are written only if present in the cloud.
void save_cloud(const SemanticPointCloud& cloud, const std::filesystem::path& points_path,
                const std::filesystem::path& labels_path,
                const std::optional<std::filesystem::path>& logits_path = std::nullopt);

/// One-hot style rows: `confidence` on the label, the rest split uniformly.
MatrixX synthesize_logits(const std::vector<ClassId>& labels, int num_classes,
                          double confidence = 0.9);

/// 12 whitespace separated numbers per line, row-major [R|t].
std::vector<RigidTransform> read_poses(const std::filesystem::path& path);
void write_poses(const std::filesystem::path& path, const std::vector<RigidTransform>& poses);
std::string format_pose(const RigidTransform& T);
RigidTransform parse_pose(const std::string& line);

std::vector<std::uint8_t> read_bytes(const std::filesystem::path& path);
void write_bytes(const std::filesystem::path& path, const std::vector<std::uint8_t>& bytes);
std::string read_text(const std::filesystem::path& path);
void write_text(const std::filesystem::path& path, const std::string& text);

/// Hex SHA-256 of a byte buffer / a file.
std::string sha256_hex(const std::vector<std::uint8_t>& bytes);
std::string sha256_file(const std::filesystem::path& path);

/// Little-endian append/read helpers for binary sidecars.
class ByteWriter {
 public:
  void u32(std::uint32_t v);
  void u64(std::uint64_t v);
  void f32(float v);
  void f64(double v);
  void raw(const void* data, std::size_t n);
  const std::vector<std::uint8_t>& bytes() const noexcept { return buf_; }
  std::vector<std::uint8_t> take() { return std::move(buf_); }

 private:
  std::vector<std::uint8_t> buf_;
};

class ByteReader {
 public:
  ByteReader(const std::vector<std::uint8_t>& bytes, std::string source)
      : buf_(bytes), source_(std::move(source)) {}
  std::uint32_t u32();
  std::uint64_t u64();
  float f32();
  double f64();
  void raw(void* out, std::size_t n);
  std::size_t remaining() const noexcept { return buf_.size() - pos_; }
  std::size_t position() const noexcept { return pos_; }

 private:
  void need(std::size_t n) const;
  const std::vector<std::uint8_t>& buf_;
  std::string source_;
  std::size_t pos_ = 0;
};

}  // namespace gsfloc
