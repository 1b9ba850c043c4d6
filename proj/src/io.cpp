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

#include "gsfloc/io.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <sstream>

#include <openssl/evp.h>

#include "gsfloc/errors.hpp"

namespace gsfloc {

static_assert(std::endian::native == std::endian::little,
              "binary formats assume a little-endian host");

namespace {

constexpr char kLogitsMagic[4] = {'G', 'S', 'F', 'L'};
constexpr std::size_t kLogitsHeader = 16;

std::string byte_mismatch(const std::filesystem::path& p, std::size_t expected,
                          std::size_t actual, const std::string& what) {
  std::ostringstream os;
  os << p.string() << ": " << what << " (expected " << expected << " bytes, got " << actual
     << ")";
  return os.str();
}

}  // namespace

std::vector<std::uint8_t> read_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  in.seekg(0, std::ios::end);
  const auto n = static_cast<std::size_t>(in.tellg());
  in.seekg(0);
  std::vector<std::uint8_t> buf(n);
  if (n > 0 && !in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(n))) {
    throw IoError("read failed: " + path.string());
  }
  return buf;
}

void write_bytes(const std::filesystem::path& path, const std::vector<std::uint8_t>& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write failed: " + path.string());
}

std::string read_text(const std::filesystem::path& path) {
  const auto b = read_bytes(path);
  return std::string(b.begin(), b.end());
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  write_bytes(path, std::vector<std::uint8_t>(text.begin(), text.end()));
}

MatrixX synthesize_logits(const std::vector<ClassId>& labels, int num_classes, double confidence) {
  if (num_classes < 1) throw ValidationError("num_classes must be >= 1");
  const double rest = num_classes > 1 ? (1.0 - confidence) / (num_classes - 1) : 0.0;
  MatrixX out = MatrixX::Constant(static_cast<Eigen::Index>(labels.size()), num_classes, rest);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] >= num_classes) {
      throw ValidationError("label " + std::to_string(labels[i]) + " at index " +
                            std::to_string(i) + " outside taxonomy");
    }
    out(static_cast<Eigen::Index>(i), labels[i]) = confidence;
  }
  return out;
}

SemanticPointCloud load_cloud(const std::filesystem::path& points_path,
                              const std::filesystem::path& labels_path,
                              const std::optional<std::filesystem::path>& logits_path,
                              const CloudLoadOptions& opts) {
  const auto pbytes = read_bytes(points_path);
  if (pbytes.size() % 12 != 0) {
    throw FormatError(byte_mismatch(points_path, pbytes.size() / 12 * 12 + 12, pbytes.size(),
                                    "truncated point record"));
  }
  const auto lbytes = read_bytes(labels_path);
  if (lbytes.size() % 4 != 0) {
    throw FormatError(byte_mismatch(labels_path, lbytes.size() / 4 * 4 + 4, lbytes.size(),
                                    "truncated label record"));
  }
  const std::size_t n = pbytes.size() / 12;
  if (lbytes.size() / 4 != n) {
    std::ostringstream os;
    os << labels_path.string() << ": " << lbytes.size() / 4 << " labels for " << n
       << " points in " << points_path.string();
    throw ValidationError(os.str());
  }

  SemanticPointCloud cloud;
  cloud.points.resize(static_cast<Eigen::Index>(n), 3);
  std::vector<float> fbuf(n * 3);
  if (n > 0) std::memcpy(fbuf.data(), pbytes.data(), pbytes.size());
  for (std::size_t i = 0; i < n; ++i) {
    for (int k = 0; k < 3; ++k) cloud.points(static_cast<Eigen::Index>(i), k) = fbuf[3 * i + k];
  }
  cloud.labels.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    std::uint32_t raw;
    std::memcpy(&raw, lbytes.data() + 4 * i, 4);
    cloud.labels[i] = static_cast<ClassId>(raw & 0xFFFFu);
  }

  if (logits_path) {
    const auto gbytes = read_bytes(*logits_path);
    if (gbytes.size() < kLogitsHeader) {
      throw FormatError(byte_mismatch(*logits_path, kLogitsHeader, gbytes.size(),
                                      "truncated logits header"));
    }
    if (std::memcmp(gbytes.data(), kLogitsMagic, 4) != 0) {
      throw FormatError(logits_path->string() + ": bad magic, expected GSFL");
    }
    std::uint32_t hn, hd;
    std::memcpy(&hn, gbytes.data() + 4, 4);
    std::memcpy(&hd, gbytes.data() + 8, 4);
    const std::size_t expected = kLogitsHeader + std::size_t{hn} * hd * 4;
    if (gbytes.size() != expected) {
      throw FormatError(byte_mismatch(*logits_path, expected, gbytes.size(),
                                      "payload size does not match header N*D"));
    }
    if (hn != n) {
      std::ostringstream os;
      os << logits_path->string() << ": header declares " << hn << " rows for " << n << " points";
      throw ValidationError(os.str());
    }
    MatrixX logits(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(hd));
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < hd; ++j) {
        float v;
        std::memcpy(&v, gbytes.data() + kLogitsHeader + 4 * (i * hd + j), 4);
        logits(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = v;
      }
    }
    cloud.logits = std::move(logits);
    cloud.validate(static_cast<int>(hd));
  } else {
    cloud.logits = synthesize_logits(cloud.labels, opts.num_classes, opts.one_hot_confidence);
    cloud.validate(opts.num_classes);
  }
  return cloud;
}

void save_cloud(const SemanticPointCloud& cloud, const std::filesystem::path& points_path,
                const std::filesystem::path& labels_path,
                const std::optional<std::filesystem::path>& logits_path) {
  const auto n = static_cast<std::size_t>(cloud.size());
  ByteWriter pw;
  for (std::size_t i = 0; i < n; ++i) {
    for (int k = 0; k < 3; ++k) pw.f32(static_cast<float>(cloud.points(static_cast<Eigen::Index>(i), k)));
  }
  write_bytes(points_path, pw.bytes());
  ByteWriter lw;
  for (auto l : cloud.labels) lw.u32(l);
  write_bytes(labels_path, lw.bytes());
  if (logits_path && cloud.logits) {
    const auto& g = *cloud.logits;
    ByteWriter gw;
    gw.raw(kLogitsMagic, 4);
    gw.u32(static_cast<std::uint32_t>(g.rows()));
    gw.u32(static_cast<std::uint32_t>(g.cols()));
    gw.u32(0);
    for (Eigen::Index i = 0; i < g.rows(); ++i) {
      for (Eigen::Index j = 0; j < g.cols(); ++j) gw.f32(static_cast<float>(g(i, j)));
    }
    write_bytes(*logits_path, gw.bytes());
  }
}

std::string format_pose(const RigidTransform& T) {
  std::ostringstream os;
  os << std::setprecision(17);
  const Mat34 m = T.matrix();
  for (int r = 0; r < 3; ++r) {
    for (int c = 0; c < 4; ++c) {
      if (r || c) os << ' ';
      os << m(r, c);
    }
  }
  return os.str();
}

RigidTransform parse_pose(const std::string& line) {
  std::istringstream is(line);
  Mat34 m;
  for (int r = 0; r < 3; ++r) {
    for (int c = 0; c < 4; ++c) {
      if (!(is >> m(r, c))) throw FormatError("pose line needs 12 numbers: '" + line + "'");
    }
  }
  std::string extra;
  if (is >> extra) throw FormatError("pose line has more than 12 numbers: '" + line + "'");
  return RigidTransform::from_matrix(m);
}

std::vector<RigidTransform> read_poses(const std::filesystem::path& path) {
  std::istringstream is(read_text(path));
  std::vector<RigidTransform> out;
  std::string line;
  while (std::getline(is, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    out.push_back(parse_pose(line));
  }
  return out;
}

void write_poses(const std::filesystem::path& path, const std::vector<RigidTransform>& poses) {
  std::string text;
  for (const auto& T : poses) text += format_pose(T) + "\n";
  write_text(path, text);
}

std::string sha256_hex(const std::vector<std::uint8_t>& bytes) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr) != 1) {
    throw Error("sha256 failed");
  }
  std::ostringstream os;
  os << std::hex << std::setfill('0');
  for (unsigned int i = 0; i < len; ++i) os << std::setw(2) << static_cast<int>(digest[i]);
  return os.str();
}

std::string sha256_file(const std::filesystem::path& path) { return sha256_hex(read_bytes(path)); }

void ByteWriter::u32(std::uint32_t v) { raw(&v, 4); }
void ByteWriter::u64(std::uint64_t v) { raw(&v, 8); }
void ByteWriter::f32(float v) { raw(&v, 4); }
void ByteWriter::f64(double v) { raw(&v, 8); }
void ByteWriter::raw(const void* data, std::size_t n) {
  const auto* p = static_cast<const std::uint8_t*>(data);
  buf_.insert(buf_.end(), p, p + n);
}

void ByteReader::need(std::size_t n) const {
  if (pos_ + n > buf_.size()) {
    std::ostringstream os;
    os << source_ << ": truncated at byte " << pos_ << " (need " << n << " more, have "
       << buf_.size() - pos_ << ")";
    throw FormatError(os.str());
  }
}

void ByteReader::raw(void* out, std::size_t n) {
  need(n);
  std::memcpy(out, buf_.data() + pos_, n);
  pos_ += n;
}

std::uint32_t ByteReader::u32() { std::uint32_t v; raw(&v, 4); return v; }
std::uint64_t ByteReader::u64() { std::uint64_t v; raw(&v, 8); return v; }
float ByteReader::f32() { float v; raw(&v, 4); return v; }
double ByteReader::f64() { double v; raw(&v, 8); return v; }

}  // namespace gsfloc
