// Copyright 2026 The lsr-code Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "lsr/bm25.hpp"
#include "lsr/sparse.hpp"

namespace lsr {

enum class VectorFormat { kJsonl, kSpv1 };

/// ".jsonl" / ".json" select JSONL, anything else SPV1.
VectorFormat vector_format_for(const std::filesystem::path& path);
VectorFormat parse_vector_format(const std::string& name);

struct VectorRecord {
  std::string id;
  SparseVector vec;
};

/// Streaming reader; holds one record at a time.
///
/// JSONL records look like {"id": "d1", "vector": {"17": 0.5, "230": 1.25}}
/// and carry no vocab size, so one must be supplied. SPV1 files declare their
/// own and a supplied non-zero value must agree with it.
class VectorReader {
 public:
  VectorReader(const std::filesystem::path& path, VectorFormat format, std::uint32_t vocab_size = 0);
  VectorReader(std::unique_ptr<std::istream> in, VectorFormat format, std::uint32_t vocab_size, std::string name);

  std::optional<VectorRecord> next();
  std::uint32_t vocab_size() const noexcept { return vocab_size_; }
  /// Record count declared in an SPV1 header (absent for JSONL).
  std::optional<std::uint64_t> declared_count() const noexcept { return declared_; }

 private:
  void read_header();
  std::optional<VectorRecord> next_jsonl();
  std::optional<VectorRecord> next_spv1();

  std::unique_ptr<std::istream> in_;
  VectorFormat format_;
  std::uint32_t vocab_size_;
  std::string name_;
  std::optional<std::uint64_t> declared_;
  std::uint64_t records_read_ = 0;
  std::uint64_t line_no_ = 0;
  std::uint64_t offset_ = 0;
};

/// SPV1: "SPV1" u32 version=1 u32 vocab_size u64 record_count, then per record
/// u32 id_len, id bytes, u32 nnz, nnz x (u32 term, f32 weight). Little-endian.
/// The record count is patched in when the writer is closed.
class VectorWriter {
 public:
  VectorWriter(const std::filesystem::path& path, VectorFormat format, std::uint32_t vocab_size);
  ~VectorWriter();

  VectorWriter(const VectorWriter&) = delete;
  VectorWriter& operator=(const VectorWriter&) = delete;

  void write(const std::string& id, SparseView vec);
  void close();

 private:
  std::ofstream out_;
  std::filesystem::path path_;
  VectorFormat format_;
  std::uint32_t vocab_size_;
  std::uint64_t count_ = 0;
  bool closed_ = false;
};

inline constexpr std::uint32_t kSpv1Version = 1;

std::vector<VectorRecord> read_vectors(const std::filesystem::path& path, VectorFormat format,
                                       std::uint32_t vocab_size = 0);
std::vector<VectorRecord> read_vectors(const std::filesystem::path& path, std::uint32_t vocab_size = 0);
void write_vectors(const std::filesystem::path& path, VectorFormat format, std::uint32_t vocab_size,
                   std::span<const VectorRecord> records);

/// One JSONL line for a vector record. Weights are printed as the exact
/// decimal expansion of their double promotion, so parsing back is lossless.
std::string to_jsonl(const std::string& id, SparseView vec);

/// LGT1: "LGT1" u32 vocab_size, then until EOF per record u32 id_len, id
/// bytes, u32 n_rows, n_rows x vocab_size f32 (row-major). Little-endian.
class LogitReader {
 public:
  explicit LogitReader(const std::filesystem::path& path, std::uint32_t expected_vocab = 0);

  std::uint32_t vocab_size() const noexcept { return vocab_size_; }

  /// Whole matrix for the next record.
  std::optional<std::pair<std::string, LogitMatrix>> next();
  /// Streams the next record's rows straight into the aggregation.
  std::optional<VectorRecord> next_aggregated();

 private:
  std::optional<std::pair<std::string, std::uint32_t>> next_header();

  std::ifstream in_;
  std::string name_;
  std::uint32_t vocab_size_ = 0;
  std::uint64_t offset_ = 0;
};

void write_logits(const std::filesystem::path& path, std::uint32_t vocab_size,
                  std::span<const std::pair<std::string, LogitMatrix>> records);

/// FNV-1a, 32-bit: offset basis 2166136261, prime 16777619.
std::uint32_t fnv1a32(std::string_view s);

enum class TokenFormat {
  kJsonl,  // {"id": "d1", "tokens": [3, 17, 17]}
  kText,   // "<id>\t<whitespace separated tokens>", each token hashed with fnv1a32
};

std::vector<TokenDoc> read_token_corpus(const std::filesystem::path& path, TokenFormat format);
void write_token_corpus(const std::filesystem::path& path, std::span<const TokenDoc> docs);

struct TeacherRecord {
  std::string qid;
  std::vector<std::string> docids;
  std::vector<double> teacher;
  std::optional<std::vector<double>> student_init;
};

/// {"qid": str, "docids": [...], "teacher": [...], "student_init": [...]?}
std::vector<TeacherRecord> read_teacher_scores(const std::filesystem::path& path);

}  // namespace lsr
