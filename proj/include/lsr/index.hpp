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
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "lsr/sparse.hpp"

namespace lsr {

using DocOrd = std::uint32_t;

struct Posting {
  DocOrd doc_ord;
  Weight impact;
};

/// One term's postings, impact-descending (ties by ascending ordinal).
struct PostingsView {
  std::span<const DocOrd> doc_ords;
  std::span<const Weight> impacts;

  std::size_t size() const noexcept { return doc_ords.size(); }
  bool empty() const noexcept { return doc_ords.empty(); }
};

/// Impact-ordered inverted index plus a forward store of the k_d-pruned
/// document vectors. Immutable once built or loaded; safe for any number of
/// concurrent readers.
///
/// Postings and the forward store are both kept in CSR layout (offsets into
/// flat term/ordinal and weight columns).
class InvertedIndex {
 public:
  std::uint32_t vocab_size() const noexcept { return vocab_size_; }
  std::size_t doc_count() const noexcept { return doc_ids_.size(); }
  std::uint32_t k_d() const noexcept { return k_d_; }

  const std::vector<std::string>& doc_ids() const noexcept { return doc_ids_; }
  const std::string& doc_id(DocOrd ord) const { return doc_ids_.at(ord); }
  std::optional<DocOrd> find(const std::string& doc_id) const;

  /// Empty view for terms with no postings or ids beyond the vocabulary.
  PostingsView postings(TermId term) const noexcept;
  Weight max_impact(TermId term) const noexcept;
  SparseView forward(DocOrd ord) const noexcept;

  std::size_t total_postings() const noexcept { return post_ords_.size(); }
  std::size_t non_empty_terms() const noexcept;

 private:
  friend class IndexBuilder;
  friend InvertedIndex read_index(std::istream& in);

  void finalize_postings();
  void rebuild_id_map();

  std::uint32_t vocab_size_ = 0;
  std::uint32_t k_d_ = 1;
  std::vector<std::string> doc_ids_;
  std::unordered_map<std::string, DocOrd> ord_by_id_;

  std::vector<std::uint64_t> post_offsets_;  // vocab_size + 1 entries (empty when vocab is 0)
  std::vector<DocOrd> post_ords_;
  std::vector<Weight> post_impacts_;
  std::vector<Weight> max_impact_;

  std::vector<std::uint64_t> fwd_offsets_{0};
  std::vector<TermId> fwd_terms_;
  std::vector<Weight> fwd_weights_;
};

/// Single-writer streaming builder. Each added document is pruned to k_d terms
/// before it enters the index; ordinals follow insertion order.
class IndexBuilder {
 public:
  /// vocab_size 0 means "take it from the first document".
  explicit IndexBuilder(std::uint32_t k_d, std::uint32_t vocab_size = 0);

  void add(const std::string& doc_id, SparseView vec);
  InvertedIndex finish() &&;

 private:
  InvertedIndex idx_;
};

InvertedIndex build_index(std::span<const std::pair<std::string, SparseVector>> corpus, std::uint32_t k_d);

/// Binary index layout (all little-endian):
///   "LSRI" u32 version=1 u32 vocab_size u32 doc_count u32 k_d
///   doc_count x (u32 len, UTF-8 bytes)
///   u32 term_count, term_count x (u32 term_id, u32 len, len x (u32 doc_ord, f32 impact))
///   doc_count x (u32 nnz, nnz x (u32 term, f32 weight))
void write_index(const InvertedIndex& idx, std::ostream& out);
InvertedIndex read_index(std::istream& in);

void save_index(const InvertedIndex& idx, const std::filesystem::path& path);
InvertedIndex load_index(const std::filesystem::path& path);

inline constexpr std::uint32_t kIndexVersion = 1;

}  // namespace lsr
