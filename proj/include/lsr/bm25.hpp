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
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "lsr/retrieval.hpp"

namespace lsr {

using TokenId = std::uint32_t;

struct TokenDoc {
  std::string doc_id;
  std::vector<TokenId> tokens;
};

/// Lucene/pyserini-style defaults. Not tuned for any particular collection.
struct Bm25Params {
  double k1 = 0.9;
  double b = 0.4;
};

/// Doc-ordered term-frequency index for the lexical baseline.
class Bm25Index {
 public:
  struct Posting {
    DocOrd doc_ord;
    std::uint32_t tf;
  };

  std::size_t doc_count() const noexcept { return doc_ids_.size(); }
  double avg_len() const noexcept { return avg_len_; }
  const Bm25Params& params() const noexcept { return params_; }
  const std::vector<std::string>& doc_ids() const noexcept { return doc_ids_; }
  std::uint32_t doc_len(DocOrd d) const { return doc_len_.at(d); }

  /// Number of documents containing the token (0 for unknown tokens).
  std::uint32_t df(TokenId t) const noexcept;
  std::span<const Posting> postings(TokenId t) const noexcept;

  /// ln(1 + (N - df + 0.5) / (df + 0.5)); never negative.
  double idf(TokenId t) const noexcept;

 private:
  friend Bm25Index build_bm25(std::span<const TokenDoc> corpus, Bm25Params params);

  Bm25Params params_;
  std::vector<std::string> doc_ids_;
  std::vector<std::uint32_t> doc_len_;
  double avg_len_ = 0.0;
  std::unordered_map<TokenId, std::vector<Posting>> postings_;
};

Bm25Index build_bm25(std::span<const TokenDoc> corpus, Bm25Params params = {});

/// Per-query scratch for BM25 scoring; one per thread.
class Bm25Searcher {
 public:
  explicit Bm25Searcher(const Bm25Index& idx);

  /// Query tokens are deduplicated; unknown tokens contribute nothing.
  RankedList search(const std::string& query_id, std::span<const TokenId> query_tokens, std::size_t k);

 private:
  const Bm25Index* idx_;
  std::vector<double> acc_;
  std::vector<std::uint8_t> seen_;
  std::vector<DocOrd> touched_;
};

RankedList bm25_search(const Bm25Index& idx, std::span<const TokenId> query_tokens, std::size_t k,
                       const std::string& query_id = "");

}  // namespace lsr
