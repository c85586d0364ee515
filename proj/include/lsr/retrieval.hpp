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
#include <limits>
#include <string>
#include <vector>

#include "lsr/index.hpp"
#include "lsr/sparse.hpp"

namespace lsr {

enum class SearchMode { kExact, kApproximate, kTwoStep };

const char* to_string(SearchMode mode);
SearchMode parse_search_mode(const std::string& s);

/// Defaults are the inverted-index settings used for the latency runs:
/// k=1000, query_cut=500, heap_factor=2.5.
struct SearchParams {
  std::size_t k = 1000;
  std::size_t query_cut = 500;
  double heap_factor = 2.5;
  SearchMode mode = SearchMode::kApproximate;

  static constexpr double kScanAll = std::numeric_limits<double>::infinity();

  void validate() const;
};

struct TwoStepConfig {
  PruneConfig stage1{10, 100};
  std::size_t stage1_k = 1000;
  std::size_t stage2_k_q = 500;
  /// Parameters of the stage-1 traversal (k is overridden by stage1_k and
  /// query_cut by stage1.k_q).
  double stage1_heap_factor = 2.5;

  void validate(std::size_t final_k) const;
};

struct ScoredDoc {
  DocOrd ord;
  float score;
};

struct Hit {
  std::string doc_id;
  double score;
};

struct RankedList {
  std::string query_id;
  std::vector<Hit> hits;  // descending score, ties by ascending doc id
  std::uint64_t latency_ns = 0;
};

/// Per-thread query scratch bound to one immutable index. Create one per
/// worker; the index itself is shared without locking.
class Searcher {
 public:
  explicit Searcher(const InvertedIndex& idx);

  /// Top-k by dot(q, forward[d]) over every document sharing a term with q.
  /// Term-at-a-time accumulation in ascending term order reproduces the
  /// merge-join dot product bit for bit.
  std::vector<ScoredDoc> exact(SparseView q, std::size_t k);

  /// query_cut pruning + impact-ordered traversal with heap-factor early
  /// termination. Every document reached is scored exactly against the
  /// forward store, so returned scores are true pruned-query dot products.
  std::vector<ScoredDoc> approximate(SparseView q, const SearchParams& params);

  /// Exact dot(q, forward[d]) for the given candidates, ranked top-k.
  std::vector<ScoredDoc> rescore(SparseView q, std::span<const DocOrd> candidates, std::size_t k);

  /// Dispatches on params.mode (exact / approximate); measures latency of the
  /// traversal only and resolves external ids afterwards.
  RankedList search(const std::string& query_id, SparseView q, const SearchParams& params);

  const InvertedIndex& index() const noexcept { return *idx_; }

 private:
  void check_vocab(SparseView q) const;

  const InvertedIndex* idx_;
  std::vector<float> acc_;
  std::vector<std::uint8_t> seen_;
  std::vector<DocOrd> touched_;
  DenseQuery dense_;
};

/// Candidate generation on an aggressively pruned index followed by exact
/// rescoring against the main index's forward store.
class TwoStepSearcher {
 public:
  /// Throws kInvalidInput if the two indexes do not cover the same doc ids.
  TwoStepSearcher(const InvertedIndex& stage1, const InvertedIndex& main, TwoStepConfig cfg);

  std::vector<ScoredDoc> search_ords(SparseView q_raw, std::size_t k);
  RankedList search(const std::string& query_id, SparseView q_raw, std::size_t k);

  /// The stage-1 candidate set (main-index ordinals) of the last query.
  const std::vector<DocOrd>& last_candidates() const noexcept { return candidates_; }

 private:
  Searcher stage1_;
  Searcher main_;
  TwoStepConfig cfg_;
  std::vector<DocOrd> to_main_;  // empty when ordinals coincide
  std::vector<DocOrd> candidates_;
};

RankedList search_exact(const InvertedIndex& idx, SparseView q, std::size_t k, const std::string& query_id = "");
RankedList search_approx(const InvertedIndex& idx, SparseView q, const SearchParams& params,
                         const std::string& query_id = "");
RankedList search_two_step(const InvertedIndex& idx_stage1, const InvertedIndex& idx_main, SparseView q_raw,
                           const TwoStepConfig& cfg, std::size_t k, const std::string& query_id = "");

/// Converts ordinal-level results to external ids.
RankedList to_ranked_list(const InvertedIndex& idx, const std::string& query_id, std::span<const ScoredDoc> docs,
                          std::uint64_t latency_ns = 0);

struct TermContribution {
  TermId term;
  Weight q_weight;
  Weight d_weight;
  float contribution;
};

/// Per-term products of a query/document pair, largest first (ties by term),
/// truncated to top_n.
std::vector<TermContribution> explain_match(SparseView q, SparseView d, std::size_t top_n);

}  // namespace lsr
