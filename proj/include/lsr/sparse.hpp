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

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace lsr {

using TermId = std::uint32_t;
using Weight = float;

/// Non-owning view of a sparse vector: parallel term/weight arrays sorted by
/// strictly ascending term id. The forward store and SparseVector both hand
/// these out so every scoring routine works on one representation.
struct SparseView {
  std::uint32_t vocab_size = 0;
  std::span<const TermId> terms;
  std::span<const Weight> weights;

  std::size_t nnz() const noexcept { return terms.size(); }
  bool empty() const noexcept { return terms.empty(); }
};

/// Owning sparse vector. Invariants (checked on construction): vocab_size > 0,
/// term ids strictly increasing and < vocab_size, every weight finite and > 0.
class SparseVector {
 public:
  struct Entry {
    TermId term;
    Weight weight;
  };

  explicit SparseVector(std::uint32_t vocab_size);

  /// Takes already-sorted columns; throws kValidation on any invariant breach.
  SparseVector(std::uint32_t vocab_size, std::vector<TermId> terms, std::vector<Weight> weights);

  /// Sorts `entries` by term and drops zero weights. Duplicate terms, negative
  /// or non-finite weights and out-of-range ids are rejected.
  static SparseVector from_entries(std::uint32_t vocab_size, std::vector<Entry> entries);

  static SparseVector from_view(SparseView view);

  std::uint32_t vocab_size() const noexcept { return vocab_size_; }
  std::size_t nnz() const noexcept { return terms_.size(); }
  bool empty() const noexcept { return terms_.empty(); }
  std::span<const TermId> terms() const noexcept { return terms_; }
  std::span<const Weight> weights() const noexcept { return weights_; }

  /// Weight of `term`, or 0 when absent.
  Weight weight_of(TermId term) const noexcept;

  SparseView view() const noexcept { return {vocab_size_, terms_, weights_}; }
  operator SparseView() const noexcept { return view(); }  // NOLINT(google-explicit-constructor)

  friend bool operator==(const SparseVector&, const SparseVector&) = default;

 private:
  std::uint32_t vocab_size_;
  std::vector<TermId> terms_;
  std::vector<Weight> weights_;
};

/// Dense row-major n x N logit matrix (one row per input position).
class LogitMatrix {
 public:
  LogitMatrix(std::size_t rows, std::size_t cols, std::vector<float> values);

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::span<const float> row(std::size_t i) const { return {values_.data() + i * cols_, cols_}; }
  std::span<const float> values() const noexcept { return values_; }

 private:
  std::size_t rows_;
  std::size_t cols_;
  std::vector<float> values_;
};

/// Streaming form of the log-saturated max-pooling aggregation: feed rows one
/// at a time, then finish(). Keeps only a running per-term max, so the full
/// matrix never has to be resident.
class LogitAggregator {
 public:
  explicit LogitAggregator(std::size_t vocab_size);

  void add_row(std::span<const float> logits);
  std::size_t rows_seen() const noexcept { return rows_; }
  SparseVector finish() const;

 private:
  std::vector<float> running_max_;
  std::size_t rows_ = 0;
};

struct PruneConfig {
  std::uint32_t k_q = 500;
  std::uint32_t k_d = 1000;

  void validate() const;
};

/// u_t = max_i log(1 + max(z_{i,t}, 0)); zero weights are omitted.
SparseVector aggregate(const LogitMatrix& logits);

/// Keeps the k heaviest entries (ties to the smaller term id), re-sorted by term.
SparseVector prune(SparseView v, std::size_t k);

/// Merge-join dot product; float accumulation in ascending term order.
float dot(SparseView u, SparseView v);

/// A query scattered into a dense vocab-sized buffer so scoring a document is
/// a single pass over the document's entries. Accumulates in the same order
/// as dot(), so scores are bit-identical to it. Reusable across queries.
class DenseQuery {
 public:
  explicit DenseQuery(std::uint32_t vocab_size = 0);

  void load(SparseView query);
  void clear();
  float dot(SparseView doc) const;
  std::uint32_t vocab_size() const noexcept { return static_cast<std::uint32_t>(dense_.size()); }

 private:
  std::vector<float> dense_;
  std::vector<TermId> loaded_;
  mutable std::vector<float> scratch_;
};

struct DensityStats {
  double mean_nnz = 0.0;
  std::size_t max_nnz = 0;
  double mean_weight = 0.0;  // over all stored entries; 0 when there are none
};

DensityStats density_stats(std::span<const SparseVector> vectors);

}  // namespace lsr
