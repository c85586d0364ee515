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

#include "lsr/sparse.hpp"

#if defined(__AVX512F__)
#include <immintrin.h>
#endif

#include <algorithm>
#include <bit>
#include <cmath>
#include <numeric>
#include <string>

#include "lsr/error.hpp"

namespace lsr {

const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kInvalidInput: return "invalid input";
    case ErrorKind::kValidation: return "validation error";
    case ErrorKind::kFormat: return "format error";
    case ErrorKind::kTruncated: return "truncated input";
    case ErrorKind::kBuild: return "build error";
    case ErrorKind::kIo: return "i/o error";
  }
  return "error";
}

namespace {

void check_entry(std::uint32_t vocab_size, TermId term, Weight w) {
  if (term >= vocab_size) {
    fail(ErrorKind::kValidation,
         "term id " + std::to_string(term) + " out of range for vocab size " + std::to_string(vocab_size));
  }
  if (!std::isfinite(w) || w <= 0.0f) {
    fail(ErrorKind::kValidation, "term " + std::to_string(term) + " has non-positive or non-finite weight " +
                                     std::to_string(w));
  }
}

}  // namespace

SparseVector::SparseVector(std::uint32_t vocab_size) : vocab_size_(vocab_size) {
  require(vocab_size > 0, "vocab_size must be positive");
}

SparseVector::SparseVector(std::uint32_t vocab_size, std::vector<TermId> terms, std::vector<Weight> weights)
    : vocab_size_(vocab_size), terms_(std::move(terms)), weights_(std::move(weights)) {
  require(vocab_size > 0, "vocab_size must be positive");
  if (terms_.size() != weights_.size()) fail(ErrorKind::kValidation, "term and weight arrays differ in length");
  for (std::size_t i = 0; i < terms_.size(); ++i) {
    check_entry(vocab_size_, terms_[i], weights_[i]);
    if (i > 0 && terms_[i] <= terms_[i - 1]) {
      fail(ErrorKind::kValidation, "term ids not strictly increasing at position " + std::to_string(i));
    }
  }
}

SparseVector SparseVector::from_entries(std::uint32_t vocab_size, std::vector<Entry> entries) {
  std::sort(entries.begin(), entries.end(), [](const Entry& a, const Entry& b) { return a.term < b.term; });
  std::vector<TermId> terms;
  std::vector<Weight> weights;
  terms.reserve(entries.size());
  weights.reserve(entries.size());
  for (std::size_t i = 0; i < entries.size(); ++i) {
    if (i > 0 && entries[i].term == entries[i - 1].term) {
      fail(ErrorKind::kValidation, "duplicate term id " + std::to_string(entries[i].term));
    }
    if (entries[i].weight == 0.0f) continue;
    terms.push_back(entries[i].term);
    weights.push_back(entries[i].weight);
  }
  return SparseVector(vocab_size, std::move(terms), std::move(weights));
}

SparseVector SparseVector::from_view(SparseView view) {
  return SparseVector(view.vocab_size, {view.terms.begin(), view.terms.end()},
                      {view.weights.begin(), view.weights.end()});
}

Weight SparseVector::weight_of(TermId term) const noexcept {
  auto it = std::lower_bound(terms_.begin(), terms_.end(), term);
  if (it == terms_.end() || *it != term) return 0.0f;
  return weights_[static_cast<std::size_t>(it - terms_.begin())];
}

LogitMatrix::LogitMatrix(std::size_t rows, std::size_t cols, std::vector<float> values)
    : rows_(rows), cols_(cols), values_(std::move(values)) {
  require(rows_ > 0 && cols_ > 0, "logit matrix must have at least one row and one column");
  require(values_.size() == rows_ * cols_, "logit matrix value count does not match rows x cols");
  for (float z : values_) require(std::isfinite(z), "logit matrix contains a non-finite value");
}

LogitAggregator::LogitAggregator(std::size_t vocab_size) : running_max_(vocab_size, 0.0f) {
  require(vocab_size > 0, "vocab_size must be positive");
}

void LogitAggregator::add_row(std::span<const float> logits) {
  require(logits.size() == running_max_.size(), "logit row width does not match vocab size");
  // log1p is monotone, so max-pooling the ReLU'd logits first gives the same result.
  for (std::size_t t = 0; t < logits.size(); ++t) {
    require(std::isfinite(logits[t]), "non-finite logit");
    running_max_[t] = std::max(running_max_[t], logits[t]);
  }
  ++rows_;
}

SparseVector LogitAggregator::finish() const {
  require(rows_ > 0, "cannot aggregate an empty sequence");
  std::vector<TermId> terms;
  std::vector<Weight> weights;
  for (std::size_t t = 0; t < running_max_.size(); ++t) {
    const float w = std::log1p(running_max_[t]);
    if (w > 0.0f) {
      terms.push_back(static_cast<TermId>(t));
      weights.push_back(w);
    }
  }
  return SparseVector(static_cast<std::uint32_t>(running_max_.size()), std::move(terms), std::move(weights));
}

void PruneConfig::validate() const {
  require(k_q >= 1 && k_d >= 1, "pruning budgets must be >= 1");
}

SparseVector aggregate(const LogitMatrix& logits) {
  LogitAggregator agg(logits.cols());
  for (std::size_t i = 0; i < logits.rows(); ++i) agg.add_row(logits.row(i));
  return agg.finish();
}

SparseVector prune(SparseView v, std::size_t k) {
  require(k >= 1, "prune budget must be >= 1");
  if (v.nnz() <= k) return SparseVector::from_view(v);

  std::vector<std::uint32_t> order(v.nnz());
  std::iota(order.begin(), order.end(), 0u);
  auto heavier = [&](std::uint32_t a, std::uint32_t b) {
    if (v.weights[a] != v.weights[b]) return v.weights[a] > v.weights[b];
    return v.terms[a] < v.terms[b];
  };
  std::nth_element(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k), order.end(), heavier);
  order.resize(k);
  std::sort(order.begin(), order.end());  // positions are term-ordered already

  std::vector<TermId> terms(k);
  std::vector<Weight> weights(k);
  for (std::size_t i = 0; i < k; ++i) {
    terms[i] = v.terms[order[i]];
    weights[i] = v.weights[order[i]];
  }
  return SparseVector(v.vocab_size, std::move(terms), std::move(weights));
}

float dot(SparseView u, SparseView v) {
  require(u.vocab_size == v.vocab_size, "dot: vocab size mismatch (" + std::to_string(u.vocab_size) + " vs " +
                                            std::to_string(v.vocab_size) + ")");
  float s = 0.0f;
  std::size_t i = 0, j = 0;
  while (i < u.nnz() && j < v.nnz()) {
    if (u.terms[i] == v.terms[j]) {
      s += u.weights[i] * v.weights[j];
      ++i;
      ++j;
    } else if (u.terms[i] < v.terms[j]) {
      ++i;
    } else {
      ++j;
    }
  }
  return s;
}

DenseQuery::DenseQuery(std::uint32_t vocab_size) : dense_(vocab_size, 0.0f) {}

void DenseQuery::load(SparseView query) {
  clear();
  if (dense_.size() != query.vocab_size) dense_.assign(query.vocab_size, 0.0f);
  for (std::size_t i = 0; i < query.nnz(); ++i) dense_[query.terms[i]] = query.weights[i];
  loaded_.assign(query.terms.begin(), query.terms.end());
}

void DenseQuery::clear() {
  for (TermId t : loaded_) dense_[t] = 0.0f;
  loaded_.clear();
}

float DenseQuery::dot(SparseView doc) const {
  require(doc.vocab_size == dense_.size(), "dot: vocab size mismatch");
  // Products of non-shared terms are zero and adding them never changes a sum
  // that starts at +0.0f, so only the non-zero products enter the serial
  // accumulation. The result equals the merge-join dot bit for bit.
  const std::size_t n = doc.nnz();
  if (scratch_.size() < n) scratch_.resize(n);
  float* buf = scratch_.data();
  const float* q = dense_.data();
  std::size_t i = 0, m = 0;
#if defined(__AVX512F__)
  static_assert(sizeof(TermId) == 4 && sizeof(Weight) == 4);
  for (; i + 16 <= n; i += 16) {
    const __m512i idx = _mm512_loadu_si512(doc.terms.data() + i);
    const __m512 p = _mm512_mul_ps(_mm512_i32gather_ps(idx, q, 4), _mm512_loadu_ps(doc.weights.data() + i));
    const __mmask16 keep = _mm512_cmpneq_ps_mask(p, _mm512_setzero_ps());
    _mm512_mask_compressstoreu_ps(buf + m, keep, p);
    m += static_cast<std::size_t>(std::popcount(static_cast<unsigned>(keep)));
  }
#endif
  for (; i < n; ++i) {
    const float p = q[doc.terms[i]] * doc.weights[i];
    buf[m] = p;
    m += p != 0.0f;
  }
  float s = 0.0f;
  for (std::size_t i = 0; i < m; ++i) s += buf[i];
  return s;
}

DensityStats density_stats(std::span<const SparseVector> vectors) {
  require(!vectors.empty(), "density_stats needs at least one vector");
  DensityStats st;
  std::size_t total_nnz = 0;
  double weight_sum = 0.0;
  for (const auto& v : vectors) {
    total_nnz += v.nnz();
    st.max_nnz = std::max(st.max_nnz, v.nnz());
    for (Weight w : v.weights()) weight_sum += w;
  }
  st.mean_nnz = static_cast<double>(total_nnz) / static_cast<double>(vectors.size());
  st.mean_weight = total_nnz == 0 ? 0.0 : weight_sum / static_cast<double>(total_nnz);
  return st;
}

}  // namespace lsr
