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

#include "lsr/retrieval.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>

#include "lsr/error.hpp"

namespace lsr {

namespace {

using Clock = std::chrono::steady_clock;

std::uint64_t elapsed_ns(Clock::time_point start) {
  return static_cast<std::uint64_t>(
      std::chrono::duration_cast<std::chrono::nanoseconds>(Clock::now() - start).count());
}

// Bounded top-k keeping the k best by (score desc, external id asc). The heap
// front is the current worst retained document.
class TopK {
 public:
  TopK(std::size_t k, const std::vector<std::string>& ids) : k_(k), ids_(ids) { heap_.reserve(std::min<std::size_t>(k, 1u << 16)); }

  bool better(const ScoredDoc& a, const ScoredDoc& b) const {
    if (a.score != b.score) return a.score > b.score;
    return ids_[a.ord] < ids_[b.ord];
  }

  void push(ScoredDoc d) {
    auto cmp = [this](const ScoredDoc& a, const ScoredDoc& b) { return better(a, b); };
    if (heap_.size() < k_) {
      heap_.push_back(d);
      std::push_heap(heap_.begin(), heap_.end(), cmp);
    } else if (better(d, heap_.front())) {
      std::pop_heap(heap_.begin(), heap_.end(), cmp);
      heap_.back() = d;
      std::push_heap(heap_.begin(), heap_.end(), cmp);
    }
  }

  bool full() const noexcept { return heap_.size() >= k_; }
  float worst() const noexcept { return heap_.front().score; }

  std::vector<ScoredDoc> take_sorted() && {
    std::sort(heap_.begin(), heap_.end(), [this](const ScoredDoc& a, const ScoredDoc& b) { return better(a, b); });
    return std::move(heap_);
  }

 private:
  std::size_t k_;
  const std::vector<std::string>& ids_;
  std::vector<ScoredDoc> heap_;
};

}  // namespace

const char* to_string(SearchMode mode) {
  switch (mode) {
    case SearchMode::kExact: return "exact";
    case SearchMode::kApproximate: return "approximate";
    case SearchMode::kTwoStep: return "two-step";
  }
  return "?";
}

SearchMode parse_search_mode(const std::string& s) {
  if (s == "exact") return SearchMode::kExact;
  if (s == "approximate" || s == "approx") return SearchMode::kApproximate;
  if (s == "two-step") return SearchMode::kTwoStep;
  fail(ErrorKind::kInvalidInput, "unknown search mode '" + s + "'");
}

void SearchParams::validate() const {
  require(k >= 1, "k must be >= 1");
  require(query_cut >= 1, "query_cut must be >= 1");
  require(heap_factor >= 1.0 && !std::isnan(heap_factor), "heap_factor must be >= 1");
}

void TwoStepConfig::validate(std::size_t final_k) const {
  stage1.validate();
  require(stage1_k >= 1 && stage2_k_q >= 1, "two-step budgets must be >= 1");
  require(stage1_k >= final_k, "stage1_k must be >= the final k");
  require(stage1_heap_factor >= 1.0, "heap_factor must be >= 1");
}

Searcher::Searcher(const InvertedIndex& idx)
    : idx_(&idx), acc_(idx.doc_count(), 0.0f), seen_(idx.doc_count(), 0), dense_(idx.vocab_size()) {}

void Searcher::check_vocab(SparseView q) const {
  if (idx_->doc_count() == 0) return;
  require(q.vocab_size == idx_->vocab_size(), "query vocab size " + std::to_string(q.vocab_size) +
                                                  " does not match index vocab size " +
                                                  std::to_string(idx_->vocab_size()));
}

std::vector<ScoredDoc> Searcher::exact(SparseView q, std::size_t k) {
  require(k >= 1, "k must be >= 1");
  check_vocab(q);
  if (q.empty() || idx_->doc_count() == 0) return {};

  for (std::size_t i = 0; i < q.nnz(); ++i) {
    const float qt = q.weights[i];
    const auto pl = idx_->postings(q.terms[i]);
    for (std::size_t j = 0; j < pl.size(); ++j) {
      const DocOrd d = pl.doc_ords[j];
      if (!seen_[d]) {
        seen_[d] = 1;
        acc_[d] = 0.0f;
        touched_.push_back(d);
      }
      acc_[d] += qt * pl.impacts[j];
    }
  }

  TopK top(k, idx_->doc_ids());
  for (DocOrd d : touched_) {
    top.push({d, acc_[d]});
    seen_[d] = 0;
  }
  touched_.clear();
  return std::move(top).take_sorted();
}

std::vector<ScoredDoc> Searcher::approximate(SparseView q_full, const SearchParams& params) {
  params.validate();
  check_vocab(q_full);
  if (q_full.empty() || idx_->doc_count() == 0) return {};

  const SparseVector q = prune(q_full, params.query_cut);
  const auto qt_terms = q.terms();
  const auto qt_weights = q.weights();

  // Most promising lists first: q_t * max_impact[t].
  std::vector<std::uint32_t> order;
  order.reserve(q.nnz());
  for (std::uint32_t i = 0; i < q.nnz(); ++i) {
    if (!idx_->postings(qt_terms[i]).empty()) order.push_back(i);
  }
  std::sort(order.begin(), order.end(), [&](std::uint32_t a, std::uint32_t b) {
    const float ua = qt_weights[a] * idx_->max_impact(qt_terms[a]);
    const float ub = qt_weights[b] * idx_->max_impact(qt_terms[b]);
    if (ua != ub) return ua > ub;
    return qt_terms[a] < qt_terms[b];
  });

  dense_.load(q);
  TopK top(params.k, idx_->doc_ids());
  double threshold = 0.0;

  for (std::uint32_t i : order) {
    const float qt = qt_weights[i];
    const TermId t = qt_terms[i];
    // Lists are visited in descending upper bound, so once a whole list falls
    // under the threshold every later one does too.
    if (static_cast<double>(qt * idx_->max_impact(t)) < threshold) break;
    const auto pl = idx_->postings(t);
    for (std::size_t j = 0; j < pl.size(); ++j) {
      if (static_cast<double>(qt * pl.impacts[j]) < threshold) break;
      const DocOrd d = pl.doc_ords[j];
      if (seen_[d]) continue;
      seen_[d] = 1;
      touched_.push_back(d);
      top.push({d, dense_.dot(idx_->forward(d))});
      if (top.full()) threshold = static_cast<double>(top.worst()) / params.heap_factor;
    }
  }

  for (DocOrd d : touched_) seen_[d] = 0;
  touched_.clear();
  dense_.clear();
  return std::move(top).take_sorted();
}

std::vector<ScoredDoc> Searcher::rescore(SparseView q, std::span<const DocOrd> candidates, std::size_t k) {
  require(k >= 1, "k must be >= 1");
  check_vocab(q);
  if (candidates.empty()) return {};
  dense_.load(q);
  TopK top(k, idx_->doc_ids());
  for (DocOrd d : candidates) top.push({d, dense_.dot(idx_->forward(d))});
  dense_.clear();
  return std::move(top).take_sorted();
}

RankedList Searcher::search(const std::string& query_id, SparseView q, const SearchParams& params) {
  params.validate();
  const auto start = Clock::now();
  std::vector<ScoredDoc> docs;
  switch (params.mode) {
    case SearchMode::kExact:
      docs = exact(q, params.k);
      break;
    case SearchMode::kApproximate:
      docs = approximate(q, params);
      break;
    case SearchMode::kTwoStep:
      fail(ErrorKind::kInvalidInput, "two-step search needs a TwoStepSearcher (two indexes)");
  }
  const auto ns = elapsed_ns(start);
  return to_ranked_list(*idx_, query_id, docs, ns);
}

TwoStepSearcher::TwoStepSearcher(const InvertedIndex& stage1, const InvertedIndex& main, TwoStepConfig cfg)
    : stage1_(stage1), main_(main), cfg_(cfg) {
  cfg_.stage1.validate();
  require(stage1.vocab_size() == main.vocab_size() || stage1.doc_count() == 0,
          "two-step: stage-1 and main indexes have different vocab sizes");
  require(stage1.doc_count() == main.doc_count(), "two-step: stage-1 and main indexes cover different corpora");
  if (stage1.doc_ids() != main.doc_ids()) {
    to_main_.resize(stage1.doc_count());
    for (DocOrd d = 0; d < stage1.doc_count(); ++d) {
      const auto m = main.find(stage1.doc_id(d));
      require(m.has_value(), "two-step: doc id '" + stage1.doc_id(d) + "' missing from the main index");
      to_main_[d] = *m;
    }
  }
}

std::vector<ScoredDoc> TwoStepSearcher::search_ords(SparseView q_raw, std::size_t k) {
  cfg_.validate(k);
  SearchParams p1;
  p1.k = cfg_.stage1_k;
  p1.query_cut = cfg_.stage1.k_q;
  p1.heap_factor = cfg_.stage1_heap_factor;
  const auto first = stage1_.approximate(q_raw, p1);

  candidates_.clear();
  candidates_.reserve(first.size());
  for (const auto& sd : first) candidates_.push_back(to_main_.empty() ? sd.ord : to_main_[sd.ord]);

  const SparseVector q2 = prune(q_raw, cfg_.stage2_k_q);
  return main_.rescore(q2, candidates_, k);
}

RankedList TwoStepSearcher::search(const std::string& query_id, SparseView q_raw, std::size_t k) {
  const auto start = Clock::now();
  const auto docs = search_ords(q_raw, k);
  const auto ns = elapsed_ns(start);
  return to_ranked_list(main_.index(), query_id, docs, ns);
}

RankedList to_ranked_list(const InvertedIndex& idx, const std::string& query_id, std::span<const ScoredDoc> docs,
                          std::uint64_t latency_ns) {
  RankedList out;
  out.query_id = query_id;
  out.latency_ns = latency_ns;
  out.hits.reserve(docs.size());
  for (const auto& sd : docs) out.hits.push_back({idx.doc_id(sd.ord), static_cast<double>(sd.score)});
  return out;
}

RankedList search_exact(const InvertedIndex& idx, SparseView q, std::size_t k, const std::string& query_id) {
  SearchParams p;
  p.k = k;
  p.mode = SearchMode::kExact;
  return Searcher(idx).search(query_id, q, p);
}

RankedList search_approx(const InvertedIndex& idx, SparseView q, const SearchParams& params,
                         const std::string& query_id) {
  SearchParams p = params;
  p.mode = SearchMode::kApproximate;
  return Searcher(idx).search(query_id, q, p);
}

RankedList search_two_step(const InvertedIndex& idx_stage1, const InvertedIndex& idx_main, SparseView q_raw,
                           const TwoStepConfig& cfg, std::size_t k, const std::string& query_id) {
  return TwoStepSearcher(idx_stage1, idx_main, cfg).search(query_id, q_raw, k);
}

std::vector<TermContribution> explain_match(SparseView q, SparseView d, std::size_t top_n) {
  require(q.vocab_size == d.vocab_size, "explain: vocab size mismatch");
  std::vector<TermContribution> out;
  std::size_t i = 0, j = 0;
  while (i < q.nnz() && j < d.nnz()) {
    if (q.terms[i] == d.terms[j]) {
      out.push_back({q.terms[i], q.weights[i], d.weights[j], q.weights[i] * d.weights[j]});
      ++i;
      ++j;
    } else if (q.terms[i] < d.terms[j]) {
      ++i;
    } else {
      ++j;
    }
  }
  std::sort(out.begin(), out.end(), [](const TermContribution& a, const TermContribution& b) {
    if (a.contribution != b.contribution) return a.contribution > b.contribution;
    return a.term < b.term;
  });
  if (out.size() > top_n) out.resize(top_n);
  return out;
}

}  // namespace lsr
