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

#include "lsr/bm25.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <unordered_set>

#include "lsr/error.hpp"

namespace lsr {

std::uint32_t Bm25Index::df(TokenId t) const noexcept {
  auto it = postings_.find(t);
  return it == postings_.end() ? 0u : static_cast<std::uint32_t>(it->second.size());
}

std::span<const Bm25Index::Posting> Bm25Index::postings(TokenId t) const noexcept {
  auto it = postings_.find(t);
  if (it == postings_.end()) return {};
  return it->second;
}

double Bm25Index::idf(TokenId t) const noexcept {
  const double n = static_cast<double>(doc_count());
  const double d = static_cast<double>(df(t));
  return std::log(1.0 + (n - d + 0.5) / (d + 0.5));
}

Bm25Index build_bm25(std::span<const TokenDoc> corpus, Bm25Params params) {
  require(params.k1 >= 0.0 && params.b >= 0.0 && params.b <= 1.0, "bm25: need k1 >= 0 and b in [0, 1]");
  Bm25Index idx;
  idx.params_ = params;
  std::unordered_set<std::string> ids;
  std::unordered_map<TokenId, std::uint32_t> tf;
  std::uint64_t total_len = 0;
  for (const auto& doc : corpus) {
    if (!ids.insert(doc.doc_id).second) fail(ErrorKind::kBuild, "duplicate doc id '" + doc.doc_id + "'");
    const auto ord = static_cast<DocOrd>(idx.doc_ids_.size());
    idx.doc_ids_.push_back(doc.doc_id);
    idx.doc_len_.push_back(static_cast<std::uint32_t>(doc.tokens.size()));
    total_len += doc.tokens.size();

    tf.clear();
    for (TokenId t : doc.tokens) ++tf[t];
    for (const auto& [t, count] : tf) idx.postings_[t].push_back({ord, count});
  }
  idx.avg_len_ = idx.doc_ids_.empty() ? 0.0 : static_cast<double>(total_len) / static_cast<double>(idx.doc_ids_.size());
  return idx;
}

Bm25Searcher::Bm25Searcher(const Bm25Index& idx)
    : idx_(&idx), acc_(idx.doc_count(), 0.0), seen_(idx.doc_count(), 0) {}

RankedList Bm25Searcher::search(const std::string& query_id, std::span<const TokenId> query_tokens, std::size_t k) {
  require(k >= 1, "k must be >= 1");
  const auto start = std::chrono::steady_clock::now();

  std::vector<TokenId> terms(query_tokens.begin(), query_tokens.end());
  std::sort(terms.begin(), terms.end());
  terms.erase(std::unique(terms.begin(), terms.end()), terms.end());

  const auto& p = idx_->params();
  const double avg = idx_->avg_len();
  for (TokenId t : terms) {
    const auto pl = idx_->postings(t);
    if (pl.empty()) continue;
    const double idf = idx_->idf(t);
    for (const auto& post : pl) {
      const double tf = post.tf;
      const double len = idx_->doc_len(post.doc_ord);
      const double norm = avg > 0.0 ? len / avg : 0.0;
      const double s = idf * (tf * (p.k1 + 1.0)) / (tf + p.k1 * (1.0 - p.b + p.b * norm));
      if (!seen_[post.doc_ord]) {
        seen_[post.doc_ord] = 1;
        acc_[post.doc_ord] = 0.0;
        touched_.push_back(post.doc_ord);
      }
      acc_[post.doc_ord] += s;
    }
  }

  const auto& ids = idx_->doc_ids();
  auto better = [&](DocOrd a, DocOrd b) {
    if (acc_[a] != acc_[b]) return acc_[a] > acc_[b];
    return ids[a] < ids[b];
  };
  const std::size_t keep = std::min(k, touched_.size());
  std::partial_sort(touched_.begin(), touched_.begin() + static_cast<std::ptrdiff_t>(keep), touched_.end(), better);

  RankedList out;
  out.query_id = query_id;
  std::vector<std::pair<DocOrd, double>> top;
  top.reserve(keep);
  for (std::size_t i = 0; i < keep; ++i) top.emplace_back(touched_[i], acc_[touched_[i]]);
  for (DocOrd d : touched_) seen_[d] = 0;
  touched_.clear();
  out.latency_ns = static_cast<std::uint64_t>(
      std::chrono::duration_cast<std::chrono::nanoseconds>(std::chrono::steady_clock::now() - start).count());

  out.hits.reserve(keep);
  for (const auto& [d, s] : top) out.hits.push_back({ids[d], s});
  return out;
}

RankedList bm25_search(const Bm25Index& idx, std::span<const TokenId> query_tokens, std::size_t k,
                       const std::string& query_id) {
  return Bm25Searcher(idx).search(query_id, query_tokens, k);
}

}  // namespace lsr
