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

#include "lsr/index.hpp"

#include <algorithm>
#include <bit>
#include <fstream>
#include <numeric>
#include <sstream>

#include "binary_io.hpp"
#include "lsr/error.hpp"

namespace lsr {

std::optional<DocOrd> InvertedIndex::find(const std::string& doc_id) const {
  auto it = ord_by_id_.find(doc_id);
  if (it == ord_by_id_.end()) return std::nullopt;
  return it->second;
}

PostingsView InvertedIndex::postings(TermId term) const noexcept {
  if (term >= vocab_size_) return {};
  const auto b = post_offsets_[term];
  const auto e = post_offsets_[term + 1];
  return {std::span<const DocOrd>(post_ords_).subspan(b, e - b),
          std::span<const Weight>(post_impacts_).subspan(b, e - b)};
}

Weight InvertedIndex::max_impact(TermId term) const noexcept {
  return term < vocab_size_ ? max_impact_[term] : 0.0f;
}

SparseView InvertedIndex::forward(DocOrd ord) const noexcept {
  const auto b = fwd_offsets_[ord];
  const auto e = fwd_offsets_[ord + 1];
  return {vocab_size_, std::span<const TermId>(fwd_terms_).subspan(b, e - b),
          std::span<const Weight>(fwd_weights_).subspan(b, e - b)};
}

std::size_t InvertedIndex::non_empty_terms() const noexcept {
  std::size_t n = 0;
  for (std::uint32_t t = 0; t < vocab_size_; ++t) n += post_offsets_[t + 1] != post_offsets_[t];
  return n;
}

void InvertedIndex::rebuild_id_map() {
  ord_by_id_.clear();
  ord_by_id_.reserve(doc_ids_.size());
  for (DocOrd d = 0; d < doc_ids_.size(); ++d) ord_by_id_.emplace(doc_ids_[d], d);
}

// Inverts the forward store. Ordinals are visited in ascending order, so a
// stable sort on impact leaves ties in ascending ordinal order.
void InvertedIndex::finalize_postings() {
  post_offsets_.assign(static_cast<std::size_t>(vocab_size_) + (vocab_size_ > 0 ? 1 : 0), 0);
  max_impact_.assign(vocab_size_, 0.0f);
  if (vocab_size_ == 0) return;

  for (TermId t : fwd_terms_) ++post_offsets_[t + 1];
  std::partial_sum(post_offsets_.begin(), post_offsets_.end(), post_offsets_.begin());

  std::vector<Posting> flat(fwd_terms_.size());
  std::vector<std::uint64_t> cursor(post_offsets_.begin(), post_offsets_.end() - 1);
  for (DocOrd d = 0; d < doc_count(); ++d) {
    for (auto i = fwd_offsets_[d]; i < fwd_offsets_[d + 1]; ++i) {
      flat[cursor[fwd_terms_[i]]++] = {d, fwd_weights_[i]};
    }
  }
  for (std::uint32_t t = 0; t < vocab_size_; ++t) {
    auto b = flat.begin() + static_cast<std::ptrdiff_t>(post_offsets_[t]);
    auto e = flat.begin() + static_cast<std::ptrdiff_t>(post_offsets_[t + 1]);
    std::stable_sort(b, e, [](const Posting& x, const Posting& y) { return x.impact > y.impact; });
    if (b != e) max_impact_[t] = b->impact;
  }
  post_ords_.resize(flat.size());
  post_impacts_.resize(flat.size());
  for (std::size_t i = 0; i < flat.size(); ++i) {
    post_ords_[i] = flat[i].doc_ord;
    post_impacts_[i] = flat[i].impact;
  }
}

IndexBuilder::IndexBuilder(std::uint32_t k_d, std::uint32_t vocab_size) {
  require(k_d >= 1, "k_d must be >= 1");
  idx_.k_d_ = k_d;
  idx_.vocab_size_ = vocab_size;
}

void IndexBuilder::add(const std::string& doc_id, SparseView vec) {
  if (idx_.vocab_size_ == 0) idx_.vocab_size_ = vec.vocab_size;
  if (vec.vocab_size != idx_.vocab_size_) {
    fail(ErrorKind::kBuild, "document '" + doc_id + "' has vocab size " + std::to_string(vec.vocab_size) +
                                ", index expects " + std::to_string(idx_.vocab_size_));
  }
  const auto ord = static_cast<DocOrd>(idx_.doc_ids_.size());
  if (!idx_.ord_by_id_.emplace(doc_id, ord).second) fail(ErrorKind::kBuild, "duplicate doc id '" + doc_id + "'");
  idx_.doc_ids_.push_back(doc_id);

  const SparseVector pruned = prune(vec, idx_.k_d_);
  idx_.fwd_terms_.insert(idx_.fwd_terms_.end(), pruned.terms().begin(), pruned.terms().end());
  idx_.fwd_weights_.insert(idx_.fwd_weights_.end(), pruned.weights().begin(), pruned.weights().end());
  idx_.fwd_offsets_.push_back(idx_.fwd_terms_.size());
}

InvertedIndex IndexBuilder::finish() && {
  idx_.finalize_postings();
  return std::move(idx_);
}

InvertedIndex build_index(std::span<const std::pair<std::string, SparseVector>> corpus, std::uint32_t k_d) {
  IndexBuilder b(k_d);
  for (const auto& [id, vec] : corpus) b.add(id, vec);
  return std::move(b).finish();
}

void write_index(const InvertedIndex& idx, std::ostream& out) {
  detail::BinaryWriter w(out);
  w.bytes("LSRI");
  w.put<std::uint32_t>(kIndexVersion);
  w.put<std::uint32_t>(idx.vocab_size());
  w.put<std::uint32_t>(static_cast<std::uint32_t>(idx.doc_count()));
  w.put<std::uint32_t>(idx.k_d());
  for (const auto& id : idx.doc_ids()) w.string(id);

  w.put<std::uint32_t>(static_cast<std::uint32_t>(idx.non_empty_terms()));
  for (TermId t = 0; t < idx.vocab_size(); ++t) {
    const auto pl = idx.postings(t);
    if (pl.empty()) continue;
    w.put<std::uint32_t>(t);
    w.put<std::uint32_t>(static_cast<std::uint32_t>(pl.size()));
    for (std::size_t i = 0; i < pl.size(); ++i) {
      w.put<std::uint32_t>(pl.doc_ords[i]);
      w.put<float>(pl.impacts[i]);
    }
  }
  for (DocOrd d = 0; d < idx.doc_count(); ++d) {
    const auto fv = idx.forward(d);
    w.put<std::uint32_t>(static_cast<std::uint32_t>(fv.nnz()));
    for (std::size_t i = 0; i < fv.nnz(); ++i) {
      w.put<std::uint32_t>(fv.terms[i]);
      w.put<float>(fv.weights[i]);
    }
  }
  w.check("index");
}

InvertedIndex read_index(std::istream& in) {
  detail::BinaryReader r(in, "index");
  char magic[4];
  r.raw(magic, 4, "magic");
  if (std::string_view(magic, 4) != "LSRI") fail(ErrorKind::kFormat, "index: bad magic bytes");
  const auto version = r.get<std::uint32_t>("version");
  if (version != kIndexVersion) fail(ErrorKind::kFormat, "index: unsupported version " + std::to_string(version));

  InvertedIndex idx;
  idx.vocab_size_ = r.get<std::uint32_t>("vocab_size");
  const auto doc_count = r.get<std::uint32_t>("doc_count");
  idx.k_d_ = r.get<std::uint32_t>("k_d");
  if (idx.k_d_ == 0) fail(ErrorKind::kFormat, "index: k_d must be >= 1");
  if (doc_count > 0 && idx.vocab_size_ == 0) fail(ErrorKind::kFormat, "index: documents with zero vocab size");
  idx.doc_ids_.reserve(doc_count);
  for (std::uint32_t d = 0; d < doc_count; ++d) idx.doc_ids_.push_back(r.string("doc id"));
  idx.rebuild_id_map();
  if (idx.ord_by_id_.size() != idx.doc_ids_.size()) fail(ErrorKind::kFormat, "index: duplicate doc ids");

  // Postings are re-derived from the forward store below; the stored section
  // must match that derivation exactly.
  struct StoredList {
    TermId term;
    std::vector<Posting> postings;
  };
  const auto term_count = r.get<std::uint32_t>("term_count");
  if (term_count > idx.vocab_size_) fail(ErrorKind::kFormat, "index: term_count exceeds vocab size");
  std::vector<StoredList> stored(term_count);
  for (auto& list : stored) {
    list.term = r.get<std::uint32_t>("term id");
    const auto len = r.get<std::uint32_t>("postings length");
    if (len > doc_count) fail(ErrorKind::kFormat, "index: postings list longer than doc count" + r.at());
    list.postings.resize(len);
    for (auto& p : list.postings) {
      p.doc_ord = r.get<std::uint32_t>("doc ord");
      p.impact = r.get<float>("impact");
    }
  }

  for (std::uint32_t d = 0; d < doc_count; ++d) {
    const auto nnz = r.get<std::uint32_t>("forward nnz");
    if (nnz > idx.k_d_ || nnz > idx.vocab_size_) fail(ErrorKind::kFormat, "index: forward vector exceeds k_d" + r.at());
    const auto base = idx.fwd_terms_.size();
    idx.fwd_terms_.resize(base + nnz);
    idx.fwd_weights_.resize(base + nnz);
    for (std::uint32_t i = 0; i < nnz; ++i) {
      idx.fwd_terms_[base + i] = r.get<std::uint32_t>("forward term");
      idx.fwd_weights_[base + i] = r.get<float>("forward weight");
    }
    try {
      SparseVector(idx.vocab_size_, {idx.fwd_terms_.begin() + static_cast<std::ptrdiff_t>(base), idx.fwd_terms_.end()},
                   {idx.fwd_weights_.begin() + static_cast<std::ptrdiff_t>(base), idx.fwd_weights_.end()});
    } catch (const Error& e) {
      fail(ErrorKind::kFormat, "index: invalid forward vector for doc " + std::to_string(d) + ": " + e.what());
    }
    idx.fwd_offsets_.push_back(idx.fwd_terms_.size());
  }
  if (!r.at_eof()) fail(ErrorKind::kFormat, "index: trailing bytes after forward section");

  idx.finalize_postings();

  std::size_t stored_total = 0;
  TermId prev = 0;
  for (std::size_t i = 0; i < stored.size(); ++i) {
    const auto& list = stored[i];
    if (list.term >= idx.vocab_size_ || (i > 0 && list.term <= prev)) {
      fail(ErrorKind::kFormat, "index: postings terms out of range or unsorted");
    }
    prev = list.term;
    const auto pl = idx.postings(list.term);
    if (pl.size() != list.postings.size()) {
      fail(ErrorKind::kFormat, "index: postings for term " + std::to_string(list.term) + " disagree with forward store");
    }
    for (std::size_t j = 0; j < pl.size(); ++j) {
      if (pl.doc_ords[j] != list.postings[j].doc_ord ||
          std::bit_cast<std::uint32_t>(pl.impacts[j]) != std::bit_cast<std::uint32_t>(list.postings[j].impact)) {
        fail(ErrorKind::kFormat, "index: postings for term " + std::to_string(list.term) + " disagree with forward store");
      }
    }
    stored_total += list.postings.size();
  }
  if (stored_total != idx.total_postings()) fail(ErrorKind::kFormat, "index: postings count disagrees with forward store");
  return idx;
}

void save_index(const InvertedIndex& idx, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorKind::kIo, "cannot open '" + path.string() + "' for writing");
  write_index(idx, out);
  out.close();
  if (!out) fail(ErrorKind::kIo, "failed writing '" + path.string() + "'");
}

InvertedIndex load_index(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::kIo, "cannot open '" + path.string() + "'");
  return read_index(in);
}

}  // namespace lsr
