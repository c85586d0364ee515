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

#include "lsr/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>

#include "lsr/error.hpp"
#include "lsr/rng.hpp"

namespace lsr {

AliasTable::AliasTable(std::span<const double> weights) : prob_(weights.size()), alias_(weights.size()) {
  require(!weights.empty(), "alias table needs at least one weight");
  const double total = std::accumulate(weights.begin(), weights.end(), 0.0);
  require(total > 0.0, "alias table weights must sum to a positive value");
  const auto n = weights.size();
  std::vector<double> scaled(n);
  std::vector<std::uint32_t> small, large;
  for (std::size_t i = 0; i < n; ++i) {
    scaled[i] = weights[i] * static_cast<double>(n) / total;
    (scaled[i] < 1.0 ? small : large).push_back(static_cast<std::uint32_t>(i));
  }
  while (!small.empty() && !large.empty()) {
    const auto s = small.back();
    small.pop_back();
    const auto l = large.back();
    prob_[s] = scaled[s];
    alias_[s] = l;
    scaled[l] = (scaled[l] + scaled[s]) - 1.0;
    if (scaled[l] < 1.0) {
      large.pop_back();
      small.push_back(l);
    }
  }
  for (auto i : large) prob_[i] = 1.0, alias_[i] = i;
  for (auto i : small) prob_[i] = 1.0, alias_[i] = i;
}

std::uint32_t AliasTable::sample(Xoshiro256& rng) const {
  const auto i = static_cast<std::uint32_t>(rng.below(prob_.size()));
  return rng.uniform() < prob_[i] ? i : alias_[i];
}

AliasTable make_zipf(std::uint32_t n, double exponent) {
  std::vector<double> w(n);
  for (std::uint32_t r = 0; r < n; ++r) w[r] = 1.0 / std::pow(static_cast<double>(r) + 1.0, exponent);
  return AliasTable(w);
}

void SynthSpec::validate() const {
  require(vocab_size >= 1 && doc_count >= 1 && mean_doc_nnz >= 1 && query_count >= 1 && mean_query_nnz >= 1 &&
              relevant_per_query >= 1,
          "synthetic spec: all counts must be >= 1");
  require(overlap_strength > 0.0 && overlap_strength <= 1.0, "synthetic spec: overlap_strength must be in (0, 1]");
  require(zipf_exponent > 0.0, "synthetic spec: zipf_exponent must be positive");
  if (relevant_per_query > doc_count) {
    fail(ErrorKind::kInvalidInput, "synthetic spec infeasible: relevant_per_query (" +
                                       std::to_string(relevant_per_query) + ") exceeds doc_count (" +
                                       std::to_string(doc_count) + ")");
  }
}

std::string synth_doc_id(std::uint32_t i) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "d%07u", i);
  return buf;
}

std::string synth_query_id(std::uint32_t i) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "q%06u", i);
  return buf;
}

namespace {

class Generator {
 public:
  explicit Generator(const SynthSpec& spec)
      : spec_(spec), rng_(spec.seed), zipf_(make_zipf(spec.vocab_size, spec.zipf_exponent)),
        stamp_(spec.vocab_size, 0) {
    idf_.resize(spec.vocab_size);
    const double denom = std::log1p(static_cast<double>(spec.vocab_size));
    for (std::uint32_t r = 0; r < spec.vocab_size; ++r) idf_[r] = 0.1 + 0.9 * std::log1p(static_cast<double>(r)) / denom;
  }

  std::uint32_t size_around(std::uint32_t mean) {
    const std::uint32_t lo = std::max<std::uint32_t>(1, mean / 2);
    const std::uint32_t hi = std::max(lo, mean + mean / 2);
    return std::min(spec_.vocab_size, lo + static_cast<std::uint32_t>(rng_.below(hi - lo + 1)));
  }

  float base_weight(TermId t) { return static_cast<float>((0.5 + rng_.exponential()) * idf_[t]); }

  // Starts a fresh membership set for one vector.
  void new_set() { ++epoch_; }
  bool insert(TermId t) {
    if (stamp_[t] == epoch_) return false;
    stamp_[t] = epoch_;
    return true;
  }
  TermId zipf_term() { return zipf_.sample(rng_); }

  SparseVector make_doc() {
    const auto target = size_around(spec_.mean_doc_nnz);
    new_set();
    std::vector<SparseVector::Entry> entries;
    entries.reserve(target);
    while (entries.size() < target) {
      const TermId t = zipf_term();
      if (insert(t)) entries.push_back({t, 0.0f});
    }
    std::sort(entries.begin(), entries.end(), [](const auto& a, const auto& b) { return a.term < b.term; });
    for (auto& e : entries) e.weight = base_weight(e.term);
    return SparseVector::from_entries(spec_.vocab_size, std::move(entries));
  }

  SparseVector make_query(std::span<const SparseVector* const> relevant) {
    const std::uint32_t shared = static_cast<std::uint32_t>(
        std::ceil(spec_.overlap_strength * static_cast<double>(spec_.mean_query_nnz)));
    const auto target = size_around(spec_.mean_query_nnz);
    new_set();
    std::vector<SparseVector::Entry> entries;
    for (const SparseVector* doc : relevant) {
      // Pool: the doc's 2 * shared heaviest terms; pick `shared` of them.
      std::vector<std::uint32_t> pool(doc->nnz());
      std::iota(pool.begin(), pool.end(), 0u);
      const auto w = doc->weights();
      std::sort(pool.begin(), pool.end(), [&](auto a, auto b) { return w[a] != w[b] ? w[a] > w[b] : a < b; });
      pool.resize(std::min<std::size_t>(pool.size(), 2 * static_cast<std::size_t>(shared)));
      const std::size_t take = std::min<std::size_t>(shared, pool.size());
      for (std::size_t i = 0; i < take; ++i) {
        std::swap(pool[i], pool[i + rng_.below(pool.size() - i)]);
        const TermId t = doc->terms()[pool[i]];
        const float qw = 2.0f * base_weight(t);
        if (insert(t)) {
          entries.push_back({t, qw});
        } else {
          for (auto& e : entries) {
            if (e.term == t) e.weight = std::max(e.weight, qw);
          }
        }
      }
    }
    while (entries.size() < target && entries.size() < spec_.vocab_size) {
      const TermId t = zipf_term();
      if (insert(t)) entries.push_back({t, base_weight(t)});
    }
    return SparseVector::from_entries(spec_.vocab_size, std::move(entries));
  }

  TokenDoc doc_tokens(const std::string& id, SparseView v) {
    TokenDoc d{id, {}};
    for (TermId t : v.terms) {
      const auto tf = 1 + static_cast<std::uint32_t>(std::floor(rng_.exponential() * 0.5));
      d.tokens.insert(d.tokens.end(), tf, t);
    }
    shuffle(d.tokens);
    return d;
  }

  TokenDoc query_tokens(const std::string& id, SparseView v) {
    TokenDoc d{id, {v.terms.begin(), v.terms.end()}};
    shuffle(d.tokens);
    return d;
  }

  Xoshiro256& rng() { return rng_; }

 private:
  void shuffle(std::vector<TokenId>& xs) {
    for (std::size_t i = xs.size(); i > 1; --i) std::swap(xs[i - 1], xs[rng_.below(i)]);
  }

  const SynthSpec& spec_;
  Xoshiro256 rng_;
  AliasTable zipf_;
  std::vector<double> idf_;
  std::vector<std::uint32_t> stamp_;
  std::uint32_t epoch_ = 0;
};

}  // namespace

SyntheticData generate_synthetic(const SynthSpec& spec) {
  spec.validate();
  Generator gen(spec);
  SyntheticData out;
  out.vocab_size = spec.vocab_size;

  out.docs.reserve(spec.doc_count);
  for (std::uint32_t i = 0; i < spec.doc_count; ++i) out.docs.push_back({synth_doc_id(i), gen.make_doc()});

  out.queries.reserve(spec.query_count);
  std::vector<std::uint32_t> chosen;
  std::vector<const SparseVector*> relevant;
  for (std::uint32_t q = 0; q < spec.query_count; ++q) {
    chosen.clear();
    while (chosen.size() < spec.relevant_per_query) {
      const auto d = static_cast<std::uint32_t>(gen.rng().below(spec.doc_count));
      if (std::find(chosen.begin(), chosen.end(), d) == chosen.end()) chosen.push_back(d);
    }
    relevant.clear();
    for (auto d : chosen) relevant.push_back(&out.docs[d].vec);
    const auto qid = synth_query_id(q);
    out.queries.push_back({qid, gen.make_query(relevant)});
    for (auto d : chosen) out.qrels.add(qid, out.docs[d].id, 1);
  }

  if (!spec.make_tokens) return out;
  out.doc_tokens.reserve(spec.doc_count);
  for (const auto& d : out.docs) out.doc_tokens.push_back(gen.doc_tokens(d.id, d.vec));
  for (const auto& q : out.queries) out.query_tokens.push_back(gen.query_tokens(q.id, q.vec));
  return out;
}

}  // namespace lsr
