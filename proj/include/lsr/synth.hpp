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
#include <string>
#include <vector>

#include "lsr/bm25.hpp"
#include "lsr/corpus_io.hpp"
#include "lsr/evaluation.hpp"

namespace lsr {

/// Parameters of the synthetic collection. Term ids double as Zipf ranks
/// (term 0 is the most frequent).
struct SynthSpec {
  std::uint64_t seed = 42;
  std::uint32_t vocab_size = 100000;
  std::uint32_t doc_count = 1000;
  std::uint32_t mean_doc_nnz = 400;
  std::uint32_t query_count = 100;
  std::uint32_t mean_query_nnz = 30;
  std::uint32_t relevant_per_query = 1;
  double overlap_strength = 0.5;  // in (0, 1]
  double zipf_exponent = 1.1;
  bool make_tokens = true;  // also emit the token views

  void validate() const;
};

struct SyntheticData {
  std::uint32_t vocab_size = 0;
  std::vector<VectorRecord> docs;
  std::vector<VectorRecord> queries;
  Qrels qrels;
  std::vector<TokenDoc> doc_tokens;    // token view of each doc, same support
  std::vector<TokenDoc> query_tokens;  // token view of each query
};

/// Deterministic for a given spec (see rng.hpp for the pinned generator).
///
/// Documents draw ~U[mean/2, 3*mean/2] distinct Zipf terms with weights
/// (0.5 + Exp(1)) * idf(rank), where idf rises from 0.1 at the head to 1.0 at
/// the tail. Each query copies ceil(overlap * mean_query_nnz) terms from the
/// heavy end of every relevant document at doubled weight, then pads with
/// Zipf noise terms up to its own U[mean/2, 3*mean/2] size. Token views repeat
/// each support term 1 + floor(Exp(1)/2) times (documents) or once (queries),
/// shuffled.
SyntheticData generate_synthetic(const SynthSpec& spec);

std::string synth_doc_id(std::uint32_t i);
std::string synth_query_id(std::uint32_t i);

}  // namespace lsr
