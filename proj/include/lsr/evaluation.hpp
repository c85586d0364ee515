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
#include <functional>
#include <iosfwd>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "lsr/retrieval.hpp"

namespace lsr {

/// Graded relevance judgments: (query id, doc id) -> grade >= 0.
class Qrels {
 public:
  /// Throws kValidation on a repeated (qid, docid) pair.
  void add(const std::string& qid, const std::string& docid, int grade);

  bool has_query(const std::string& qid) const { return judgments_.count(qid) != 0; }
  int grade(const std::string& qid, const std::string& docid) const;
  const std::map<std::string, int>& judged(const std::string& qid) const;
  const std::map<std::string, std::map<std::string, int>>& all() const noexcept { return judgments_; }
  std::size_t size() const noexcept;

 private:
  std::map<std::string, std::map<std::string, int>> judgments_;
};

/// Ranked output per query, hits in rank order (rank = position + 1).
using RunFile = std::map<std::string, std::vector<Hit>>;

RunFile to_run(const std::vector<RankedList>& lists);

/// TREC qrels: "qid 0 docid rel" per line.
Qrels read_qrels(std::istream& in);
Qrels read_qrels(const std::string& path);
void write_qrels(std::ostream& out, const Qrels& qrels);

/// TREC run: "qid Q0 docid rank score tag". Ranks must be contiguous from 1
/// and scores non-increasing with rank, else kFormat naming the query.
RunFile read_run(std::istream& in);
RunFile read_run(const std::string& path);
void write_run(std::ostream& out, const std::vector<RankedList>& lists, const std::string& tag);

struct MetricResult {
  std::map<std::string, double> per_query;
  double mean = 0.0;
  std::size_t evaluated = 0;          // queries contributing to the mean
  std::size_t missing_from_qrels = 0; // run queries without judgments (skipped)
  std::size_t no_relevant = 0;        // judged queries with no grade > 0 (score 0)
};

/// Exponential-gain nDCG@k: (2^rel - 1) / log2(rank + 1), normalized by the
/// grade-sorted ideal ranking.
MetricResult ndcg_at_k(const RunFile& run, const Qrels& qrels, std::size_t k = 10);

/// Reciprocal rank of the first document with grade > 0 within the top k.
MetricResult mrr_at_k(const RunFile& run, const Qrels& qrels, std::size_t k = 10);

/// Fraction of relevant (grade > 0) documents retrieved in the top k.
MetricResult recall_at_k(const RunFile& run, const Qrels& qrels, std::size_t k);

/// Mean over queries of |approx@k intersect exact@k| / |exact@k|; a query
/// whose exact list is empty counts as fully recovered. Query sets must match.
double recall_vs_exact(const RunFile& approx, const RunFile& exact, std::size_t k);

struct ExpansionRatio {
  double input_fraction = 0.0;
  double expansion_fraction = 0.0;
  std::size_t considered = 0;  // min(top_n, nnz)
  bool empty = false;          // vector had no active terms
};

/// Splits the top_n heaviest terms of `v` into those present in the input and
/// expansion terms.
ExpansionRatio expansion_ratio(const std::set<TermId>& input_terms, SparseView v, std::size_t top_n = 25);

struct LatencyReport {
  std::vector<std::uint64_t> samples_ns;  // one per query, recording order
  double mean_ns = 0.0;
  std::uint64_t p50_ns = 0;
  std::uint64_t p95_ns = 0;
  std::uint64_t p99_ns = 0;
  double queries_per_sec = 0.0;
  std::string measure = "latency";  // "throughput" for the multi-threaded mode
  std::size_t threads = 1;
  std::size_t repetitions = 0;
  std::string label;       // free-form config echo, e.g. "approximate k=1000 ..."
  SearchParams params;
  std::string error;       // non-empty when no samples could be taken
};

/// Nearest-rank percentile (p in (0, 100]) of unsorted samples.
std::uint64_t nearest_rank(std::vector<std::uint64_t> samples, double p);

/// Fills the summary fields from samples_ns.
void summarize(LatencyReport& report);

/// Runs one warm-up sweep, then `repetitions` timed sweeps of run_query(i)
/// for i in [0, n_queries). Each sample is the mean over repetitions for that
/// query. With threads > 1 the queries are split across workers and
/// queries_per_sec is computed from wall time (measure = "throughput");
/// make_worker is called once per thread to build private scratch.
using QueryFn = std::function<void(std::size_t)>;
LatencyReport bench_queries(std::size_t n_queries, std::size_t repetitions, std::size_t threads,
                            const std::function<QueryFn()>& make_worker);

/// Retrieval-only latency of exact or approximate search.
LatencyReport bench_search(const InvertedIndex& idx, std::span<const SparseVector> queries,
                           const SearchParams& params, std::size_t repetitions = 3, std::size_t threads = 1);

LatencyReport bench_two_step(const InvertedIndex& stage1, const InvertedIndex& main,
                             std::span<const SparseVector> queries, const TwoStepConfig& cfg, std::size_t k,
                             std::size_t repetitions = 3, std::size_t threads = 1);

/// Times `count` dot products of one query against consecutive documents of
/// `docs` (cycled), through the dense-query rescoring path. Returns mean
/// nanoseconds per batch of `count` products over `batches` batches.
double bench_dot_batch(SparseView query, std::span<const SparseVector> docs, std::size_t count,
                       std::size_t batches);

/// Same, through the merge-join dot product.
double bench_dot_batch_merge(SparseView query, std::span<const SparseVector> docs, std::size_t count,
                             std::size_t batches);

}  // namespace lsr
