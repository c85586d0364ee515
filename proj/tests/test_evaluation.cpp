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

#include <gtest/gtest.h>

#include <cstdio>
#include <sstream>

#include "lsr/error.hpp"
#include "lsr/evaluation.hpp"
#include "lsr/retrieval.hpp"
#include "lsr/rng.hpp"
#include "lsr/synth.hpp"
#include "reference_metrics.hpp"
#include "test_support.hpp"

namespace lsr {
namespace {

using testing::vec;

RunFile run_of(std::map<std::string, std::vector<std::string>> ranking) {
  RunFile run;
  for (auto& [qid, docs] : ranking) {
    double score = 100.0;
    for (auto& d : docs) run[qid].push_back({d, score--});
  }
  return run;
}

Qrels fixture_qrels() {
  Qrels q;
  q.add("q1", "d1", 2);
  q.add("q1", "d2", 1);
  return q;
}

TEST(Ndcg, HandFixture) {
  const auto r = ndcg_at_k(run_of({{"q1", {"d2", "d1", "d3"}}}), fixture_qrels(), 10);
  const double dcg = 1.0 + 3.0 / std::log2(3.0);
  const double idcg = 3.0 + 1.0 / std::log2(3.0);
  EXPECT_NEAR(dcg, 2.8928, 1e-4);
  EXPECT_NEAR(idcg, 3.6309, 1e-4);
  EXPECT_DOUBLE_EQ(r.mean, dcg / idcg);
  char buf[16];
  std::snprintf(buf, sizeof buf, "%.4f", r.mean);
  EXPECT_STREQ(buf, "0.7967");
}

TEST(Ndcg, TrivialCases) {
  Qrels q;
  q.add("a", "rel", 1);
  q.add("b", "rel", 1);
  q.add("c", "x", 0);
  const auto r = ndcg_at_k(run_of({{"a", {"rel", "z"}}, {"b", {"z", "y"}}, {"c", {"x"}}, {"zz", {"rel"}}}), q, 10);
  EXPECT_DOUBLE_EQ(r.per_query.at("a"), 1.0);
  EXPECT_DOUBLE_EQ(r.per_query.at("b"), 0.0);
  EXPECT_DOUBLE_EQ(r.per_query.at("c"), 0.0);
  EXPECT_EQ(r.evaluated, 3u);
  EXPECT_EQ(r.missing_from_qrels, 1u);
  EXPECT_EQ(r.no_relevant, 1u);
  EXPECT_DOUBLE_EQ(r.mean, 1.0 / 3.0);
}

TEST(Ndcg, RelevantBelowCutoffScoresZero) {
  Qrels q;
  q.add("a", "rel", 3);
  std::vector<std::string> docs;
  for (int i = 0; i < 10; ++i) docs.push_back("n" + std::to_string(i));
  docs.push_back("rel");
  EXPECT_DOUBLE_EQ(ndcg_at_k(run_of({{"a", docs}}), q, 10).mean, 0.0);
  EXPECT_GT(ndcg_at_k(run_of({{"a", docs}}), q, 11).mean, 0.0);
}

TEST(Ndcg, AgreesWithReferenceOnRandomCases) {
  Xoshiro256 rng(8);
  for (int trial = 0; trial < 50; ++trial) {
    std::map<std::string, std::vector<std::string>> ranking;
    std::map<std::string, std::map<std::string, int>> judgments;
    Qrels qrels;
    const auto n_q = 1 + rng.below(6);
    for (std::uint64_t qi = 0; qi < n_q; ++qi) {
      const std::string qid = "q" + std::to_string(qi);
      std::vector<std::string> docs;
      for (std::uint64_t d = 0; d < 30; ++d) docs.push_back("d" + std::to_string(d));
      for (std::size_t i = docs.size(); i > 1; --i) std::swap(docs[i - 1], docs[rng.below(i)]);
      docs.resize(1 + rng.below(20));
      ranking[qid] = docs;
      if (rng.uniform() < 0.15) continue;  // unjudged
      for (std::uint64_t d = 0; d < 30; ++d) {
        if (rng.uniform() < 0.3) {
          const int g = static_cast<int>(rng.below(4));
          judgments[qid]["d" + std::to_string(d)] = g;
          qrels.add(qid, "d" + std::to_string(d), g);
        }
      }
    }
    for (std::size_t k : {1, 5, 10}) {
      EXPECT_NEAR(ndcg_at_k(run_of(ranking), qrels, k).mean, testing::reference_ndcg(ranking, judgments, k), 1e-6);
    }
  }
}

TEST(Metrics, MrrAndRecall) {
  Qrels q;
  q.add("a", "r1", 1);
  q.add("a", "r2", 2);
  const auto run = run_of({{"a", {"x", "r2", "y", "r1"}}});
  EXPECT_DOUBLE_EQ(mrr_at_k(run, q, 10).mean, 0.5);
  EXPECT_DOUBLE_EQ(mrr_at_k(run, q, 1).mean, 0.0);
  EXPECT_DOUBLE_EQ(recall_at_k(run, q, 2).mean, 0.5);
  EXPECT_DOUBLE_EQ(recall_at_k(run, q, 4).mean, 1.0);
}

TEST(RecallVsExact, HandCases) {
  const auto x = run_of({{"a", {"1", "2"}}, {"b", {"3", "4"}}});
  EXPECT_DOUBLE_EQ(recall_vs_exact(x, x, 2), 1.0);
  EXPECT_DOUBLE_EQ(recall_vs_exact(x, x, 10), 1.0);
  EXPECT_DOUBLE_EQ(recall_vs_exact(run_of({{"a", {"5", "6"}}, {"b", {"7", "8"}}}), x, 2), 0.0);
  EXPECT_DOUBLE_EQ(recall_vs_exact(run_of({{"a", {"1", "9"}}, {"b", {"4", "0"}}}), x, 2), 0.5);
  EXPECT_THROW(recall_vs_exact(run_of({{"a", {"1"}}}), x, 2), Error);
}

TEST(Expansion, HandCases) {
  const auto v = vec(10, {{1, 4.0f}, {2, 3.0f}, {3, 2.0f}, {4, 1.0f}});
  const auto r = expansion_ratio({2}, v, 4);
  EXPECT_DOUBLE_EQ(r.input_fraction, 0.25);
  EXPECT_DOUBLE_EQ(r.expansion_fraction, 0.75);
  EXPECT_DOUBLE_EQ(expansion_ratio({1, 2, 3, 4}, v, 25).input_fraction, 1.0);
  const auto top2 = expansion_ratio({1}, v, 2);
  EXPECT_EQ(top2.considered, 2u);
  EXPECT_DOUBLE_EQ(top2.input_fraction, 0.5);
  const auto e = expansion_ratio({1}, SparseVector(10), 25);
  EXPECT_TRUE(e.empty);
  EXPECT_EQ(e.input_fraction, 0.0);
  EXPECT_EQ(e.expansion_fraction, 0.0);
}

TEST(TrecFiles, RoundTrip) {
  const auto q = fixture_qrels();
  std::stringstream qs;
  write_qrels(qs, q);
  EXPECT_EQ(read_qrels(qs).all(), q.all());

  std::vector<RankedList> lists{{"q1", {{"d2", 2.5}, {"d1", 1.0000001192092896}}, 0}, {"q2", {}, 0}};
  std::stringstream rs;
  write_run(rs, lists, "tag");
  const auto run = read_run(rs);
  ASSERT_EQ(run.at("q1").size(), 2u);
  EXPECT_EQ(run.at("q1")[1].doc_id, "d1");
  EXPECT_EQ(static_cast<float>(run.at("q1")[1].score), 1.0000001f);
}

TEST(TrecFiles, MalformedInputs) {
  std::stringstream gap("q1 Q0 a 1 3.0 t\nq1 Q0 b 3 2.0 t\n");
  EXPECT_THROW(read_run(gap), Error);
  std::stringstream rising("q1 Q0 a 1 1.0 t\nq1 Q0 b 2 2.0 t\n");
  EXPECT_THROW(read_run(rising), Error);
  std::stringstream short_line("q1 Q0 a 1\n");
  EXPECT_THROW(read_run(short_line), Error);
  std::stringstream neg("q1 0 a -1\n");
  EXPECT_THROW(read_qrels(neg), Error);
  std::stringstream dup("q1 0 a 1\nq1 0 a 2\n");
  EXPECT_THROW(read_qrels(dup), Error);
}

TEST(Latency, NearestRankAndEmptyReport) {
  EXPECT_EQ(nearest_rank({5, 1, 3, 2, 4}, 50.0), 3u);
  EXPECT_EQ(nearest_rank({5, 1, 3, 2, 4}, 99.0), 5u);
  EXPECT_EQ(nearest_rank({10}, 95.0), 10u);
  LatencyReport r;
  r.samples_ns = {40, 10, 30, 20};
  summarize(r);
  EXPECT_DOUBLE_EQ(r.mean_ns, 25.0);
  EXPECT_EQ(r.p50_ns, 20u);
  EXPECT_EQ(r.p95_ns, 40u);

  const auto idx = IndexBuilder(5, 10).finish();
  const auto empty = bench_search(idx, {}, SearchParams{});
  EXPECT_FALSE(empty.error.empty());
  EXPECT_TRUE(empty.samples_ns.empty());
}

TEST(Latency, ReportRetainsPerQuerySamples) {
  std::vector<std::pair<std::string, SparseVector>> corpus;
  for (int i = 0; i < 50; ++i) corpus.push_back({"d" + std::to_string(i), vec(20, {{static_cast<TermId>(i % 20), 1.0f}})});
  const auto idx = build_index(corpus, 10);
  const std::vector<SparseVector> qs{vec(20, {{1, 1.0f}}), vec(20, {{2, 1.0f}, {3, 1.0f}})};
  const auto r = bench_search(idx, qs, SearchParams{}, 2);
  EXPECT_EQ(r.samples_ns.size(), 2u);
  EXPECT_EQ(r.p99_ns, nearest_rank(r.samples_ns, 99.0));
  EXPECT_EQ(r.measure, "latency");
  EXPECT_EQ(r.repetitions, 2u);
  EXPECT_TRUE(r.error.empty());
}

TEST(Latency, ApproximateBeatsExactOnTenThousandDocs) {
  SynthSpec spec;
  spec.seed = 77;
  spec.vocab_size = 30000;
  spec.doc_count = 10000;
  spec.mean_doc_nnz = 200;
  spec.query_count = 100;
  spec.make_tokens = false;
  const auto data = generate_synthetic(spec);
  IndexBuilder b(1000, spec.vocab_size);
  for (const auto& d : data.docs) b.add(d.id, d.vec);
  const auto idx = std::move(b).finish();
  std::vector<SparseVector> queries;
  for (const auto& q : data.queries) queries.push_back(q.vec);

  const auto exact = bench_search(idx, queries, SearchParams{10, 500, 2.5, SearchMode::kExact}, 3);
  const auto approx = bench_search(idx, queries, SearchParams{10, 10, 2.5, SearchMode::kApproximate}, 3);
  EXPECT_EQ(exact.samples_ns.size(), queries.size());
  EXPECT_LT(approx.mean_ns, exact.mean_ns);
}

}  // namespace
}  // namespace lsr
