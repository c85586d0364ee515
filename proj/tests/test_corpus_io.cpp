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

#include <cstring>
#include <fstream>
#include <functional>
#include <set>
#include <iterator>

#include "lsr/corpus_io.hpp"
#include "lsr/error.hpp"
#include "lsr/index.hpp"
#include "lsr/retrieval.hpp"
#include "lsr/rng.hpp"
#include "lsr/synth.hpp"
#include "test_support.hpp"

namespace lsr {
namespace {

using testing::TempDir;
using testing::vec;

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

void spit(const std::filesystem::path& p, const std::string& s) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  out << s;
}

ErrorKind error_kind(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.kind();
  }
  ADD_FAILURE() << "expected an lsr::Error";
  return ErrorKind::kInvalidInput;
}

std::vector<VectorRecord> random_records(std::uint64_t seed, std::size_t n, std::uint32_t vocab) {
  Xoshiro256 rng(seed);
  std::vector<VectorRecord> out;
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<SparseVector::Entry> es;
    const auto nnz = rng.below(40);
    for (std::uint64_t j = 0; j < nnz; ++j) {
      // Raw bit patterns cover subnormals and the full exponent range.
      std::uint32_t bits = static_cast<std::uint32_t>(rng.next()) & 0x7f7fffffu;
      float w;
      std::memcpy(&w, &bits, 4);
      if (w == 0.0f) w = 1.0f;
      es.push_back({static_cast<TermId>(rng.below(vocab)), w});
    }
    std::sort(es.begin(), es.end(), [](auto a, auto b) { return a.term < b.term; });
    es.erase(std::unique(es.begin(), es.end(), [](auto a, auto b) { return a.term == b.term; }), es.end());
    out.push_back({"id-" + std::to_string(i), vec(vocab, es)});
  }
  return out;
}

void expect_records_equal(const std::vector<VectorRecord>& a, const std::vector<VectorRecord>& b) {
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].id, b[i].id);
    ASSERT_EQ(a[i].vec.nnz(), b[i].vec.nnz());
    EXPECT_TRUE(std::equal(a[i].vec.terms().begin(), a[i].vec.terms().end(), b[i].vec.terms().begin()));
    EXPECT_EQ(std::memcmp(a[i].vec.weights().data(), b[i].vec.weights().data(), 4 * a[i].vec.nnz()), 0);
  }
}

TEST(Vectors, EmptyFiles) {
  TempDir tmp;
  spit(tmp / "e.jsonl", "");
  EXPECT_TRUE(read_vectors(tmp / "e.jsonl", 10).empty());
  write_vectors(tmp / "e.spv1", VectorFormat::kSpv1, 10, {});
  EXPECT_TRUE(read_vectors(tmp / "e.spv1").empty());
}

TEST(Vectors, JsonlBinaryJsonlRoundTrip) {
  TempDir tmp;
  const auto recs = random_records(1, 300, 5000);
  write_vectors(tmp / "a.jsonl", VectorFormat::kJsonl, 5000, recs);
  const auto from_json = read_vectors(tmp / "a.jsonl", 5000);
  expect_records_equal(recs, from_json);
  write_vectors(tmp / "b.spv1", VectorFormat::kSpv1, 5000, from_json);
  const auto from_bin = read_vectors(tmp / "b.spv1");
  expect_records_equal(recs, from_bin);
  write_vectors(tmp / "c.jsonl", VectorFormat::kJsonl, 5000, from_bin);
  EXPECT_EQ(slurp(tmp / "a.jsonl"), slurp(tmp / "c.jsonl"));
}

TEST(Vectors, Spv1HeaderAndStreaming) {
  TempDir tmp;
  const auto recs = random_records(2, 5, 100);
  write_vectors(tmp / "v.spv1", VectorFormat::kSpv1, 100, recs);
  const auto bytes = slurp(tmp / "v.spv1");
  EXPECT_EQ(bytes.substr(0, 4), "SPV1");
  VectorReader r(tmp / "v.spv1", VectorFormat::kSpv1);
  EXPECT_EQ(r.vocab_size(), 100u);
  EXPECT_EQ(r.declared_count(), 5u);
  std::size_t n = 0;
  while (r.next()) ++n;
  EXPECT_EQ(n, 5u);
}

TEST(Vectors, NegativeWeightNamesTheLine) {
  TempDir tmp;
  spit(tmp / "bad.jsonl", "{\"id\":\"a\",\"vector\":{\"1\":0.5}}\n{\"id\":\"b\",\"vector\":{\"2\":-1.0}}\n");
  try {
    read_vectors(tmp / "bad.jsonl", 10);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kValidation);
    EXPECT_NE(std::string(e.what()).find("line 2"), std::string::npos) << e.what();
  }
}

TEST(Vectors, JsonlValidation) {
  TempDir tmp;
  auto kind_for = [&](const std::string& line) {
    spit(tmp / "x.jsonl", line + "\n");
    return error_kind([&] { read_vectors(tmp / "x.jsonl", 10); });
  };
  EXPECT_EQ(kind_for("{\"id\":\"a\",\"vector\":{\"1\":1,\"1\":2}}"), ErrorKind::kValidation);
  EXPECT_EQ(kind_for("{\"id\":\"a\",\"vector\":{\"12\":1}}"), ErrorKind::kValidation);
  EXPECT_EQ(kind_for("{\"id\":\"a\",\"vector\":{\"x\":1}}"), ErrorKind::kValidation);
  EXPECT_EQ(kind_for("{\"id\":\"a\"}"), ErrorKind::kFormat);
  EXPECT_EQ(kind_for("not json"), ErrorKind::kFormat);
  EXPECT_THROW(read_vectors(tmp / "x.jsonl"), Error);  // JSONL needs a vocab size
}

TEST(Vectors, BinaryValidation) {
  TempDir tmp;
  const auto recs = random_records(3, 4, 100);
  write_vectors(tmp / "v.spv1", VectorFormat::kSpv1, 100, recs);
  const auto good = slurp(tmp / "v.spv1");

  spit(tmp / "t.spv1", good.substr(0, good.size() - 2));
  EXPECT_EQ(error_kind([&] { read_vectors(tmp / "t.spv1"); }), ErrorKind::kTruncated);

  auto magic = good;
  magic[1] = 'Q';
  spit(tmp / "m.spv1", magic);
  EXPECT_EQ(error_kind([&] { read_vectors(tmp / "m.spv1"); }), ErrorKind::kFormat);

  // Swap the first two terms of a record with nnz >= 2 to break ordering.
  std::vector<VectorRecord> two{{"r", vec(100, {{3, 1.0f}, {9, 2.0f}})}};
  write_vectors(tmp / "o.spv1", VectorFormat::kSpv1, 100, two);
  auto unsorted = slurp(tmp / "o.spv1");
  const std::size_t entries = 20 + 4 + 1 + 4;
  std::swap_ranges(unsorted.begin() + entries, unsorted.begin() + entries + 4, unsorted.begin() + entries + 8);
  spit(tmp / "o.spv1", unsorted);
  EXPECT_EQ(error_kind([&] { read_vectors(tmp / "o.spv1"); }), ErrorKind::kValidation);

  EXPECT_EQ(error_kind([&] { read_vectors(tmp / "nope.spv1"); }), ErrorKind::kIo);
}

TEST(Logits, HandFileReproducesAggregate) {
  TempDir tmp;
  std::vector<std::pair<std::string, LogitMatrix>> recs{
      {"m", LogitMatrix(2, 3, {1.0f, -1.0f, 0.0f, 0.0f, 2.0f, -3.0f})}, {"z", LogitMatrix(1, 3, {0.0f, 0.0f, 0.0f})}};
  write_logits(tmp / "l.lgt", 3, recs);
  LogitReader r(tmp / "l.lgt", 3);
  const auto first = r.next_aggregated();
  ASSERT_TRUE(first);
  EXPECT_EQ(first->id, "m");
  EXPECT_EQ(first->vec, aggregate(recs[0].second));
  const auto second = r.next_aggregated();
  ASSERT_TRUE(second);
  EXPECT_TRUE(second->vec.empty());
  EXPECT_FALSE(r.next_aggregated());

  EXPECT_EQ(error_kind([&] { LogitReader(tmp / "l.lgt", 4); }), ErrorKind::kValidation);
}

TEST(Logits, TruncatedFile) {
  TempDir tmp;
  std::vector<std::pair<std::string, LogitMatrix>> recs{{"m", LogitMatrix(2, 3, {1, 2, 3, 4, 5, 6})}};
  write_logits(tmp / "l.lgt", 3, recs);
  const auto bytes = slurp(tmp / "l.lgt");
  for (std::size_t cut : {bytes.size() - 1, bytes.size() - 12, std::size_t{10}, std::size_t{6}}) {
    spit(tmp / "t.lgt", bytes.substr(0, cut));
    EXPECT_EQ(error_kind([&] {
                LogitReader r(tmp / "t.lgt");
                while (r.next()) {
                }
              }),
              ErrorKind::kTruncated)
        << "cut at " << cut;
  }
}

TEST(Tokens, JsonlAndHashedText) {
  TempDir tmp;
  const std::vector<TokenDoc> docs{{"a", {1, 2, 2}}, {"b", {}}};
  write_token_corpus(tmp / "t.jsonl", docs);
  const auto back = read_token_corpus(tmp / "t.jsonl", TokenFormat::kJsonl);
  ASSERT_EQ(back.size(), 2u);
  EXPECT_EQ(back[0].tokens, docs[0].tokens);
  EXPECT_TRUE(back[1].tokens.empty());

  EXPECT_EQ(fnv1a32(""), 2166136261u);
  EXPECT_EQ(fnv1a32("a"), 0xe40c292cu);
  spit(tmp / "t.txt", "d1\thello world hello\n");
  const auto text = read_token_corpus(tmp / "t.txt", TokenFormat::kText);
  ASSERT_EQ(text.size(), 1u);
  EXPECT_EQ(text[0].doc_id, "d1");
  EXPECT_EQ(text[0].tokens, (std::vector<TokenId>{fnv1a32("hello"), fnv1a32("world"), fnv1a32("hello")}));
}

TEST(Teacher, ParsesRecords) {
  TempDir tmp;
  spit(tmp / "t.jsonl",
       "{\"qid\":\"q\",\"docids\":[\"a\",\"b\"],\"teacher\":[1.5,0.5]}\n"
       "{\"qid\":\"r\",\"docids\":[\"c\",\"d\"],\"teacher\":[0,1],\"student_init\":[2,3]}\n");
  const auto recs = read_teacher_scores(tmp / "t.jsonl");
  ASSERT_EQ(recs.size(), 2u);
  EXPECT_EQ(recs[0].teacher, (std::vector<double>{1.5, 0.5}));
  EXPECT_FALSE(recs[0].student_init);
  EXPECT_EQ(*recs[1].student_init, (std::vector<double>{2.0, 3.0}));
  spit(tmp / "bad.jsonl", "{\"qid\":\"q\",\"docids\":[\"a\"],\"teacher\":[1,2]}\n");
  EXPECT_THROW(read_teacher_scores(tmp / "bad.jsonl"), Error);
}

TEST(Synth, DeterministicBytes) {
  TempDir tmp;
  SynthSpec s;
  s.vocab_size = 5000;
  s.doc_count = 200;
  s.mean_doc_nnz = 50;
  s.query_count = 20;
  for (const char* dir : {"a", "b"}) {
    const auto d = generate_synthetic(s);
    std::filesystem::create_directories(tmp / dir);
    write_vectors(tmp / dir / "docs.spv1", VectorFormat::kSpv1, d.vocab_size, d.docs);
    write_vectors(tmp / dir / "q.spv1", VectorFormat::kSpv1, d.vocab_size, d.queries);
    write_token_corpus(tmp / dir / "t.jsonl", d.doc_tokens);
  }
  for (const char* f : {"docs.spv1", "q.spv1", "t.jsonl"}) {
    EXPECT_EQ(slurp(tmp / "a" / f), slurp(tmp / "b" / f)) << f;
  }
  s.seed += 1;
  const auto other = generate_synthetic(s);
  write_vectors(tmp / "c.spv1", VectorFormat::kSpv1, other.vocab_size, other.docs);
  EXPECT_NE(slurp(tmp / "a" / "docs.spv1"), slurp(tmp / "c.spv1"));
}

TEST(Synth, PinnedGeneratorStream) {
  // xoshiro256** seeded through SplitMix64(0).
  Xoshiro256 rng(0);
  SplitMix64 sm(0);
  EXPECT_EQ(sm.next(), 0xe220a8397b1dcdafull);
  const std::uint64_t first = rng.next();
  Xoshiro256 again(0);
  EXPECT_EQ(first, again.next());
}

TEST(Synth, RelevantDocRankedFirstAtFullOverlap) {
  SynthSpec s;
  s.seed = 5;
  s.vocab_size = 100000;
  s.doc_count = 2000;
  s.query_count = 200;
  s.overlap_strength = 1.0;
  s.make_tokens = false;
  const auto d = generate_synthetic(s);
  IndexBuilder b(1000, d.vocab_size);
  for (const auto& r : d.docs) b.add(r.id, r.vec);
  const auto idx = std::move(b).finish();
  std::size_t top1 = 0;
  for (const auto& q : d.queries) {
    const auto r = search_exact(idx, q.vec, 1, q.id);
    if (!r.hits.empty() && d.qrels.grade(q.id, r.hits[0].doc_id) > 0) ++top1;
  }
  EXPECT_GE(static_cast<double>(top1) / static_cast<double>(d.queries.size()), 0.95);
}

TEST(Synth, DensityNearTarget) {
  SynthSpec s;
  s.doc_count = 500;
  s.query_count = 10;
  s.make_tokens = false;
  const auto d = generate_synthetic(s);
  std::vector<SparseVector> vs;
  for (const auto& r : d.docs) vs.push_back(r.vec);
  EXPECT_NEAR(density_stats(vs).mean_nnz, 400.0, 40.0);
}

TEST(Synth, TokensMatchSupportAndQrelsReferenceIds) {
  SynthSpec s;
  s.vocab_size = 3000;
  s.doc_count = 100;
  s.mean_doc_nnz = 30;
  s.query_count = 10;
  s.relevant_per_query = 3;
  const auto d = generate_synthetic(s);
  ASSERT_EQ(d.doc_tokens.size(), d.docs.size());
  for (std::size_t i = 0; i < d.docs.size(); ++i) {
    std::vector<TokenId> uniq = d.doc_tokens[i].tokens;
    std::sort(uniq.begin(), uniq.end());
    uniq.erase(std::unique(uniq.begin(), uniq.end()), uniq.end());
    EXPECT_TRUE(std::equal(uniq.begin(), uniq.end(), d.docs[i].vec.terms().begin(), d.docs[i].vec.terms().end()));
  }
  std::set<std::string> ids;
  for (const auto& r : d.docs) ids.insert(r.id);
  for (const auto& [qid, judged] : d.qrels.all()) {
    EXPECT_EQ(judged.size(), 3u);
    for (const auto& kv : judged) EXPECT_TRUE(ids.count(kv.first));
  }
}

TEST(Synth, RejectsInfeasibleSpec) {
  SynthSpec s;
  s.doc_count = 3;
  s.relevant_per_query = 4;
  EXPECT_THROW(generate_synthetic(s), Error);
  s = {};
  s.overlap_strength = 0.0;
  EXPECT_THROW(generate_synthetic(s), Error);
}

}  // namespace
}  // namespace lsr
