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

#include <fstream>
#include <sstream>

#include "lsr/error.hpp"
#include "lsr/index.hpp"
#include "lsr/retrieval.hpp"
#include "lsr/synth.hpp"
#include "test_support.hpp"

namespace lsr {
namespace {

using testing::TempDir;
using testing::vec;

std::string serialize(const InvertedIndex& idx) {
  std::ostringstream out(std::ios::binary);
  write_index(idx, out);
  return out.str();
}

InvertedIndex deserialize(const std::string& bytes) {
  std::istringstream in(bytes, std::ios::binary);
  return read_index(in);
}

InvertedIndex synthetic_index(std::uint32_t docs, std::uint32_t k_d, std::uint64_t seed = 1) {
  SynthSpec spec;
  spec.seed = seed;
  spec.vocab_size = 20000;
  spec.doc_count = docs;
  spec.mean_doc_nnz = 120;
  spec.query_count = 50;
  spec.make_tokens = false;
  const auto data = generate_synthetic(spec);
  IndexBuilder b(k_d, spec.vocab_size);
  for (const auto& d : data.docs) b.add(d.id, d.vec);
  return std::move(b).finish();
}

TEST(Index, EmptyCorpus) {
  const auto idx = IndexBuilder(10, 100).finish();
  EXPECT_EQ(idx.doc_count(), 0u);
  EXPECT_TRUE(idx.postings(5).empty());
  EXPECT_EQ(idx.max_impact(5), 0.0f);
  EXPECT_FALSE(idx.find("x").has_value());
  EXPECT_TRUE(search_exact(idx, vec(100, {{5, 1.0f}}), 10).hits.empty());
}

TEST(Index, HandExampleWithPruning) {
  std::vector<std::pair<std::string, SparseVector>> corpus{{"doc0", vec(5, {{1, 2.0f}})},
                                                           {"doc1", vec(5, {{1, 1.0f}, {3, 5.0f}})}};
  const auto idx = build_index(corpus, 1);
  const auto p1 = idx.postings(1);
  ASSERT_EQ(p1.size(), 1u);
  EXPECT_EQ(idx.doc_id(p1.doc_ords[0]), "doc0");
  EXPECT_EQ(p1.impacts[0], 2.0f);
  const auto p3 = idx.postings(3);
  ASSERT_EQ(p3.size(), 1u);
  EXPECT_EQ(idx.doc_id(p3.doc_ords[0]), "doc1");
  EXPECT_EQ(p3.impacts[0], 5.0f);
  EXPECT_EQ(idx.forward(1).nnz(), 1u);
  EXPECT_EQ(idx.non_empty_terms(), 2u);
}

TEST(Index, PostingsAreImpactOrderedAndConsistent) {
  const auto idx = synthetic_index(1000, 80);
  std::size_t forward_nnz = 0;
  for (DocOrd d = 0; d < idx.doc_count(); ++d) {
    forward_nnz += idx.forward(d).nnz();
    EXPECT_LE(idx.forward(d).nnz(), 80u);
  }
  std::size_t postings = 0;
  for (TermId t = 0; t < idx.vocab_size(); ++t) {
    const auto pl = idx.postings(t);
    postings += pl.size();
    for (std::size_t j = 0; j < pl.size(); ++j) {
      EXPECT_GT(pl.impacts[j], 0.0f);
      if (j > 0) {
        EXPECT_GE(pl.impacts[j - 1], pl.impacts[j]);
      }
      EXPECT_GT(idx.forward(pl.doc_ords[j]).nnz(), 0u);
    }
    if (!pl.empty()) {
      EXPECT_EQ(idx.max_impact(t), pl.impacts[0]);
    }
  }
  EXPECT_EQ(postings, forward_nnz);
  EXPECT_EQ(idx.total_postings(), forward_nnz);
}

TEST(Index, BuilderRejectsBadInput) {
  IndexBuilder b(10, 50);
  b.add("a", vec(50, {{1, 1.0f}}));
  try {
    b.add("a", vec(50, {{2, 1.0f}}));
    FAIL() << "duplicate id accepted";
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kBuild);
  }
  EXPECT_THROW(b.add("b", vec(60, {{2, 1.0f}})), Error);
  EXPECT_THROW(IndexBuilder(0, 10), Error);
}

TEST(Index, EmptyRoundTrip) {
  const auto idx = IndexBuilder(7, 30).finish();
  const auto back = deserialize(serialize(idx));
  EXPECT_EQ(back.doc_count(), 0u);
  EXPECT_EQ(back.vocab_size(), 30u);
  EXPECT_EQ(back.k_d(), 7u);
  EXPECT_EQ(serialize(back), serialize(idx));
}

TEST(Index, SaveLoadPreservesResults) {
  const auto idx = synthetic_index(1000, 1000, 4);
  TempDir tmp;
  save_index(idx, tmp / "i.lsri");
  const auto back = load_index(tmp / "i.lsri");
  SynthSpec spec;
  spec.seed = 4;
  spec.vocab_size = 20000;
  spec.doc_count = 1000;
  spec.mean_doc_nnz = 120;
  spec.query_count = 50;
  spec.make_tokens = false;
  const auto data = generate_synthetic(spec);
  SearchParams p;
  p.k = 100;
  for (const auto& q : data.queries) {
    const auto a = search_approx(idx, q.vec, p);
    const auto b = search_approx(back, q.vec, p);
    ASSERT_EQ(a.hits.size(), b.hits.size());
    for (std::size_t i = 0; i < a.hits.size(); ++i) {
      EXPECT_EQ(a.hits[i].doc_id, b.hits[i].doc_id);
      EXPECT_EQ(a.hits[i].score, b.hits[i].score);
    }
  }
}

TEST(Index, DeterministicBytes) {
  EXPECT_EQ(serialize(synthetic_index(300, 50, 9)), serialize(synthetic_index(300, 50, 9)));
}

TEST(Index, HeaderLayout) {
  std::vector<std::pair<std::string, SparseVector>> corpus{{"d", vec(9, {{4, 1.5f}})}};
  const auto bytes = serialize(build_index(corpus, 3));
  ASSERT_GE(bytes.size(), 20u);
  EXPECT_EQ(bytes.substr(0, 4), "LSRI");
  auto u32 = [&](std::size_t off) {
    return static_cast<std::uint32_t>(static_cast<unsigned char>(bytes[off])) |
           static_cast<std::uint32_t>(static_cast<unsigned char>(bytes[off + 1])) << 8 |
           static_cast<std::uint32_t>(static_cast<unsigned char>(bytes[off + 2])) << 16 |
           static_cast<std::uint32_t>(static_cast<unsigned char>(bytes[off + 3])) << 24;
  };
  EXPECT_EQ(u32(4), kIndexVersion);
  EXPECT_EQ(u32(8), 9u);
  EXPECT_EQ(u32(12), 1u);
  EXPECT_EQ(u32(16), 3u);
}

ErrorKind kind_of(const std::string& bytes) {
  try {
    deserialize(bytes);
  } catch (const Error& e) {
    return e.kind();
  }
  return ErrorKind::kIo;  // sentinel: nothing thrown
}

TEST(Index, CorruptionIsReportedByKind) {
  const auto good = serialize(synthetic_index(50, 20, 2));
  auto bad_magic = good;
  bad_magic[0] = 'X';
  EXPECT_EQ(kind_of(bad_magic), ErrorKind::kFormat);

  auto bad_version = good;
  bad_version[4] = 9;
  EXPECT_EQ(kind_of(bad_version), ErrorKind::kFormat);

  EXPECT_EQ(kind_of(good.substr(0, good.size() - 3)), ErrorKind::kTruncated);
  EXPECT_EQ(kind_of(good.substr(0, 10)), ErrorKind::kTruncated);
  EXPECT_EQ(kind_of(good + "junk"), ErrorKind::kFormat);

  TempDir tmp;
  try {
    load_index(tmp / "missing.lsri");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kIo);
  }
}

}  // namespace
}  // namespace lsr
