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

#include "lsr/evaluation.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <sstream>
#include <thread>
#include <unordered_set>

#include "lsr/error.hpp"

namespace lsr {

namespace {

using Clock = std::chrono::steady_clock;

std::ifstream open_text(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::kIo, "cannot open '" + path + "'");
  return in;
}

std::string line_ref(std::size_t line_no) { return " (line " + std::to_string(line_no) + ")"; }

bool blank(const std::string& line) {
  return std::all_of(line.begin(), line.end(), [](unsigned char c) { return std::isspace(c); });
}

}  // namespace

void Qrels::add(const std::string& qid, const std::string& docid, int grade) {
  if (grade < 0) fail(ErrorKind::kValidation, "negative relevance grade for " + qid + "/" + docid);
  if (!judgments_[qid].emplace(docid, grade).second) {
    fail(ErrorKind::kValidation, "duplicate judgment for " + qid + "/" + docid);
  }
}

int Qrels::grade(const std::string& qid, const std::string& docid) const {
  auto q = judgments_.find(qid);
  if (q == judgments_.end()) return 0;
  auto d = q->second.find(docid);
  return d == q->second.end() ? 0 : d->second;
}

const std::map<std::string, int>& Qrels::judged(const std::string& qid) const {
  static const std::map<std::string, int> kEmpty;
  auto q = judgments_.find(qid);
  return q == judgments_.end() ? kEmpty : q->second;
}

std::size_t Qrels::size() const noexcept {
  std::size_t n = 0;
  for (const auto& [q, docs] : judgments_) n += docs.size();
  return n;
}

RunFile to_run(const std::vector<RankedList>& lists) {
  RunFile run;
  for (const auto& l : lists) {
    auto& hits = run[l.query_id];
    hits.insert(hits.end(), l.hits.begin(), l.hits.end());
  }
  return run;
}

Qrels read_qrels(std::istream& in) {
  Qrels qrels;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (blank(line)) continue;
    std::istringstream ss(line);
    std::string qid, iter, docid, extra;
    long long rel = 0;
    if (!(ss >> qid >> iter >> docid >> rel) || (ss >> extra)) {
      fail(ErrorKind::kFormat, "qrels: expected 'qid 0 docid rel'" + line_ref(line_no));
    }
    if (rel < 0) fail(ErrorKind::kValidation, "qrels: negative grade" + line_ref(line_no));
    try {
      qrels.add(qid, docid, static_cast<int>(rel));
    } catch (const Error& e) {
      fail(e.kind(), std::string("qrels: ") + e.what() + line_ref(line_no));
    }
  }
  return qrels;
}

Qrels read_qrels(const std::string& path) {
  auto in = open_text(path);
  return read_qrels(in);
}

void write_qrels(std::ostream& out, const Qrels& qrels) {
  for (const auto& [qid, docs] : qrels.all()) {
    for (const auto& [docid, grade] : docs) out << qid << " 0 " << docid << ' ' << grade << '\n';
  }
}

RunFile read_run(std::istream& in) {
  struct Row {
    long long rank;
    std::string docid;
    double score;
  };
  std::map<std::string, std::vector<Row>> rows;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (blank(line)) continue;
    std::istringstream ss(line);
    std::string qid, q0, docid, tag;
    long long rank = 0;
    double score = 0.0;
    if (!(ss >> qid >> q0 >> docid >> rank >> score >> tag)) {
      fail(ErrorKind::kFormat, "run: expected 'qid Q0 docid rank score tag'" + line_ref(line_no));
    }
    rows[qid].push_back({rank, docid, score});
  }
  RunFile run;
  for (auto& [qid, list] : rows) {
    std::sort(list.begin(), list.end(), [](const Row& a, const Row& b) { return a.rank < b.rank; });
    auto& hits = run[qid];
    for (std::size_t i = 0; i < list.size(); ++i) {
      if (list[i].rank != static_cast<long long>(i + 1)) {
        fail(ErrorKind::kFormat, "run: ranks for query '" + qid + "' are not contiguous from 1");
      }
      if (i > 0 && list[i].score > list[i - 1].score) {
        fail(ErrorKind::kFormat, "run: scores for query '" + qid + "' increase at rank " + std::to_string(i + 1));
      }
      hits.push_back({list[i].docid, list[i].score});
    }
  }
  return run;
}

RunFile read_run(const std::string& path) {
  auto in = open_text(path);
  return read_run(in);
}

void write_run(std::ostream& out, const std::vector<RankedList>& lists, const std::string& tag) {
  char buf[64];
  for (const auto& l : lists) {
    for (std::size_t i = 0; i < l.hits.size(); ++i) {
      // %.9g round-trips every f32 score.
      std::snprintf(buf, sizeof buf, "%.9g", l.hits[i].score);
      out << l.query_id << " Q0 " << l.hits[i].doc_id << ' ' << (i + 1) << ' ' << buf << ' ' << tag << '\n';
    }
  }
}

MetricResult ndcg_at_k(const RunFile& run, const Qrels& qrels, std::size_t k) {
  require(k >= 1, "ndcg: k must be >= 1");
  MetricResult res;
  double sum = 0.0;
  for (const auto& [qid, hits] : run) {
    if (!qrels.has_query(qid)) {
      ++res.missing_from_qrels;
      continue;
    }
    std::vector<int> grades;
    for (const auto& [doc, g] : qrels.judged(qid)) {
      if (g > 0) grades.push_back(g);
    }
    std::sort(grades.rbegin(), grades.rend());
    double idcg = 0.0;
    for (std::size_t i = 0; i < std::min(k, grades.size()); ++i) {
      idcg += (std::exp2(grades[i]) - 1.0) / std::log2(static_cast<double>(i) + 2.0);
    }
    double value = 0.0;
    if (idcg > 0.0) {
      double dcg = 0.0;
      for (std::size_t i = 0; i < std::min(k, hits.size()); ++i) {
        const int g = qrels.grade(qid, hits[i].doc_id);
        if (g > 0) dcg += (std::exp2(g) - 1.0) / std::log2(static_cast<double>(i) + 2.0);
      }
      value = dcg / idcg;
    } else {
      ++res.no_relevant;
    }
    res.per_query[qid] = value;
    sum += value;
    ++res.evaluated;
  }
  res.mean = res.evaluated == 0 ? 0.0 : sum / static_cast<double>(res.evaluated);
  return res;
}

MetricResult mrr_at_k(const RunFile& run, const Qrels& qrels, std::size_t k) {
  require(k >= 1, "mrr: k must be >= 1");
  MetricResult res;
  double sum = 0.0;
  for (const auto& [qid, hits] : run) {
    if (!qrels.has_query(qid)) {
      ++res.missing_from_qrels;
      continue;
    }
    double value = 0.0;
    for (std::size_t i = 0; i < std::min(k, hits.size()); ++i) {
      if (qrels.grade(qid, hits[i].doc_id) > 0) {
        value = 1.0 / static_cast<double>(i + 1);
        break;
      }
    }
    const auto& judged = qrels.judged(qid);
    if (std::none_of(judged.begin(), judged.end(), [](const auto& kv) { return kv.second > 0; })) ++res.no_relevant;
    res.per_query[qid] = value;
    sum += value;
    ++res.evaluated;
  }
  res.mean = res.evaluated == 0 ? 0.0 : sum / static_cast<double>(res.evaluated);
  return res;
}

MetricResult recall_at_k(const RunFile& run, const Qrels& qrels, std::size_t k) {
  require(k >= 1, "recall: k must be >= 1");
  MetricResult res;
  double sum = 0.0;
  for (const auto& [qid, hits] : run) {
    if (!qrels.has_query(qid)) {
      ++res.missing_from_qrels;
      continue;
    }
    std::size_t relevant = 0;
    for (const auto& [doc, g] : qrels.judged(qid)) relevant += g > 0;
    double value = 0.0;
    if (relevant == 0) {
      ++res.no_relevant;
    } else {
      std::size_t found = 0;
      for (std::size_t i = 0; i < std::min(k, hits.size()); ++i) found += qrels.grade(qid, hits[i].doc_id) > 0;
      value = static_cast<double>(found) / static_cast<double>(relevant);
    }
    res.per_query[qid] = value;
    sum += value;
    ++res.evaluated;
  }
  res.mean = res.evaluated == 0 ? 0.0 : sum / static_cast<double>(res.evaluated);
  return res;
}

double recall_vs_exact(const RunFile& approx, const RunFile& exact, std::size_t k) {
  require(k >= 1, "recall_vs_exact: k must be >= 1");
  require(approx.size() == exact.size(), "recall_vs_exact: query sets differ");
  if (exact.empty()) return 1.0;
  double sum = 0.0;
  for (const auto& [qid, ex_hits] : exact) {
    auto it = approx.find(qid);
    require(it != approx.end(), "recall_vs_exact: query '" + qid + "' missing from the approximate run");
    const std::size_t n_exact = std::min(k, ex_hits.size());
    if (n_exact == 0) {
      sum += 1.0;
      continue;
    }
    std::unordered_set<std::string> truth;
    for (std::size_t i = 0; i < n_exact; ++i) truth.insert(ex_hits[i].doc_id);
    std::size_t found = 0;
    const auto& ap = it->second;
    for (std::size_t i = 0; i < std::min(k, ap.size()); ++i) found += truth.count(ap[i].doc_id);
    sum += static_cast<double>(found) / static_cast<double>(n_exact);
  }
  return sum / static_cast<double>(exact.size());
}

ExpansionRatio expansion_ratio(const std::set<TermId>& input_terms, SparseView v, std::size_t top_n) {
  require(top_n >= 1, "expansion_ratio: top_n must be >= 1");
  ExpansionRatio r;
  if (v.empty()) {
    r.empty = true;
    return r;
  }
  const SparseVector top = prune(v, top_n);
  std::size_t in_input = 0;
  for (TermId t : top.terms()) in_input += input_terms.count(t);
  r.considered = top.nnz();
  r.input_fraction = static_cast<double>(in_input) / static_cast<double>(r.considered);
  r.expansion_fraction = static_cast<double>(r.considered - in_input) / static_cast<double>(r.considered);
  return r;
}

std::uint64_t nearest_rank(std::vector<std::uint64_t> samples, double p) {
  require(!samples.empty(), "percentile of an empty sample");
  require(p > 0.0 && p <= 100.0, "percentile must be in (0, 100]");
  std::sort(samples.begin(), samples.end());
  auto rank = static_cast<std::size_t>(std::ceil(p / 100.0 * static_cast<double>(samples.size())));
  rank = std::clamp<std::size_t>(rank, 1, samples.size());
  return samples[rank - 1];
}

void summarize(LatencyReport& report) {
  if (report.samples_ns.empty()) {
    if (report.error.empty()) report.error = "no queries to benchmark";
    return;
  }
  double total = 0.0;
  for (auto s : report.samples_ns) total += static_cast<double>(s);
  report.mean_ns = total / static_cast<double>(report.samples_ns.size());
  report.p50_ns = nearest_rank(report.samples_ns, 50.0);
  report.p95_ns = nearest_rank(report.samples_ns, 95.0);
  report.p99_ns = nearest_rank(report.samples_ns, 99.0);
  if (report.measure == "latency" && report.mean_ns > 0.0) report.queries_per_sec = 1e9 / report.mean_ns;
}

LatencyReport bench_queries(std::size_t n_queries, std::size_t repetitions, std::size_t threads,
                            const std::function<QueryFn()>& make_worker) {
  LatencyReport report;
  report.repetitions = repetitions;
  report.threads = std::max<std::size_t>(threads, 1);
  report.measure = report.threads > 1 ? "throughput" : "latency";
  if (n_queries == 0 || repetitions == 0) {
    report.error = n_queries == 0 ? "no queries to benchmark" : "repetitions must be >= 1";
    return report;
  }

  std::vector<double> sums(n_queries, 0.0);
  auto run_range = [&](std::size_t begin, std::size_t end) {
    QueryFn fn = make_worker();
    for (std::size_t i = begin; i < end; ++i) fn(i);  // warm-up sweep
    for (std::size_t rep = 0; rep < repetitions; ++rep) {
      for (std::size_t i = begin; i < end; ++i) {
        const auto start = Clock::now();
        fn(i);
        sums[i] += static_cast<double>(std::chrono::duration_cast<std::chrono::nanoseconds>(Clock::now() - start).count());
      }
    }
  };

  const auto wall_start = Clock::now();
  if (report.threads == 1) {
    run_range(0, n_queries);
  } else {
    std::vector<std::thread> pool;
    const std::size_t chunk = (n_queries + report.threads - 1) / report.threads;
    for (std::size_t t = 0; t < report.threads; ++t) {
      const std::size_t b = std::min(n_queries, t * chunk);
      const std::size_t e = std::min(n_queries, b + chunk);
      if (b < e) pool.emplace_back(run_range, b, e);
    }
    for (auto& th : pool) th.join();
  }
  const double wall_s = std::chrono::duration<double>(Clock::now() - wall_start).count();

  report.samples_ns.reserve(n_queries);
  for (double s : sums) report.samples_ns.push_back(static_cast<std::uint64_t>(std::llround(s / static_cast<double>(repetitions))));
  summarize(report);
  if (report.measure == "throughput" && wall_s > 0.0) {
    // Wall time includes the warm-up sweep, which is one extra pass.
    report.queries_per_sec = static_cast<double>(n_queries * (repetitions + 1)) / wall_s;
  }
  return report;
}

LatencyReport bench_search(const InvertedIndex& idx, std::span<const SparseVector> queries,
                           const SearchParams& params, std::size_t repetitions, std::size_t threads) {
  params.validate();
  require(params.mode != SearchMode::kTwoStep, "bench_search: use bench_two_step for two-step retrieval");
  auto report = bench_queries(queries.size(), repetitions, threads, [&]() -> QueryFn {
    auto searcher = std::make_shared<Searcher>(idx);
    return [searcher, &queries, &params](std::size_t i) {
      if (params.mode == SearchMode::kExact) {
        searcher->exact(queries[i], params.k);
      } else {
        searcher->approximate(queries[i], params);
      }
    };
  });
  report.params = params;
  report.label = std::string(to_string(params.mode)) + " k=" + std::to_string(params.k) +
                 " query_cut=" + std::to_string(params.query_cut) + " heap_factor=" + std::to_string(params.heap_factor) +
                 " k_d=" + std::to_string(idx.k_d());
  return report;
}

LatencyReport bench_two_step(const InvertedIndex& stage1, const InvertedIndex& main,
                             std::span<const SparseVector> queries, const TwoStepConfig& cfg, std::size_t k,
                             std::size_t repetitions, std::size_t threads) {
  cfg.validate(k);
  auto report = bench_queries(queries.size(), repetitions, threads, [&]() -> QueryFn {
    auto searcher = std::make_shared<TwoStepSearcher>(stage1, main, cfg);
    return [searcher, &queries, k](std::size_t i) { searcher->search_ords(queries[i], k); };
  });
  report.params.k = k;
  report.params.query_cut = cfg.stage2_k_q;
  report.params.heap_factor = cfg.stage1_heap_factor;
  report.params.mode = SearchMode::kTwoStep;
  report.label = "two-step stage1=(" + std::to_string(cfg.stage1.k_q) + "," + std::to_string(cfg.stage1.k_d) +
                 ") stage1_k=" + std::to_string(cfg.stage1_k) + " stage2_k_q=" + std::to_string(cfg.stage2_k_q) +
                 " main_k_d=" + std::to_string(main.k_d());
  return report;
}

namespace {

template <typename DotFn>
double time_dot_batches(std::span<const SparseVector> docs, std::size_t count, std::size_t batches, DotFn&& fn) {
  require(!docs.empty() && count >= 1 && batches >= 1, "dot benchmark needs documents, count and batches");
  volatile float sink = 0.0f;
  std::size_t cursor = 0;
  double total_ns = 0.0;
  for (std::size_t b = 0; b <= batches; ++b) {  // batch 0 is warm-up
    const auto start = Clock::now();
    float acc = fn(cursor, count);
    const auto ns = static_cast<double>(std::chrono::duration_cast<std::chrono::nanoseconds>(Clock::now() - start).count());
    sink = sink + acc;
    cursor = (cursor + count) % docs.size();
    if (b > 0) total_ns += ns;
  }
  (void)sink;
  return total_ns / static_cast<double>(batches);
}

}  // namespace

double bench_dot_batch(SparseView query, std::span<const SparseVector> docs, std::size_t count,
                       std::size_t batches) {
  // Rescoring reads documents from the contiguous forward store, so pack them
  // the same way here.
  std::vector<TermId> terms;
  std::vector<Weight> weights;
  std::vector<std::size_t> offsets{0};
  for (const auto& d : docs) {
    terms.insert(terms.end(), d.terms().begin(), d.terms().end());
    weights.insert(weights.end(), d.weights().begin(), d.weights().end());
    offsets.push_back(terms.size());
  }
  const std::uint32_t vocab = query.vocab_size;
  auto view = [&](std::size_t i) {
    const std::size_t b = offsets[i], len = offsets[i + 1] - b;
    return SparseView{vocab, std::span<const TermId>(terms.data() + b, len),
                      std::span<const Weight>(weights.data() + b, len)};
  };
  DenseQuery dq(vocab);
  return time_dot_batches(docs, count, batches, [&](std::size_t cursor, std::size_t n) {
    dq.load(query);
    float acc = 0.0f;
    for (std::size_t i = 0; i < n; ++i) acc += dq.dot(view((cursor + i) % docs.size()));
    return acc;
  });
}

double bench_dot_batch_merge(SparseView query, std::span<const SparseVector> docs, std::size_t count,
                             std::size_t batches) {
  return time_dot_batches(docs, count, batches, [&](std::size_t cursor, std::size_t n) {
    float acc = 0.0f;
    for (std::size_t i = 0; i < n; ++i) acc += dot(query, docs[(cursor + i) % docs.size()]);
    return acc;
  });
}

}  // namespace lsr
