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

#include "lsr/cli.hpp"

#include <CLI11.hpp>
#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <json.hpp>
#include <sstream>
#include <thread>

#include "lsr/bm25.hpp"
#include "lsr/corpus_io.hpp"
#include "lsr/error.hpp"
#include "lsr/evaluation.hpp"
#include "lsr/index.hpp"
#include "lsr/objectives.hpp"
#include "lsr/retrieval.hpp"
#include "lsr/synth.hpp"

namespace lsr {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

// Rejected flag combinations; reported as usage errors.
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

void usage_check(bool cond, const std::string& what) {
  if (!cond) throw UsageError(what);
}

std::size_t default_threads() {
  if (const char* env = std::getenv(kThreadsEnv)) {
    const long v = std::strtol(env, nullptr, 10);
    if (v >= 1) return static_cast<std::size_t>(v);
  }
  return 1;
}

PruneConfig parse_prune_pair(const std::string& s) {
  const auto comma = s.find(',');
  usage_check(comma != std::string::npos, "expected a 'k_q,k_d' pair, got '" + s + "'");
  try {
    const long kq = std::stol(s.substr(0, comma));
    const long kd = std::stol(s.substr(comma + 1));
    usage_check(kq >= 1 && kd >= 1, "pruning budgets must be >= 1");
    return {static_cast<std::uint32_t>(kq), static_cast<std::uint32_t>(kd)};
  } catch (const std::logic_error&) {
    throw UsageError("expected a 'k_q,k_d' pair, got '" + s + "'");
  }
}

std::vector<VectorRecord> load_queries(const std::string& path, std::uint32_t vocab) {
  return read_vectors(path, vocab);
}

json report_json(const LatencyReport& r) {
  json j;
  j["label"] = r.label;
  j["measure"] = r.measure;
  j["mode"] = to_string(r.params.mode);
  j["k"] = r.params.k;
  j["query_cut"] = r.params.query_cut;
  j["heap_factor"] = std::isinf(r.params.heap_factor) ? json("inf") : json(r.params.heap_factor);
  j["threads"] = r.threads;
  j["repetitions"] = r.repetitions;
  j["queries"] = r.samples_ns.size();
  j["mean_ns"] = r.mean_ns;
  j["p50_ns"] = r.p50_ns;
  j["p95_ns"] = r.p95_ns;
  j["p99_ns"] = r.p99_ns;
  j["queries_per_sec"] = r.queries_per_sec;
  j["samples_ns"] = r.samples_ns;
  if (!r.error.empty()) j["error"] = r.error;
  return j;
}

void print_report(std::ostream& out, const LatencyReport& r) {
  out << std::fixed << std::setprecision(3);
  out << "config      " << r.label << '\n';
  out << "measure     " << r.measure << " (threads=" << r.threads << ", repetitions=" << r.repetitions << ")\n";
  out << "queries     " << r.samples_ns.size() << '\n';
  out << "mean_ms     " << r.mean_ns / 1e6 << '\n';
  out << "p50_ms      " << static_cast<double>(r.p50_ns) / 1e6 << '\n';
  out << "p95_ms      " << static_cast<double>(r.p95_ns) / 1e6 << '\n';
  out << "p99_ms      " << static_cast<double>(r.p99_ns) / 1e6 << '\n';
  out << "qps         " << r.queries_per_sec << '\n';
}

struct Options {
  bool json = false;

  // shared
  std::string index_path, queries_path, out_path, vectors_path, format;
  std::uint32_t vocab = 0;
  std::size_t threads = default_threads();

  // aggregate / index
  std::string logits_path;
  std::uint32_t k_d = 1000;

  // search / bench
  std::size_t k = 1000;
  std::size_t query_cut = 500;
  double heap_factor = 2.5;
  std::string mode = "approximate";
  bool two_step = false;
  std::string stage1 = "10,100";
  std::size_t stage1_k = 1000;
  std::size_t stage2_k_q = 500;
  std::string stage1_index;
  std::string tag = "lsr";
  std::string bm25_corpus, query_tokens, token_format = "jsonl";
  double k1 = 0.9, b = 0.4;
  std::size_t repetitions = 3;
  bool dot_micro = false;
  std::size_t dot_count = 1000;
  std::uint32_t dot_nnz = 400;

  // eval
  std::string run_path, qrels_path, exact_run_path;
  std::vector<std::string> metrics{"ndcg@10"};

  // synth
  std::string out_dir;
  SynthSpec synth;
  bool no_tokens = false;

  // explain
  std::string docs_path, query_id, doc_id;
  std::size_t top_n = 10;

  // loss
  std::string teacher_path;
  double tau = 300.0;
  bool toy = false;
  std::size_t epochs = 20;
  double lambda = 1e-3;
  double lr = 0.5;
  std::uint64_t seed = 7;
};

// ---------------------------------------------------------------------------

int cmd_aggregate(const Options& o, std::ostream& out) {
  LogitReader reader(o.logits_path, o.vocab);
  const auto fmt = o.format.empty() ? vector_format_for(o.out_path) : parse_vector_format(o.format);
  VectorWriter writer(o.out_path, fmt, reader.vocab_size());
  std::size_t records = 0, total_nnz = 0;
  while (auto rec = reader.next_aggregated()) {
    writer.write(rec->id, rec->vec);
    ++records;
    total_nnz += rec->vec.nnz();
  }
  writer.close();
  const double mean = records ? static_cast<double>(total_nnz) / static_cast<double>(records) : 0.0;
  if (o.json) {
    out << json{{"records", records}, {"vocab_size", reader.vocab_size()}, {"mean_nnz", mean}, {"out", o.out_path}}.dump()
        << '\n';
  } else {
    out << "records   " << records << "\nvocab     " << reader.vocab_size() << "\nmean_nnz  " << mean << '\n';
  }
  return kExitOk;
}

int cmd_index(const Options& o, std::ostream& out) {
  const auto fmt = o.format.empty() ? vector_format_for(o.vectors_path) : parse_vector_format(o.format);
  VectorReader reader(o.vectors_path, fmt, o.vocab);
  IndexBuilder builder(o.k_d, reader.vocab_size());
  while (auto rec = reader.next()) builder.add(rec->id, rec->vec);
  const auto idx = std::move(builder).finish();
  save_index(idx, o.out_path);
  if (o.json) {
    out << json{{"docs", idx.doc_count()}, {"vocab_size", idx.vocab_size()}, {"k_d", idx.k_d()},
                {"postings", idx.total_postings()}, {"out", o.out_path}}.dump()
        << '\n';
  } else {
    out << "docs      " << idx.doc_count() << "\nvocab     " << idx.vocab_size() << "\nk_d       " << idx.k_d()
        << "\npostings  " << idx.total_postings() << '\n';
  }
  return kExitOk;
}

TwoStepConfig two_step_config(const Options& o) {
  TwoStepConfig cfg;
  cfg.stage1 = parse_prune_pair(o.stage1);
  cfg.stage1_k = o.stage1_k;
  cfg.stage2_k_q = o.stage2_k_q;
  cfg.stage1_heap_factor = o.heap_factor;
  usage_check(cfg.stage1_k >= o.k, "--stage1-k must be >= --k");
  return cfg;
}

SearchParams search_params(const Options& o) {
  SearchParams p;
  p.k = o.k;
  p.query_cut = o.query_cut;
  p.heap_factor = o.heap_factor;
  p.mode = parse_search_mode(o.mode);
  usage_check(p.mode != SearchMode::kTwoStep || o.two_step, "use --two-step for two-step retrieval");
  if (o.two_step) p.mode = SearchMode::kTwoStep;
  try {
    p.validate();
  } catch (const Error& e) {
    throw UsageError(e.what());
  }
  return p;
}

// Runs `per_query(i)` for every query, optionally across threads, keeping
// output order stable.
template <typename MakeWorker>
std::vector<RankedList> run_all(std::size_t n, std::size_t threads, MakeWorker make_worker) {
  std::vector<RankedList> results(n);
  threads = std::max<std::size_t>(1, std::min(threads, n));
  if (threads <= 1) {
    auto fn = make_worker();
    for (std::size_t i = 0; i < n; ++i) results[i] = fn(i);
    return results;
  }
  std::vector<std::thread> pool;
  std::vector<std::exception_ptr> errors(threads);
  for (std::size_t t = 0; t < threads; ++t) {
    pool.emplace_back([&, t] {
      try {
        auto fn = make_worker();
        for (std::size_t i = t; i < n; i += threads) results[i] = fn(i);
      } catch (...) {
        errors[t] = std::current_exception();
      }
    });
  }
  for (auto& th : pool) th.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  return results;
}

void emit_results(const Options& o, const std::vector<RankedList>& results, std::ostream& out) {
  double total_ms = 0.0;
  for (const auto& r : results) total_ms += static_cast<double>(r.latency_ns) / 1e6;
  const double mean_ms = results.empty() ? 0.0 : total_ms / static_cast<double>(results.size());
  if (!o.out_path.empty()) {
    std::ofstream f(o.out_path, std::ios::trunc);
    if (!f) fail(ErrorKind::kIo, "cannot open '" + o.out_path + "' for writing");
    write_run(f, results, o.tag);
    f.close();
    if (!f) fail(ErrorKind::kIo, "failed writing '" + o.out_path + "'");
    if (o.json) {
      out << json{{"queries", results.size()}, {"mean_latency_ms", mean_ms}, {"out", o.out_path}}.dump() << '\n';
    }
    return;
  }
  if (o.json) {
    json arr = json::array();
    for (const auto& r : results) {
      json hits = json::array();
      for (const auto& h : r.hits) hits.push_back({{"doc_id", h.doc_id}, {"score", h.score}});
      arr.push_back({{"query_id", r.query_id}, {"hits", hits}});
    }
    out << json{{"results", arr}}.dump() << '\n';
  } else {
    write_run(out, results, o.tag);
  }
}

int cmd_search_bm25(const Options& o, std::ostream& out) {
  const auto fmt = o.token_format == "text" ? TokenFormat::kText : TokenFormat::kJsonl;
  const auto corpus = read_token_corpus(o.bm25_corpus, fmt);
  const auto queries = read_token_corpus(o.query_tokens, fmt);
  const auto idx = build_bm25(corpus, {o.k1, o.b});
  auto results = run_all(queries.size(), o.threads, [&] {
    auto s = std::make_shared<Bm25Searcher>(idx);
    return [s, &queries, &o](std::size_t i) { return s->search(queries[i].doc_id, queries[i].tokens, o.k); };
  });
  emit_results(o, results, out);
  return kExitOk;
}

int cmd_search(const Options& o, std::ostream& out) {
  if (!o.bm25_corpus.empty()) {
    usage_check(!o.query_tokens.empty(), "--bm25-corpus requires --query-tokens");
    return cmd_search_bm25(o, out);
  }
  usage_check(!o.index_path.empty(), "search requires --index (or --bm25-corpus)");
  usage_check(!o.queries_path.empty(), "search requires --queries");
  const auto params = search_params(o);
  std::optional<TwoStepConfig> ts;
  if (o.two_step) {
    usage_check(!o.stage1_index.empty(), "--two-step requires --stage1-index");
    ts = two_step_config(o);
  }

  const auto idx = load_index(o.index_path);
  const auto queries = load_queries(o.queries_path, o.vocab ? o.vocab : idx.vocab_size());
  std::vector<RankedList> results;
  if (ts) {
    const auto stage1 = load_index(o.stage1_index);
    if (stage1.k_d() != ts->stage1.k_d) {
      fail(ErrorKind::kInvalidInput, "stage-1 index was built with k_d=" + std::to_string(stage1.k_d()) +
                                         " but --stage1 asks for k_d=" + std::to_string(ts->stage1.k_d));
    }
    TwoStepSearcher probe(stage1, idx, *ts);  // validates the corpora once
    results = run_all(queries.size(), o.threads, [&] {
      auto s = std::make_shared<TwoStepSearcher>(stage1, idx, *ts);
      return [s, &queries, &params](std::size_t i) { return s->search(queries[i].id, queries[i].vec, params.k); };
    });
  } else {
    results = run_all(queries.size(), o.threads, [&] {
      auto s = std::make_shared<Searcher>(idx);
      return [s, &queries, &params](std::size_t i) { return s->search(queries[i].id, queries[i].vec, params); };
    });
  }
  emit_results(o, results, out);
  return kExitOk;
}

int cmd_eval(const Options& o, std::ostream& out) {
  const auto run = read_run(o.run_path);
  std::optional<Qrels> qrels;
  std::optional<RunFile> exact;
  json j;
  std::ostringstream human;
  human << std::fixed << std::setprecision(4);
  for (const auto& metric : o.metrics) {
    const auto at = metric.find('@');
    usage_check(at != std::string::npos, "metric must look like name@k, got '" + metric + "'");
    const auto name = metric.substr(0, at);
    std::size_t k = 0;
    try {
      k = std::stoul(metric.substr(at + 1));
    } catch (const std::logic_error&) {
      throw UsageError("bad cutoff in metric '" + metric + "'");
    }
    usage_check(k >= 1, "metric cutoff must be >= 1");
    if (name == "recall_vs_exact") {
      usage_check(!o.exact_run_path.empty(), "recall_vs_exact needs --exact-run");
      if (!exact) exact = read_run(o.exact_run_path);
      const double v = recall_vs_exact(run, *exact, k);
      j[metric] = {{"mean", v}, {"queries", exact->size()}};
      human << metric << '\t' << v << '\n';
      continue;
    }
    usage_check(!o.qrels_path.empty(), metric + " needs --qrels");
    if (!qrels) qrels = read_qrels(o.qrels_path);
    MetricResult r;
    if (name == "ndcg") {
      r = ndcg_at_k(run, *qrels, k);
    } else if (name == "mrr") {
      r = mrr_at_k(run, *qrels, k);
    } else if (name == "recall") {
      r = recall_at_k(run, *qrels, k);
    } else {
      throw UsageError("unknown metric '" + name + "' (ndcg, mrr, recall, recall_vs_exact)");
    }
    j[metric] = {{"mean", r.mean},
                 {"evaluated", r.evaluated},
                 {"missing_from_qrels", r.missing_from_qrels},
                 {"no_relevant", r.no_relevant},
                 {"per_query", r.per_query}};
    human << metric << '\t' << r.mean << '\n';
  }
  if (o.json) {
    out << json{{"metrics", j}}.dump() << '\n';
  } else {
    out << human.str();
  }
  return kExitOk;
}

int cmd_bench(const Options& o, std::ostream& out, std::ostream& err) {
  if (o.dot_micro) {
    // One query against `dot_count` documents, all 400-of-100k style vectors.
    SynthSpec spec;
    spec.vocab_size = o.vocab ? o.vocab : 100000;
    spec.doc_count = static_cast<std::uint32_t>(std::max<std::size_t>(o.dot_count, 1));
    spec.mean_doc_nnz = o.dot_nnz;
    spec.query_count = 1;
    spec.mean_query_nnz = o.dot_nnz;
    spec.make_tokens = false;
    spec.seed = o.seed;
    const auto data = generate_synthetic(spec);
    std::vector<SparseVector> docs;
    for (const auto& d : data.docs) docs.push_back(d.vec);
    const double dense_ns = bench_dot_batch(data.queries[0].vec, docs, o.dot_count, std::max<std::size_t>(o.repetitions, 1) * 100);
    const double merge_ns = bench_dot_batch_merge(data.queries[0].vec, docs, o.dot_count, std::max<std::size_t>(o.repetitions, 1) * 100);
    if (o.json) {
      out << json{{"dot_products", o.dot_count}, {"nnz", o.dot_nnz}, {"vocab_size", spec.vocab_size},
                  {"dense_query_us", dense_ns / 1e3}, {"merge_join_us", merge_ns / 1e3}, {"reference_us", 50.0}}
                 .dump()
          << '\n';
    } else {
      out << std::fixed << std::setprecision(2) << o.dot_count << " dot products (" << o.dot_nnz << " nnz, vocab "
          << spec.vocab_size << ")\n  dense-query path  " << dense_ns / 1e3 << " us\n  merge-join path   "
          << merge_ns / 1e3 << " us\n  reference         50.00 us\n";
    }
    return kExitOk;
  }

  usage_check(!o.index_path.empty(), "bench requires --index (or --dot-micro)");
  usage_check(!o.queries_path.empty(), "bench requires --queries");
  const auto params = search_params(o);
  const auto idx = load_index(o.index_path);
  const auto records = load_queries(o.queries_path, o.vocab ? o.vocab : idx.vocab_size());
  std::vector<SparseVector> queries;
  for (const auto& r : records) queries.push_back(r.vec);

  LatencyReport report;
  if (o.two_step) {
    usage_check(!o.stage1_index.empty(), "--two-step requires --stage1-index");
    const auto cfg = two_step_config(o);
    const auto stage1 = load_index(o.stage1_index);
    report = bench_two_step(stage1, idx, queries, cfg, params.k, o.repetitions, o.threads);
  } else {
    report = bench_search(idx, queries, params, o.repetitions, o.threads);
  }
  if (!report.error.empty()) {
    err << "bench: " << report.error << '\n';
    if (o.json) out << report_json(report).dump() << '\n';
    return kExitData;
  }
  if (o.json) {
    out << report_json(report).dump() << '\n';
  } else {
    print_report(out, report);
  }
  return kExitOk;
}

int cmd_synth(const Options& o, std::ostream& out) {
  SynthSpec spec = o.synth;
  spec.make_tokens = !o.no_tokens;
  const auto data = generate_synthetic(spec);
  fs::create_directories(o.out_dir);
  const auto fmt = o.format.empty() ? VectorFormat::kSpv1 : parse_vector_format(o.format);
  const std::string ext = fmt == VectorFormat::kSpv1 ? ".spv1" : ".jsonl";
  const auto dir = fs::path(o.out_dir);
  write_vectors(dir / ("docs" + ext), fmt, data.vocab_size, data.docs);
  write_vectors(dir / ("queries" + ext), fmt, data.vocab_size, data.queries);
  {
    std::ofstream q(dir / "qrels.txt", std::ios::trunc);
    if (!q) fail(ErrorKind::kIo, "cannot write qrels under '" + o.out_dir + "'");
    write_qrels(q, data.qrels);
  }
  if (spec.make_tokens) {
    write_token_corpus(dir / "doc_tokens.jsonl", data.doc_tokens);
    write_token_corpus(dir / "query_tokens.jsonl", data.query_tokens);
  }
  std::vector<SparseVector> docs;
  for (const auto& d : data.docs) docs.push_back(d.vec);
  const auto st = density_stats(docs);
  if (o.json) {
    out << json{{"docs", data.docs.size()}, {"queries", data.queries.size()}, {"vocab_size", data.vocab_size},
                {"mean_nnz", st.mean_nnz}, {"max_nnz", st.max_nnz}, {"mean_weight", st.mean_weight},
                {"out_dir", o.out_dir}}
               .dump()
        << '\n';
  } else {
    out << "docs        " << data.docs.size() << "\nqueries     " << data.queries.size() << "\nmean_nnz    "
        << st.mean_nnz << "\nmax_nnz     " << st.max_nnz << "\nmean_weight " << st.mean_weight << '\n';
  }
  return kExitOk;
}

int cmd_explain(const Options& o, std::ostream& out) {
  std::optional<InvertedIndex> idx;
  std::uint32_t vocab = o.vocab;
  if (!o.index_path.empty()) {
    idx = load_index(o.index_path);
    if (vocab == 0) vocab = idx->vocab_size();
  }
  const auto queries = read_vectors(o.queries_path, vocab);
  auto q = std::find_if(queries.begin(), queries.end(), [&](const auto& r) { return r.id == o.query_id; });
  if (q == queries.end()) fail(ErrorKind::kValidation, "query '" + o.query_id + "' not found");

  std::optional<SparseVector> doc;
  if (idx) {
    const auto ord = idx->find(o.doc_id);
    if (!ord) fail(ErrorKind::kValidation, "doc '" + o.doc_id + "' not in index");
    doc = SparseVector::from_view(idx->forward(*ord));
  } else {
    const auto docs = read_vectors(o.docs_path, vocab);
    auto d = std::find_if(docs.begin(), docs.end(), [&](const auto& r) { return r.id == o.doc_id; });
    if (d == docs.end()) fail(ErrorKind::kValidation, "doc '" + o.doc_id + "' not found");
    doc = d->vec;
  }
  const auto rows = explain_match(q->vec, *doc, o.top_n);
  const float total = dot(q->vec, *doc);
  if (o.json) {
    json arr = json::array();
    for (const auto& r : rows) {
      arr.push_back({{"term", r.term}, {"q_weight", r.q_weight}, {"d_weight", r.d_weight}, {"contribution", r.contribution}});
    }
    out << json{{"query_id", o.query_id}, {"doc_id", o.doc_id}, {"score", total}, {"terms", arr}}.dump() << '\n';
  } else {
    out << "score " << total << '\n' << "term\tq_weight\td_weight\tcontribution\n";
    for (const auto& r : rows) out << r.term << '\t' << r.q_weight << '\t' << r.d_weight << '\t' << r.contribution << '\n';
  }
  return kExitOk;
}

int cmd_loss(const Options& o, std::ostream& out) {
  if (o.toy) {
    ToyConfig cfg;
    cfg.loss.lambda_q = o.lambda;
    cfg.loss.lambda_d = o.lambda;
    cfg.learning_rate = o.lr;
    cfg.seed = o.seed;
    const auto corpus = make_toy_corpus(o.seed);
    const auto res = toy_distill(corpus, o.epochs, cfg);
    if (res.diverged) fail(ErrorKind::kValidation, "toy distillation diverged (non-finite loss)");
    json j{{"epochs", o.epochs},         {"lambda", o.lambda},
           {"initial_kld", res.initial_kld}, {"final_kld", res.final_kld},
           {"initial_flops", res.initial_flops}, {"final_flops", res.final_flops},
           {"mean_nnz", res.mean_nnz},   {"steps", res.loss_history.size()}};
    if (o.json) {
      out << j.dump() << '\n';
    } else {
      for (const auto& [k, v] : j.items()) out << std::left << std::setw(14) << k << v.dump() << '\n';
    }
    return kExitOk;
  }

  usage_check(!o.teacher_path.empty(), "loss requires --teacher (or --toy)");
  const auto records = read_teacher_scores(o.teacher_path);
  if (records.empty()) fail(ErrorKind::kValidation, "teacher file has no records");
  const std::size_t cols = records.front().teacher.size();
  ScoreBatch batch{Matrix(records.size(), cols), Matrix(records.size(), cols), o.tau};
  for (std::size_t i = 0; i < records.size(); ++i) {
    if (records[i].teacher.size() != cols) fail(ErrorKind::kValidation, "all records need the same candidate count");
    for (std::size_t j = 0; j < cols; ++j) {
      batch.teacher(i, j) = records[i].teacher[j];
      batch.student(i, j) = records[i].student_init ? (*records[i].student_init)[j] : 0.0;
    }
  }
  const auto res = kld_loss(batch);
  double gnorm = 0.0;
  for (double g : res.grad.data) gnorm += g * g;
  gnorm = std::sqrt(gnorm);
  if (o.json) {
    out << json{{"kld", res.loss}, {"temperature", o.tau}, {"queries", records.size()}, {"grad_norm", gnorm}}.dump()
        << '\n';
  } else {
    out << std::setprecision(10) << "kld        " << res.loss << "\ngrad_norm  " << gnorm << '\n';
  }
  return kExitOk;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  Options o;
  CLI::App app{"Learned sparse retrieval toolkit: aggregation, indexing, search, evaluation"};
  app.name("lsr");
  app.require_subcommand(1);
  app.fallthrough();
  app.set_config("--config", "", "TOML config file; command-line flags take precedence");
  app.add_flag("--json", o.json, "Machine-readable JSON on stdout");

  auto* agg = app.add_subcommand("aggregate", "Pool LGT1 logit matrices into sparse vectors");
  agg->add_option("--logits", o.logits_path, "Input LGT1 file")->required();
  agg->add_option("--out", o.out_path, "Output vector file")->required();
  agg->add_option("--format", o.format, "Output format: spv1 | jsonl (default: from extension)");
  agg->add_option("--vocab", o.vocab, "Expected vocabulary size (checked against the file)");

  auto* index = app.add_subcommand("index", "Build an impact-ordered inverted index");
  index->add_option("--vectors", o.vectors_path, "Document vectors (SPV1 or JSONL)")->required();
  index->add_option("--out", o.out_path, "Output index file (.lsri)")->required();
  index->add_option("--k-d", o.k_d, "Document pruning budget")->capture_default_str()->check(CLI::PositiveNumber);
  index->add_option("--vocab", o.vocab, "Vocabulary size (required for JSONL input)");
  index->add_option("--format", o.format, "Input format: spv1 | jsonl (default: from extension)");

  auto add_search_flags = [&](CLI::App* sub) {
    sub->add_option("--index", o.index_path, "Main index file");
    sub->add_option("--queries", o.queries_path, "Query vectors (SPV1 or JSONL)");
    sub->add_option("--vocab", o.vocab, "Vocabulary size for JSONL queries (default: index vocab)");
    sub->add_option("--k", o.k, "Results per query")->capture_default_str();
    sub->add_option("--query-cut", o.query_cut, "Max query terms scored")->capture_default_str();
    sub->add_option("--heap-factor", o.heap_factor, "Early-termination slack (>= 1)")->capture_default_str();
    sub->add_option("--mode", o.mode, "exact | approximate")->capture_default_str();
    sub->add_flag("--two-step", o.two_step, "Two-step retrieval (needs --stage1-index)");
    sub->add_option("--stage1", o.stage1, "Stage-1 pruning as k_q,k_d")->capture_default_str();
    sub->add_option("--stage1-k", o.stage1_k, "Stage-1 candidate pool size")->capture_default_str();
    sub->add_option("--stage1-index", o.stage1_index, "Index built with the stage-1 k_d");
    sub->add_option("--stage2-k-q", o.stage2_k_q, "Query pruning for stage-2 rescoring")->capture_default_str();
    sub->add_option("--threads", o.threads, std::string("Worker threads (default: $") + kThreadsEnv + " or 1)");
  };

  auto* search = app.add_subcommand("search", "Retrieve top-k documents for each query");
  add_search_flags(search);
  search->add_option("--out", o.out_path, "TREC run output (default: stdout)");
  search->add_option("--tag", o.tag, "Run tag column")->capture_default_str();
  search->add_option("--bm25-corpus", o.bm25_corpus, "Token corpus for the BM25 baseline");
  search->add_option("--query-tokens", o.query_tokens, "Token queries for the BM25 baseline");
  search->add_option("--token-format", o.token_format, "jsonl | text (FNV-1a hashed tokens)")->capture_default_str();
  search->add_option("--k1", o.k1, "BM25 k1")->capture_default_str();
  search->add_option("--b", o.b, "BM25 b")->capture_default_str();

  auto* eval = app.add_subcommand("eval", "Score a TREC run");
  eval->add_option("--run", o.run_path, "TREC run file")->required();
  eval->add_option("--qrels", o.qrels_path, "TREC qrels file");
  eval->add_option("--metric", o.metrics, "ndcg@k | mrr@k | recall@k | recall_vs_exact@k (repeatable)")
      ->capture_default_str();
  eval->add_option("--exact-run", o.exact_run_path, "Reference run for recall_vs_exact");

  auto* bench = app.add_subcommand("bench", "Retrieval-only latency benchmark");
  add_search_flags(bench);
  bench->add_option("--repetitions", o.repetitions, "Timed sweeps after one warm-up")->capture_default_str();
  bench->add_flag("--dot-micro", o.dot_micro, "Time batches of sparse dot products instead");
  bench->add_option("--dot-count", o.dot_count, "Dot products per batch")->capture_default_str();
  bench->add_option("--dot-nnz", o.dot_nnz, "Non-zeros per vector in the micro-benchmark")->capture_default_str();
  bench->add_option("--seed", o.seed, "Seed for micro-benchmark vectors")->capture_default_str();

  auto* synth = app.add_subcommand("synth", "Generate a synthetic collection");
  synth->add_option("--out-dir", o.out_dir, "Output directory")->required();
  synth->add_option("--seed", o.synth.seed, "PRNG seed")->capture_default_str();
  synth->add_option("--vocab", o.synth.vocab_size, "Vocabulary size")->capture_default_str();
  synth->add_option("--docs", o.synth.doc_count, "Number of documents")->capture_default_str();
  synth->add_option("--doc-nnz", o.synth.mean_doc_nnz, "Mean document non-zeros")->capture_default_str();
  synth->add_option("--queries", o.synth.query_count, "Number of queries")->capture_default_str();
  synth->add_option("--query-nnz", o.synth.mean_query_nnz, "Mean query non-zeros")->capture_default_str();
  synth->add_option("--relevant", o.synth.relevant_per_query, "Relevant docs per query")->capture_default_str();
  synth->add_option("--overlap", o.synth.overlap_strength, "Query/relevant-doc overlap in (0,1]")->capture_default_str();
  synth->add_option("--zipf", o.synth.zipf_exponent, "Zipf exponent of term draws")->capture_default_str();
  synth->add_option("--format", o.format, "Vector format: spv1 | jsonl");
  synth->add_flag("--no-tokens", o.no_tokens, "Skip the token corpora");

  auto* explain = app.add_subcommand("explain", "Per-term contributions of one query/doc pair");
  explain->add_option("--queries", o.queries_path, "Query vectors")->required();
  explain->add_option("--query-id", o.query_id, "Query id")->required();
  explain->add_option("--doc-id", o.doc_id, "Document id")->required();
  explain->add_option("--index", o.index_path, "Index holding the document's forward vector");
  explain->add_option("--docs", o.docs_path, "Document vectors (alternative to --index)");
  explain->add_option("--top-n", o.top_n, "Terms to show")->capture_default_str();
  explain->add_option("--vocab", o.vocab, "Vocabulary size for JSONL inputs");

  auto* loss = app.add_subcommand("loss", "Distillation / sparsity objectives");
  loss->add_option("--teacher", o.teacher_path, "Teacher-score JSONL");
  loss->add_option("--tau", o.tau, "Softmax temperature")->capture_default_str();
  loss->add_flag("--toy", o.toy, "Run the toy distillation instead");
  loss->add_option("--epochs", o.epochs, "Toy epochs")->capture_default_str();
  loss->add_option("--lambda", o.lambda, "Toy FLOPs weight (queries and documents)")->capture_default_str();
  loss->add_option("--lr", o.lr, "Toy learning rate")->capture_default_str();
  loss->add_option("--seed", o.seed, "Toy seed")->capture_default_str();

  std::vector<std::string> argv_store{"lsr"};
  argv_store.insert(argv_store.end(), args.begin(), args.end());
  std::vector<char*> argv;
  for (auto& a : argv_store) argv.push_back(a.data());

  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    app.exit(e, err, err);
    return kExitUsage;
  }

  try {
    if (*agg) {
      if (o.vocab == 0) o.vocab = 0;
      return cmd_aggregate(o, out);
    }
    if (*index) return cmd_index(o, out);
    if (*search) return cmd_search(o, out);
    if (*eval) return cmd_eval(o, out);
    if (*bench) return cmd_bench(o, out, err);
    if (*synth) {
      usage_check(!o.out_dir.empty(), "synth requires --out-dir");
      return cmd_synth(o, out);
    }
    if (*explain) {
      usage_check(!o.index_path.empty() || !o.docs_path.empty(), "explain requires --index or --docs");
      return cmd_explain(o, out);
    }
    if (*loss) return cmd_loss(o, out);
  } catch (const UsageError& e) {
    err << "usage error: " << e.what() << "\n\n" << app.help();
    return kExitUsage;
  } catch (const Error& e) {
    err << "error (" << to_string(e.kind()) << "): " << e.what() << '\n';
    return e.kind() == ErrorKind::kIo ? kExitIo : kExitData;
  } catch (const fs::filesystem_error& e) {
    err << "error (i/o): " << e.what() << '\n';
    return kExitIo;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitData;
  }
  return kExitUsage;
}

}  // namespace lsr
