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

#include "lsr/objectives.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "lsr/error.hpp"
#include "lsr/rng.hpp"
#include "lsr/sparse.hpp"

namespace lsr {

namespace {

void require_finite(std::span<const double> xs, const char* what) {
  for (double x : xs) {
    if (!std::isfinite(x)) fail(ErrorKind::kInvalidInput, std::string(what) + " contains a non-finite value");
  }
}

}  // namespace

Matrix::Matrix(std::size_t r, std::size_t c, std::vector<double> values) : rows(r), cols(c), data(std::move(values)) {
  require(data.size() == rows * cols, "matrix value count does not match its shape");
}

void ScoreBatch::validate() const {
  require(student.rows == teacher.rows && student.cols == teacher.cols, "student and teacher shapes differ");
  require(student.rows >= 1 && student.cols >= 1, "score batch must be non-empty");
  require(std::isfinite(temperature) && temperature > 0.0, "temperature must be positive");
  require_finite(student.data, "student scores");
  require_finite(teacher.data, "teacher scores");
}

void LossConfig::validate() const {
  require(kld_weight > 0.0 && lambda_q > 0.0 && lambda_d > 0.0 && temperature > 0.0,
          "loss weights, lambdas and temperature must all be positive");
}

std::vector<double> log_softmax(std::span<const double> x, double tau) {
  double mx = -std::numeric_limits<double>::infinity();
  for (double v : x) mx = std::max(mx, v / tau);
  double sum = 0.0;
  for (double v : x) sum += std::exp(v / tau - mx);
  const double lse = mx + std::log(sum);
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] / tau - lse;
  return out;
}

LossAndGrad kld_loss(const ScoreBatch& batch) {
  batch.validate();
  const std::size_t rows = batch.student.rows;
  const double tau = batch.temperature;
  LossAndGrad out{0.0, Matrix(rows, batch.student.cols)};
  for (std::size_t b = 0; b < rows; ++b) {
    const auto log_t = log_softmax(batch.teacher.row(b), tau);
    const auto log_s = log_softmax(batch.student.row(b), tau);
    double row_loss = 0.0;
    for (std::size_t j = 0; j < log_t.size(); ++j) {
      const double t = std::exp(log_t[j]);
      if (t > 0.0) row_loss += t * (log_t[j] - log_s[j]);
      out.grad(b, j) = (std::exp(log_s[j]) - t) / (tau * static_cast<double>(rows));
    }
    out.loss += row_loss;
  }
  out.loss /= static_cast<double>(rows);
  return out;
}

LossAndGrad flops_penalty(const ActivationBatch& acts) {
  require(acts.rows >= 1, "activation batch must have at least one row");
  require_finite(acts.data, "activations");
  for (double u : acts.data) {
    if (u < 0.0) fail(ErrorKind::kInvalidInput, "activations must be non-negative");
  }
  const double inv_b = 1.0 / static_cast<double>(acts.rows);
  std::vector<double> mean(acts.cols, 0.0);
  for (std::size_t i = 0; i < acts.rows; ++i) {
    for (std::size_t t = 0; t < acts.cols; ++t) mean[t] += acts(i, t);
  }
  LossAndGrad out{0.0, Matrix(acts.rows, acts.cols)};
  for (std::size_t t = 0; t < acts.cols; ++t) {
    mean[t] *= inv_b;
    out.loss += mean[t] * mean[t];
  }
  for (std::size_t i = 0; i < acts.rows; ++i) {
    for (std::size_t t = 0; t < acts.cols; ++t) out.grad(i, t) = 2.0 * mean[t] * inv_b;
  }
  return out;
}

double combined_loss(const ScoreBatch& batch, const ActivationBatch& q_acts, const ActivationBatch& d_acts,
                     const LossConfig& cfg) {
  cfg.validate();
  ScoreBatch at_tau = batch;
  at_tau.temperature = cfg.temperature;
  return cfg.kld_weight * kld_loss(at_tau).loss + cfg.lambda_q * flops_penalty(q_acts).loss +
         cfg.lambda_d * flops_penalty(d_acts).loss;
}

// ---------------------------------------------------------------------------

ToyCorpus make_toy_corpus(std::uint64_t seed, std::size_t n_train, std::size_t n_heldout, std::uint32_t vocab_size,
                          std::size_t negatives) {
  require(vocab_size >= 8, "toy vocabulary too small");
  Xoshiro256 rng(seed);
  auto random_tokens = [&](std::size_t len) {
    std::vector<std::uint32_t> toks(len);
    for (auto& t : toks) t = static_cast<std::uint32_t>(rng.below(vocab_size));
    return toks;
  };
  auto overlap = [](const std::vector<std::uint32_t>& q, const std::vector<std::uint32_t>& d) {
    std::size_t hits = 0;
    for (auto t : q) hits += std::find(d.begin(), d.end(), t) != d.end();
    return static_cast<double>(hits) / static_cast<double>(q.size());
  };
  auto make_example = [&] {
    ToyExample ex;
    ex.query = random_tokens(4 + rng.below(3));
    // Positive: most query tokens plus filler.
    std::vector<std::uint32_t> pos = random_tokens(6 + rng.below(5));
    for (auto t : ex.query) {
      if (rng.uniform() < 0.8) pos.push_back(t);
    }
    ex.docs.push_back(std::move(pos));
    for (std::size_t n = 0; n < negatives; ++n) ex.docs.push_back(random_tokens(8 + rng.below(7)));
    for (const auto& d : ex.docs) ex.teacher.push_back(6.0 * overlap(ex.query, d));
    return ex;
  };
  ToyCorpus c;
  c.vocab_size = vocab_size;
  for (std::size_t i = 0; i < n_train; ++i) c.train.push_back(make_example());
  for (std::size_t i = 0; i < n_heldout; ++i) c.heldout.push_back(make_example());
  return c;
}

namespace {

// Pooled encoding plus, per term, the token whose logit won the max (or -1
// when the activation is zero and carries no gradient).
struct Encoding {
  std::vector<double> u;
  std::vector<std::int64_t> argtok;
};

Encoding encode(const Matrix& w, std::span<const std::uint32_t> tokens) {
  Encoding e{std::vector<double>(w.cols, 0.0), std::vector<std::int64_t>(w.cols, -1)};
  for (std::size_t t = 0; t < w.cols; ++t) {
    double best = 0.0;
    for (auto tok : tokens) {
      if (w(tok, t) > best) {
        best = w(tok, t);
        e.argtok[t] = tok;
      }
    }
    e.u[t] = std::log1p(best);
  }
  return e;
}

struct BatchEval {
  double kld = 0.0;
  double flops_q = 0.0;
  double flops_d = 0.0;
  double total = 0.0;
};

// Forward pass over a batch; when `grad` is non-null, accumulates dL/dW.
BatchEval evaluate(const Matrix& w, std::span<const ToyExample> batch, const LossConfig& cfg, Matrix* grad) {
  const std::size_t b = batch.size();
  const std::size_t c = batch.front().docs.size();
  const std::size_t v = w.cols;

  std::vector<Encoding> qe, de;
  for (const auto& ex : batch) {
    qe.push_back(encode(w, ex.query));
    for (const auto& d : ex.docs) de.push_back(encode(w, d));
  }

  ScoreBatch sb{Matrix(b, c), Matrix(b, c), cfg.temperature};
  for (std::size_t i = 0; i < b; ++i) {
    for (std::size_t j = 0; j < c; ++j) {
      double s = 0.0;
      for (std::size_t t = 0; t < v; ++t) s += qe[i].u[t] * de[i * c + j].u[t];
      sb.student(i, j) = s;
      sb.teacher(i, j) = batch[i].teacher[j];
    }
  }
  Matrix qa(b, v), da(b * c, v);
  for (std::size_t i = 0; i < b; ++i) std::copy(qe[i].u.begin(), qe[i].u.end(), qa.data.begin() + i * v);
  for (std::size_t i = 0; i < b * c; ++i) std::copy(de[i].u.begin(), de[i].u.end(), da.data.begin() + i * v);

  const auto kld = kld_loss(sb);
  const auto fq = flops_penalty(qa);
  const auto fd = flops_penalty(da);
  BatchEval ev{kld.loss, fq.loss, fd.loss,
               cfg.kld_weight * kld.loss + cfg.lambda_q * fq.loss + cfg.lambda_d * fd.loss};
  if (grad == nullptr) return ev;

  auto backprop = [&](const Encoding& e, std::size_t t, double dl_du) {
    if (e.argtok[t] < 0) return;
    const auto tok = static_cast<std::size_t>(e.argtok[t]);
    (*grad)(tok, t) += dl_du / (1.0 + w(tok, t));
  };
  for (std::size_t i = 0; i < b; ++i) {
    for (std::size_t t = 0; t < v; ++t) {
      double dq = cfg.lambda_q * fq.grad(i, t);
      for (std::size_t j = 0; j < c; ++j) {
        const auto& d = de[i * c + j];
        const double ds = cfg.kld_weight * kld.grad(i, j);
        dq += ds * d.u[t];
        backprop(d, t, ds * qe[i].u[t] + cfg.lambda_d * fd.grad(i * c + j, t));
      }
      backprop(qe[i], t, dq);
    }
  }
  return ev;
}

}  // namespace

std::vector<double> toy_encode(const Matrix& weights, std::span<const std::uint32_t> tokens) {
  return encode(weights, tokens).u;
}

ToyResult toy_distill(const ToyCorpus& corpus, std::size_t epochs, const ToyConfig& cfg) {
  cfg.loss.validate();
  require(cfg.learning_rate >= 0.0, "learning rate must be non-negative");
  require(cfg.batch_size >= 1, "batch size must be >= 1");
  require(!corpus.train.empty() && !corpus.heldout.empty(), "toy corpus needs train and held-out examples");

  ToyResult res;
  Xoshiro256 rng(cfg.seed);
  res.weights = Matrix(corpus.vocab_size, corpus.vocab_size);
  for (auto& x : res.weights.data) x = cfg.init_scale * rng.normal();

  const auto initial = evaluate(res.weights, corpus.heldout, cfg.loss, nullptr);
  res.initial_kld = initial.kld;
  res.initial_flops = initial.flops_q + initial.flops_d;

  const std::span<const ToyExample> train(corpus.train);
  for (std::size_t epoch = 0; epoch < epochs && !res.diverged; ++epoch) {
    for (std::size_t start = 0; start < train.size(); start += cfg.batch_size) {
      const auto batch = train.subspan(start, std::min(cfg.batch_size, train.size() - start));
      Matrix grad(res.weights.rows, res.weights.cols);
      const auto ev = evaluate(res.weights, batch, cfg.loss, &grad);
      res.loss_history.push_back(ev.total);
      if (!std::isfinite(ev.total)) {
        res.diverged = true;
        break;
      }
      for (std::size_t i = 0; i < grad.data.size(); ++i) res.weights.data[i] -= cfg.learning_rate * grad.data[i];
    }
  }

  const auto final_eval = evaluate(res.weights, corpus.heldout, cfg.loss, nullptr);
  res.final_kld = final_eval.kld;
  res.final_flops = final_eval.flops_q + final_eval.flops_d;
  if (!std::isfinite(final_eval.total)) res.diverged = true;

  if (res.diverged) return res;

  // Held-out encodings through the retrieval-side aggregation.
  std::size_t total = 0, count = 0;
  auto count_nnz = [&](const std::vector<std::uint32_t>& toks) {
    std::vector<float> logits;
    logits.reserve(toks.size() * corpus.vocab_size);
    for (auto tok : toks) {
      for (std::size_t t = 0; t < corpus.vocab_size; ++t) logits.push_back(static_cast<float>(res.weights(tok, t)));
    }
    total += aggregate(LogitMatrix(toks.size(), corpus.vocab_size, std::move(logits))).nnz();
    ++count;
  };
  for (const auto& ex : corpus.heldout) {
    count_nnz(ex.query);
    for (const auto& d : ex.docs) count_nnz(d);
  }
  res.mean_nnz = static_cast<double>(total) / static_cast<double>(count);
  return res;
}

}  // namespace lsr
