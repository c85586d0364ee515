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

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace lsr {

/// Row-major dense matrix of doubles; the objectives work at desk scale so a
/// plain buffer is enough.
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c, double fill = 0.0) : rows(r), cols(c), data(r * c, fill) {}
  Matrix(std::size_t r, std::size_t c, std::vector<double> values);

  double& operator()(std::size_t i, std::size_t j) { return data[i * cols + j]; }
  double operator()(std::size_t i, std::size_t j) const { return data[i * cols + j]; }
  std::span<const double> row(std::size_t i) const { return {data.data() + i * cols, cols}; }
};

/// B queries x (K+1) candidates of student/teacher scores.
struct ScoreBatch {
  Matrix student;
  Matrix teacher;
  double temperature = 300.0;

  void validate() const;
};

/// B x N non-negative activations (dense layout).
using ActivationBatch = Matrix;

struct LossConfig {
  double kld_weight = 0.5;
  double lambda_q = 1e-4;
  double lambda_d = 1e-4;
  double temperature = 300.0;

  void validate() const;
};

struct LossAndGrad {
  double loss = 0.0;
  Matrix grad;
};

/// Mean over rows of KL(softmax(teacher/tau) || softmax(student/tau)), with the
/// gradient w.r.t. student scores: (S - T) / (tau * B).
LossAndGrad kld_loss(const ScoreBatch& batch);

/// sum_t (mean_i u_{i,t})^2 and its gradient 2 * a_t / B.
LossAndGrad flops_penalty(const ActivationBatch& acts);

/// kld_weight * KLD + lambda_q * FLOPs(q) + lambda_d * FLOPs(d). The KLD term
/// is evaluated at cfg.temperature.
double combined_loss(const ScoreBatch& batch, const ActivationBatch& q_acts, const ActivationBatch& d_acts,
                     const LossConfig& cfg);

/// log-softmax of `x / tau`, stabilized by log-sum-exp.
std::vector<double> log_softmax(std::span<const double> x, double tau);

// ---------------------------------------------------------------------------
// Toy distillation: a linear bag-of-tokens encoder whose per-position logits
// are rows of a token x vocab weight table, pooled with the same
// log-saturated max aggregation as the retrieval side.

struct ToyExample {
  std::vector<std::uint32_t> query;
  std::vector<std::vector<std::uint32_t>> docs;  // positive first, then negatives
  std::vector<double> teacher;                   // one score per doc
};

struct ToyCorpus {
  std::uint32_t vocab_size = 0;
  std::vector<ToyExample> train;
  std::vector<ToyExample> heldout;
};

/// Random triples over a small vocabulary. The positive shares most of the
/// query's tokens; teacher score is proportional to query-token overlap.
ToyCorpus make_toy_corpus(std::uint64_t seed, std::size_t n_train = 64, std::size_t n_heldout = 16,
                          std::uint32_t vocab_size = 48, std::size_t negatives = 3);

struct ToyConfig {
  LossConfig loss{0.5, 1e-3, 1e-3, 1.0};
  double learning_rate = 0.5;
  std::size_t batch_size = 8;
  double init_scale = 0.5;
  std::uint64_t seed = 7;
};

struct ToyResult {
  Matrix weights;                   // token x vocab
  std::vector<double> loss_history; // combined loss per step
  double initial_flops = 0.0;       // FLOPs (q + d) on the held-out batch
  double final_flops = 0.0;
  double initial_kld = 0.0;         // KLD on the held-out batch
  double final_kld = 0.0;
  double mean_nnz = 0.0;            // mean active terms of held-out encodings
  bool diverged = false;
};

/// Plain full-gradient descent over mini-batches for `epochs` passes.
ToyResult toy_distill(const ToyCorpus& corpus, std::size_t epochs, const ToyConfig& cfg);

/// Encodes a token sequence with a toy weight table (one logit row per token).
std::vector<double> toy_encode(const Matrix& weights, std::span<const std::uint32_t> tokens);

}  // namespace lsr
