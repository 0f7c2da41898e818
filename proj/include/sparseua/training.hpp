// Copyright 2026 The sparseua Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <vector>

#include "sparseua/attention.hpp"
#include "sparseua/numerics.hpp"
#include "sparseua/patterns.hpp"

namespace sparseua {

/// Sequences "0 s 0 s" of length n; the second half is masked.
struct CopyBatch {
  std::size_t n = 0;
  std::size_t count = 0;
  std::vector<int> tokens;  // count x n, row per sequence
  std::vector<char> mask;   // n, 1 on prediction targets

  int token(std::size_t seq, std::size_t pos) const { return tokens[seq * n + pos]; }
};

/// Payload symbols are uniform on [1, vocab). Requires even n >= 4, vocab >= 2.
CopyBatch copy_task_gen(std::size_t n, std::size_t vocab, std::size_t count, std::uint64_t seed);

struct TrainConfig {
  std::size_t n = 32, vocab = 16, d = 64, h = 4, m = 16, r = 128, layers = 2;
  SparsityPattern pattern = dense(32);
  HeadConfig head_config = HeadConfig::Sequential;
  bool scale_scores = true;
  bool causal = false;
  double init_std = 0.02;
  double learning_rate = 1e-3;
  double beta1 = 0.9, beta2 = 0.999, adam_eps = 1e-8;
  /// Linear ramp of the learning rate over the first warmup_steps steps.
  std::size_t warmup_steps = 0;
  /// Cosine decay from the peak rate to min_lr_ratio * peak at the last step.
  bool cosine_decay = false;
  double min_lr_ratio = 0.1;
  /// Rescale gradients to this global norm when larger; 0 disables.
  double grad_clip = 0.0;
  std::size_t steps = 1000;
  std::size_t batch = 64;
  std::uint64_t seed = 0;
  /// Reuse one batch every step.
  bool fixed_batch = false;
  std::size_t eval_every = 100;
  std::size_t eval_size = 256;

  /// Token id fed at masked positions.
  int mask_token() const { return static_cast<int>(vocab); }
  void validate() const;
};

/// Trainable weights. The token embedding has vocab + 1 columns; the last one
/// is the mask token.
struct ModelParams {
  Matrix token_embedding;  // d x (vocab + 1)
  Matrix positional;       // d x n
  std::vector<BlockWeights> blocks;
  Matrix out_proj;  // vocab x d
  Vector out_bias;  // vocab

  static ModelParams init(const TrainConfig& cfg, std::uint64_t seed);
  static ModelParams zeros_like(const ModelParams& p);

  /// Every tensor as (data, size), in a fixed order.
  std::vector<std::pair<double*, Eigen::Index>> tensors();
  std::vector<std::pair<const double*, Eigen::Index>> tensors() const;
  std::size_t num_scalars() const;
};

/// Model input: masked positions replaced by the mask token.
std::vector<int> masked_inputs(const CopyBatch& batch, int mask_token);

/// d x n embedding of one input sequence, E included.
Matrix embed(const ModelParams& params, const int* tokens, std::size_t n);

/// vocab x (n * count) logits; sequence b occupies columns [b n, (b+1) n).
Matrix forward_logits(const ModelParams& params, const CopyBatch& batch, const TrainConfig& cfg);
/// Logits for explicit input tokens (count x n, row per sequence).
Matrix forward_logits_tokens(const ModelParams& params, const std::vector<int>& inputs,
                             std::size_t count, const TrainConfig& cfg);

struct LossAndGrads {
  double loss = 0.0;
  ModelParams grads;
};

/// Mean cross-entropy over masked positions and its exact gradient.
LossAndGrads loss_and_grads(const ModelParams& params, const CopyBatch& batch, const TrainConfig& cfg);
double loss_only(const ModelParams& params, const CopyBatch& batch, const TrainConfig& cfg);

struct Accuracy {
  double masked = 0.0;
  double all_tokens = 0.0;
};
Accuracy eval_accuracy(const ModelParams& params, const CopyBatch& data, const TrainConfig& cfg);

struct AdamState {
  ModelParams m, v;
  std::size_t step = 0;
};

/// lr overrides cfg.learning_rate when positive.
void adam_step(ModelParams& params, const ModelParams& grads, AdamState& state, const TrainConfig& cfg,
               double lr = 0.0);

/// Scheduled learning rate for a 1-based step.
double learning_rate_at(const TrainConfig& cfg, std::size_t step);

/// Global L2 norm over every gradient tensor.
double grad_norm(const ModelParams& grads);

struct MetricRow {
  std::size_t step = 0;
  double loss = 0.0;
  double masked_accuracy = 0.0;
  double all_accuracy = 0.0;
};

struct TrainResult {
  ModelParams params;
  AdamState optimizer;
  std::vector<MetricRow> trace;
  Accuracy final_accuracy;
};

/// Adam on fresh batches (seeded per step). Evaluates on a held-out set every
/// eval_every steps and at the end. Throws TrainingError on a non-finite loss.
TrainResult train(const TrainConfig& cfg, const std::function<void(const MetricRow&)>& on_eval = {});

}  // namespace sparseua
