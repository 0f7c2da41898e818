// Copyright 2026 The sparseua Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <limits>

#include "grad_check.hpp"
#include "sparseua/attention.hpp"
#include "sparseua/training.hpp"

namespace sparseua {
namespace {

TEST(CopyTask, LayoutAndSeeding) {
  const CopyBatch b = copy_task_gen(8, 5, 20, 3);
  ASSERT_EQ(b.tokens.size(), 160u);
  for (std::size_t s = 0; s < b.count; ++s) {
    EXPECT_EQ(b.token(s, 0), 0);
    EXPECT_EQ(b.token(s, 4), 0);
    for (std::size_t i = 1; i < 4; ++i) {
      EXPECT_EQ(b.token(s, i), b.token(s, 4 + i));
      EXPECT_GE(b.token(s, i), 1);
      EXPECT_LT(b.token(s, i), 5);
    }
  }
  EXPECT_EQ(b.mask, (std::vector<char>{0, 0, 0, 0, 1, 1, 1, 1}));
  EXPECT_EQ(copy_task_gen(8, 5, 20, 3).tokens, b.tokens);
  EXPECT_NE(copy_task_gen(8, 5, 20, 4).tokens, b.tokens);
  EXPECT_THROW(copy_task_gen(7, 5, 1, 0), ParameterError);
  const auto in = masked_inputs(b, 5);
  EXPECT_EQ(in[5], 5);
  EXPECT_EQ(in[1], b.tokens[1]);
}

TEST(Model, LogitsMatchGenericStack) {
  TrainConfig cfg = testing::grad_check_config();
  for (HeadConfig hc : {HeadConfig::Sequential, HeadConfig::Union, HeadConfig::Multihead}) {
    cfg.head_config = hc;
    const ModelParams params = ModelParams::init(cfg, 17);
    const CopyBatch batch = copy_task_gen(cfg.n, cfg.vocab, 3, 5);
    const Matrix logits = forward_logits(params, batch, cfg);
    const auto inputs = masked_inputs(batch, cfg.mask_token());
    StackConfig sc;
    sc.d = cfg.d, sc.h = cfg.h, sc.m = cfg.m, sc.r = cfg.r;
    sc.pattern = cfg.pattern;
    sc.head_config = cfg.head_config;
    sc.options.scale_scores = cfg.scale_scores;
    for (std::size_t s = 0; s < batch.count; ++s) {
      const Matrix x = embed(params, inputs.data() + s * cfg.n, cfg.n);
      const Matrix y = forward_stack(x, Matrix::Zero(x.rows(), x.cols()), params.blocks, sc);
      Matrix expect = params.out_proj * y;
      expect.colwise() += params.out_bias;
      const auto cols = static_cast<Eigen::Index>(cfg.n);
      EXPECT_LT((logits.middleCols(static_cast<Eigen::Index>(s) * cols, cols) - expect).cwiseAbs().maxCoeff(), 1e-12);
    }
  }
}

TEST(Model, GradientsMatchFiniteDifferences) {
  TrainConfig cfg = testing::grad_check_config();
  const auto res = testing::gradient_check(cfg, 1);
  EXPECT_EQ(res.checked, ModelParams::init(cfg, 1).num_scalars());
  EXPECT_LE(res.max_rel_error, 1e-4);
  cfg.causal = true;
  cfg.head_config = HeadConfig::Union;
  cfg.layers = 1;
  EXPECT_LE(testing::gradient_check(cfg, 2).max_rel_error, 1e-4);
}

TEST(Model, LossIsMaskedCrossEntropy) {
  TrainConfig cfg = testing::grad_check_config();
  const ModelParams params = ModelParams::init(cfg, 4);
  const CopyBatch batch = copy_task_gen(cfg.n, cfg.vocab, 2, 9);
  const Matrix logits = forward_logits(params, batch, cfg);
  double total = 0.0;
  std::size_t count = 0;
  for (Eigen::Index c = 0; c < logits.cols(); ++c) {
    if (!batch.mask[static_cast<std::size_t>(c) % cfg.n]) continue;
    const double lse = std::log(logits.col(c).array().exp().sum());
    total += lse - logits(batch.tokens[static_cast<std::size_t>(c)], c);
    ++count;
  }
  EXPECT_NEAR(loss_only(params, batch, cfg), total / static_cast<double>(count), 1e-12);
  EXPECT_NEAR(loss_and_grads(params, batch, cfg).loss, total / static_cast<double>(count), 1e-12);
}

TEST(Adam, FirstStepMovesByLearningRate) {
  TrainConfig cfg = testing::grad_check_config();
  ModelParams p = ModelParams::init(cfg, 1);
  const ModelParams start = p;
  ModelParams g = ModelParams::zeros_like(p);
  g.out_bias.setConstant(-3.0);
  AdamState st{ModelParams::zeros_like(p), ModelParams::zeros_like(p), 0};
  adam_step(p, g, st, cfg);
  EXPECT_EQ(st.step, 1u);
  for (Eigen::Index i = 0; i < p.out_bias.size(); ++i)
    EXPECT_NEAR(p.out_bias[i] - start.out_bias[i], cfg.learning_rate, 1e-9);
  EXPECT_EQ(p.out_proj, start.out_proj);
}

TEST(Train, DeterministicAndLearnsFixedBatch) {
  TrainConfig cfg = testing::grad_check_config();
  cfg.n = 8;
  cfg.pattern = dense(8);
  cfg.init_std = 0.1;
  cfg.learning_rate = 1e-2;
  cfg.steps = 60;
  cfg.batch = 8;
  cfg.eval_every = 20;
  cfg.eval_size = 16;
  cfg.fixed_batch = true;
  cfg.seed = 3;
  std::vector<MetricRow> seen;
  const TrainResult a = train(cfg, [&](const MetricRow& r) { seen.push_back(r); });
  const TrainResult b = train(cfg);
  ASSERT_EQ(a.trace.size(), 4u);
  EXPECT_EQ(seen.size(), a.trace.size());
  for (std::size_t i = 0; i < a.trace.size(); ++i) {
    EXPECT_EQ(a.trace[i].loss, b.trace[i].loss);
    EXPECT_EQ(a.trace[i].masked_accuracy, b.trace[i].masked_accuracy);
  }
  EXPECT_EQ(a.params.out_proj, b.params.out_proj);
  EXPECT_LT(a.trace.back().loss, 0.5 * a.trace.front().loss);
}

TEST(Train, RejectsBadConfigsAndDivergence) {
  TrainConfig cfg = testing::grad_check_config();
  cfg.n = 5;
  EXPECT_THROW(cfg.validate(), ParameterError);
  cfg = testing::grad_check_config();
  cfg.pattern = dense(4);
  EXPECT_THROW(cfg.validate(), ParameterError);
  cfg = testing::grad_check_config();
  cfg.init_std = 1e200;
  cfg.steps = 2;
  EXPECT_THROW(train(cfg), std::exception);
}

}  // namespace
}  // namespace sparseua
