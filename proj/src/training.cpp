// Copyright 2026 The sparseua Authors
// SPDX-License-Identifier: Apache-2.0

#include "sparseua/training.hpp"

#include <cmath>

#include "sparseua/probmaps.hpp"

namespace sparseua {
namespace {

using Act = Eigen::MatrixXd;  // column-major activations, one column per token

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t salt) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (salt + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// Key sets per block and head, causal restriction applied.
using Plan = std::vector<std::vector<std::vector<IndexSet>>>;

Plan make_plan(const TrainConfig& cfg) {
  const HeadLayout layout = apply_head_config(cfg.pattern, cfg.head_config);
  const std::size_t p = layout.groups[0].p();
  Plan plan(cfg.layers);
  for (std::size_t b = 0; b < cfg.layers; ++b) {
    for (const auto* sets : head_sets(layout, block_pattern_index(b, p), cfg.h))
      plan[b].push_back(effective_sets(*sets, cfg.causal));
  }
  return plan;
}

struct HeadCache {
  Act q, k, v;
  std::vector<Vector> probs;  // per token column
};

struct BlockCache {
  Act x;
  std::vector<HeadCache> heads;
  Act stacked, a, u;
};

struct ForwardCache {
  std::vector<int> inputs;
  std::size_t count = 0;
  std::vector<BlockCache> blocks;
  Act y;
  Act logits;
};

Act project(const Matrix& w, const Vector& b, const Act& x) {
  Act out = w * x;
  out.colwise() += b;
  return out;
}

ForwardCache run_forward(const ModelParams& params, const std::vector<int>& inputs, std::size_t count,
                         const TrainConfig& cfg, const Plan& plan) {
  const std::size_t n = cfg.n;
  const auto N = static_cast<Eigen::Index>(n * count);
  const double scale = cfg.scale_scores ? 1.0 / std::sqrt(static_cast<double>(cfg.m)) : 1.0;
  ForwardCache fc;
  fc.inputs = inputs;
  fc.count = count;

  Act x(static_cast<Eigen::Index>(cfg.d), N);
  for (Eigen::Index c = 0; c < N; ++c) {
    const int tok = inputs[static_cast<std::size_t>(c)];
    if (tok < 0 || tok > cfg.mask_token()) throw ParameterError("token id out of range");
    x.col(c) = params.token_embedding.col(tok) + params.positional.col(c % static_cast<Eigen::Index>(n));
  }

  for (std::size_t b = 0; b < cfg.layers; ++b) {
    const BlockWeights& w = params.blocks[b];
    BlockCache bc;
    bc.x = x;
    const auto m = static_cast<Eigen::Index>(cfg.m);
    bc.stacked.resize(m * static_cast<Eigen::Index>(cfg.h), N);
    for (std::size_t i = 0; i < cfg.h; ++i) {
      HeadCache hc;
      hc.q = project(w.heads[i].wq, w.heads[i].bq, x);
      hc.k = project(w.heads[i].wk, w.heads[i].bk, x);
      hc.v = project(w.heads[i].wv, w.heads[i].bv, x);
      hc.probs.resize(static_cast<std::size_t>(N));
      const auto& sets = plan[b][i];
      for (Eigen::Index c = 0; c < N; ++c) {
        const Eigen::Index base = c - c % static_cast<Eigen::Index>(n);
        const IndexSet& keys = sets[static_cast<std::size_t>(c - base)];
        Vector scores(static_cast<Eigen::Index>(keys.size()));
        for (std::size_t a = 0; a < keys.size(); ++a)
          scores[static_cast<Eigen::Index>(a)] = scale * hc.k.col(base + static_cast<Eigen::Index>(keys[a])).dot(hc.q.col(c));
        Vector pr = softmax(scores);
        auto out = bc.stacked.block(static_cast<Eigen::Index>(i) * m, c, m, 1);
        out.setZero();
        for (std::size_t a = 0; a < keys.size(); ++a)
          out += pr[static_cast<Eigen::Index>(a)] * hc.v.col(base + static_cast<Eigen::Index>(keys[a]));
        hc.probs[static_cast<std::size_t>(c)] = std::move(pr);
      }
      bc.heads.push_back(std::move(hc));
    }
    bc.a = x + w.wo * bc.stacked;
    bc.a.colwise() += w.bo;
    bc.u = project(w.w1, w.b1, bc.a);
    x = bc.a + w.w2 * bc.u.cwiseMax(0.0);
    x.colwise() += w.b2;
    fc.blocks.push_back(std::move(bc));
  }
  fc.y = x;
  fc.logits = project(params.out_proj, params.out_bias, x);
  return fc;
}

std::vector<int> check_inputs(const std::vector<int>& inputs, std::size_t count, const TrainConfig& cfg) {
  if (inputs.size() != count * cfg.n) throw ShapeError("inputs must hold count x n tokens");
  return inputs;
}

/// Column-wise log-softmax.
Act log_softmax(const Act& logits) {
  Act out(logits.rows(), logits.cols());
  for (Eigen::Index c = 0; c < logits.cols(); ++c) {
    const double top = logits.col(c).maxCoeff();
    const double lse = top + std::log((logits.col(c).array() - top).exp().sum());
    out.col(c) = logits.col(c).array() - lse;
  }
  return out;
}

void require_batch(const CopyBatch& batch, const TrainConfig& cfg) {
  if (batch.n != cfg.n) throw ShapeError("batch length does not match n");
  if (batch.count == 0) throw ShapeError("empty batch");
}

}  // namespace

CopyBatch copy_task_gen(std::size_t n, std::size_t vocab, std::size_t count, std::uint64_t seed) {
  if (n < 4 || n % 2 != 0) throw ParameterError("copy task needs even n >= 4");
  if (vocab < 2) throw ParameterError("copy task needs vocab >= 2");
  Rng rng(seed);
  CopyBatch batch;
  batch.n = n;
  batch.count = count;
  batch.tokens.assign(n * count, 0);
  const std::size_t half = n / 2;
  for (std::size_t s = 0; s < count; ++s) {
    for (std::size_t i = 1; i < half; ++i) {
      const int sym = 1 + static_cast<int>(rng.below(vocab - 1));
      batch.tokens[s * n + i] = sym;
      batch.tokens[s * n + half + i] = sym;
    }
  }
  batch.mask.assign(n, 0);
  for (std::size_t i = half; i < n; ++i) batch.mask[i] = 1;
  return batch;
}

void TrainConfig::validate() const {
  if (n < 4 || n % 2 != 0) throw ParameterError("train: n must be even and >= 4");
  if (vocab < 2) throw ParameterError("train: vocab must be >= 2");
  if (d == 0 || h == 0 || m == 0 || r == 0) throw ParameterError("train: dimensions must be positive");
  if (pattern.n() != n) throw ParameterError("train: pattern length does not match n");
  if (head_config == HeadConfig::Multihead && h % 2 != 0) throw ParameterError("train: multihead needs even h");
  if (batch == 0) throw ParameterError("train: batch must be positive");
  if (!(learning_rate > 0.0)) throw ParameterError("train: learning rate must be positive");
  if (eval_size == 0) throw ParameterError("train: eval_size must be positive");
  if (!(min_lr_ratio >= 0.0 && min_lr_ratio <= 1.0)) throw ParameterError("train: min_lr_ratio must lie in [0, 1]");
  if (!(grad_clip >= 0.0)) throw ParameterError("train: grad_clip must be non-negative");
}

ModelParams ModelParams::init(const TrainConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  Rng rng(seed);
  const auto D = static_cast<Eigen::Index>(cfg.d);
  ModelParams p;
  auto gauss = [&](Eigen::Index rows, Eigen::Index cols) {
    Matrix a(rows, cols);
    for (Eigen::Index i = 0; i < a.size(); ++i) a.data()[i] = cfg.init_std * rng.normal();
    return a;
  };
  p.token_embedding = gauss(D, static_cast<Eigen::Index>(cfg.vocab + 1));
  p.positional = gauss(D, static_cast<Eigen::Index>(cfg.n));
  for (std::size_t b = 0; b < cfg.layers; ++b)
    p.blocks.push_back(BlockWeights::random(cfg.d, cfg.h, cfg.m, cfg.r, cfg.init_std, rng));
  p.out_proj = gauss(static_cast<Eigen::Index>(cfg.vocab), D);
  p.out_bias = Vector::Zero(static_cast<Eigen::Index>(cfg.vocab));
  return p;
}

ModelParams ModelParams::zeros_like(const ModelParams& p) {
  ModelParams z = p;
  for (auto [data, size] : z.tensors()) std::fill(data, data + size, 0.0);
  return z;
}

namespace {

template <typename Params, typename Ptr>
std::vector<std::pair<Ptr, Eigen::Index>> collect_tensors(Params& p) {
  std::vector<std::pair<Ptr, Eigen::Index>> out;
  auto add = [&](auto& t) { out.emplace_back(t.data(), t.size()); };
  add(p.token_embedding);
  add(p.positional);
  for (auto& b : p.blocks) {
    for (auto& h : b.heads) {
      add(h.wq);
      add(h.wk);
      add(h.wv);
      add(h.bq);
      add(h.bk);
      add(h.bv);
    }
    add(b.wo);
    add(b.bo);
    add(b.w1);
    add(b.b1);
    add(b.w2);
    add(b.b2);
  }
  add(p.out_proj);
  add(p.out_bias);
  return out;
}

}  // namespace

std::vector<std::pair<double*, Eigen::Index>> ModelParams::tensors() {
  return collect_tensors<ModelParams, double*>(*this);
}

std::vector<std::pair<const double*, Eigen::Index>> ModelParams::tensors() const {
  return collect_tensors<const ModelParams, const double*>(*this);
}

std::size_t ModelParams::num_scalars() const {
  std::size_t total = 0;
  for (auto [data, size] : tensors()) total += static_cast<std::size_t>(size);
  return total;
}

std::vector<int> masked_inputs(const CopyBatch& batch, int mask_token) {
  std::vector<int> out = batch.tokens;
  for (std::size_t s = 0; s < batch.count; ++s)
    for (std::size_t i = 0; i < batch.n; ++i)
      if (batch.mask[i]) out[s * batch.n + i] = mask_token;
  return out;
}

Matrix embed(const ModelParams& params, const int* tokens, std::size_t n) {
  Matrix x(params.positional.rows(), static_cast<Eigen::Index>(n));
  for (std::size_t i = 0; i < n; ++i)
    x.col(static_cast<Eigen::Index>(i)) = params.token_embedding.col(tokens[i]) + params.positional.col(static_cast<Eigen::Index>(i));
  return x;
}

Matrix forward_logits_tokens(const ModelParams& params, const std::vector<int>& inputs,
                             std::size_t count, const TrainConfig& cfg) {
  const Plan plan = make_plan(cfg);
  const ForwardCache fc = run_forward(params, check_inputs(inputs, count, cfg), count, cfg, plan);
  return fc.logits;
}

Matrix forward_logits(const ModelParams& params, const CopyBatch& batch, const TrainConfig& cfg) {
  require_batch(batch, cfg);
  return forward_logits_tokens(params, masked_inputs(batch, cfg.mask_token()), batch.count, cfg);
}

double loss_only(const ModelParams& params, const CopyBatch& batch, const TrainConfig& cfg) {
  require_batch(batch, cfg);
  const Plan plan = make_plan(cfg);
  const ForwardCache fc = run_forward(params, masked_inputs(batch, cfg.mask_token()), batch.count, cfg, plan);
  const Act logp = log_softmax(fc.logits);
  double total = 0.0;
  std::size_t targets = 0;
  for (Eigen::Index c = 0; c < logp.cols(); ++c) {
    const auto pos = static_cast<std::size_t>(c) % cfg.n;
    if (!batch.mask[pos]) continue;
    total -= logp(batch.tokens[static_cast<std::size_t>(c)], c);
    ++targets;
  }
  return total / static_cast<double>(targets);
}

LossAndGrads loss_and_grads(const ModelParams& params, const CopyBatch& batch, const TrainConfig& cfg) {
  require_batch(batch, cfg);
  const Plan plan = make_plan(cfg);
  const ForwardCache fc = run_forward(params, masked_inputs(batch, cfg.mask_token()), batch.count, cfg, plan);
  const std::size_t n = cfg.n;
  const Eigen::Index N = fc.logits.cols();
  const double scale = cfg.scale_scores ? 1.0 / std::sqrt(static_cast<double>(cfg.m)) : 1.0;

  LossAndGrads out{0.0, ModelParams::zeros_like(params)};
  ModelParams& g = out.grads;

  // Output layer and masked cross-entropy.
  const Act logp = log_softmax(fc.logits);
  std::size_t targets = 0;
  for (std::size_t c = 0; c < static_cast<std::size_t>(N); ++c) targets += batch.mask[c % n] ? 1 : 0;
  Act dlogits = Act::Zero(fc.logits.rows(), N);
  for (Eigen::Index c = 0; c < N; ++c) {
    if (!batch.mask[static_cast<std::size_t>(c) % n]) continue;
    const int target = batch.tokens[static_cast<std::size_t>(c)];
    out.loss -= logp(target, c);
    dlogits.col(c) = logp.col(c).array().exp();
    dlogits(target, c) -= 1.0;
  }
  out.loss /= static_cast<double>(targets);
  if (!std::isfinite(out.loss)) throw TrainingError("non-finite loss");
  dlogits /= static_cast<double>(targets);

  g.out_proj = dlogits * fc.y.transpose();
  g.out_bias = dlogits.rowwise().sum();
  Act dx = params.out_proj.transpose() * dlogits;

  for (std::size_t b = cfg.layers; b-- > 0;) {
    const BlockWeights& w = params.blocks[b];
    BlockWeights& gw = g.blocks[b];
    const BlockCache& bc = fc.blocks[b];
    const auto m = static_cast<Eigen::Index>(cfg.m);

    // Feed-forward sublayer: y = a + W2 relu(u) + b2, u = W1 a + b1.
    const Act relu_u = bc.u.cwiseMax(0.0);
    gw.w2 = dx * relu_u.transpose();
    gw.b2 = dx.rowwise().sum();
    Act du = (w.w2.transpose() * dx).array() * (bc.u.array() > 0.0).cast<double>();
    gw.w1 = du * bc.a.transpose();
    gw.b1 = du.rowwise().sum();
    Act da = dx + w.w1.transpose() * du;

    // Attention sublayer: a = x + Wo H + bo.
    gw.wo = da * bc.stacked.transpose();
    gw.bo = da.rowwise().sum();
    const Act dstacked = w.wo.transpose() * da;
    Act dxb = da;
    for (std::size_t i = 0; i < cfg.h; ++i) {
      const HeadCache& hc = bc.heads[i];
      const auto& sets = plan[b][i];
      Act dq = Act::Zero(m, N), dk = Act::Zero(m, N), dv = Act::Zero(m, N);
      for (Eigen::Index c = 0; c < N; ++c) {
        const Eigen::Index base = c - c % static_cast<Eigen::Index>(n);
        const IndexSet& keys = sets[static_cast<std::size_t>(c - base)];
        const Vector& pr = hc.probs[static_cast<std::size_t>(c)];
        const auto dh = dstacked.block(static_cast<Eigen::Index>(i) * m, c, m, 1);
        Vector dp(static_cast<Eigen::Index>(keys.size()));
        for (std::size_t a = 0; a < keys.size(); ++a) {
          const Eigen::Index j = base + static_cast<Eigen::Index>(keys[a]);
          dp[static_cast<Eigen::Index>(a)] = dh.col(0).dot(hc.v.col(j));
          dv.col(j) += pr[static_cast<Eigen::Index>(a)] * dh;
        }
        const double inner = pr.dot(dp);
        for (std::size_t a = 0; a < keys.size(); ++a) {
          const Eigen::Index j = base + static_cast<Eigen::Index>(keys[a]);
          const double ds = scale * pr[static_cast<Eigen::Index>(a)] * (dp[static_cast<Eigen::Index>(a)] - inner);
          dq.col(c) += ds * hc.k.col(j);
          dk.col(j) += ds * hc.q.col(c);
        }
      }
      HeadWeights& gh = gw.heads[i];
      const HeadWeights& wh = w.heads[i];
      gh.wq = dq * bc.x.transpose();
      gh.wk = dk * bc.x.transpose();
      gh.wv = dv * bc.x.transpose();
      gh.bq = dq.rowwise().sum();
      gh.bk = dk.rowwise().sum();
      gh.bv = dv.rowwise().sum();
      dxb += wh.wq.transpose() * dq + wh.wk.transpose() * dk + wh.wv.transpose() * dv;
    }
    dx = std::move(dxb);
  }

  for (Eigen::Index c = 0; c < N; ++c) {
    g.token_embedding.col(fc.inputs[static_cast<std::size_t>(c)]) += dx.col(c);
    g.positional.col(c % static_cast<Eigen::Index>(n)) += dx.col(c);
  }
  return out;
}

Accuracy eval_accuracy(const ModelParams& params, const CopyBatch& data, const TrainConfig& cfg) {
  const Matrix logits = forward_logits(params, data, cfg);
  std::size_t masked_hits = 0, masked_total = 0, all_hits = 0;
  for (Eigen::Index c = 0; c < logits.cols(); ++c) {
    const auto pred = static_cast<int>(argmax_col(logits.col(c)));
    const bool hit = pred == data.tokens[static_cast<std::size_t>(c)];
    all_hits += hit;
    if (data.mask[static_cast<std::size_t>(c) % data.n]) {
      ++masked_total;
      masked_hits += hit;
    }
  }
  return {static_cast<double>(masked_hits) / static_cast<double>(masked_total),
          static_cast<double>(all_hits) / static_cast<double>(logits.cols())};
}

double learning_rate_at(const TrainConfig& cfg, std::size_t step) {
  double lr = cfg.learning_rate;
  if (cfg.warmup_steps > 0 && step <= cfg.warmup_steps) {
    return lr * static_cast<double>(step) / static_cast<double>(cfg.warmup_steps);
  }
  if (cfg.cosine_decay && cfg.steps > cfg.warmup_steps) {
    const double span = static_cast<double>(cfg.steps - cfg.warmup_steps);
    const double frac = static_cast<double>(step - cfg.warmup_steps) / span;
    const double cosine = 0.5 * (1.0 + std::cos(3.14159265358979323846 * std::min(frac, 1.0)));
    lr *= cfg.min_lr_ratio + (1.0 - cfg.min_lr_ratio) * cosine;
  }
  return lr;
}

double grad_norm(const ModelParams& grads) {
  double sq = 0.0;
  for (auto [data, size] : grads.tensors())
    for (Eigen::Index j = 0; j < size; ++j) sq += data[j] * data[j];
  return std::sqrt(sq);
}

void adam_step(ModelParams& params, const ModelParams& grads, AdamState& state, const TrainConfig& cfg,
               double lr) {
  if (!(lr > 0.0)) lr = cfg.learning_rate;
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double c1 = 1.0 - std::pow(cfg.beta1, t);
  const double c2 = 1.0 - std::pow(cfg.beta2, t);
  auto p = params.tensors();
  const auto g = grads.tensors();
  auto m = state.m.tensors();
  auto v = state.v.tensors();
  if (p.size() != g.size() || p.size() != m.size() || p.size() != v.size()) {
    throw ShapeError("adam: parameter layout mismatch");
  }
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (p[i].second != g[i].second) throw ShapeError("adam: tensor size mismatch");
    for (Eigen::Index j = 0; j < p[i].second; ++j) {
      const double gj = g[i].first[j];
      double& mj = m[i].first[j];
      double& vj = v[i].first[j];
      mj = cfg.beta1 * mj + (1.0 - cfg.beta1) * gj;
      vj = cfg.beta2 * vj + (1.0 - cfg.beta2) * gj * gj;
      p[i].first[j] -= lr * (mj / c1) / (std::sqrt(vj / c2) + cfg.adam_eps);
    }
  }
}

TrainResult train(const TrainConfig& cfg, const std::function<void(const MetricRow&)>& on_eval) {
  cfg.validate();
  TrainResult res;
  res.params = ModelParams::init(cfg, mix_seed(cfg.seed, 0));
  res.optimizer.m = ModelParams::zeros_like(res.params);
  res.optimizer.v = ModelParams::zeros_like(res.params);
  const CopyBatch eval_set = copy_task_gen(cfg.n, cfg.vocab, cfg.eval_size, mix_seed(cfg.seed, 1));
  const CopyBatch fixed = copy_task_gen(cfg.n, cfg.vocab, cfg.batch, mix_seed(cfg.seed, 2));

  auto record = [&](std::size_t step, double loss) {
    const Accuracy acc = eval_accuracy(res.params, eval_set, cfg);
    MetricRow row{step, loss, acc.masked, acc.all_tokens};
    res.trace.push_back(row);
    if (on_eval) on_eval(row);
    return acc;
  };

  double loss = loss_only(res.params, cfg.fixed_batch ? fixed : eval_set, cfg);
  record(0, loss);
  for (std::size_t step = 1; step <= cfg.steps; ++step) {
    const CopyBatch batch =
        cfg.fixed_batch ? fixed : copy_task_gen(cfg.n, cfg.vocab, cfg.batch, mix_seed(cfg.seed, 1000 + step));
    LossAndGrads lg;
    try {
      lg = loss_and_grads(res.params, batch, cfg);
    } catch (const TrainingError& err) {
      throw TrainingError(std::string(err.what()) + " at step " + std::to_string(step) + " (last logged loss " +
                          std::to_string(res.trace.back().loss) + ")");
    }
    loss = lg.loss;
    if (cfg.grad_clip > 0.0) {
      const double norm = grad_norm(lg.grads);
      if (norm > cfg.grad_clip) {
        const double scale = cfg.grad_clip / norm;
        for (auto [data, size] : lg.grads.tensors())
          for (Eigen::Index j = 0; j < size; ++j) data[j] *= scale;
      }
    }
    adam_step(res.params, lg.grads, res.optimizer, cfg, learning_rate_at(cfg, step));
    if (step == cfg.steps || (cfg.eval_every > 0 && step % cfg.eval_every == 0)) record(step, loss);
  }
  res.final_accuracy = {res.trace.back().masked_accuracy, res.trace.back().all_accuracy};
  return res;
}

}  // namespace sparseua
