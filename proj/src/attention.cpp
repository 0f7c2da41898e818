// Copyright 2026 The sparseua Authors
// SPDX-License-Identifier: Apache-2.0

#include "sparseua/attention.hpp"

#include <cmath>

namespace sparseua {
namespace {

void check_shape(const Matrix& a, Eigen::Index rows, Eigen::Index cols, const char* what) {
  if (a.rows() != rows || a.cols() != cols) {
    throw ShapeError(std::string(what) + ": expected " + std::to_string(rows) + "x" +
                     std::to_string(cols) + ", got " + std::to_string(a.rows()) + "x" +
                     std::to_string(a.cols()));
  }
}

void check_len(const Vector& v, Eigen::Index n, const char* what) {
  if (v.size() != n) {
    throw ShapeError(std::string(what) + ": expected length " + std::to_string(n) + ", got " +
                     std::to_string(v.size()));
  }
}

Matrix project(const Matrix& w, const Vector& b, const Matrix& x) {
  Matrix out = matmul(w, x);
  out.colwise() += b;
  return out;
}

}  // namespace

BlockWeights BlockWeights::zeros(std::size_t d, std::size_t h, std::size_t m, std::size_t r) {
  const auto D = static_cast<Eigen::Index>(d), M = static_cast<Eigen::Index>(m),
             R = static_cast<Eigen::Index>(r);
  BlockWeights w;
  w.heads.resize(h, HeadWeights{Matrix::Zero(M, D), Matrix::Zero(M, D), Matrix::Zero(M, D),
                                Vector::Zero(M), Vector::Zero(M), Vector::Zero(M)});
  w.wo = Matrix::Zero(D, M * static_cast<Eigen::Index>(h));
  w.bo = Vector::Zero(D);
  w.w1 = Matrix::Zero(R, D);
  w.b1 = Vector::Zero(R);
  w.w2 = Matrix::Zero(D, R);
  w.b2 = Vector::Zero(D);
  return w;
}

BlockWeights BlockWeights::random(std::size_t d, std::size_t h, std::size_t m, std::size_t r,
                                  double stddev, Rng& rng) {
  BlockWeights w = zeros(d, h, m, r);
  auto fill = [&](Matrix& a) {
    for (Eigen::Index i = 0; i < a.size(); ++i) a.data()[i] = stddev * rng.normal();
  };
  for (auto& head : w.heads) {
    fill(head.wq);
    fill(head.wk);
    fill(head.wv);
  }
  fill(w.wo);
  fill(w.w1);
  fill(w.w2);
  return w;
}

void BlockWeights::validate(std::size_t d, std::size_t h, std::size_t m, std::size_t r) const {
  const auto D = static_cast<Eigen::Index>(d), M = static_cast<Eigen::Index>(m),
             R = static_cast<Eigen::Index>(r);
  if (heads.size() != h) throw ShapeError("block: expected " + std::to_string(h) + " heads");
  for (const auto& head : heads) {
    check_shape(head.wq, M, D, "W_Q");
    check_shape(head.wk, M, D, "W_K");
    check_shape(head.wv, M, D, "W_V");
    check_len(head.bq, M, "b_Q");
    check_len(head.bk, M, "b_K");
    check_len(head.bv, M, "b_V");
  }
  check_shape(wo, D, M * static_cast<Eigen::Index>(h), "W_O");
  check_len(bo, D, "b_O");
  check_shape(w1, R, D, "W_1");
  check_len(b1, R, "b_1");
  check_shape(w2, D, R, "W_2");
  check_len(b2, D, "b_2");
}

std::vector<IndexSet> effective_sets(const std::vector<IndexSet>& sets, bool causal) {
  std::vector<IndexSet> out(sets.size());
  for (std::size_t k = 0; k < sets.size(); ++k) {
    for (std::size_t j : sets[k])
      if (!causal || j <= k) out[k].push_back(j);
    if (out[k].empty()) throw PatternError("attention: empty key set for token " + std::to_string(k));
  }
  return out;
}

Matrix shead(const Matrix& x, const HeadWeights& w, const std::vector<IndexSet>& sets,
             const ProbabilityMapSpec& rho, const AttentionOptions& opt) {
  const Eigen::Index n = x.cols();
  if (static_cast<Eigen::Index>(sets.size()) != n) throw ShapeError("shead: need one key set per token");
  const Matrix q = project(w.wq, w.bq, x);
  const Matrix k = project(w.wk, w.bk, x);
  const Matrix v = project(w.wv, w.bv, x);
  const double scale = opt.scale_scores ? 1.0 / std::sqrt(static_cast<double>(q.rows())) : 1.0;
  const auto keys_of = effective_sets(sets, opt.causal);

  Matrix out(v.rows(), n);
  for (Eigen::Index c = 0; c < n; ++c) {
    const IndexSet& keys = keys_of[static_cast<std::size_t>(c)];
    if (keys.back() >= static_cast<std::size_t>(n)) throw PatternError("shead: key index out of range");
    Vector scores(static_cast<Eigen::Index>(keys.size()));
    for (std::size_t a = 0; a < keys.size(); ++a) {
      scores[static_cast<Eigen::Index>(a)] =
          scale * k.col(static_cast<Eigen::Index>(keys[a])).dot(q.col(c));
    }
    const Vector weights = apply_column(rho, scores);
    Vector acc = Vector::Zero(v.rows());
    for (std::size_t a = 0; a < keys.size(); ++a) {
      acc += weights[static_cast<Eigen::Index>(a)] * v.col(static_cast<Eigen::Index>(keys[a]));
    }
    out.col(c) = acc;
  }
  return out;
}

std::vector<const std::vector<IndexSet>*> head_sets(const HeadLayout& layout, std::size_t l,
                                                    std::size_t h) {
  std::vector<const std::vector<IndexSet>*> out(h);
  switch (layout.config) {
    case HeadConfig::Sequential: {
      const auto& pat = layout.groups.at(0);
      for (auto& s : out) s = &pat.sets()[l % pat.p()];
      break;
    }
    case HeadConfig::Union:
      for (auto& s : out) s = &layout.groups.at(0).sets()[0];
      break;
    case HeadConfig::Multihead:
      if (h % 2 != 0) throw ParameterError("multihead head config needs an even head count");
      for (std::size_t i = 0; i < h; ++i) out[i] = &layout.groups.at(i < h / 2 ? 0 : 1).sets()[0];
      break;
  }
  return out;
}

Matrix sattn(const Matrix& x, const BlockWeights& w, const HeadLayout& layout, std::size_t l,
             const ProbabilityMapSpec& rho, const AttentionOptions& opt) {
  const std::size_t h = w.h();
  w.validate(static_cast<std::size_t>(x.rows()), h, w.m(), w.r());
  const auto sets = head_sets(layout, l, h);
  const auto m = static_cast<Eigen::Index>(w.m());
  Matrix stacked(m * static_cast<Eigen::Index>(h), x.cols());
  for (std::size_t i = 0; i < h; ++i) {
    stacked.middleRows(static_cast<Eigen::Index>(i) * m, m) = shead(x, w.heads[i], *sets[i], rho, opt);
  }
  Matrix out = x + matmul(w.wo, stacked);
  out.colwise() += w.bo;
  return out;
}

Matrix ffn(const Matrix& z, const Matrix& w1, const Vector& b1, const Matrix& w2, const Vector& b2,
           const Activation& act) {
  check_len(b1, w1.rows(), "b_1");
  check_shape(w2, z.rows(), w1.rows(), "W_2");
  check_len(b2, z.rows(), "b_2");
  Matrix hidden = project(w1, b1, z);
  for (Eigen::Index i = 0; i < hidden.size(); ++i) hidden.data()[i] = act(hidden.data()[i]);
  Matrix out = z + matmul(w2, hidden);
  out.colwise() += b2;
  return out;
}

Matrix stb(const Matrix& x, const BlockWeights& w, const HeadLayout& layout, std::size_t l,
           const StackConfig& cfg) {
  const Matrix z = sattn(x, w, layout, l, cfg.rho, cfg.options);
  return ffn(z, w.w1, w.b1, w.w2, w.b2, cfg.activation);
}

Matrix forward_stack(const Matrix& x, const Matrix& e, const std::vector<BlockWeights>& blocks,
                     const StackConfig& cfg) {
  check_shape(e, x.rows(), x.cols(), "E");
  if (static_cast<std::size_t>(x.cols()) != cfg.pattern.n()) throw ShapeError("forward_stack: n mismatch");
  const HeadLayout layout = apply_head_config(cfg.pattern, cfg.head_config);
  const std::size_t p = layout.groups[0].p();
  Matrix z = x + e;
  for (std::size_t b = 0; b < blocks.size(); ++b) {
    blocks[b].validate(cfg.d, cfg.h, cfg.m, cfg.r);
    const std::size_t l = block_pattern_index(b, p);
    if (cfg.pattern_log) cfg.pattern_log->push_back(l);
    z = stb(z, blocks[b], layout, l, cfg);
  }
  return z;
}

Matrix dense_block_reference(const Matrix& x, const BlockWeights& w, const ProbabilityMapSpec& rho,
                             const Activation& act) {
  const auto m = static_cast<Eigen::Index>(w.m());
  Matrix attn = x;
  for (std::size_t i = 0; i < w.h(); ++i) {
    const HeadWeights& head = w.heads[i];
    const Matrix q = project(head.wq, head.bq, x);
    const Matrix k = project(head.wk, head.bk, x);
    const Matrix v = project(head.wv, head.bv, x);
    // Column c of the score matrix holds key scores for query c.
    const Matrix probs = apply(rho, Matrix(k.transpose() * q));
    attn += w.wo.middleCols(static_cast<Eigen::Index>(i) * m, m) * (v * probs);
  }
  attn.colwise() += w.bo;
  Matrix hidden = w.w1 * attn;
  hidden.colwise() += w.b1;
  hidden = hidden.unaryExpr([&](double t) { return act(t); });
  Matrix out = attn + w.w2 * hidden;
  out.colwise() += w.b2;
  return out;
}

}  // namespace sparseua
