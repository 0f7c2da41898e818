// Copyright 2026 The sparseua Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <optional>
#include <vector>

#include "sparseua/numerics.hpp"
#include "sparseua/patterns.hpp"
#include "sparseua/probmaps.hpp"

namespace sparseua {

struct HeadWeights {
  Matrix wq, wk, wv;  // m x d
  Vector bq, bk, bv;  // m
};

/// One sparse Transformer block: h heads of width m, FFN width r.
struct BlockWeights {
  std::vector<HeadWeights> heads;
  Matrix wo;  // d x mh
  Vector bo;  // d
  Matrix w1;  // r x d
  Vector b1;  // r
  Matrix w2;  // d x r
  Vector b2;  // d

  static BlockWeights zeros(std::size_t d, std::size_t h, std::size_t m, std::size_t r);
  /// Entries drawn from N(0, stddev^2); biases start at zero.
  static BlockWeights random(std::size_t d, std::size_t h, std::size_t m, std::size_t r,
                             double stddev, Rng& rng);

  std::size_t d() const { return static_cast<std::size_t>(wo.rows()); }
  std::size_t h() const { return heads.size(); }
  std::size_t m() const { return heads.empty() ? 0 : static_cast<std::size_t>(heads[0].wq.rows()); }
  std::size_t r() const { return static_cast<std::size_t>(w1.rows()); }

  /// Throws ShapeError unless every matrix agrees with (d, h, m, r).
  void validate(std::size_t d, std::size_t h, std::size_t m, std::size_t r) const;
};

/// Token-wise nonlinearity of the feed-forward sublayer.
class Activation {
 public:
  static Activation relu() { return Activation(); }
  static Activation piecewise(PiecewiseLinear f) { return Activation(std::move(f)); }

  double operator()(double t) const { return pwl_ ? (*pwl_)(t) : sparseua::relu(t); }
  bool is_relu() const { return !pwl_.has_value(); }

 private:
  Activation() = default;
  explicit Activation(PiecewiseLinear f) : pwl_(std::move(f)) {}
  std::optional<PiecewiseLinear> pwl_;
};

struct AttentionOptions {
  /// Divide scores by sqrt(m).
  bool scale_scores = false;
  /// Restrict A_k to keys j <= k.
  bool causal = false;
};

struct StackConfig {
  std::size_t d = 0, h = 1, m = 0, r = 0;
  SparsityPattern pattern = dense(1);
  HeadConfig head_config = HeadConfig::Sequential;
  ProbabilityMapSpec rho;
  Activation activation = Activation::relu();
  AttentionOptions options;
  /// When set, forward_stack appends the 0-based pattern index used by each block.
  std::vector<std::size_t>* pattern_log = nullptr;
};

/// Key sets A_k after the causal restriction, if any. Throws PatternError on an
/// empty set.
std::vector<IndexSet> effective_sets(const std::vector<IndexSet>& sets, bool causal);

/// One sparse attention head, m x n. Column k mixes only the value vectors of
/// the keys in sets[k].
Matrix shead(const Matrix& x, const HeadWeights& w, const std::vector<IndexSet>& sets,
             const ProbabilityMapSpec& rho, const AttentionOptions& opt = {});

/// Per-head key sets for block pattern index l under a head layout.
std::vector<const std::vector<IndexSet>*> head_sets(const HeadLayout& layout, std::size_t l,
                                                    std::size_t h);

/// X + W_O [heads] + b_O.
Matrix sattn(const Matrix& x, const BlockWeights& w, const HeadLayout& layout, std::size_t l,
             const ProbabilityMapSpec& rho, const AttentionOptions& opt = {});

/// Z + W_2 act(W_1 Z + b_1) + b_2, column by column.
Matrix ffn(const Matrix& z, const Matrix& w1, const Vector& b1, const Matrix& w2, const Vector& b2,
           const Activation& act);

Matrix stb(const Matrix& x, const BlockWeights& w, const HeadLayout& layout, std::size_t l,
           const StackConfig& cfg);

/// Pattern index of block `block` (0-based) for a layout with p patterns.
inline std::size_t block_pattern_index(std::size_t block, std::size_t p) { return block % p; }

/// Adds E once, then runs the blocks in order, cycling the pattern index.
Matrix forward_stack(const Matrix& x, const Matrix& e, const std::vector<BlockWeights>& blocks,
                     const StackConfig& cfg);

/// Dense block built from whole-matrix products: every token attends to every
/// token. Reference for the sparse path.
Matrix dense_block_reference(const Matrix& x, const BlockWeights& w, const ProbabilityMapSpec& rho,
                             const Activation& act);

}  // namespace sparseua
