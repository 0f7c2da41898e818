// Copyright 2026 The sparseua Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

namespace sparseua {

using IndexSet = std::vector<std::size_t>;

/// The p cycling index-set families of a sparse attention layer stack.
///
/// Indices are 0-based. sets()[l][k] lists the keys token k attends to under
/// pattern l, sorted and without duplicates.
class SparsityPattern {
 public:
  SparsityPattern(std::size_t n, std::vector<std::vector<IndexSet>> sets);

  std::size_t n() const { return n_; }
  std::size_t p() const { return sets_.size(); }
  const std::vector<std::vector<IndexSet>>& sets() const { return sets_; }
  const IndexSet& at(std::size_t l, std::size_t k) const { return sets_[l][k]; }
  /// The single-pattern family with index l.
  SparsityPattern layer(std::size_t l) const;

  bool operator==(const SparsityPattern&) const = default;

 private:
  std::size_t n_;
  std::vector<std::vector<IndexSet>> sets_;
};

enum class HeadConfig { Sequential, Union, Multihead };

HeadConfig parse_head_config(const std::string& name);
std::string to_string(HeadConfig cfg);

/// A pattern family after a head configuration is applied.
///
/// Sequential keeps the input (layers cycle through its p patterns). Union
/// holds one p=1 pattern. Multihead holds two p=1 patterns, one per head half.
struct HeadLayout {
  HeadConfig config = HeadConfig::Sequential;
  std::vector<SparsityPattern> groups;
};

SparsityPattern strided(std::size_t n, std::size_t w);
SparsityPattern fixed(std::size_t n, std::size_t w);
SparsityPattern star(std::size_t n, std::size_t w);
SparsityPattern random_pattern(std::size_t n, double target_sparsity, std::uint64_t seed,
                               bool include_self = true);
SparsityPattern window_global(std::size_t n, std::size_t w, std::size_t g);
SparsityPattern dense(std::size_t n);

HeadLayout apply_head_config(const SparsityPattern& pat, HeadConfig cfg);

/// 1 - mean over the p patterns of sum_k |A_k^l| / n^2.
double sparsity_level(const SparsityPattern& pat);
double sparsity_level(const HeadLayout& layout);
/// Largest per-layer connection count, max_l sum_k |A_k^l|.
std::size_t connection_count(const SparsityPattern& pat);
std::size_t connection_count(const HeadLayout& layout);

/// Builds a pattern by kind name: strided, fixed, star, window_global, dense, random.
struct PatternSpec {
  std::string kind = "dense";
  std::size_t n = 1;
  std::size_t w = 1;
  std::size_t g = 0;
  double sparsity = 0.0;
  std::uint64_t seed = 0;
  bool include_self = true;
};
SparsityPattern make_pattern(const PatternSpec& spec);

/// Parses "dense", "strided:W", "fixed:W", "star:W", "window_global:W:G" or
/// "random:SPARSITY:SEED" for sequence length n.
PatternSpec parse_pattern_spec(const std::string& text, std::size_t n);

}  // namespace sparseua
