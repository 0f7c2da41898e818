// Copyright 2026 The sparseua Authors
// SPDX-License-Identifier: Apache-2.0

// Hand-rolled generators for the property tests. Every generator draws from a
// caller-owned Rng so a failing case reproduces from its seed.

#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "sparseua/numerics.hpp"
#include "sparseua/patterns.hpp"

namespace sparseua::testing {

inline std::size_t gen_size(Rng& rng, std::size_t lo, std::size_t hi) {
  return lo + static_cast<std::size_t>(rng.below(hi - lo + 1));
}

inline Vector gen_vector(Rng& rng, std::size_t n, double scale = 3.0) {
  Vector v(static_cast<Eigen::Index>(n));
  for (Eigen::Index i = 0; i < v.size(); ++i) v[i] = rng.uniform(-scale, scale);
  return v;
}

/// Vectors with repeated entries, which stress tie handling.
inline Vector gen_tied_vector(Rng& rng, std::size_t n) {
  Vector v(static_cast<Eigen::Index>(n));
  for (Eigen::Index i = 0; i < v.size(); ++i) v[i] = static_cast<double>(rng.below(3)) - 1.0;
  return v;
}

inline Matrix gen_matrix(Rng& rng, std::size_t rows, std::size_t cols, double stddev = 1.0) {
  Matrix m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = stddev * rng.normal();
  return m;
}

/// A random p-cycle pattern with self-inclusion, each key kept with probability `density`.
inline SparsityPattern gen_pattern(Rng& rng, std::size_t n, std::size_t p, double density) {
  std::vector<std::vector<IndexSet>> sets(p, std::vector<IndexSet>(n));
  for (std::size_t l = 0; l < p; ++l) {
    for (std::size_t k = 0; k < n; ++k) {
      for (std::size_t j = 0; j < n; ++j) {
        if (j == k || rng.uniform() < density) sets[l][k].push_back(j);
      }
    }
  }
  return SparsityPattern(n, std::move(sets));
}

/// One of the named generators with small random parameters.
inline SparsityPattern gen_named_pattern(Rng& rng, std::size_t n) {
  const std::size_t w = gen_size(rng, 1, std::max<std::size_t>(1, n / 2));
  switch (rng.below(5)) {
    case 0: return strided(n, w);
    case 1: return fixed(n, w);
    case 2: return star(n, w);
    case 3: return window_global(n, w, gen_size(rng, 0, 2));
    default: return dense(n);
  }
}

}  // namespace sparseua::testing
