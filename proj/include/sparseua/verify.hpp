// Copyright 2026 The sparseua Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "sparseua/patterns.hpp"

namespace sparseua {

enum class GammaStatus { Proven, Refuted, Unknown };
std::string to_string(GammaStatus s);

using Permutation = std::vector<std::size_t>;

struct GammaResult {
  GammaStatus status = GammaStatus::Unknown;
  std::optional<Permutation> gamma;
  std::string method;
};

/// Verdicts and witnesses for the three sparsity-pattern conditions:
/// self-inclusion, a Hamiltonian chain gamma over direct connections, and a
/// finite hop count s after which every token reaches every token.
struct AssumptionReport {
  bool self_inclusion = false;
  std::optional<Permutation> gamma;
  GammaStatus gamma_status = GammaStatus::Unknown;
  std::optional<std::size_t> coverage_s;
  std::size_t s_cap = 0;
  std::vector<std::string> details;

  bool holds() const {
    return self_inclusion && gamma_status == GammaStatus::Proven && coverage_s.has_value();
  }
};

bool check_self_inclusion(const SparsityPattern& pat);

/// True when gamma is a permutation of [0, n) and gamma[i] is a direct key of
/// gamma[i+1] under some pattern.
bool validate_gamma(const SparsityPattern& pat, const Permutation& gamma);

/// Searches for a Hamiltonian path in the digraph with edge j -> k iff
/// j is in the union over l of A_k^l.
///
/// Tries identity and reversal first, then an exact subset DP for n <= 20,
/// then a DFS bounded by `budget` node expansions. Refuted is only returned by
/// the exact search.
GammaResult find_gamma(const SparsityPattern& pat, std::size_t budget = 1'000'000);

/// S^t_k for k in [n], using pattern ((t-1) mod p) at step t (0-based index).
std::vector<IndexSet> coverage_sets(const SparsityPattern& pat, std::size_t t);

/// Smallest s <= cap with S^s_k = [n] for every k.
std::optional<std::size_t> min_coverage_s(const SparsityPattern& pat, std::size_t cap);

inline std::size_t default_s_cap(const SparsityPattern& pat) { return 2 * pat.n(); }

AssumptionReport full_report(const SparsityPattern& pat, std::size_t cap, std::size_t budget);
inline AssumptionReport full_report(const SparsityPattern& pat) {
  return full_report(pat, default_s_cap(pat), 1'000'000);
}

}  // namespace sparseua
