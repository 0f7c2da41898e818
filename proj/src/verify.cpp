// Copyright 2026 The sparseua Authors
// SPDX-License-Identifier: Apache-2.0

#include "sparseua/verify.hpp"

#include <algorithm>
#include <cstdint>
#include <deque>
#include <numeric>

#include "sparseua/numerics.hpp"

namespace sparseua {
namespace {

/// Fixed-width bit row over [0, n).
class BitRow {
 public:
  explicit BitRow(std::size_t n = 0) : n_(n), words_((n + 63) / 64, 0) {}
  void set(std::size_t i) { words_[i / 64] |= std::uint64_t{1} << (i % 64); }
  bool test(std::size_t i) const { return (words_[i / 64] >> (i % 64)) & 1U; }
  void merge(const BitRow& o) {
    for (std::size_t w = 0; w < words_.size(); ++w) words_[w] |= o.words_[w];
  }
  bool full() const {
    for (std::size_t i = 0; i < n_; ++i)
      if (!test(i)) return false;
    return true;
  }
  IndexSet members() const {
    IndexSet out;
    for (std::size_t i = 0; i < n_; ++i)
      if (test(i)) out.push_back(i);
    return out;
  }
  bool operator==(const BitRow&) const = default;

 private:
  std::size_t n_;
  std::vector<std::uint64_t> words_;
};

using Coverage = std::vector<BitRow>;

Coverage first_step(const SparsityPattern& pat) {
  Coverage s(pat.n(), BitRow(pat.n()));
  for (std::size_t k = 0; k < pat.n(); ++k)
    for (std::size_t j : pat.at(0, k)) s[k].set(j);
  return s;
}

Coverage next_step(const SparsityPattern& pat, const Coverage& prev, std::size_t t) {
  const std::size_t l = (t - 1) % pat.p();
  Coverage s(pat.n(), BitRow(pat.n()));
  for (std::size_t k = 0; k < pat.n(); ++k)
    for (std::size_t j : pat.at(l, k)) s[k].merge(prev[j]);
  return s;
}

bool all_full(const Coverage& c) {
  return std::all_of(c.begin(), c.end(), [](const BitRow& r) { return r.full(); });
}

/// succ[j] lists k with an edge j -> k, i.e. j is a direct key of k.
std::vector<IndexSet> successors(const SparsityPattern& pat) {
  std::vector<IndexSet> succ(pat.n());
  for (std::size_t k = 0; k < pat.n(); ++k) {
    for (std::size_t l = 0; l < pat.p(); ++l)
      for (std::size_t j : pat.at(l, k))
        if (j != k) succ[j].push_back(k);
  }
  for (auto& s : succ) {
    std::sort(s.begin(), s.end());
    s.erase(std::unique(s.begin(), s.end()), s.end());
  }
  return succ;
}

std::optional<Permutation> exact_search(const std::vector<IndexSet>& succ) {
  const std::size_t n = succ.size();
  std::vector<std::uint32_t> succ_mask(n, 0);
  for (std::size_t j = 0; j < n; ++j)
    for (std::size_t k : succ[j]) succ_mask[j] |= std::uint32_t{1} << k;

  const std::uint32_t full = (n == 32) ? ~0U : ((std::uint32_t{1} << n) - 1);
  std::vector<std::uint32_t> ends(std::size_t{1} << n, 0);
  for (std::size_t v = 0; v < n; ++v) ends[std::uint32_t{1} << v] = std::uint32_t{1} << v;
  for (std::uint32_t mask = 1; mask <= full; ++mask) {
    std::uint32_t e = ends[mask];
    while (e) {
      const int v = __builtin_ctz(e);
      e &= e - 1;
      std::uint32_t next = succ_mask[v] & ~mask;
      while (next) {
        const int w = __builtin_ctz(next);
        next &= next - 1;
        ends[mask | (std::uint32_t{1} << w)] |= std::uint32_t{1} << w;
      }
    }
    if (mask == full) break;
  }
  if (ends[full] == 0) return std::nullopt;

  Permutation path(n);
  std::uint32_t mask = full;
  std::size_t v = static_cast<std::size_t>(__builtin_ctz(ends[full]));
  for (std::size_t pos = n; pos-- > 0;) {
    path[pos] = v;
    const std::uint32_t rest = mask & ~(std::uint32_t{1} << v);
    if (pos == 0) break;
    std::uint32_t cand = ends[rest];
    while (cand) {
      const std::size_t u = static_cast<std::size_t>(__builtin_ctz(cand));
      cand &= cand - 1;
      if ((succ_mask[u] >> v) & 1U) {
        v = u;
        break;
      }
    }
    mask = rest;
  }
  return path;
}

/// DFS with Warnsdorff-style ordering: prefer successors with the fewest
/// unvisited successors of their own.
std::optional<Permutation> bounded_search(const std::vector<IndexSet>& succ, std::size_t budget) {
  const std::size_t n = succ.size();
  std::vector<std::size_t> indegree(n, 0);
  for (const auto& s : succ)
    for (std::size_t k : s) ++indegree[k];
  std::vector<std::size_t> starts(n);
  std::iota(starts.begin(), starts.end(), 0);
  std::stable_sort(starts.begin(), starts.end(),
                   [&](std::size_t a, std::size_t b) { return indegree[a] < indegree[b]; });

  std::vector<char> visited(n, 0);
  Permutation path;
  std::size_t expansions = 0;

  auto remaining = [&](std::size_t v) {
    std::size_t c = 0;
    for (std::size_t w : succ[v]) c += !visited[w];
    return c;
  };

  auto dfs = [&](auto&& self, std::size_t v) -> bool {
    if (++expansions > budget) return false;
    visited[v] = 1;
    path.push_back(v);
    if (path.size() == n) return true;
    IndexSet next;
    for (std::size_t w : succ[v])
      if (!visited[w]) next.push_back(w);
    std::stable_sort(next.begin(), next.end(),
                     [&](std::size_t a, std::size_t b) { return remaining(a) < remaining(b); });
    for (std::size_t w : next) {
      if (self(self, w)) return true;
      if (expansions > budget) break;
    }
    visited[v] = 0;
    path.pop_back();
    return false;
  };

  for (std::size_t s : starts) {
    if (dfs(dfs, s)) return path;
    if (expansions > budget) break;
  }
  return std::nullopt;
}

}  // namespace

std::string to_string(GammaStatus s) {
  switch (s) {
    case GammaStatus::Proven: return "proven";
    case GammaStatus::Refuted: return "refuted";
    case GammaStatus::Unknown: return "unknown";
  }
  return "unknown";
}

bool check_self_inclusion(const SparsityPattern& pat) {
  for (std::size_t l = 0; l < pat.p(); ++l)
    for (std::size_t k = 0; k < pat.n(); ++k)
      if (!std::binary_search(pat.at(l, k).begin(), pat.at(l, k).end(), k)) return false;
  return true;
}

bool validate_gamma(const SparsityPattern& pat, const Permutation& gamma) {
  const std::size_t n = pat.n();
  if (gamma.size() != n) return false;
  std::vector<char> seen(n, 0);
  for (std::size_t v : gamma) {
    if (v >= n || seen[v]) return false;
    seen[v] = 1;
  }
  for (std::size_t i = 0; i + 1 < n; ++i) {
    bool linked = false;
    for (std::size_t l = 0; l < pat.p() && !linked; ++l) {
      const IndexSet& keys = pat.at(l, gamma[i + 1]);
      linked = std::binary_search(keys.begin(), keys.end(), gamma[i]);
    }
    if (!linked) return false;
  }
  return true;
}

GammaResult find_gamma(const SparsityPattern& pat, std::size_t budget) {
  const std::size_t n = pat.n();
  Permutation identity(n);
  std::iota(identity.begin(), identity.end(), 0);
  if (validate_gamma(pat, identity)) return {GammaStatus::Proven, identity, "identity"};
  Permutation reversed(identity.rbegin(), identity.rend());
  if (validate_gamma(pat, reversed)) return {GammaStatus::Proven, reversed, "reversed"};

  const auto succ = successors(pat);
  if (n <= 20) {
    auto path = exact_search(succ);
    if (path) return {GammaStatus::Proven, std::move(path), "subset-dp"};
    return {GammaStatus::Refuted, std::nullopt, "subset-dp"};
  }
  auto path = bounded_search(succ, budget);
  if (path) return {GammaStatus::Proven, std::move(path), "dfs"};
  return {GammaStatus::Unknown, std::nullopt, "dfs"};
}

std::vector<IndexSet> coverage_sets(const SparsityPattern& pat, std::size_t t) {
  if (t == 0) throw ParameterError("coverage_sets: t must be at least 1");
  Coverage c = first_step(pat);
  for (std::size_t step = 2; step <= t; ++step) c = next_step(pat, c, step);
  std::vector<IndexSet> out;
  out.reserve(c.size());
  for (const auto& row : c) out.push_back(row.members());
  return out;
}

std::optional<std::size_t> min_coverage_s(const SparsityPattern& pat, std::size_t cap) {
  if (cap == 0) throw ParameterError("min_coverage_s: cap must be at least 1");
  std::deque<Coverage> recent;  // last p states, oldest first
  Coverage c = first_step(pat);
  for (std::size_t t = 1; t <= cap; ++t) {
    if (t > 1) c = next_step(pat, c, t);
    if (all_full(c)) return t;
    // A repeat at the same phase means the sequence is periodic from here on.
    if (recent.size() == pat.p() && recent.front() == c) return std::nullopt;
    recent.push_back(c);
    if (recent.size() > pat.p()) recent.pop_front();
  }
  return std::nullopt;
}

AssumptionReport full_report(const SparsityPattern& pat, std::size_t cap, std::size_t budget) {
  AssumptionReport r;
  r.s_cap = cap;
  r.self_inclusion = check_self_inclusion(pat);
  if (!r.self_inclusion) r.details.push_back("self-inclusion fails: some k is missing from A_k^l");

  const GammaResult g = find_gamma(pat, budget);
  r.gamma_status = g.status;
  r.gamma = g.gamma;
  switch (g.status) {
    case GammaStatus::Proven: r.details.push_back("gamma found by " + g.method); break;
    case GammaStatus::Refuted: r.details.push_back("no Hamiltonian chain exists (exact search)"); break;
    case GammaStatus::Unknown:
      r.details.push_back("gamma search budget exhausted after " + std::to_string(budget) + " expansions");
      break;
  }

  r.coverage_s = min_coverage_s(pat, cap);
  if (r.coverage_s) {
    r.details.push_back("full coverage after " + std::to_string(*r.coverage_s) + " hops");
  } else {
    r.details.push_back("no full coverage within " + std::to_string(cap) + " hops");
  }
  return r;
}

}  // namespace sparseua
