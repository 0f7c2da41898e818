// Copyright 2026 The sparseua Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <algorithm>
#include <numeric>

#include "generators.hpp"
#include "sparseua/verify.hpp"

namespace sparseua {
namespace {

using BoolMat = Eigen::Matrix<int, Eigen::Dynamic, Eigen::Dynamic>;

BoolMat adjacency(const SparsityPattern& pat, std::size_t l) {
  const auto n = static_cast<Eigen::Index>(pat.n());
  BoolMat m = BoolMat::Zero(n, n);
  for (std::size_t k = 0; k < pat.n(); ++k)
    for (std::size_t j : pat.at(l, k)) m(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(j)) = 1;
  return m;
}

// Reachability after t hops as a boolean matrix product M_t ... M_1.
BoolMat reach(const SparsityPattern& pat, std::size_t t) {
  BoolMat r = adjacency(pat, 0);
  for (std::size_t step = 2; step <= t; ++step) {
    r = (adjacency(pat, (step - 1) % pat.p()) * r).unaryExpr([](int v) { return v > 0 ? 1 : 0; });
  }
  return r;
}

// Exhaustive Hamiltonian path search over all permutations.
bool has_chain_bruteforce(const SparsityPattern& pat) {
  Permutation perm(pat.n());
  std::iota(perm.begin(), perm.end(), 0);
  do {
    if (validate_gamma(pat, perm)) return true;
  } while (std::next_permutation(perm.begin(), perm.end()));
  return false;
}

TEST(Coverage, MatchesBooleanMatrixPowers) {
  Rng rng(31);
  for (int trial = 0; trial < 60; ++trial) {
    const std::size_t n = testing::gen_size(rng, 1, 12);
    const std::size_t p = testing::gen_size(rng, 1, 3);
    const auto pat = testing::gen_pattern(rng, n, p, 0.15);
    for (std::size_t t = 1; t <= 5; ++t) {
      const auto sets = coverage_sets(pat, t);
      const BoolMat r = reach(pat, t);
      for (std::size_t k = 0; k < n; ++k) {
        IndexSet expected;
        for (std::size_t j = 0; j < n; ++j)
          if (r(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(j))) expected.push_back(j);
        ASSERT_EQ(sets[k], expected) << "trial " << trial << " t " << t << " k " << k;
      }
    }
    const auto s = min_coverage_s(pat, 2 * n);
    std::optional<std::size_t> oracle;
    for (std::size_t t = 1; t <= 2 * n && !oracle; ++t)
      if (reach(pat, t).minCoeff() == 1) oracle = t;
    EXPECT_EQ(s, oracle);
  }
}

TEST(Gamma, AgreesWithBruteForce) {
  Rng rng(77);
  for (int trial = 0; trial < 80; ++trial) {
    const std::size_t n = testing::gen_size(rng, 1, 7);
    const auto pat = testing::gen_pattern(rng, n, testing::gen_size(rng, 1, 2), 0.2);
    const auto res = find_gamma(pat);
    const bool exists = has_chain_bruteforce(pat);
    ASSERT_NE(res.status, GammaStatus::Unknown);
    EXPECT_EQ(res.status == GammaStatus::Proven, exists) << "trial " << trial;
    if (res.gamma) EXPECT_TRUE(validate_gamma(pat, *res.gamma));
  }
}

TEST(Gamma, ValidateRejectsNonPermutations) {
  const auto pat = dense(3);
  EXPECT_TRUE(validate_gamma(pat, {2, 0, 1}));
  EXPECT_FALSE(validate_gamma(pat, {0, 0, 1}));
  EXPECT_FALSE(validate_gamma(pat, {0, 1}));
  EXPECT_FALSE(validate_gamma(pat, {0, 1, 3}));
}

TEST(Gamma, DfsHandlesLargePatterns) {
  // A chain that only runs backwards forces a non-identity search past the DP size limit.
  const std::size_t n = 40;
  std::vector<IndexSet> sets(n);
  for (std::size_t k = 0; k < n; ++k) {
    sets[k].push_back(k);
    if (k + 1 < n) sets[k].push_back(k + 1);
  }
  const SparsityPattern pat(n, {sets});
  const auto res = find_gamma(pat);
  ASSERT_EQ(res.status, GammaStatus::Proven);
  EXPECT_TRUE(validate_gamma(pat, *res.gamma));
}

TEST(Report, NamedPatterns) {
  for (std::size_t n : {64u, 256u}) {
    for (std::size_t w : {4u, 16u}) {
      const auto fx = full_report(fixed(n, w));
      EXPECT_TRUE(fx.holds());
      EXPECT_EQ(fx.coverage_s, std::optional<std::size_t>(2));
      // Two hops from token 1 end at the last stride member n - w + 1, whose
      // window stops floor(w/2) short of n.
      const auto st = full_report(strided(n, w));
      EXPECT_TRUE(st.holds());
      EXPECT_EQ(st.coverage_s, std::optional<std::size_t>(3));
      EXPECT_EQ(coverage_sets(strided(n, w), 2)[0].size(), n - w / 2 + 1);
    }
  }
  const auto d = full_report(dense(10));
  EXPECT_EQ(d.coverage_s, std::optional<std::size_t>(1));
  const auto bad = full_report(SparsityPattern(3, {{{1}, {1}, {2}}}));
  EXPECT_FALSE(bad.self_inclusion);
  EXPECT_FALSE(bad.holds());
  EXPECT_FALSE(bad.details.empty());
}

}  // namespace
}  // namespace sparseua
