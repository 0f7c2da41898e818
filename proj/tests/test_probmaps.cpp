// Copyright 2026 The sparseua Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <cmath>
#include <limits>

#include "generators.hpp"
#include "sparseua/probmaps.hpp"

namespace sparseua {
namespace {

// Euclidean projection onto the simplex by trying every support.
Vector simplex_projection_bruteforce(const Vector& v) {
  const auto n = v.size();
  Vector best;
  double best_dist = std::numeric_limits<double>::infinity();
  for (unsigned mask = 1; mask < (1u << n); ++mask) {
    double sum = 0.0;
    int size = 0;
    for (Eigen::Index i = 0; i < n; ++i)
      if (mask >> i & 1u) sum += v[i], ++size;
    const double tau = (sum - 1.0) / size;
    Vector p = Vector::Zero(n);
    bool feasible = true;
    for (Eigen::Index i = 0; i < n; ++i) {
      if (mask >> i & 1u) {
        p[i] = v[i] - tau;
        feasible &= p[i] >= 0.0;
      }
    }
    if (!feasible) continue;
    const double dist = (p - v).squaredNorm();
    if (dist < best_dist) best_dist = dist, best = p;
  }
  return best;
}

std::vector<ProbabilityMapSpec> all_kinds() {
  return {ProbabilityMapSpec::softmax(),          ProbabilityMapSpec::hardmax(),
          ProbabilityMapSpec::top_k(3),           ProbabilityMapSpec::sparselin_gen(0.0),
          ProbabilityMapSpec::sparselin_gen(0.5), ProbabilityMapSpec::entmax(1.5),
          ProbabilityMapSpec::entmax(2.0)};
}

TEST(ProbMaps, ColumnStochastic) {
  Rng rng(101);
  for (const auto& spec : all_kinds()) {
    for (int trial = 0; trial < 500; ++trial) {
      const std::size_t n = testing::gen_size(rng, 3, 40);
      const Vector v = trial % 5 == 0 ? testing::gen_tied_vector(rng, n) : testing::gen_vector(rng, n, 10.0);
      const Vector p = apply_column(spec, v);
      ASSERT_EQ(p.size(), v.size());
      EXPECT_GE(p.minCoeff(), 0.0) << spec.name();
      EXPECT_NEAR(p.sum(), 1.0, 1e-12) << spec.name();
    }
  }
}

TEST(ProbMaps, ShiftInvariantAndOrderPreserving) {
  Rng rng(7);
  for (const auto& spec : all_kinds()) {
    for (int trial = 0; trial < 200; ++trial) {
      const Vector v = testing::gen_vector(rng, testing::gen_size(rng, 3, 12));
      const Vector p = apply_column(spec, v);
      const Vector q = apply_column(spec, Vector(v.array() + 2.5));
      EXPECT_LT((p - q).cwiseAbs().maxCoeff(), 1e-9) << spec.name();
      for (Eigen::Index i = 0; i < v.size(); ++i)
        for (Eigen::Index j = 0; j < v.size(); ++j)
          if (v[i] > v[j]) EXPECT_GE(p[i], p[j] - 1e-12) << spec.name();
    }
  }
}

TEST(ProbMaps, SparsemaxMatchesSimplexProjection) {
  Rng rng(55);
  for (int trial = 0; trial < 3000; ++trial) {
    const std::size_t n = testing::gen_size(rng, 1, 8);
    const Vector v = testing::gen_vector(rng, n, 2.0);
    EXPECT_LT((sparselin_gen(v, 0.0) - simplex_projection_bruteforce(v)).cwiseAbs().maxCoeff(), 1e-10);
  }
}

TEST(ProbMaps, SparselinGenIsScaledSparsemax) {
  Rng rng(56);
  for (int trial = 0; trial < 500; ++trial) {
    const double lambda = 0.9 * rng.uniform();
    const Vector v = testing::gen_vector(rng, testing::gen_size(rng, 1, 8));
    const Vector expect = simplex_projection_bruteforce(Vector(v / (1.0 - lambda)));
    EXPECT_LT((sparselin_gen(v, lambda) - expect).cwiseAbs().maxCoeff(), 1e-10);
  }
}

TEST(ProbMaps, EntmaxLimits) {
  Rng rng(57);
  for (int trial = 0; trial < 300; ++trial) {
    const Vector v = testing::gen_vector(rng, testing::gen_size(rng, 2, 8));
    EXPECT_LT((entmax(v, 2.0) - simplex_projection_bruteforce(v)).cwiseAbs().maxCoeff(), 1e-9);
    EXPECT_LT((entmax(v, 1.0) - softmax(v)).cwiseAbs().maxCoeff(), 1e-15);
    EXPECT_LT((entmax(v, 1.001) - softmax(v)).cwiseAbs().maxCoeff(), 5e-3);
  }
}

TEST(ProbMaps, TopKAndHardmax) {
  Vector v(5);
  v << 0.1, 2.0, -1.0, 2.0, 0.5;
  const Vector h = hardmax(v);
  EXPECT_EQ(h, (Vector(5) << 0, 1, 0, 0, 0).finished());
  const Vector t2 = top_k_softmax(v, 2);
  EXPECT_DOUBLE_EQ(t2[1], 0.5);
  EXPECT_DOUBLE_EQ(t2[3], 0.5);
  EXPECT_LT((top_k_softmax(v, 5) - softmax(v)).norm(), 1e-15);
  EXPECT_THROW(top_k_softmax(v, 6), ParameterError);
  EXPECT_THROW(top_k_softmax(v, 0), ParameterError);
}

TEST(ProbMaps, ParseAndValidate) {
  EXPECT_EQ(parse_probmap("topk:4").k, 4u);
  EXPECT_EQ(parse_probmap("entmax:1.5").kind, ProbKind::Entmax);
  EXPECT_THROW(parse_probmap("topk:2.5"), ParameterError);
  EXPECT_THROW(parse_probmap("sparselin:1"), ParameterError);
  EXPECT_THROW(parse_probmap("entmax:0.5"), ParameterError);
  EXPECT_THROW(parse_probmap("argmax"), ParameterError);
  EXPECT_THROW(softmax(Vector()), ShapeError);
  Vector bad(2);
  bad << 1.0, std::numeric_limits<double>::infinity();
  EXPECT_THROW(softmax(bad), ShapeError);
}

TEST(Assumption2, ClosedFormValues) {
  EXPECT_NEAR(assumption2_t(ProbabilityMapSpec::sparselin_gen(0.3), 0.5, 0.1, 8), 1.8, 1e-15);
  EXPECT_NEAR(assumption2_t(ProbabilityMapSpec::entmax(1.5), 0.5, 0.3, 8), 4.0, 1e-15);
  EXPECT_NEAR(assumption2_t(ProbabilityMapSpec::softmax(), 1.0, 0.25, 2), std::log(3.0), 1e-15);
  EXPECT_EQ(assumption2_t(ProbabilityMapSpec::softmax(), 1.0, 0.5, 2), 0.0);
  EXPECT_THROW(assumption2_t(ProbabilityMapSpec::softmax(), 0.0, 0.1, 2), ParameterError);
  EXPECT_THROW(assumption2_t(ProbabilityMapSpec::softmax(), 1.0, 1.5, 2), ParameterError);
}

TEST(Assumption2, CheckerPassesAndCatchesSmallT) {
  const auto rep = check_assumption2(ProbabilityMapSpec::softmax(), 0.5, 0.01, 8, 3000, 1);
  EXPECT_TRUE(rep.pass);
  EXPECT_GE(rep.worst_slack, -1e-12);
  const auto sl = check_assumption2(ProbabilityMapSpec::sparselin_gen(0.5), 0.25, 0.1, 8, 3000, 2);
  EXPECT_TRUE(sl.pass);
  EXPECT_GT(sl.collapsed, 0u);
  // A margin one tenth of the assumed one must break softmax.
  const double t = assumption2_t(ProbabilityMapSpec::softmax(), 0.5, 0.01, 8);
  Vector v = Vector::Zero(8);
  v[0] = 0.05;
  EXPECT_LT(softmax(Vector(t * v))[0], 0.99);
}

}  // namespace
}  // namespace sparseua
