// Copyright 2026 The sparseua Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <string>

#include "sparseua/numerics.hpp"

namespace sparseua {

enum class ProbKind { Softmax, Hardmax, TopKSoftmax, SparselinGen, Entmax };

/// A column-stochastic map rho with its parameter.
struct ProbabilityMapSpec {
  ProbKind kind = ProbKind::Softmax;
  std::size_t k = 1;     // TopKSoftmax
  double lambda = 0.0;   // SparselinGen, in [0, 1)
  double alpha = 1.5;    // Entmax, >= 1

  static ProbabilityMapSpec softmax() { return {}; }
  static ProbabilityMapSpec hardmax() { return {ProbKind::Hardmax}; }
  static ProbabilityMapSpec top_k(std::size_t k) { return {ProbKind::TopKSoftmax, k}; }
  static ProbabilityMapSpec sparselin_gen(double lambda) {
    return {ProbKind::SparselinGen, 1, lambda};
  }
  static ProbabilityMapSpec entmax(double alpha) { return {ProbKind::Entmax, 1, 0.0, alpha}; }

  void validate() const;
  std::string name() const;
};

/// Parses "softmax", "hardmax", "topk:K", "sparselin:L", "entmax:A".
ProbabilityMapSpec parse_probmap(const std::string& text);

Vector softmax(const Vector& v);
Vector hardmax(const Vector& v);
Vector top_k_softmax(const Vector& v, std::size_t k);
Vector sparselin_gen(const Vector& v, double lambda);
Vector entmax(const Vector& v, double alpha);

/// rho applied to a single column.
Vector apply_column(const ProbabilityMapSpec& spec, const Vector& v);
/// rho applied column-wise.
Matrix apply(const ProbabilityMapSpec& spec, const Matrix& m);

/// A scaling factor t with rho[t v]_{j*} >= 1 - eta for every v whose top
/// entry leads the rest by at least zeta; n is the column length.
///
/// softmax / top-k: ln((n-1)(1-eta)/eta) / zeta, clamped at 0
/// sparselin-gen:   (1-eta) / zeta
/// entmax (a > 1):  1 / (zeta (a-1))
/// hardmax:         1
double assumption2_t(const ProbabilityMapSpec& spec, double zeta, double eta, std::size_t n);

struct Assumption2Report {
  bool pass = true;
  std::size_t trials = 0;
  std::size_t failures = 0;
  double t = 0.0;
  /// min over trials of rho[tv]_{j*} - (1 - eta); negative means a failure.
  double worst_slack = 0.0;
  /// trials where the output was exactly one-hot
  std::size_t collapsed = 0;
};

/// Randomized check of the hardmax-approximation property at the t returned by
/// assumption2_t. Half the trials sit exactly at margin zeta.
Assumption2Report check_assumption2(const ProbabilityMapSpec& spec, double zeta, double eta,
                                    std::size_t n, std::size_t trials, std::uint64_t seed);

}  // namespace sparseua
