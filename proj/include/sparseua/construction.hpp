// Copyright 2026 The sparseua Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

// Exact universal-approximation construction at desk scale.
//
// Inputs live on the grid {0, delta, ..., 1 - delta}^{d x n} with delta = 1/q.
// All exact quantities are stored as integer counts of delta ("units") in
// 128-bit integers, so the distinctness claims are checked as equalities.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "sparseua/attention.hpp"
#include "sparseua/numerics.hpp"
#include "sparseua/patterns.hpp"
#include "sparseua/verify.hpp"

namespace sparseua {

using Int = __int128;
using ExactMatrix = Dense<Int>;
using ExactVector = Column<Int>;

std::string to_string(Int v);

/// 1/delta for a real grid step; throws ConfigError unless it is an integer >= 2.
std::int64_t grid_inverse(double delta);

struct ConstructionConfig {
  std::size_t n = 0;
  std::size_t d = 0;
  std::int64_t q = 0;  // 1/delta
  SparsityPattern pattern = dense(1);
  Permutation gamma;
  std::size_t s = 0;
  /// link[i] (i >= 1) is the smallest pattern index l with gamma[i-1] in A^l_{gamma[i]}.
  std::vector<std::size_t> link;

  double delta() const { return 1.0 / static_cast<double>(q); }
  std::size_t p() const { return pattern.p(); }
  /// q^{dn}, the number of grid inputs.
  std::uint64_t num_sequences() const;
};

/// Validates the pattern against all three connectivity conditions, picks
/// gamma, s and the link indices, and applies the overflow guard. Throws
/// ConfigError on any failure.
ConstructionConfig make_construction_config(std::size_t n, std::size_t d, std::int64_t q,
                                            const SparsityPattern& pattern);

/// Checked 128-bit arithmetic; throws OverflowError.
Int checked_add(Int a, Int b);
Int checked_mul(Int a, Int b);
Int checked_pow(Int base, std::size_t e);

/// Column gamma(1) is (n-1) * ones, column gamma(i) is (i-2) * ones.
Matrix positional_embedding(std::size_t n, std::size_t d, const Permutation& gamma);
/// The same embedding in delta-units.
ExactMatrix positional_embedding_units(std::size_t n, std::size_t d, const Permutation& gamma,
                                       std::int64_t q);

/// (1, q, ..., q^{d-1}); a dimensionless weight vector.
ExactVector u_vector(std::size_t d, std::int64_t q);
/// u^T Z_k per column, in units.
ExactVector column_ids(const ExactMatrix& z, const ExactVector& u);

// ---- quantization ----------------------------------------------------------

/// floor-quantization of t to the delta grid when 0 <= t < n, else t.
double quantize_oracle(double t, double delta, std::size_t n);
/// Same map in units: floor(t) on [0, nq), identity elsewhere.
double quantize_units_oracle(double t_units, std::size_t n, std::int64_t q);

/// phi in units: -t on [0, 1), 0 elsewhere.
PiecewiseLinear quantizer_activation_units();
/// phi with a real width delta.
PiecewiseLinear quantizer_activation(double delta);

/// One token-wise feed-forward layer with r = 1.
struct FfnLayer {
  Matrix w1;  // 1 x d
  Vector b1;  // 1
  Matrix w2;  // d x 1
  Vector b2;  // d
};

/// d * n * q layers; group r (n*q layers) quantizes row r. Operates in units.
std::vector<FfnLayer> build_gq_layers(std::size_t n, std::size_t d, std::int64_t q);
Matrix apply_gq(const Matrix& z_units, const std::vector<FfnLayer>& layers);

// ---- contextual mapping ----------------------------------------------------

/// Adds c * (max - min of u^T Z_j over A^l_k) to Z_{0,k} for every column with
/// lo_half < 2 u^T Z_k < hi_half. Window bounds are in half-units. Throws
/// ConfigError if a column id sits exactly on a bound.
ExactMatrix selective_shift(const ExactMatrix& z, std::size_t l, Int c, Int lo_half, Int hi_half,
                            const ExactVector& u, const SparsityPattern& pattern);

/// Adds c * max of u^T Z_j over A^l_k to Z_{0,k} for every column. Requires
/// u^T Z > 0.
ExactMatrix all_max_shift(const ExactMatrix& z, std::size_t l, Int c, const ExactVector& u,
                          const SparsityPattern& pattern);

struct AttentionLayerOp {
  enum class Kind { Identity, SelectiveShift, AllMaxShift };
  Kind kind = Kind::Identity;
  std::size_t pattern_index = 0;
  Int c = 0;
  Int lo_half = 0, hi_half = 0;
  /// shift stage i (2..n) for selective shifts, 0 otherwise
  std::size_t stage = 0;
};

/// The full attention-layer list: p(n-1)q^d shift slots (identity fillers
/// included) followed by s all-max-shift layers.
std::vector<AttentionLayerOp> build_gc_layers(const ConstructionConfig& cfg);

/// Delta units of one grid step; Delta = q * sum_{i<d} q^i.
Int delta_units(const ConstructionConfig& cfg);
/// Multiplier of the all-max-shift layers, 2 s n q^{nd+1}.
Int all_max_multiplier(const ConstructionConfig& cfg);

struct ContextResult {
  ExactMatrix shifted;  // state after the selective-shift stages
  ExactMatrix output;   // M^s
  ExactVector ids;      // u^T M^s
};

ContextResult contextual_map(const ExactMatrix& h_units, const ConstructionConfig& cfg,
                             const std::vector<AttentionLayerOp>& layers);
ContextResult contextual_map(const ExactMatrix& h_units, const ConstructionConfig& cfg);

// ---- grid enumeration and target functions ---------------------------------

/// Grid point with the given index, in units; entry (r, k) is digit k*d + r
/// of the index in base q.
ExactMatrix grid_point_units(std::uint64_t index, std::size_t n, std::size_t d, std::int64_t q);
std::uint64_t grid_index_units(const ExactMatrix& g, std::int64_t q);

/// Piecewise-constant target: one d x n output per grid cell.
class GridFunction {
 public:
  GridFunction(std::size_t n, std::size_t d, std::int64_t q, std::vector<Matrix> table);

  std::size_t n() const { return n_; }
  std::size_t d() const { return d_; }
  std::int64_t q() const { return q_; }
  const std::vector<Matrix>& table() const { return table_; }
  const Matrix& at(std::uint64_t index) const { return table_.at(index); }
  /// Value on the cell containing x, x in [0, 1)^{d x n}.
  const Matrix& operator()(const Matrix& x) const;

 private:
  std::size_t n_, d_;
  std::int64_t q_;
  std::vector<Matrix> table_;
};

GridFunction zero_grid_function(std::size_t n, std::size_t d, std::int64_t q);
/// Table entries uniform on [0, 1).
GridFunction random_grid_function(std::size_t n, std::size_t d, std::int64_t q, std::uint64_t seed);

using FunctionOracle = std::function<Matrix(const Matrix&)>;

/// fbar(X) = f(G) for X in the cell of G.
GridFunction piecewise_constant_approx(const FunctionOracle& f, std::size_t n, std::size_t d,
                                       std::int64_t q);

struct DpEstimate {
  double value = 0.0;
  double standard_error = 0.0;
};

/// Monte Carlo estimate of (integral over [0,1)^{d x n} of ||f - g||_p^p)^{1/p}.
DpEstimate dp_distance(const FunctionOracle& f, const FunctionOracle& g, std::size_t n,
                       std::size_t d, double p, std::size_t samples, std::uint64_t seed);

// ---- value mapping ---------------------------------------------------------

/// A column value held as an exact unit part plus a real residual. The value
/// is units * delta + residual.
struct SplitColumns {
  ExactMatrix units;
  Matrix residual;
};

struct ValueLayer {
  Int id = 0;         // trigger id in units
  Matrix target;      // d x 1, fbar column
  ExactVector shift;  // d, units subtracted when the layer fires
};

/// One layer per (grid input, token). Throws IntegrityError if the ids are
/// not distinct or an output column could trigger another layer.
std::vector<ValueLayer> value_map_build(const ConstructionConfig& cfg, const GridFunction& fbar,
                                        const std::vector<ContextResult>& contexts);
Matrix value_map_apply(const ExactMatrix& gc_output, const std::vector<ValueLayer>& layers,
                       const ExactVector& u, std::int64_t q);
/// Direct lookup by id.
Matrix value_map_oracle(const ExactVector& ids, const std::vector<ValueLayer>& layers,
                        std::size_t d);

// ---- verification ----------------------------------------------------------

struct DepthCounts {
  std::size_t gq = 0, gc = 0, gv = 0;
  std::size_t gq_expected = 0, gc_expected = 0, gv_expected = 0;
  bool match() const { return gq == gq_expected && gc == gc_expected && gv == gv_expected; }
};

struct ConstructionReport {
  std::size_t n = 0, d = 0;
  std::int64_t q = 0;
  std::string pattern_name;
  std::size_t p = 0, s = 0;
  Permutation gamma;
  std::vector<std::size_t> link;

  std::uint64_t num_sequences = 0;
  std::uint64_t num_ids = 0;
  bool within_sequence_distinct = false;
  bool distinct = false;
  std::optional<Int> min_gap_units;
  bool ids_disjoint_after_embedding = false;
  bool ordering = false;
  /// max over inputs of the last shifted id, and the bound n q^{nd+1} it must stay below
  Int max_shifted_id_units = 0;
  Int shifted_id_bound_units = 0;
  bool shifted_bound = false;
  bool mod_check = false;
  DepthCounts depth;
  bool gq_exact = false;
  bool gv_exact = false;
  bool end_to_end = false;
  std::size_t end_to_end_points = 0;
  std::optional<double> soft_max_deviation;
  std::optional<double> soft_bound;
  std::optional<bool> soft_pass;
  std::vector<std::string> failures;

  bool pass() const;
};

struct VerifyOptions {
  std::uint64_t enumeration_budget = 1'000'000;
  std::size_t interior_samples = 10;
  std::uint64_t seed = 0;
  bool zero_target = false;
  bool soft = false;
  double epsilon = 1.0;
  double p_norm = 2.0;
};

/// Exhaustive check of the exact pipeline g_v o g_c o g_q(. + E) over every grid
/// input, plus interior samples per cell.
ConstructionReport verify_construction(const ConstructionConfig& cfg, const std::string& pattern_name,
                                       const VerifyOptions& opt);

// ---- approximation by ReLUs and scaled probability maps --------------------

/// -ReLU(t) + ReLU(t - (1-a) delta)/a - (1-a)/a ReLU(t - delta).
double phi_relu_eval(double delta, double alpha, double t);
PiecewiseLinear phi_relu_approx(double delta, double alpha);
/// Trapezoid bump: 1 on [-delta/4, delta/4), 0 outside [-delta/2, delta/2).
double phi_prime_relu_eval(double delta, double t);
PiecewiseLinear phi_prime_relu_approx(double delta);

struct ApproximationBudget {
  double delta_tilde = 0.0;
  double zeta = 0.0;
  std::vector<double> shift_eta;  // stage j = 1..n-1
  std::vector<double> shift_t;
  double all_max_eta = 0.0;
  double all_max_t = 0.0;
};

ApproximationBudget approximation_budget(const ConstructionConfig& cfg, double epsilon,
                                         double p_norm);

struct SoftResult {
  Matrix output;  // real units
  double first_row_deviation = 0.0;
  double other_rows_deviation = 0.0;
};

/// Runs the contextual-map layers with softmax scaled by the budgeted t values
/// (times t_multiplier) in place of hardmax, in real arithmetic.
SoftResult soft_contextual_map(const ExactMatrix& h_units, const ConstructionConfig& cfg,
                               const ApproximationBudget& budget, double t_multiplier = 1.0);

struct SoftReport {
  double max_first_row_deviation = 0.0;
  double max_other_rows_deviation = 0.0;
  double bound = 0.0;
  bool ids_distinct = false;
  bool pass = false;
};

SoftReport verify_soft(const ConstructionConfig& cfg, double epsilon, double p_norm,
                       double t_multiplier = 1.0);

}  // namespace sparseua
