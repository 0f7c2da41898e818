// Copyright 2026 The sparseua Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <limits>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace Eigen {
// Lets Dense<__int128> hold exact construction intermediates.
template <>
struct NumTraits<__int128> : GenericNumTraits<__int128> {
  using Real = __int128;
  using NonInteger = double;
  using Nested = __int128;
  using Literal = __int128;
  enum {
    IsComplex = 0,
    IsInteger = 1,
    IsSigned = 1,
    RequireInitialization = 0,
    ReadCost = 1,
    AddCost = 1,
    MulCost = 1
  };
  static inline Real epsilon() { return 0; }
  static inline Real dummy_precision() { return 0; }
  static inline Real highest() { return ~(static_cast<__int128>(1) << 127); }
  static inline Real lowest() { return static_cast<__int128>(1) << 127; }
  static inline int digits10() { return 38; }
};
}  // namespace Eigen

namespace sparseua {

struct ShapeError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};
struct ParameterError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};
struct PatternError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};
struct ConfigError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};
struct OverflowError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct IntegrityError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct TrainingError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

template <typename Scalar>
using Dense = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename Scalar>
using Column = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

using Matrix = Dense<double>;
using Vector = Column<double>;

/// Throws ShapeError unless every entry is finite.
template <typename Derived>
void require_finite(const Eigen::MatrixBase<Derived>& m, const char* what) {
  if (!m.allFinite()) throw ShapeError(std::string(what) + ": non-finite entry");
}

/// Dense product; rejects shape mismatch and non-finite operands.
Matrix matmul(const Matrix& a, const Matrix& b);

/// Index of the largest entry; ties go to the lowest index.
std::size_t argmax_col(std::span<const double> v);

template <typename Derived>
std::size_t argmax_col(const Eigen::MatrixBase<Derived>& v) {
  const auto& e = v.derived().eval();
  return argmax_col(std::span<const double>(e.data(), static_cast<std::size_t>(e.size())));
}

double relu(double t);

/// Piecewise-linear function of one variable.
///
/// `breakpoints` are strictly increasing; piece i covers
/// [breakpoints[i-1], breakpoints[i]) so a breakpoint belongs to the piece on
/// its right. There are breakpoints.size() + 1 pieces.
class PiecewiseLinear {
 public:
  struct Piece {
    double slope = 0.0;
    double intercept = 0.0;
  };

  PiecewiseLinear(std::vector<double> breakpoints, std::vector<Piece> pieces);

  double operator()(double t) const;
  const std::vector<double>& breakpoints() const { return breakpoints_; }
  const std::vector<Piece>& pieces() const { return pieces_; }

 private:
  std::vector<double> breakpoints_;
  std::vector<Piece> pieces_;
};

double eval_pwl(const PiecewiseLinear& f, double t);

/// Deterministic generator with hand-rolled transforms so that streams are
/// identical across standard library implementations.
class Rng {
 public:
  explicit Rng(std::uint64_t seed);

  std::uint64_t next_u64();
  /// Uniform on [0, 1).
  double uniform();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  /// Uniform integer on [0, n).
  std::uint64_t below(std::uint64_t n);
  double normal();

 private:
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace sparseua
