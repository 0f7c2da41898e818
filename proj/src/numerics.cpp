// Copyright 2026 The sparseua Authors
// SPDX-License-Identifier: Apache-2.0

#include "sparseua/numerics.hpp"

#include <algorithm>
#include <cmath>

namespace sparseua {

Matrix matmul(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.rows()) {
    throw ShapeError("matmul: " + std::to_string(a.rows()) + "x" + std::to_string(a.cols()) +
                     " times " + std::to_string(b.rows()) + "x" + std::to_string(b.cols()));
  }
  require_finite(a, "matmul lhs");
  require_finite(b, "matmul rhs");
  Matrix out = a * b;
  return out;
}

std::size_t argmax_col(std::span<const double> v) {
  if (v.empty()) throw ShapeError("argmax_col: empty input");
  std::size_t best = 0;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (std::isnan(v[i])) throw ShapeError("argmax_col: NaN entry");
    if (v[i] > v[best]) best = i;
  }
  return best;
}

double relu(double t) {
  if (std::isnan(t)) throw ShapeError("relu: NaN input");
  return t > 0.0 ? t : 0.0;
}

PiecewiseLinear::PiecewiseLinear(std::vector<double> breakpoints, std::vector<Piece> pieces)
    : breakpoints_(std::move(breakpoints)), pieces_(std::move(pieces)) {
  if (pieces_.size() != breakpoints_.size() + 1) {
    throw ParameterError("PiecewiseLinear: need breakpoints+1 pieces");
  }
  for (std::size_t i = 1; i < breakpoints_.size(); ++i) {
    if (!(breakpoints_[i - 1] < breakpoints_[i])) {
      throw ParameterError("PiecewiseLinear: breakpoints must be strictly increasing");
    }
  }
  for (double b : breakpoints_) {
    if (!std::isfinite(b)) throw ParameterError("PiecewiseLinear: non-finite breakpoint");
  }
}

double PiecewiseLinear::operator()(double t) const {
  if (std::isnan(t)) throw ShapeError("eval_pwl: NaN input");
  auto it = std::upper_bound(breakpoints_.begin(), breakpoints_.end(), t);
  const Piece& piece = pieces_[static_cast<std::size_t>(it - breakpoints_.begin())];
  if (piece.slope == 0.0) return piece.intercept;
  return piece.slope * t + piece.intercept;
}

double eval_pwl(const PiecewiseLinear& f, double t) { return f(t); }

Rng::Rng(std::uint64_t seed) : engine_(seed) {}

std::uint64_t Rng::next_u64() { return engine_(); }

double Rng::uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

std::uint64_t Rng::below(std::uint64_t n) {
  if (n == 0) throw ParameterError("Rng::below: empty range");
  // Rejection sampling keeps the draw unbiased.
  const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                              std::numeric_limits<std::uint64_t>::max() % n;
  std::uint64_t x;
  do {
    x = engine_();
  } while (x >= limit);
  return x % n;
}

double Rng::normal() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  double u, v, s;
  do {
    u = 2.0 * uniform() - 1.0;
    v = 2.0 * uniform() - 1.0;
    s = u * u + v * v;
  } while (s >= 1.0 || s == 0.0);
  const double f = std::sqrt(-2.0 * std::log(s) / s);
  spare_ = v * f;
  has_spare_ = true;
  return u * f;
}

}  // namespace sparseua
