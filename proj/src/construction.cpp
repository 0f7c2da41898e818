// Copyright 2026 The sparseua Authors
// SPDX-License-Identifier: Apache-2.0

#include "sparseua/construction.hpp"

#include <algorithm>
#include <cmath>

namespace sparseua {
namespace {

Int id_of(const ExactMatrix& z, Eigen::Index col, const ExactVector& u) {
  Int acc = 0;
  for (Eigen::Index r = 0; r < z.rows(); ++r) acc = checked_add(acc, checked_mul(u[r], z(r, col)));
  return acc;
}

void require_pattern_shape(const ExactMatrix& z, const ExactVector& u, const SparsityPattern& pattern,
                           std::size_t l) {
  if (static_cast<std::size_t>(z.cols()) != pattern.n()) throw ShapeError("shift: n mismatch");
  if (z.rows() != u.size()) throw ShapeError("shift: u length must equal d");
  if (l >= pattern.p()) throw ParameterError("shift: pattern index out of range");
}

}  // namespace

std::string to_string(Int v) {
  if (v == 0) return "0";
  const bool neg = v < 0;
  // Work with negative values so the minimum is representable.
  std::string out;
  Int x = neg ? v : -v;
  while (x != 0) {
    out.push_back(static_cast<char>('0' - static_cast<int>(x % 10)));
    x /= 10;
  }
  if (neg) out.push_back('-');
  std::reverse(out.begin(), out.end());
  return out;
}

std::int64_t grid_inverse(double delta) {
  if (!(delta > 0.0) || !std::isfinite(delta)) throw ConfigError("delta must be positive");
  const double inv = 1.0 / delta;
  const double rounded = std::round(inv);
  if (std::abs(inv - rounded) > 1e-9 * rounded || rounded < 2.0) {
    throw ConfigError("1/delta must be an integer >= 2");
  }
  return static_cast<std::int64_t>(rounded);
}

Int checked_add(Int a, Int b) {
  Int out;
  if (__builtin_add_overflow(a, b, &out)) throw OverflowError("128-bit addition overflow");
  return out;
}

Int checked_mul(Int a, Int b) {
  Int out;
  if (__builtin_mul_overflow(a, b, &out)) throw OverflowError("128-bit multiplication overflow");
  return out;
}

Int checked_pow(Int base, std::size_t e) {
  Int out = 1;
  for (std::size_t i = 0; i < e; ++i) out = checked_mul(out, base);
  return out;
}

std::uint64_t ConstructionConfig::num_sequences() const {
  const Int count = checked_pow(q, n * d);
  if (count > static_cast<Int>(std::numeric_limits<std::uint64_t>::max())) {
    throw OverflowError("grid too large");
  }
  return static_cast<std::uint64_t>(count);
}

ConstructionConfig make_construction_config(std::size_t n, std::size_t d, std::int64_t q,
                                            const SparsityPattern& pattern) {
  if (n < 2) throw ConfigError("construction needs n >= 2");
  if (d < 1) throw ConfigError("construction needs d >= 1");
  if (q < 2) throw ConfigError("construction needs 1/delta >= 2");
  if (pattern.n() != n) throw ConfigError("pattern length does not match n");

  const AssumptionReport rep = full_report(pattern);
  if (!rep.self_inclusion) throw ConfigError("pattern fails self-inclusion");
  if (rep.gamma_status != GammaStatus::Proven) {
    throw ConfigError("pattern has no verified Hamiltonian chain (" + to_string(rep.gamma_status) + ")");
  }
  if (!rep.coverage_s) throw ConfigError("pattern never reaches full coverage");

  ConstructionConfig cfg;
  cfg.n = n;
  cfg.d = d;
  cfg.q = q;
  cfg.pattern = pattern;
  cfg.gamma = *rep.gamma;
  cfg.s = *rep.coverage_s;
  cfg.link.assign(n, 0);
  for (std::size_t i = 1; i < n; ++i) {
    std::size_t l = 0;
    while (l < pattern.p()) {
      const IndexSet& keys = pattern.at(l, cfg.gamma[i]);
      if (std::binary_search(keys.begin(), keys.end(), cfg.gamma[i - 1])) break;
      ++l;
    }
    if (l == pattern.p()) throw ConfigError("chain link missing from every pattern");
    cfg.link[i] = l;
  }

  // (2 s n q^{nd+1})^s * n q^{nd} * q < 2^126
  try {
    const Int c = all_max_multiplier(cfg);
    const Int top = checked_mul(checked_pow(c, cfg.s),
                                checked_mul(static_cast<Int>(n), checked_pow(q, n * d + 1)));
    if (top >= (static_cast<Int>(1) << 126)) throw OverflowError("guard");
  } catch (const OverflowError&) {
    throw ConfigError("configuration exceeds 128-bit exact range");
  }
  return cfg;
}

Matrix positional_embedding(std::size_t n, std::size_t d, const Permutation& gamma) {
  if (gamma.size() != n) throw ParameterError("positional_embedding: gamma must have n entries");
  Matrix e(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(n));
  for (std::size_t i = 0; i < n; ++i) {
    const double level = i == 0 ? static_cast<double>(n - 1) : static_cast<double>(i - 1);
    e.col(static_cast<Eigen::Index>(gamma[i])).setConstant(level);
  }
  return e;
}

ExactMatrix positional_embedding_units(std::size_t n, std::size_t d, const Permutation& gamma,
                                       std::int64_t q) {
  if (gamma.size() != n) throw ParameterError("positional_embedding: gamma must have n entries");
  ExactMatrix e(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(n));
  for (std::size_t i = 0; i < n; ++i) {
    const Int level = i == 0 ? static_cast<Int>(n - 1) : static_cast<Int>(i - 1);
    e.col(static_cast<Eigen::Index>(gamma[i])).setConstant(level * q);
  }
  return e;
}

ExactVector u_vector(std::size_t d, std::int64_t q) {
  ExactVector u(static_cast<Eigen::Index>(d));
  Int x = 1;
  for (std::size_t r = 0; r < d; ++r) {
    u[static_cast<Eigen::Index>(r)] = x;
    if (r + 1 < d) x = checked_mul(x, q);
  }
  return u;
}

ExactVector column_ids(const ExactMatrix& z, const ExactVector& u) {
  if (z.rows() != u.size()) throw ShapeError("column_ids: u length must equal d");
  ExactVector out(z.cols());
  for (Eigen::Index k = 0; k < z.cols(); ++k) out[k] = id_of(z, k, u);
  return out;
}

double quantize_oracle(double t, double delta, std::size_t n) {
  if (!(delta > 0.0)) throw ParameterError("quantize_oracle: delta must be positive");
  if (!(t >= 0.0 && t < static_cast<double>(n))) return t;
  double k = std::floor(t / delta);
  while (k * delta > t) k -= 1.0;
  while ((k + 1.0) * delta <= t) k += 1.0;
  return k * delta;
}

double quantize_units_oracle(double t_units, std::size_t n, std::int64_t q) {
  const double top = static_cast<double>(n) * static_cast<double>(q);
  if (!(t_units >= 0.0 && t_units < top)) return t_units;
  return std::floor(t_units);
}

PiecewiseLinear quantizer_activation_units() { return quantizer_activation(1.0); }

PiecewiseLinear quantizer_activation(double delta) {
  using P = PiecewiseLinear::Piece;
  return PiecewiseLinear({0.0, delta}, {P{0.0, 0.0}, P{-1.0, 0.0}, P{0.0, 0.0}});
}

std::vector<FfnLayer> build_gq_layers(std::size_t n, std::size_t d, std::int64_t q) {
  if (n == 0 || d == 0 || q < 1) throw ConfigError("build_gq_layers: bad dimensions");
  const auto D = static_cast<Eigen::Index>(d);
  std::vector<FfnLayer> layers;
  layers.reserve(d * n * static_cast<std::size_t>(q));
  for (Eigen::Index r = 0; r < D; ++r) {
    for (std::int64_t k = 0; k < static_cast<std::int64_t>(n) * q; ++k) {
      FfnLayer layer{Matrix::Zero(1, D), Vector::Constant(1, -static_cast<double>(k)),
                     Matrix::Zero(D, 1), Vector::Zero(D)};
      layer.w1(0, r) = 1.0;
      layer.w2(r, 0) = 1.0;
      layers.push_back(std::move(layer));
    }
  }
  return layers;
}

Matrix apply_gq(const Matrix& z_units, const std::vector<FfnLayer>& layers) {
  const Activation phi = Activation::piecewise(quantizer_activation_units());
  Matrix z = z_units;
  for (const auto& layer : layers) z = ffn(z, layer.w1, layer.b1, layer.w2, layer.b2, phi);
  return z;
}

ExactMatrix selective_shift(const ExactMatrix& z, std::size_t l, Int c, Int lo_half, Int hi_half,
                            const ExactVector& u, const SparsityPattern& pattern) {
  require_pattern_shape(z, u, pattern, l);
  if (!(lo_half < hi_half)) throw ParameterError("selective_shift: need lo < hi");
  const ExactVector ids = column_ids(z, u);
  ExactMatrix out = z;
  for (Eigen::Index k = 0; k < z.cols(); ++k) {
    const Int twice = checked_mul(2, ids[k]);
    if (twice == lo_half || twice == hi_half) {
      throw ConfigError("selective_shift: column id on a window boundary");
    }
    // Each head picks the key with the largest score id_j * (id_k - b); the
    // sign of the query factor turns that into a max or a min over A_k.
    const IndexSet& keys = pattern.at(l, static_cast<std::size_t>(k));
    auto pick = [&](Int factor) {
      Int best = ids[static_cast<Eigen::Index>(keys[0])];
      for (std::size_t j : keys) {
        const Int v = ids[static_cast<Eigen::Index>(j)];
        if (factor > 0 ? v > best : v < best) best = v;
      }
      return best;
    };
    const Int shift = checked_add(pick(twice - lo_half), -pick(twice - hi_half));
    if (shift != 0) out(0, k) = checked_add(out(0, k), checked_mul(c, shift));
  }
  return out;
}

ExactMatrix all_max_shift(const ExactMatrix& z, std::size_t l, Int c, const ExactVector& u,
                          const SparsityPattern& pattern) {
  require_pattern_shape(z, u, pattern, l);
  const ExactVector ids = column_ids(z, u);
  for (Eigen::Index k = 0; k < ids.size(); ++k)
    if (ids[k] <= 0) throw ConfigError("all_max_shift: column ids must be positive");
  ExactMatrix out = z;
  for (Eigen::Index k = 0; k < z.cols(); ++k) {
    Int best = 0;
    for (std::size_t j : pattern.at(l, static_cast<std::size_t>(k)))
      best = std::max(best, ids[static_cast<Eigen::Index>(j)]);
    out(0, k) = checked_add(out(0, k), checked_mul(c, best));
  }
  return out;
}

Int delta_units(const ConstructionConfig& cfg) {
  Int sum = 0;
  for (std::size_t r = 0; r < cfg.d; ++r) sum = checked_add(sum, checked_pow(cfg.q, r));
  return checked_mul(sum, cfg.q);
}

Int all_max_multiplier(const ConstructionConfig& cfg) {
  return checked_mul(static_cast<Int>(2 * cfg.s * cfg.n), checked_pow(cfg.q, cfg.n * cfg.d + 1));
}

std::vector<AttentionLayerOp> build_gc_layers(const ConstructionConfig& cfg) {
  using Op = AttentionLayerOp;
  const std::size_t p = cfg.p();
  const Int big_delta = delta_units(cfg);
  const Int windows = checked_pow(cfg.q, cfg.d);
  std::vector<Op> layers;
  for (std::size_t i = 2; i <= cfg.n; ++i) {
    const Int base = checked_mul(static_cast<Int>(i - 2), big_delta);
    for (Int j = 0; j < windows; ++j) {
      const Int b = base + j;
      // p consecutive slots; the shift sits on the slot whose cycle index is link.
      for (std::size_t slot = 0; slot < p; ++slot) {
        Op op;
        op.pattern_index = slot;
        if (slot == cfg.link[i - 1]) {
          op.kind = Op::Kind::SelectiveShift;
          op.c = windows;
          op.lo_half = 2 * b - 1;
          op.hi_half = 2 * b + 1;
          op.stage = i;
        }
        layers.push_back(op);
      }
    }
  }
  const Int c = all_max_multiplier(cfg);
  for (std::size_t t = 0; t < cfg.s; ++t) {
    Op op;
    op.kind = Op::Kind::AllMaxShift;
    op.pattern_index = t % p;
    op.c = c;
    layers.push_back(op);
  }
  return layers;
}

ContextResult contextual_map(const ExactMatrix& h_units, const ConstructionConfig& cfg,
                             const std::vector<AttentionLayerOp>& layers) {
  using Kind = AttentionLayerOp::Kind;
  const ExactVector u = u_vector(cfg.d, cfg.q);
  ContextResult res;
  ExactMatrix z = h_units;
  bool shifted_recorded = false;
  for (std::size_t slot = 0; slot < layers.size(); ++slot) {
    const auto& op = layers[slot];
    if (op.pattern_index != slot % cfg.p()) throw ConfigError("layer slot out of pattern cycle");
    switch (op.kind) {
      case Kind::Identity: break;
      case Kind::SelectiveShift:
        z = selective_shift(z, op.pattern_index, op.c, op.lo_half, op.hi_half, u, cfg.pattern);
        break;
      case Kind::AllMaxShift:
        if (!shifted_recorded) {
          res.shifted = z;
          shifted_recorded = true;
        }
        z = all_max_shift(z, op.pattern_index, op.c, u, cfg.pattern);
        break;
    }
  }
  if (!shifted_recorded) res.shifted = z;
  res.output = std::move(z);
  res.ids = column_ids(res.output, u);
  return res;
}

ContextResult contextual_map(const ExactMatrix& h_units, const ConstructionConfig& cfg) {
  return contextual_map(h_units, cfg, build_gc_layers(cfg));
}

ExactMatrix grid_point_units(std::uint64_t index, std::size_t n, std::size_t d, std::int64_t q) {
  ExactMatrix g(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(n));
  const auto base = static_cast<std::uint64_t>(q);
  for (std::size_t k = 0; k < n; ++k) {
    for (std::size_t r = 0; r < d; ++r) {
      g(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(k)) = static_cast<Int>(index % base);
      index /= base;
    }
  }
  if (index != 0) throw ParameterError("grid_point_units: index out of range");
  return g;
}

std::uint64_t grid_index_units(const ExactMatrix& g, std::int64_t q) {
  std::uint64_t index = 0;
  for (Eigen::Index k = g.cols(); k-- > 0;) {
    for (Eigen::Index r = g.rows(); r-- > 0;) {
      const Int v = g(r, k);
      if (v < 0 || v >= q) throw ParameterError("grid_index_units: entry outside [0, q)");
      index = index * static_cast<std::uint64_t>(q) + static_cast<std::uint64_t>(v);
    }
  }
  return index;
}

}  // namespace sparseua
