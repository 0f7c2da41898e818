// Copyright 2026 The sparseua Authors
// SPDX-License-Identifier: Apache-2.0

#include "sparseua/construction.hpp"

#include <algorithm>
#include <cmath>

#include "sparseua/probmaps.hpp"

namespace sparseua {
namespace {

void require_alpha(double alpha) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw ParameterError("alpha must lie in (0, 1)");
}

void require_delta(double delta) {
  if (!(delta > 0.0) || !std::isfinite(delta)) throw ParameterError("delta must be positive");
}

/// sum_j w_j z_j with w = softmax(t * z_j * factor) over the keys.
double soft_select(const Vector& ids, const IndexSet& keys, double factor, double t) {
  Vector scores(static_cast<Eigen::Index>(keys.size()));
  for (std::size_t a = 0; a < keys.size(); ++a)
    scores[static_cast<Eigen::Index>(a)] = t * ids[static_cast<Eigen::Index>(keys[a])] * factor;
  const Vector w = softmax(scores);
  double acc = 0.0;
  for (std::size_t a = 0; a < keys.size(); ++a)
    acc += w[static_cast<Eigen::Index>(a)] * ids[static_cast<Eigen::Index>(keys[a])];
  return acc;
}

Vector real_ids(const Matrix& z, const Vector& u) { return (u.transpose() * z).transpose(); }

}  // namespace

double phi_relu_eval(double delta, double alpha, double t) {
  require_delta(delta);
  require_alpha(alpha);
  return -relu(t) + relu(t - (1.0 - alpha) * delta) / alpha -
         (1.0 - alpha) / alpha * relu(t - delta);
}

PiecewiseLinear phi_relu_approx(double delta, double alpha) {
  require_delta(delta);
  require_alpha(alpha);
  using P = PiecewiseLinear::Piece;
  const double a = (1.0 - alpha) * delta;
  // Rising piece through (a, -a) and (delta, 0).
  const double slope = (1.0 - alpha) / alpha;
  return PiecewiseLinear({0.0, a, delta},
                         {P{0.0, 0.0}, P{-1.0, 0.0}, P{slope, -a - slope * a}, P{0.0, 0.0}});
}

double phi_prime_relu_eval(double delta, double t) {
  require_delta(delta);
  const double k = 4.0 / delta;
  return k * (relu(t + delta / 2) - relu(t + delta / 4) - relu(t - delta / 4) + relu(t - delta / 2));
}

PiecewiseLinear phi_prime_relu_approx(double delta) {
  require_delta(delta);
  using P = PiecewiseLinear::Piece;
  const double k = 4.0 / delta;
  return PiecewiseLinear({-delta / 2, -delta / 4, delta / 4, delta / 2},
                         {P{0.0, 0.0}, P{k, 2.0}, P{0.0, 1.0}, P{-k, 2.0}, P{0.0, 0.0}});
}

ApproximationBudget approximation_budget(const ConstructionConfig& cfg, double epsilon, double p_norm) {
  if (!(epsilon > 0.0)) throw ParameterError("approximation_budget: epsilon must be positive");
  if (!(p_norm >= 1.0)) throw ParameterError("approximation_budget: p must be >= 1");
  const double delta = cfg.delta();
  const double n = static_cast<double>(cfg.n);
  const double d = static_cast<double>(cfg.d);
  const double s = static_cast<double>(cfg.s);

  ApproximationBudget b;
  b.delta_tilde = std::min(delta, std::pow(2.0, 1.0 - 1.0 / p_norm) * epsilon / std::pow(n, 1.0 / p_norm));
  // Scores are id_j * (id_k - b): key ids differ by >= delta and |id_k - b| >= delta / 2.
  b.zeta = delta * delta / 2.0;
  const auto softmax = ProbabilityMapSpec::softmax();
  for (std::size_t j = 1; j < cfg.n; ++j) {
    const double jj = static_cast<double>(j);
    const double eta = 0.5 * std::pow(delta, 2.0 * d) *
                       std::log1p(std::pow(delta, (jj + 1.0) * d) * b.delta_tilde / (8.0 * n * n));
    b.shift_eta.push_back(eta);
    b.shift_t.push_back(assumption2_t(softmax, b.zeta, eta, cfg.n));
  }
  const double nd = n * d;
  const double inner = std::pow(delta, s * (nd + 1.0) + nd) * b.delta_tilde /
                       (std::pow(2.0, s + 3.0) * std::pow(s, s) * std::pow(n, s + 1.0));
  b.all_max_eta = std::pow(delta, nd) / (s * n) * std::log1p(inner);
  b.all_max_t = assumption2_t(softmax, b.zeta, b.all_max_eta, cfg.n);
  return b;
}

SoftResult soft_contextual_map(const ExactMatrix& h_units, const ConstructionConfig& cfg,
                               const ApproximationBudget& budget, double t_multiplier) {
  using Kind = AttentionLayerOp::Kind;
  const double delta = cfg.delta();
  const ExactVector u_exact = u_vector(cfg.d, cfg.q);
  Vector u(u_exact.size());
  for (Eigen::Index r = 0; r < u.size(); ++r) u[r] = static_cast<double>(u_exact[r]);

  const auto layers = build_gc_layers(cfg);
  Matrix z(h_units.rows(), h_units.cols());
  for (Eigen::Index i = 0; i < z.size(); ++i) z.data()[i] = static_cast<double>(h_units.data()[i]) * delta;

  for (const auto& op : layers) {
    if (op.kind == Kind::Identity) continue;
    const Vector ids = real_ids(z, u);
    const double c = static_cast<double>(op.c);
    Matrix next = z;
    for (Eigen::Index k = 0; k < z.cols(); ++k) {
      const IndexSet& keys = cfg.pattern.at(op.pattern_index, static_cast<std::size_t>(k));
      if (op.kind == Kind::SelectiveShift) {
        const double t = budget.shift_t.at(op.stage - 2) * t_multiplier;
        const double lo = static_cast<double>(op.lo_half) * delta / 2.0;
        const double hi = static_cast<double>(op.hi_half) * delta / 2.0;
        next(0, k) += c * (soft_select(ids, keys, ids[k] - lo, t) - soft_select(ids, keys, ids[k] - hi, t));
      } else {
        const double t = budget.all_max_t * t_multiplier;
        next(0, k) += c * soft_select(ids, keys, ids[k], t);
      }
    }
    z = std::move(next);
  }

  const ContextResult exact = contextual_map(h_units, cfg, layers);
  SoftResult res;
  res.output = z;
  for (Eigen::Index r = 0; r < z.rows(); ++r) {
    for (Eigen::Index k = 0; k < z.cols(); ++k) {
      const double dev = std::abs(z(r, k) - static_cast<double>(exact.output(r, k)) * delta);
      if (r == 0) {
        res.first_row_deviation = std::max(res.first_row_deviation, dev);
      } else {
        res.other_rows_deviation = std::max(res.other_rows_deviation, dev);
      }
    }
  }
  return res;
}

SoftReport verify_soft(const ConstructionConfig& cfg, double epsilon, double p_norm,
                       double t_multiplier) {
  const ApproximationBudget budget = approximation_budget(cfg, epsilon, p_norm);
  const std::uint64_t cells = cfg.num_sequences();
  const ExactMatrix e = positional_embedding_units(cfg.n, cfg.d, cfg.gamma, cfg.q);
  const ExactVector u_exact = u_vector(cfg.d, cfg.q);
  const auto layers = build_gc_layers(cfg);
  Vector u(u_exact.size());
  for (Eigen::Index r = 0; r < u.size(); ++r) u[r] = static_cast<double>(u_exact[r]);

  SoftReport rep;
  rep.bound = budget.delta_tilde / 4.0;
  rep.ids_distinct = true;
  std::vector<Int> recovered;
  for (std::uint64_t g = 0; g < cells; ++g) {
    const ExactMatrix h = grid_point_units(g, cfg.n, cfg.d, cfg.q) + e;
    const SoftResult soft = soft_contextual_map(h, cfg, budget, t_multiplier);
    rep.max_first_row_deviation = std::max(rep.max_first_row_deviation, soft.first_row_deviation);
    rep.max_other_rows_deviation = std::max(rep.max_other_rows_deviation, soft.other_rows_deviation);
    // Each soft id must still round to its exact id.
    const ContextResult exact = contextual_map(h, cfg, layers);
    const Vector ids = real_ids(soft.output, u) * static_cast<double>(cfg.q);
    for (Eigen::Index k = 0; k < ids.size(); ++k) {
      const double rounded = std::round(ids[k]);
      if (std::abs(ids[k] - static_cast<double>(exact.ids[k])) >= 0.5) rep.ids_distinct = false;
      recovered.push_back(static_cast<Int>(rounded));
    }
  }
  std::sort(recovered.begin(), recovered.end());
  if (std::adjacent_find(recovered.begin(), recovered.end()) != recovered.end()) rep.ids_distinct = false;
  rep.pass = rep.max_first_row_deviation <= rep.bound && rep.max_other_rows_deviation == 0.0 &&
             rep.ids_distinct;
  return rep;
}

GridFunction piecewise_constant_approx(const FunctionOracle& f, std::size_t n, std::size_t d,
                                       std::int64_t q) {
  const std::uint64_t cells = static_cast<std::uint64_t>(checked_pow(q, n * d));
  const double delta = 1.0 / static_cast<double>(q);
  std::vector<Matrix> table;
  table.reserve(cells);
  for (std::uint64_t g = 0; g < cells; ++g) {
    const ExactMatrix units = grid_point_units(g, n, d, q);
    Matrix corner(units.rows(), units.cols());
    for (Eigen::Index i = 0; i < units.size(); ++i) corner.data()[i] = static_cast<double>(units.data()[i]) * delta;
    table.push_back(f(corner));
  }
  return GridFunction(n, d, q, std::move(table));
}

DpEstimate dp_distance(const FunctionOracle& f, const FunctionOracle& g, std::size_t n,
                       std::size_t d, double p, std::size_t samples, std::uint64_t seed) {
  if (!(p >= 1.0)) throw ParameterError("dp_distance: p must be >= 1");
  if (samples < 2) throw ParameterError("dp_distance: need at least two samples");
  Rng rng(seed);
  Matrix x(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(n));
  double mean = 0.0, m2 = 0.0;
  for (std::size_t i = 0; i < samples; ++i) {
    for (Eigen::Index j = 0; j < x.size(); ++j) x.data()[j] = rng.uniform();
    const Matrix diff = f(x) - g(x);
    const double v = diff.array().abs().pow(p).sum();
    // Welford update.
    const double step = v - mean;
    mean += step / static_cast<double>(i + 1);
    m2 += step * (v - mean);
  }
  DpEstimate est;
  if (mean <= 0.0) return est;
  const double var = m2 / static_cast<double>(samples - 1);
  const double se_mean = std::sqrt(var / static_cast<double>(samples));
  est.value = std::pow(mean, 1.0 / p);
  est.standard_error = est.value / (p * mean) * se_mean;
  return est;
}

}  // namespace sparseua
