// Copyright 2026 The sparseua Authors
// SPDX-License-Identifier: Apache-2.0

#include "sparseua/probmaps.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <vector>

namespace sparseua {
namespace {

constexpr double kCheckSlack = 1e-12;

void require_column(const Vector& v, const char* what) {
  if (v.size() == 0) throw ShapeError(std::string(what) + ": empty input");
  require_finite(v, what);
}

/// Indices sorted by value descending; ties keep the lower index first.
std::vector<std::size_t> order_desc(const Vector& v) {
  std::vector<std::size_t> idx(static_cast<std::size_t>(v.size()));
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
    return v[static_cast<Eigen::Index>(a)] > v[static_cast<Eigen::Index>(b)];
  });
  return idx;
}

}  // namespace

void ProbabilityMapSpec::validate() const {
  switch (kind) {
    case ProbKind::TopKSoftmax:
      if (k < 1) throw ParameterError("top-k softmax needs k >= 1");
      break;
    case ProbKind::SparselinGen:
      if (!(lambda >= 0.0 && lambda < 1.0)) throw ParameterError("sparselin-gen needs lambda in [0, 1)");
      break;
    case ProbKind::Entmax:
      if (!(alpha >= 1.0) || !std::isfinite(alpha)) throw ParameterError("entmax needs alpha >= 1");
      break;
    default:
      break;
  }
}

std::string ProbabilityMapSpec::name() const {
  switch (kind) {
    case ProbKind::Softmax: return "softmax";
    case ProbKind::Hardmax: return "hardmax";
    case ProbKind::TopKSoftmax: return "topk:" + std::to_string(k);
    case ProbKind::SparselinGen: return "sparselin:" + std::to_string(lambda);
    case ProbKind::Entmax: return "entmax:" + std::to_string(alpha);
  }
  return "softmax";
}

ProbabilityMapSpec parse_probmap(const std::string& text) {
  const auto colon = text.find(':');
  const std::string head = text.substr(0, colon);
  const std::string arg = colon == std::string::npos ? "" : text.substr(colon + 1);
  auto number = [&]() {
    if (arg.empty()) throw ParameterError("probability map '" + head + "' needs a parameter");
    try {
      return std::stod(arg);
    } catch (const std::exception&) {
      throw ParameterError("bad parameter in '" + text + "'");
    }
  };
  ProbabilityMapSpec spec;
  if (head == "softmax") {
    spec = ProbabilityMapSpec::softmax();
  } else if (head == "hardmax") {
    spec = ProbabilityMapSpec::hardmax();
  } else if (head == "topk") {
    const double k = number();
    if (k < 1 || k != std::floor(k)) throw ParameterError("top-k needs a positive integer k");
    spec = ProbabilityMapSpec::top_k(static_cast<std::size_t>(k));
  } else if (head == "sparselin") {
    spec = ProbabilityMapSpec::sparselin_gen(number());
  } else if (head == "entmax") {
    spec = ProbabilityMapSpec::entmax(number());
  } else {
    throw ParameterError("unknown probability map '" + text + "'");
  }
  spec.validate();
  return spec;
}

Vector softmax(const Vector& v) {
  require_column(v, "softmax");
  const double top = v.maxCoeff();
  Vector e = (v.array() - top).exp().matrix();
  return e / e.sum();
}

Vector hardmax(const Vector& v) {
  require_column(v, "hardmax");
  Vector out = Vector::Zero(v.size());
  out[static_cast<Eigen::Index>(argmax_col(v))] = 1.0;
  return out;
}

Vector top_k_softmax(const Vector& v, std::size_t k) {
  require_column(v, "top-k softmax");
  if (k < 1 || k > static_cast<std::size_t>(v.size())) {
    throw ParameterError("top-k softmax needs 1 <= k <= n");
  }
  const auto idx = order_desc(v);
  const double top = v[static_cast<Eigen::Index>(idx[0])];
  Vector out = Vector::Zero(v.size());
  double total = 0.0;
  for (std::size_t i = 0; i < k; ++i) {
    const auto j = static_cast<Eigen::Index>(idx[i]);
    out[j] = std::exp(v[j] - top);
    total += out[j];
  }
  return out / total;
}

Vector sparselin_gen(const Vector& v, double lambda) {
  require_column(v, "sparselin-gen");
  if (!(lambda >= 0.0 && lambda < 1.0)) throw ParameterError("sparselin-gen needs lambda in [0, 1)");
  const double scale = 1.0 - lambda;
  const auto idx = order_desc(v);
  // Largest support m with v_(m) > (sum_{i<=m} v_(i) - (1 - lambda)) / m.
  double prefix = 0.0;
  double tau = 0.0;
  for (std::size_t m = 1; m <= idx.size(); ++m) {
    const double vm = v[static_cast<Eigen::Index>(idx[m - 1])];
    prefix += vm;
    const double candidate = (prefix - scale) / static_cast<double>(m);
    if (vm > candidate) tau = candidate;
  }
  Vector out = ((v.array() - tau) / scale).max(0.0).matrix();
  return out;
}

Vector entmax(const Vector& v, double alpha) {
  require_column(v, "entmax");
  if (!(alpha >= 1.0)) throw ParameterError("entmax needs alpha >= 1");
  if (alpha == 1.0) return softmax(v);
  const double inv = 1.0 / (alpha - 1.0);
  const Eigen::ArrayXd z = (alpha - 1.0) * v.array();
  // mass(tau) = sum (z - tau)_+^inv - 1 is decreasing in tau and convex for
  // inv >= 1, so Newton steps from the left bracket stay left of the root.
  auto mass = [&](double tau, double* slope) {
    double f = -1.0, df = 0.0;
    for (Eigen::Index i = 0; i < z.size(); ++i) {
      const double gap = z[i] - tau;
      if (gap <= 0.0) continue;
      const double g = std::pow(gap, inv);
      f += g;
      df -= inv * g / gap;
    }
    if (slope) *slope = df;
    return f;
  };

  const double top = z.maxCoeff();
  // The top entry alone carries mass >= 1 at lo; the slack absorbs rounding in top - lo.
  double lo = top - 1.0 - 4.0 * std::numeric_limits<double>::epsilon() * std::max(1.0, std::abs(top));
  double hi = top;
  double slope = 0.0;
  double f_lo = mass(lo, &slope);
  if (f_lo < 0.0 || mass(hi, nullptr) > 0.0) throw std::logic_error("entmax: bisection bracket invalid");
  const bool newton = inv >= 1.0;
  const double ulp = std::numeric_limits<double>::epsilon() * std::max(1.0, std::abs(top));
  for (int it = 0; it < 200 && hi - lo > 4.0 * ulp && f_lo > 0.0; ++it) {
    double next = 0.5 * (lo + hi);
    if (newton && slope < 0.0) {
      const double step = lo - f_lo / slope;
      if (step > lo && step < hi) next = step;
    }
    if (next <= lo || next >= hi) break;
    double next_slope = 0.0;
    const double f = mass(next, &next_slope);
    if (f >= 0.0) {
      if (newton && next - lo <= ulp) {
        lo = next;
        break;
      }
      lo = next, f_lo = f, slope = next_slope;
    } else {
      hi = next;
    }
  }
  Eigen::ArrayXd p = (z - lo).max(0.0).pow(inv);
  return (p / p.sum()).matrix();
}

Vector apply_column(const ProbabilityMapSpec& spec, const Vector& v) {
  switch (spec.kind) {
    case ProbKind::Softmax: return softmax(v);
    case ProbKind::Hardmax: return hardmax(v);
    case ProbKind::TopKSoftmax: return top_k_softmax(v, spec.k);
    case ProbKind::SparselinGen: return sparselin_gen(v, spec.lambda);
    case ProbKind::Entmax: return entmax(v, spec.alpha);
  }
  return softmax(v);
}

Matrix apply(const ProbabilityMapSpec& spec, const Matrix& m) {
  if (m.size() == 0) throw ShapeError("apply: empty matrix");
  spec.validate();
  Matrix out(m.rows(), m.cols());
  for (Eigen::Index c = 0; c < m.cols(); ++c) out.col(c) = apply_column(spec, m.col(c));
  return out;
}

double assumption2_t(const ProbabilityMapSpec& spec, double zeta, double eta, std::size_t n) {
  if (!(zeta > 0.0)) throw ParameterError("assumption2_t: zeta must be positive");
  if (!(eta > 0.0 && eta <= 1.0)) throw ParameterError("assumption2_t: eta must lie in (0, 1]");
  if (n == 0) throw ParameterError("assumption2_t: n must be positive");
  spec.validate();
  switch (spec.kind) {
    case ProbKind::Softmax:
    case ProbKind::TopKSoftmax: {
      if (n < 2) return 0.0;
      const double ratio = static_cast<double>(n - 1) * (1.0 - eta) / eta;
      return ratio <= 1.0 ? 0.0 : std::log(ratio) / zeta;
    }
    case ProbKind::SparselinGen: return (1.0 - eta) / zeta;
    case ProbKind::Entmax:
      if (spec.alpha == 1.0) return assumption2_t(ProbabilityMapSpec::softmax(), zeta, eta, n);
      return 1.0 / (zeta * (spec.alpha - 1.0));
    case ProbKind::Hardmax: return 1.0;
  }
  return 1.0;
}

Assumption2Report check_assumption2(const ProbabilityMapSpec& spec, double zeta, double eta,
                                    std::size_t n, std::size_t trials, std::uint64_t seed) {
  if (trials == 0) throw ParameterError("check_assumption2: trials must be positive");
  Assumption2Report rep;
  rep.trials = trials;
  rep.t = assumption2_t(spec, zeta, eta, n);
  rep.worst_slack = std::numeric_limits<double>::infinity();
  ProbabilityMapSpec applied = spec;
  if (applied.kind == ProbKind::TopKSoftmax) applied.k = std::min(applied.k, n);

  Rng rng(seed);
  Vector v(static_cast<Eigen::Index>(n));
  for (std::size_t trial = 0; trial < trials; ++trial) {
    const auto star = static_cast<Eigen::Index>(rng.below(n));
    double runner_up = -std::numeric_limits<double>::infinity();
    for (Eigen::Index j = 0; j < v.size(); ++j) {
      v[j] = rng.uniform(-3.0, 3.0);
      if (j != star) runner_up = std::max(runner_up, v[j]);
    }
    if (n == 1) runner_up = 0.0;
    // Thirds: every rival exactly at the margin, top at the margin, top beyond it.
    const int mode = static_cast<int>(trial % 3);
    if (mode == 0) {
      for (Eigen::Index j = 0; j < v.size(); ++j)
        if (j != star) v[j] = runner_up;
    }
    const double margin = mode == 2 ? zeta * (1.0 + 4.0 * rng.uniform()) : zeta;
    v[star] = runner_up + margin;

    const Vector out = apply_column(applied, Vector(rep.t * v));
    const double top = out[star];
    const double rest = out.sum() - top;
    const double slack = std::min(top - (1.0 - eta), eta - rest);
    rep.worst_slack = std::min(rep.worst_slack, slack);
    if (slack < -kCheckSlack) ++rep.failures;
    if (top == 1.0) ++rep.collapsed;
  }
  rep.pass = rep.failures == 0;
  return rep;
}

}  // namespace sparseua
