// Copyright 2026 The sparseua Authors
// SPDX-License-Identifier: Apache-2.0

#include "sparseua/construction.hpp"

#include <algorithm>
#include <cmath>
#include <map>

namespace sparseua {
namespace {

std::uint64_t cell_count(std::size_t n, std::size_t d, std::int64_t q) {
  const Int count = checked_pow(q, n * d);
  if (count > static_cast<Int>(std::uint64_t{1} << 40)) throw ConfigError("grid too large to tabulate");
  return static_cast<std::uint64_t>(count);
}

Matrix to_real_units(const ExactMatrix& z) {
  Matrix out(z.rows(), z.cols());
  for (Eigen::Index i = 0; i < z.size(); ++i) out.data()[i] = static_cast<double>(z.data()[i]);
  return out;
}

/// Exact conversion of an integer-valued double matrix; throws if any entry is
/// not an integer.
ExactMatrix to_exact_units(const Matrix& z) {
  ExactMatrix out(z.rows(), z.cols());
  for (Eigen::Index i = 0; i < z.size(); ++i) {
    const double v = z.data()[i];
    if (v != std::floor(v)) throw IntegrityError("quantized entry is not on the grid");
    out.data()[i] = static_cast<Int>(v);
  }
  return out;
}

/// u^T col * q as a real, for post-firing columns.
long double real_id_units(const Matrix& residual, Eigen::Index col, const ExactVector& u,
                          std::int64_t q) {
  long double acc = 0.0L;
  for (Eigen::Index r = 0; r < residual.rows(); ++r)
    acc += static_cast<long double>(u[r]) * static_cast<long double>(residual(r, col));
  return acc * static_cast<long double>(q);
}

/// Bump of width one unit, centered on zero: fires on [-1/2, 1/2).
bool in_bump(long double arg) { return arg >= -0.5L && arg < 0.5L; }

}  // namespace

GridFunction::GridFunction(std::size_t n, std::size_t d, std::int64_t q, std::vector<Matrix> table)
    : n_(n), d_(d), q_(q), table_(std::move(table)) {
  if (table_.size() != cell_count(n, d, q)) throw ShapeError("GridFunction: table size must be q^{dn}");
  for (const auto& m : table_) {
    if (m.rows() != static_cast<Eigen::Index>(d) || m.cols() != static_cast<Eigen::Index>(n)) {
      throw ShapeError("GridFunction: entries must be d x n");
    }
    require_finite(m, "GridFunction");
  }
}

const Matrix& GridFunction::operator()(const Matrix& x) const {
  if (x.rows() != static_cast<Eigen::Index>(d_) || x.cols() != static_cast<Eigen::Index>(n_)) {
    throw ShapeError("GridFunction: input must be d x n");
  }
  ExactMatrix g(x.rows(), x.cols());
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const double v = x.data()[i];
    if (!(v >= 0.0 && v < 1.0)) throw ParameterError("GridFunction: input outside [0, 1)");
    const double cell = std::floor(v * static_cast<double>(q_));
    g.data()[i] = std::min<Int>(static_cast<Int>(cell), q_ - 1);
  }
  return table_[grid_index_units(g, q_)];
}

GridFunction zero_grid_function(std::size_t n, std::size_t d, std::int64_t q) {
  const auto cells = cell_count(n, d, q);
  return GridFunction(n, d, q,
                      std::vector<Matrix>(cells, Matrix::Zero(static_cast<Eigen::Index>(d),
                                                              static_cast<Eigen::Index>(n))));
}

GridFunction random_grid_function(std::size_t n, std::size_t d, std::int64_t q, std::uint64_t seed) {
  const auto cells = cell_count(n, d, q);
  Rng rng(seed);
  std::vector<Matrix> table(cells);
  for (auto& m : table) {
    m.resize(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(n));
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = rng.uniform();
  }
  return GridFunction(n, d, q, std::move(table));
}

std::vector<ValueLayer> value_map_build(const ConstructionConfig& cfg, const GridFunction& fbar,
                                        const std::vector<ContextResult>& contexts) {
  if (contexts.size() != fbar.table().size()) throw ShapeError("value_map_build: one context per cell");
  const ExactVector u = u_vector(cfg.d, cfg.q);
  std::vector<ValueLayer> layers;
  layers.reserve(contexts.size() * cfg.n);
  for (std::size_t g = 0; g < contexts.size(); ++g) {
    for (std::size_t k = 0; k < cfg.n; ++k) {
      const auto K = static_cast<Eigen::Index>(k);
      layers.push_back({contexts[g].ids[K], fbar.at(g).col(K), contexts[g].output.col(K)});
    }
  }

  std::vector<Int> ids;
  ids.reserve(layers.size());
  for (const auto& layer : layers) ids.push_back(layer.id);
  std::sort(ids.begin(), ids.end());
  if (std::adjacent_find(ids.begin(), ids.end()) != ids.end()) {
    throw IntegrityError("value map: context ids are not distinct");
  }
  // A column that already holds its target must not sit in any other bump.
  for (const auto& layer : layers) {
    const long double v = real_id_units(layer.target, 0, u, cfg.q);
    const long double lo = std::ceil(v - 0.5L);
    auto it = std::lower_bound(ids.begin(), ids.end(), static_cast<Int>(lo));
    if (it != ids.end() && in_bump(v - static_cast<long double>(*it))) {
      throw IntegrityError("value map: an output column collides with context id " + to_string(*it));
    }
  }
  return layers;
}

Matrix value_map_apply(const ExactMatrix& gc_output, const std::vector<ValueLayer>& layers,
                       const ExactVector& u, std::int64_t q) {
  SplitColumns z{gc_output, Matrix::Zero(gc_output.rows(), gc_output.cols())};
  const Eigen::Index n = gc_output.cols();
  std::vector<char> settled(static_cast<std::size_t>(n), 0);
  for (const auto& layer : layers) {
    for (Eigen::Index k = 0; k < n; ++k) {
      bool fire;
      if (!settled[static_cast<std::size_t>(k)]) {
        ExactMatrix col = z.units.col(k);
        fire = column_ids(col, u)[0] == layer.id;
      } else {
        const long double v = real_id_units(z.residual, k, u, q);
        fire = in_bump(v - static_cast<long double>(layer.id));
      }
      if (!fire) continue;
      for (Eigen::Index r = 0; r < z.units.rows(); ++r) z.units(r, k) = checked_add(z.units(r, k), -layer.shift[r]);
      z.residual.col(k) += layer.target;
      settled[static_cast<std::size_t>(k)] = z.units.col(k).isZero() ? 1 : 0;
    }
  }
  Matrix out = z.residual;
  const double delta = 1.0 / static_cast<double>(q);
  for (Eigen::Index i = 0; i < out.size(); ++i) {
    if (z.units.data()[i] != 0) out.data()[i] += static_cast<double>(z.units.data()[i]) * delta;
  }
  return out;
}

Matrix value_map_oracle(const ExactVector& ids, const std::vector<ValueLayer>& layers, std::size_t d) {
  std::map<Int, const ValueLayer*> by_id;
  for (const auto& layer : layers) by_id.emplace(layer.id, &layer);
  Matrix out(static_cast<Eigen::Index>(d), ids.size());
  for (Eigen::Index k = 0; k < ids.size(); ++k) {
    const auto it = by_id.find(ids[k]);
    if (it == by_id.end()) throw IntegrityError("value map oracle: unknown id " + to_string(ids[k]));
    out.col(k) = it->second->target;
  }
  return out;
}

bool ConstructionReport::pass() const { return failures.empty(); }

ConstructionReport verify_construction(const ConstructionConfig& cfg, const std::string& pattern_name,
                                       const VerifyOptions& opt) {
  const std::uint64_t cells = cfg.num_sequences();
  if (cells > opt.enumeration_budget) {
    throw ConfigError("grid has " + std::to_string(cells) + " inputs, above the enumeration budget");
  }
  // The literal value-map stack costs cells * n layers per evaluated input.
  const double work = static_cast<double>(cells) * static_cast<double>(cfg.n) *
                      static_cast<double>(cells) * static_cast<double>(opt.interior_samples + 2);
  if (work > 2e9) throw ConfigError("grid too large for the literal value-map stack");

  ConstructionReport rep;
  rep.n = cfg.n;
  rep.d = cfg.d;
  rep.q = cfg.q;
  rep.pattern_name = pattern_name;
  rep.p = cfg.p();
  rep.s = cfg.s;
  rep.gamma = cfg.gamma;
  rep.link = cfg.link;
  rep.num_sequences = cells;
  rep.num_ids = cells * cfg.n;

  const ExactVector u = u_vector(cfg.d, cfg.q);
  const ExactMatrix e = positional_embedding_units(cfg.n, cfg.d, cfg.gamma, cfg.q);
  const auto gc_layers = build_gc_layers(cfg);
  const auto gq_layers = build_gq_layers(cfg.n, cfg.d, cfg.q);
  const Int big_delta = delta_units(cfg);
  const Int span = checked_pow(cfg.q, cfg.d);  // ids of one column cover span consecutive units
  const Int modulus = all_max_multiplier(cfg);
  rep.shifted_id_bound_units = checked_mul(static_cast<Int>(cfg.n), checked_pow(cfg.q, cfg.n * cfg.d + 1));

  rep.depth.gq = gq_layers.size();
  rep.depth.gc = gc_layers.size();
  rep.depth.gv = static_cast<std::size_t>(cells) * cfg.n;
  rep.depth.gq_expected = cfg.d * cfg.n * static_cast<std::size_t>(cfg.q);
  rep.depth.gc_expected = cfg.p() * (cfg.n - 1) * static_cast<std::size_t>(span) + cfg.s;
  rep.depth.gv_expected = cfg.n * static_cast<std::size_t>(cells);
  if (!rep.depth.match()) rep.failures.push_back("depth counts differ from the expected formulas");

  rep.within_sequence_distinct = true;
  rep.ids_disjoint_after_embedding = true;
  rep.ordering = true;
  rep.mod_check = true;
  std::vector<ContextResult> contexts;
  contexts.reserve(cells);
  std::vector<Int> all_ids;
  all_ids.reserve(rep.num_ids);
  for (std::uint64_t g = 0; g < cells; ++g) {
    const ExactMatrix h = grid_point_units(g, cfg.n, cfg.d, cfg.q) + e;
    const ExactVector h_ids = column_ids(h, u);
    for (std::size_t i = 0; i < cfg.n; ++i) {
      const Int lo = checked_mul(static_cast<Int>(i == 0 ? cfg.n - 1 : i - 1), big_delta);
      const Int id = h_ids[static_cast<Eigen::Index>(cfg.gamma[i])];
      if (id < lo || id >= lo + span) rep.ids_disjoint_after_embedding = false;
    }

    ContextResult ctx = contextual_map(h, cfg, gc_layers);
    const ExactVector tilde = column_ids(ctx.shifted, u);
    std::vector<Int> own(ctx.ids.data(), ctx.ids.data() + ctx.ids.size());
    std::sort(own.begin(), own.end());
    if (std::adjacent_find(own.begin(), own.end()) != own.end()) rep.within_sequence_distinct = false;
    for (std::size_t i = 1; i < cfg.n; ++i) {
      if (!(tilde[static_cast<Eigen::Index>(cfg.gamma[i - 1])] < tilde[static_cast<Eigen::Index>(cfg.gamma[i])])) {
        rep.ordering = false;
      }
    }
    for (Eigen::Index k = 0; k < tilde.size(); ++k) {
      rep.max_shifted_id_units = std::max(rep.max_shifted_id_units, tilde[k]);
      if (ctx.ids[k] % modulus != tilde[k]) rep.mod_check = false;
    }
    all_ids.insert(all_ids.end(), own.begin(), own.end());
    contexts.push_back(std::move(ctx));
  }
  rep.shifted_bound = rep.max_shifted_id_units < rep.shifted_id_bound_units;
  std::sort(all_ids.begin(), all_ids.end());
  rep.distinct = std::adjacent_find(all_ids.begin(), all_ids.end()) == all_ids.end();
  for (std::size_t i = 1; i < all_ids.size(); ++i) {
    const Int gap = all_ids[i] - all_ids[i - 1];
    if (!rep.min_gap_units || gap < *rep.min_gap_units) rep.min_gap_units = gap;
  }
  if (!rep.ids_disjoint_after_embedding) rep.failures.push_back("embedded column ids leave their intervals");
  if (!rep.within_sequence_distinct) rep.failures.push_back("ids repeat within a sequence");
  if (!rep.distinct) rep.failures.push_back("ids repeat across sequences");
  if (!rep.ordering) rep.failures.push_back("shifted ids are not increasing along gamma");
  if (!rep.shifted_bound) rep.failures.push_back("shifted ids exceed n q^{nd+1} units");
  if (!rep.mod_check) rep.failures.push_back("mod identity fails");

  const GridFunction fbar = opt.zero_target ? zero_grid_function(cfg.n, cfg.d, cfg.q)
                                            : random_grid_function(cfg.n, cfg.d, cfg.q, opt.seed);
  std::vector<ValueLayer> value_layers;
  try {
    value_layers = value_map_build(cfg, fbar, contexts);
  } catch (const IntegrityError& err) {
    rep.failures.push_back(err.what());
    return rep;
  }

  rep.gq_exact = true;
  rep.gv_exact = true;
  rep.end_to_end = true;
  Rng rng(opt.seed ^ 0x9e3779b97f4a7c15ULL);
  const Matrix e_real = to_real_units(e);
  for (std::uint64_t g = 0; g < cells; ++g) {
    const ExactMatrix grid = grid_point_units(g, cfg.n, cfg.d, cfg.q);
    const Matrix corner = to_real_units(grid);
    for (std::size_t sample = 0; sample <= opt.interior_samples; ++sample) {
      Matrix tau = corner;
      if (sample > 0) {
        // Offsets on a 2^-30 lattice keep tau + E exact in double.
        for (Eigen::Index i = 0; i < tau.size(); ++i)
          tau.data()[i] += std::floor(rng.uniform() * 0x1.0p30) * 0x1.0p-30;
      }
      const Matrix input = tau + e_real;
      const Matrix quantized = apply_gq(input, gq_layers);
      for (Eigen::Index i = 0; i < input.size(); ++i) {
        if (quantized.data()[i] != quantize_units_oracle(input.data()[i], cfg.n, cfg.q)) rep.gq_exact = false;
      }
      ExactMatrix h;
      try {
        h = to_exact_units(quantized);
      } catch (const IntegrityError&) {
        rep.gq_exact = false;
        rep.end_to_end = false;
        continue;
      }
      if (h - e != grid) rep.gq_exact = false;
      const ContextResult ctx = contextual_map(h, cfg, gc_layers);
      const Matrix out = value_map_apply(ctx.output, value_layers, u, cfg.q);
      Matrix oracle;
      try {
        oracle = value_map_oracle(ctx.ids, value_layers, cfg.d);
      } catch (const IntegrityError&) {
        rep.gv_exact = false;
        rep.end_to_end = false;
        continue;
      }
      if (out != oracle) rep.gv_exact = false;
      if (out != fbar.at(g)) rep.end_to_end = false;
      ++rep.end_to_end_points;
    }
  }
  if (!rep.gq_exact) rep.failures.push_back("quantization layers differ from the oracle");
  if (!rep.gv_exact) rep.failures.push_back("value-map layers differ from the lookup");
  if (!rep.end_to_end) rep.failures.push_back("end-to-end output differs from the target");

  if (opt.soft) {
    const SoftReport soft = verify_soft(cfg, opt.epsilon, opt.p_norm);
    rep.soft_max_deviation = soft.max_first_row_deviation;
    rep.soft_bound = soft.bound;
    rep.soft_pass = soft.pass;
    if (!soft.pass) rep.failures.push_back("soft contextual map exceeds its error budget");
  }
  return rep;
}

}  // namespace sparseua
