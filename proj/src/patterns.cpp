// Copyright 2026 The sparseua Authors
// SPDX-License-Identifier: Apache-2.0

#include "sparseua/patterns.hpp"

#include <algorithm>
#include <set>

#include "sparseua/numerics.hpp"

namespace sparseua {
namespace {

IndexSet normalized(IndexSet s) {
  std::sort(s.begin(), s.end());
  s.erase(std::unique(s.begin(), s.end()), s.end());
  return s;
}

void require(bool ok, const std::string& msg) {
  if (!ok) throw ParameterError(msg);
}

}  // namespace

SparsityPattern::SparsityPattern(std::size_t n, std::vector<std::vector<IndexSet>> sets)
    : n_(n), sets_(std::move(sets)) {
  if (n_ == 0) throw PatternError("pattern: n must be positive");
  if (sets_.empty()) throw PatternError("pattern: p must be at least 1");
  for (auto& family : sets_) {
    if (family.size() != n_) throw PatternError("pattern: each family needs n index sets");
    for (auto& s : family) {
      s = normalized(std::move(s));
      if (s.empty()) throw PatternError("pattern: empty index set");
      if (s.back() >= n_) throw PatternError("pattern: index out of range");
    }
  }
}

SparsityPattern SparsityPattern::layer(std::size_t l) const {
  if (l >= p()) throw ParameterError("pattern: layer index out of range");
  return SparsityPattern(n_, {sets_[l]});
}

HeadConfig parse_head_config(const std::string& name) {
  if (name == "sequential") return HeadConfig::Sequential;
  if (name == "union") return HeadConfig::Union;
  if (name == "multihead") return HeadConfig::Multihead;
  throw ParameterError("unknown head config '" + name + "'");
}

std::string to_string(HeadConfig cfg) {
  switch (cfg) {
    case HeadConfig::Sequential: return "sequential";
    case HeadConfig::Union: return "union";
    case HeadConfig::Multihead: return "multihead";
  }
  return "sequential";
}

// The generators below evaluate the 1-based formulas with k1 = k + 1 and store
// index i1 as i1 - 1.

SparsityPattern strided(std::size_t n, std::size_t w) {
  require(n >= 1 && w >= 1, "strided: need n >= 1 and w >= 1");
  const long nn = static_cast<long>(n);
  const long left = static_cast<long>((w + 1) / 2);
  const long right = static_cast<long>(w / 2);
  const long stride = static_cast<long>(w);
  std::vector<IndexSet> local(n), strides(n);
  for (long k1 = 1; k1 <= nn; ++k1) {
    for (long i1 = std::max(1L, k1 - left); i1 <= std::min(nn, k1 + right); ++i1) {
      local[k1 - 1].push_back(static_cast<std::size_t>(i1 - 1));
    }
    for (long i1 = (k1 - 1) % stride + 1; i1 <= nn; i1 += stride) {
      strides[k1 - 1].push_back(static_cast<std::size_t>(i1 - 1));
    }
  }
  return SparsityPattern(n, {std::move(local), std::move(strides)});
}

SparsityPattern fixed(std::size_t n, std::size_t w) {
  require(n >= 1 && w >= 1, "fixed: need n >= 1 and w >= 1");
  std::vector<IndexSet> segment(n), summary(n);
  for (std::size_t k1 = 1; k1 <= n; ++k1) {
    const std::size_t end = ((k1 + w - 1) / w) * w;
    for (std::size_t i1 = end - w + 1; i1 <= std::min(n, end); ++i1) segment[k1 - 1].push_back(i1 - 1);
    summary[k1 - 1].push_back(k1 - 1);
    for (std::size_t i1 = w; i1 <= n; i1 += w) summary[k1 - 1].push_back(i1 - 1);
  }
  return SparsityPattern(n, {std::move(segment), std::move(summary)});
}

SparsityPattern star(std::size_t n, std::size_t w) {
  require(n >= 2 && w >= 1, "star: need n >= 2 and w >= 1");
  const long ring = static_cast<long>(n) - 1;
  std::vector<IndexSet> sets(n);
  for (long k1 = 1; k1 <= ring; ++k1) {
    IndexSet& s = sets[k1 - 1];
    s.push_back(n - 1);
    for (long i = k1 - static_cast<long>(w); i <= k1 + static_cast<long>(w); ++i) {
      const long wrapped = (((i - 1) % ring) + ring) % ring + 1;
      s.push_back(static_cast<std::size_t>(wrapped - 1));
    }
  }
  for (std::size_t j = 0; j < n; ++j) sets[n - 1].push_back(j);
  return SparsityPattern(n, {std::move(sets)});
}

SparsityPattern random_pattern(std::size_t n, double target_sparsity, std::uint64_t seed,
                               bool include_self) {
  require(n >= 1, "random: need n >= 1");
  require(target_sparsity >= 0.0 && target_sparsity < 1.0,
          "random: target_sparsity must lie in [0, 1)");
  const double density = 1.0 - target_sparsity;
  Rng rng(seed);
  std::vector<IndexSet> sets(n);
  for (std::size_t k = 0; k < n; ++k) {
    for (std::size_t j = 0; j < n; ++j) {
      const bool drawn = rng.uniform() < density;
      if (drawn || (include_self && j == k)) sets[k].push_back(j);
    }
    // Rows must be nonempty; without the diagonal, fall back to one random key.
    if (sets[k].empty()) sets[k].push_back(static_cast<std::size_t>(rng.below(n)));
  }
  return SparsityPattern(n, {std::move(sets)});
}

SparsityPattern window_global(std::size_t n, std::size_t w, std::size_t g) {
  require(n >= 1, "window_global: need n >= 1");
  require(g <= n, "window_global: g must not exceed n");
  std::vector<IndexSet> sets(n);
  for (std::size_t k = 0; k < n; ++k) {
    IndexSet& s = sets[k];
    if (k < g) {
      for (std::size_t j = 0; j < n; ++j) s.push_back(j);
      continue;
    }
    const std::size_t lo = k >= w ? k - w : 0;
    for (std::size_t j = lo; j <= std::min(n - 1, k + w); ++j) s.push_back(j);
    for (std::size_t j = 0; j < g; ++j) s.push_back(j);
  }
  return SparsityPattern(n, {std::move(sets)});
}

SparsityPattern dense(std::size_t n) {
  require(n >= 1, "dense: need n >= 1");
  IndexSet all(n);
  for (std::size_t j = 0; j < n; ++j) all[j] = j;
  return SparsityPattern(n, {std::vector<IndexSet>(n, all)});
}

HeadLayout apply_head_config(const SparsityPattern& pat, HeadConfig cfg) {
  HeadLayout out;
  out.config = cfg;
  switch (cfg) {
    case HeadConfig::Sequential:
      out.groups.push_back(pat);
      break;
    case HeadConfig::Union: {
      if (pat.p() != 2) throw ParameterError("union head config needs p = 2");
      std::vector<IndexSet> merged(pat.n());
      for (std::size_t k = 0; k < pat.n(); ++k) {
        std::set_union(pat.at(0, k).begin(), pat.at(0, k).end(), pat.at(1, k).begin(),
                       pat.at(1, k).end(), std::back_inserter(merged[k]));
      }
      out.groups.emplace_back(pat.n(), std::vector<std::vector<IndexSet>>{std::move(merged)});
      break;
    }
    case HeadConfig::Multihead:
      if (pat.p() != 2) throw ParameterError("multihead head config needs p = 2");
      out.groups.push_back(pat.layer(0));
      out.groups.push_back(pat.layer(1));
      break;
  }
  return out;
}

namespace {

std::size_t family_connections(const std::vector<IndexSet>& family) {
  std::size_t total = 0;
  for (const auto& s : family) total += s.size();
  return total;
}

}  // namespace

double sparsity_level(const SparsityPattern& pat) {
  const double n2 = static_cast<double>(pat.n()) * static_cast<double>(pat.n());
  double density = 0.0;
  for (const auto& family : pat.sets()) density += static_cast<double>(family_connections(family)) / n2;
  return 1.0 - density / static_cast<double>(pat.p());
}

double sparsity_level(const HeadLayout& layout) {
  double sum = 0.0;
  std::size_t count = 0;
  for (const auto& g : layout.groups) {
    sum += (1.0 - sparsity_level(g)) * static_cast<double>(g.p());
    count += g.p();
  }
  return 1.0 - sum / static_cast<double>(count);
}

std::size_t connection_count(const SparsityPattern& pat) {
  std::size_t best = 0;
  for (const auto& family : pat.sets()) best = std::max(best, family_connections(family));
  return best;
}

std::size_t connection_count(const HeadLayout& layout) {
  std::size_t best = 0;
  for (const auto& g : layout.groups) best = std::max(best, connection_count(g));
  return best;
}

SparsityPattern make_pattern(const PatternSpec& spec) {
  if (spec.kind == "strided") return strided(spec.n, spec.w);
  if (spec.kind == "fixed") return fixed(spec.n, spec.w);
  if (spec.kind == "star") return star(spec.n, spec.w);
  if (spec.kind == "window_global") return window_global(spec.n, spec.w, spec.g);
  if (spec.kind == "dense") return dense(spec.n);
  if (spec.kind == "random") return random_pattern(spec.n, spec.sparsity, spec.seed, spec.include_self);
  throw ParameterError("unknown pattern kind '" + spec.kind + "'");
}

PatternSpec parse_pattern_spec(const std::string& text, std::size_t n) {
  std::vector<std::string> parts;
  std::size_t start = 0;
  while (true) {
    const auto colon = text.find(':', start);
    parts.push_back(text.substr(start, colon - start));
    if (colon == std::string::npos) break;
    start = colon + 1;
  }
  auto count = [&](std::size_t i) -> std::size_t {
    if (i >= parts.size()) throw ParameterError("pattern spec '" + text + "' is missing a field");
    const std::string& f = parts[i];
    if (f.empty() || f.find_first_not_of("0123456789") != std::string::npos) {
      throw ParameterError("pattern spec '" + text + "': '" + f + "' is not a count");
    }
    return static_cast<std::size_t>(std::stoull(f));
  };
  PatternSpec spec;
  spec.kind = parts[0];
  spec.n = n;
  std::size_t expected = 1;
  if (spec.kind == "strided" || spec.kind == "fixed" || spec.kind == "star") {
    spec.w = count(1);
    expected = 2;
  } else if (spec.kind == "window_global") {
    spec.w = count(1);
    spec.g = count(2);
    expected = 3;
  } else if (spec.kind == "random") {
    if (parts.size() < 2) throw ParameterError("pattern spec '" + text + "' is missing a field");
    try {
      spec.sparsity = std::stod(parts[1]);
    } catch (const std::exception&) {
      throw ParameterError("pattern spec '" + text + "': bad sparsity");
    }
    spec.seed = count(2);
    expected = 3;
  } else if (spec.kind != "dense") {
    throw ParameterError("unknown pattern kind '" + spec.kind + "'");
  }
  if (parts.size() != expected) throw ParameterError("pattern spec '" + text + "' has extra fields");
  return spec;
}

}  // namespace sparseua
