// Copyright 2026 The sparseua Authors
// SPDX-License-Identifier: Apache-2.0

// Batch entry point. Every run writes its outputs and a manifest.json into
// --out. Exit codes: 0 success, 1 verification failure, 2 invalid input.

#include <CLI11.hpp>

#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include "sparseua/attention.hpp"
#include "sparseua/construction.hpp"
#include "sparseua/patterns.hpp"
#include "sparseua/probmaps.hpp"
#include "sparseua/serialize.hpp"
#include "sparseua/training.hpp"
#include "sparseua/verify.hpp"

namespace fs = std::filesystem;
using namespace sparseua;

namespace {

constexpr int kOk = 0;
constexpr int kFailed = 1;
constexpr int kInvalid = 2;

struct InvalidInput : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

std::string join_fields(const std::vector<std::string>& fields) {
  std::string out;
  for (std::size_t i = 0; i < fields.size(); ++i) out += (i ? "," : "") + fields[i];
  return out + "\n";
}

template <typename T>
std::string str(const T& v) {
  std::ostringstream os;
  os << std::setprecision(17) << v;
  return os.str();
}

std::uint64_t require_seed(const std::optional<std::uint64_t>& seed, const std::string& what) {
  if (!seed) throw InvalidInput(what + " needs --seed");
  return *seed;
}

void finish(const fs::path& out, RunManifest& manifest, int code) {
  manifest.exit_code = code;
  manifest.outputs.push_back((out / "manifest.json").string());
  write_json(out / "manifest.json", manifest_to_json(manifest));
}

// ---- pattern -------------------------------------------------------------

struct PatternArgs {
  std::string kind = "dense";
  std::size_t n = 0, w = 1, g = 0;
  double sparsity = 0.0;
  std::optional<std::uint64_t> seed;
  bool no_self = false;
  std::string config = "sequential";
  std::string out = ".";
};

int cmd_pattern(const PatternArgs& a) {
  PatternSpec spec{a.kind, a.n, a.w, a.g, a.sparsity, 0, !a.no_self};
  if (a.kind == "random") spec.seed = require_seed(a.seed, "random pattern");
  const SparsityPattern pat = make_pattern(spec);
  const HeadConfig cfg = parse_head_config(a.config);
  const HeadLayout layout = apply_head_config(pat, cfg);

  const fs::path out(a.out);
  write_json(out / "pattern.json", pattern_to_json(pat));
  const std::size_t count = connection_count(layout);
  const std::string stats =
      join_fields({"kind", "n", "w", "g", "config", "p", "sparsity", "connection_count", "connections_per_token"}) +
      join_fields({a.kind, str(a.n), str(a.w), str(a.g), a.config, str(pat.p()), str(sparsity_level(layout)),
                   str(count), str(static_cast<double>(count) / static_cast<double>(a.n))});
  write_text(out / "stats.csv", stats);
  std::cout << stats;

  RunManifest m{"pattern",
                Json{{"kind", a.kind}, {"n", a.n}, {"w", a.w}, {"g", a.g}, {"sparsity", a.sparsity},
                     {"include_self", !a.no_self}, {"config", a.config}},
                a.seed,
                {(out / "pattern.json").string(), (out / "stats.csv").string()}};
  finish(out, m, kOk);
  return kOk;
}

// ---- verify --------------------------------------------------------------

struct VerifyArgs {
  std::string pattern;
  std::optional<std::size_t> cap;
  std::size_t budget = 1'000'000;
  std::string out = ".";
};

int cmd_verify(const VerifyArgs& a) {
  const SparsityPattern pat = pattern_from_json(read_json(a.pattern));
  const std::size_t cap = a.cap.value_or(default_s_cap(pat));
  if (cap == 0) throw InvalidInput("--cap must be positive");
  const AssumptionReport rep = full_report(pat, cap, a.budget);
  const fs::path out(a.out);
  write_json(out / "report.json", report_to_json(rep));
  std::cout << report_to_json(rep).dump(2) << "\n";

  int code = kOk;
  if (!rep.self_inclusion || rep.gamma_status == GammaStatus::Refuted || !rep.coverage_s) code = kFailed;
  if (code == kOk && rep.gamma_status == GammaStatus::Unknown) {
    std::cerr << "warning: no chain found within the search budget; gamma status unknown\n";
  }
  RunManifest m{"verify", Json{{"pattern", a.pattern}, {"cap", cap}, {"budget", a.budget}}, std::nullopt,
                {(out / "report.json").string()}};
  finish(out, m, code);
  return code;
}

// ---- probmap -------------------------------------------------------------

struct ProbmapArgs {
  std::string map = "softmax";
  std::string input;
  std::size_t columns = 0, length = 0;
  std::optional<std::uint64_t> seed;
  double scale = 3.0;
  std::string out = ".";
};

Vector parse_vector(const std::string& text) {
  std::vector<double> vals;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      vals.push_back(std::stod(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw InvalidInput("bad number '" + item + "' in --input");
    }
  }
  if (vals.empty()) throw InvalidInput("--input is empty");
  return Eigen::Map<Vector>(vals.data(), static_cast<Eigen::Index>(vals.size()));
}

int cmd_probmap(const ProbmapArgs& a) {
  const ProbabilityMapSpec spec = parse_probmap(a.map);
  std::vector<Vector> inputs;
  if (!a.input.empty()) {
    inputs.push_back(parse_vector(a.input));
  } else {
    if (a.columns == 0 || a.length == 0) throw InvalidInput("give --input or --columns and --length");
    Rng rng(require_seed(a.seed, "random probmap input"));
    for (std::size_t c = 0; c < a.columns; ++c) {
      Vector v(static_cast<Eigen::Index>(a.length));
      for (Eigen::Index i = 0; i < v.size(); ++i) v[i] = rng.uniform(-a.scale, a.scale);
      inputs.push_back(std::move(v));
    }
  }
  std::string csv = probmap_csv_header();
  for (const auto& v : inputs) csv += probmap_csv_row(spec, v, apply_column(spec, v));
  const fs::path out(a.out);
  write_text(out / "probmap.csv", csv);
  if (inputs.size() <= 8) std::cout << csv;
  RunManifest m{"probmap",
                Json{{"map", a.map}, {"input", a.input}, {"columns", a.columns}, {"length", a.length}, {"scale", a.scale}},
                a.seed,
                {(out / "probmap.csv").string()}};
  finish(out, m, kOk);
  return kOk;
}

struct ProbmapCheckArgs {
  std::string map = "softmax";
  double zeta = 0.5, eta = 0.01;
  std::size_t n = 8, trials = 10000;
  std::optional<std::uint64_t> seed;
  std::string out = ".";
};

int cmd_probmap_check(const ProbmapCheckArgs& a) {
  const ProbabilityMapSpec spec = parse_probmap(a.map);
  const auto rep = check_assumption2(spec, a.zeta, a.eta, a.n, a.trials, require_seed(a.seed, "probmap-check"));
  const Json j = assumption2_to_json(spec, a.zeta, a.eta, a.n, rep);
  const fs::path out(a.out);
  write_json(out / "check.json", j);
  std::cout << j.dump(2) << "\n";
  const int code = rep.pass ? kOk : kFailed;
  RunManifest m{"probmap-check",
                Json{{"map", a.map}, {"zeta", a.zeta}, {"eta", a.eta}, {"n", a.n}, {"trials", a.trials}},
                a.seed,
                {(out / "check.json").string()}};
  finish(out, m, code);
  return code;
}

// ---- construct -----------------------------------------------------------

struct ConstructArgs {
  std::size_t n = 2, d = 1;
  double delta = 0.5;
  std::string pattern = "dense";
  std::string mode = "exact";
  std::string target = "random";
  std::optional<std::uint64_t> seed;
  std::size_t samples = 10;
  double epsilon = 1.0, p_norm = 2.0;
  std::uint64_t budget = 1'000'000;
  std::string out = ".";
};

int cmd_construct(const ConstructArgs& a) {
  if (a.mode != "exact" && a.mode != "soft") throw InvalidInput("--mode must be exact or soft");
  if (a.target != "random" && a.target != "zero") throw InvalidInput("--target must be random or zero");
  const std::int64_t q = grid_inverse(a.delta);
  const SparsityPattern pat = a.pattern.rfind("file:", 0) == 0
                                  ? pattern_from_json(read_json(a.pattern.substr(5)))
                                  : make_pattern(parse_pattern_spec(a.pattern, a.n));
  const ConstructionConfig cfg = make_construction_config(a.n, a.d, q, pat);
  VerifyOptions opt;
  opt.enumeration_budget = a.budget;
  opt.interior_samples = a.samples;
  opt.seed = require_seed(a.seed, "construct");
  opt.zero_target = a.target == "zero";
  opt.soft = a.mode == "soft";
  opt.epsilon = a.epsilon;
  opt.p_norm = a.p_norm;
  const ConstructionReport rep = verify_construction(cfg, a.pattern, opt);
  const Json j = construction_report_to_json(rep);
  const fs::path out(a.out);
  write_json(out / "report.json", j);
  std::cout << j.dump(2) << "\n";
  const int code = rep.pass() ? kOk : kFailed;
  RunManifest m{"construct",
                Json{{"n", a.n}, {"d", a.d}, {"delta", a.delta}, {"pattern", a.pattern}, {"mode", a.mode},
                     {"target", a.target}, {"samples", a.samples}, {"epsilon", a.epsilon},
                     {"p_norm", a.p_norm}, {"budget", a.budget}},
                a.seed,
                {(out / "report.json").string()}};
  finish(out, m, code);
  return code;
}

// ---- train ---------------------------------------------------------------

struct TrainArgs {
  std::string config;
  std::string out = ".";
};

template <typename T>
void take(const Json& j, const char* key, T& field) {
  if (j.contains(key)) field = j.at(key).get<T>();
}

int cmd_train(const TrainArgs& a) {
  const Json j = read_json(a.config);
  TrainConfig cfg;
  std::string pattern_spec = "dense";
  try {
    take(j, "n", cfg.n);
    take(j, "vocab", cfg.vocab);
    take(j, "d", cfg.d);
    take(j, "h", cfg.h);
    take(j, "m", cfg.m);
    take(j, "r", cfg.r);
    take(j, "layers", cfg.layers);
    take(j, "pattern", pattern_spec);
    std::string head = "sequential";
    take(j, "head_config", head);
    cfg.head_config = parse_head_config(head);
    take(j, "scale_scores", cfg.scale_scores);
    take(j, "causal", cfg.causal);
    take(j, "init_std", cfg.init_std);
    take(j, "learning_rate", cfg.learning_rate);
    take(j, "beta1", cfg.beta1);
    take(j, "beta2", cfg.beta2);
    take(j, "adam_eps", cfg.adam_eps);
    take(j, "warmup_steps", cfg.warmup_steps);
    take(j, "cosine_decay", cfg.cosine_decay);
    take(j, "min_lr_ratio", cfg.min_lr_ratio);
    take(j, "grad_clip", cfg.grad_clip);
    take(j, "steps", cfg.steps);
    take(j, "batch", cfg.batch);
    if (!j.contains("seed")) throw InvalidInput("train config needs a seed");
    take(j, "seed", cfg.seed);
    take(j, "fixed_batch", cfg.fixed_batch);
    take(j, "eval_every", cfg.eval_every);
    take(j, "eval_size", cfg.eval_size);
  } catch (const nlohmann::json::exception& e) {
    throw InvalidInput(std::string("train config: ") + e.what());
  }
  cfg.pattern = make_pattern(parse_pattern_spec(pattern_spec, cfg.n));
  cfg.validate();

  const fs::path out(a.out);
  const TrainResult res = train(cfg, [](const MetricRow& row) {
    std::cerr << "step " << row.step << " loss " << row.loss << " masked_acc " << row.masked_accuracy << "\n";
  });
  write_text(out / "metrics.csv", metrics_csv(res.trace));
  write_json(out / "checkpoint.json", checkpoint_to_json(res.params, res.optimizer));
  const Json summary{{"masked_accuracy", res.final_accuracy.masked},
                     {"all_token_accuracy", res.final_accuracy.all_tokens},
                     {"steps", cfg.steps},
                     {"final_loss", res.trace.back().loss}};
  write_json(out / "summary.json", summary);
  std::cout << summary.dump(2) << "\n";
  RunManifest m{"train", train_config_to_json(cfg, pattern_spec), cfg.seed,
                {(out / "metrics.csv").string(), (out / "checkpoint.json").string(), (out / "summary.json").string()}};
  finish(out, m, kOk);
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"sparse Transformer laboratory"};
  app.require_subcommand(1);

  PatternArgs pa;
  auto* pattern = app.add_subcommand("pattern", "generate a sparsity pattern and its statistics");
  pattern->add_option("--kind", pa.kind, "strided|fixed|star|window_global|dense|random")->required();
  pattern->add_option("--n", pa.n, "sequence length")->required();
  pattern->add_option("--w", pa.w, "window / stride");
  pattern->add_option("--g", pa.g, "global tokens (window_global)");
  pattern->add_option("--sparsity", pa.sparsity, "target sparsity (random)");
  pattern->add_option("--seed", pa.seed, "seed (random)");
  pattern->add_flag("--no-self", pa.no_self, "do not force the diagonal (random)");
  pattern->add_option("--config", pa.config, "sequential|union|multihead");
  pattern->add_option("--out", pa.out, "output directory");

  VerifyArgs va;
  auto* verify = app.add_subcommand("verify", "check self-inclusion, chain and coverage of a pattern file");
  verify->add_option("--pattern", va.pattern, "pattern JSON")->required();
  verify->add_option("--cap", va.cap, "largest hop count tried (default 2n)");
  verify->add_option("--budget", va.budget, "DFS expansion budget");
  verify->add_option("--out", va.out, "output directory");

  ProbmapArgs pma;
  auto* probmap = app.add_subcommand("probmap", "evaluate a probability map");
  probmap->add_option("--map", pma.map, "softmax|hardmax|topk:K|sparselin:L|entmax:A");
  probmap->add_option("--input", pma.input, "comma-separated column");
  probmap->add_option("--columns", pma.columns, "random columns");
  probmap->add_option("--length", pma.length, "random column length");
  probmap->add_option("--scale", pma.scale, "random entries uniform on [-scale, scale]");
  probmap->add_option("--seed", pma.seed, "seed for random columns");
  probmap->add_option("--out", pma.out, "output directory");

  ProbmapCheckArgs pca;
  auto* check = app.add_subcommand("probmap-check", "randomized check of the scaling factor t");
  check->add_option("--map", pca.map, "probability map");
  check->add_option("--zeta", pca.zeta, "margin");
  check->add_option("--eta", pca.eta, "leakage");
  check->add_option("--n", pca.n, "column length");
  check->add_option("--trials", pca.trials, "trials");
  check->add_option("--seed", pca.seed, "seed");
  check->add_option("--out", pca.out, "output directory");

  ConstructArgs ca;
  auto* construct = app.add_subcommand("construct", "exhaustively verify the approximation construction");
  construct->add_option("--n", ca.n, "tokens");
  construct->add_option("--d", ca.d, "embedding dimension");
  construct->add_option("--delta", ca.delta, "grid step, 1/delta integer");
  construct->add_option("--pattern", ca.pattern, "pattern spec or file:PATH");
  construct->add_option("--mode", ca.mode, "exact|soft");
  construct->add_option("--target", ca.target, "random|zero");
  construct->add_option("--seed", ca.seed, "seed");
  construct->add_option("--samples", ca.samples, "interior samples per cell");
  construct->add_option("--epsilon", ca.epsilon, "target accuracy for the soft budget");
  construct->add_option("--p-norm", ca.p_norm, "norm exponent for the soft budget");
  construct->add_option("--budget", ca.budget, "enumeration budget");
  construct->add_option("--out", ca.out, "output directory");

  TrainArgs ta;
  auto* trainc = app.add_subcommand("train", "train the copying-task model");
  trainc->add_option("--config", ta.config, "JSON config")->required();
  trainc->add_option("--out", ta.out, "output directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kInvalid;
  }

  try {
    if (*pattern) return cmd_pattern(pa);
    if (*verify) return cmd_verify(va);
    if (*probmap) return cmd_probmap(pma);
    if (*check) return cmd_probmap_check(pca);
    if (*construct) return cmd_construct(ca);
    if (*trainc) return cmd_train(ta);
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kInvalid;
  } catch (const OverflowError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kInvalid;
  } catch (const IntegrityError& e) {
    std::cerr << "verification failed: " << e.what() << "\n";
    return kFailed;
  } catch (const TrainingError& e) {
    std::cerr << "training failed: " << e.what() << "\n";
    return kFailed;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kFailed;
  }
  return kInvalid;
}
