// Copyright 2026 The sparseua Authors
// SPDX-License-Identifier: Apache-2.0

#include "sparseua/serialize.hpp"

#include <fstream>
#include <iomanip>
#include <sstream>

namespace sparseua {
namespace {

/// Numbers that fit in 64 bits stay numbers; larger ones become strings.
Json int_json(Int v) {
  if (v >= std::numeric_limits<std::int64_t>::min() && v <= std::numeric_limits<std::int64_t>::max()) {
    return static_cast<std::int64_t>(v);
  }
  return to_string(v);
}

Json one_based(const std::vector<std::size_t>& v) {
  Json out = Json::array();
  for (std::size_t x : v) out.push_back(x + 1);
  return out;
}

std::string join(const Vector& v) {
  std::ostringstream os;
  os << std::setprecision(17);
  for (Eigen::Index i = 0; i < v.size(); ++i) os << (i ? ";" : "") << v[i];
  return os.str();
}

Json vector_to_json(const Vector& v) {
  Json out = Json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v[i]);
  return out;
}

Vector vector_from_json(const Json& j) {
  Vector v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) v[static_cast<Eigen::Index>(i)] = j[i].get<double>();
  return v;
}

}  // namespace

Json pattern_to_json(const SparsityPattern& pat) {
  Json sets = Json::array();
  for (const auto& family : pat.sets()) {
    Json fam = Json::array();
    for (const auto& s : family) fam.push_back(one_based(s));
    sets.push_back(std::move(fam));
  }
  return Json{{"n", pat.n()}, {"p", pat.p()}, {"sets", std::move(sets)}};
}

SparsityPattern pattern_from_json(const Json& j) {
  try {
    const auto n = j.at("n").get<std::size_t>();
    const auto p = j.at("p").get<std::size_t>();
    const Json& sets = j.at("sets");
    if (!sets.is_array() || sets.size() != p) throw PatternError("pattern JSON: sets must hold p families");
    std::vector<std::vector<IndexSet>> out;
    for (const auto& fam : sets) {
      std::vector<IndexSet> family;
      for (const auto& s : fam) {
        IndexSet set;
        for (const auto& idx : s) {
          const auto i = idx.get<std::int64_t>();
          if (i < 1 || static_cast<std::size_t>(i) > n) throw PatternError("pattern JSON: index out of range");
          set.push_back(static_cast<std::size_t>(i - 1));
        }
        family.push_back(std::move(set));
      }
      out.push_back(std::move(family));
    }
    return SparsityPattern(n, std::move(out));
  } catch (const nlohmann::json::exception& e) {
    throw PatternError(std::string("pattern JSON: ") + e.what());
  }
}

Json report_to_json(const AssumptionReport& rep) {
  Json j;
  j["self_inclusion"] = rep.self_inclusion;
  j["gamma"] = rep.gamma ? one_based(*rep.gamma) : Json(nullptr);
  j["gamma_status"] = to_string(rep.gamma_status);
  j["coverage_s"] = rep.coverage_s ? Json(*rep.coverage_s) : Json(nullptr);
  j["s_cap"] = rep.s_cap;
  j["details"] = rep.details;
  j["holds"] = rep.holds();
  return j;
}

std::string probmap_csv_header() { return "kind,params,input,output\n"; }

std::string probmap_csv_row(const ProbabilityMapSpec& spec, const Vector& input, const Vector& output) {
  std::ostringstream params;
  params << std::setprecision(17);
  switch (spec.kind) {
    case ProbKind::TopKSoftmax: params << "k=" << spec.k; break;
    case ProbKind::SparselinGen: params << "lambda=" << spec.lambda; break;
    case ProbKind::Entmax: params << "alpha=" << spec.alpha; break;
    default: break;
  }
  const std::string name = spec.name();
  return name.substr(0, name.find(':')) + "," + params.str() + "," + join(input) + "," + join(output) + "\n";
}

Json assumption2_to_json(const ProbabilityMapSpec& spec, double zeta, double eta, std::size_t n,
                         const Assumption2Report& rep) {
  return Json{{"kind", spec.name()}, {"zeta", zeta},          {"eta", eta},
              {"n", n},              {"t", rep.t},             {"trials", rep.trials},
              {"failures", rep.failures}, {"worst_slack", rep.worst_slack},
              {"collapsed", rep.collapsed}, {"pass", rep.pass}};
}

Json construction_report_to_json(const ConstructionReport& rep) {
  Json cfg{{"n", rep.n},
           {"d", rep.d},
           {"delta", 1.0 / static_cast<double>(rep.q)},
           {"inverse_delta", rep.q},
           {"pattern", rep.pattern_name},
           {"p", rep.p},
           {"s", rep.s},
           {"gamma", one_based(rep.gamma)},
           {"link", one_based(std::vector<std::size_t>(rep.link.begin() + (rep.link.empty() ? 0 : 1), rep.link.end()))}};
  Json depth{{"gq", rep.depth.gq},
             {"gc", rep.depth.gc},
             {"gv", rep.depth.gv},
             {"gq_expected", rep.depth.gq_expected},
             {"gc_expected", rep.depth.gc_expected},
             {"gv_expected", rep.depth.gv_expected}};
  Json j;
  j["config"] = std::move(cfg);
  j["num_sequences"] = rep.num_sequences;
  j["num_ids"] = rep.num_ids;
  j["distinct"] = rep.distinct;
  j["min_gap_delta_units"] = rep.min_gap_units ? int_json(*rep.min_gap_units) : Json(nullptr);
  j["depth_counts"] = std::move(depth);
  j["mod_check"] = rep.mod_check;
  j["soft_max_deviation"] = rep.soft_max_deviation ? Json(*rep.soft_max_deviation) : Json(nullptr);
  j["soft_bound"] = rep.soft_bound ? Json(*rep.soft_bound) : Json(nullptr);
  j["within_sequence_distinct"] = rep.within_sequence_distinct;
  j["ids_disjoint_after_embedding"] = rep.ids_disjoint_after_embedding;
  j["ordering"] = rep.ordering;
  j["max_shifted_id_units"] = int_json(rep.max_shifted_id_units);
  j["shifted_id_bound_units"] = int_json(rep.shifted_id_bound_units);
  j["gq_exact"] = rep.gq_exact;
  j["gv_exact"] = rep.gv_exact;
  j["end_to_end"] = rep.end_to_end ? "exact" : "mismatch";
  j["end_to_end_points"] = rep.end_to_end_points;
  j["failures"] = rep.failures;
  j["pass"] = rep.pass();
  return j;
}

Json matrix_to_json(const Matrix& m) {
  Json data = Json::array();
  for (Eigen::Index i = 0; i < m.size(); ++i) data.push_back(m.data()[i]);
  return Json{{"rows", m.rows()}, {"cols", m.cols()}, {"data", std::move(data)}};
}

Matrix matrix_from_json(const Json& j) {
  const auto rows = j.at("rows").get<Eigen::Index>();
  const auto cols = j.at("cols").get<Eigen::Index>();
  const Json& data = j.at("data");
  if (rows < 0 || cols < 0 || static_cast<Eigen::Index>(data.size()) != rows * cols) {
    throw ShapeError("matrix JSON: data length does not match shape");
  }
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = data[static_cast<std::size_t>(i)].get<double>();
  require_finite(m, "matrix JSON");
  return m;
}

Json block_to_json(const BlockWeights& w) {
  Json heads = Json::array();
  for (const auto& h : w.heads) {
    heads.push_back(Json{{"wq", matrix_to_json(h.wq)},
                         {"wk", matrix_to_json(h.wk)},
                         {"wv", matrix_to_json(h.wv)},
                         {"bq", vector_to_json(h.bq)},
                         {"bk", vector_to_json(h.bk)},
                         {"bv", vector_to_json(h.bv)}});
  }
  return Json{{"heads", std::move(heads)},     {"wo", matrix_to_json(w.wo)}, {"bo", vector_to_json(w.bo)},
              {"w1", matrix_to_json(w.w1)},     {"b1", vector_to_json(w.b1)}, {"w2", matrix_to_json(w.w2)},
              {"b2", vector_to_json(w.b2)}};
}

BlockWeights block_from_json(const Json& j) {
  BlockWeights w;
  for (const auto& h : j.at("heads")) {
    w.heads.push_back(HeadWeights{matrix_from_json(h.at("wq")), matrix_from_json(h.at("wk")),
                                  matrix_from_json(h.at("wv")), vector_from_json(h.at("bq")),
                                  vector_from_json(h.at("bk")), vector_from_json(h.at("bv"))});
  }
  w.wo = matrix_from_json(j.at("wo"));
  w.bo = vector_from_json(j.at("bo"));
  w.w1 = matrix_from_json(j.at("w1"));
  w.b1 = vector_from_json(j.at("b1"));
  w.w2 = matrix_from_json(j.at("w2"));
  w.b2 = vector_from_json(j.at("b2"));
  if (w.heads.empty()) throw ShapeError("block JSON: no heads");
  w.validate(w.d(), w.h(), w.m(), w.r());
  return w;
}

Json params_to_json(const ModelParams& p) {
  Json blocks = Json::array();
  for (const auto& b : p.blocks) blocks.push_back(block_to_json(b));
  return Json{{"token_embedding", matrix_to_json(p.token_embedding)},
              {"positional", matrix_to_json(p.positional)},
              {"blocks", std::move(blocks)},
              {"out_proj", matrix_to_json(p.out_proj)},
              {"out_bias", vector_to_json(p.out_bias)}};
}

ModelParams params_from_json(const Json& j) {
  ModelParams p;
  p.token_embedding = matrix_from_json(j.at("token_embedding"));
  p.positional = matrix_from_json(j.at("positional"));
  for (const auto& b : j.at("blocks")) p.blocks.push_back(block_from_json(b));
  p.out_proj = matrix_from_json(j.at("out_proj"));
  p.out_bias = vector_from_json(j.at("out_bias"));
  if (p.token_embedding.rows() != p.positional.rows() || p.out_proj.cols() != p.positional.rows() ||
      p.out_bias.size() != p.out_proj.rows()) {
    throw ShapeError("params JSON: inconsistent shapes");
  }
  return p;
}

Json train_config_to_json(const TrainConfig& cfg, const std::string& pattern_spec) {
  return Json{{"n", cfg.n},
              {"vocab", cfg.vocab},
              {"d", cfg.d},
              {"h", cfg.h},
              {"m", cfg.m},
              {"r", cfg.r},
              {"layers", cfg.layers},
              {"pattern", pattern_spec},
              {"head_config", to_string(cfg.head_config)},
              {"scale_scores", cfg.scale_scores},
              {"causal", cfg.causal},
              {"init_std", cfg.init_std},
              {"learning_rate", cfg.learning_rate},
              {"beta1", cfg.beta1},
              {"beta2", cfg.beta2},
              {"adam_eps", cfg.adam_eps},
              {"warmup_steps", cfg.warmup_steps},
              {"cosine_decay", cfg.cosine_decay},
              {"min_lr_ratio", cfg.min_lr_ratio},
              {"grad_clip", cfg.grad_clip},
              {"steps", cfg.steps},
              {"batch", cfg.batch},
              {"seed", cfg.seed},
              {"fixed_batch", cfg.fixed_batch},
              {"eval_every", cfg.eval_every},
              {"eval_size", cfg.eval_size}};
}

Json checkpoint_to_json(const ModelParams& p, const AdamState& opt) {
  return Json{{"format", "sparseua-checkpoint"},
              {"version", kManifestSchema},
              {"params", params_to_json(p)},
              {"adam", Json{{"step", opt.step}, {"m", params_to_json(opt.m)}, {"v", params_to_json(opt.v)}}}};
}

void checkpoint_from_json(const Json& j, ModelParams& p, AdamState& opt) {
  if (j.value("format", "") != "sparseua-checkpoint") throw ParameterError("not a checkpoint file");
  p = params_from_json(j.at("params"));
  const Json& adam = j.at("adam");
  opt.step = adam.at("step").get<std::size_t>();
  opt.m = params_from_json(adam.at("m"));
  opt.v = params_from_json(adam.at("v"));
}

std::string metrics_csv(const std::vector<MetricRow>& rows) {
  std::ostringstream os;
  os << std::setprecision(17);
  os << "step,loss,masked_accuracy\n";
  for (const auto& r : rows) os << r.step << ',' << r.loss << ',' << r.masked_accuracy << '\n';
  return os.str();
}

Json manifest_to_json(const RunManifest& m) {
  return Json{{"schema", kManifestSchema},
              {"tool", "sparseua"},
              {"version", kToolVersion},
              {"subcommand", m.subcommand},
              {"parameters", m.parameters},
              {"seed", m.seed ? Json(*m.seed) : Json(nullptr)},
              {"outputs", m.outputs},
              {"exit_code", m.exit_code}};
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
}

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParameterError("cannot read " + path.string());
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

void write_json(const std::filesystem::path& path, const Json& j) { write_text(path, j.dump(2) + "\n"); }

Json read_json(const std::filesystem::path& path) {
  try {
    return Json::parse(read_text(path));
  } catch (const nlohmann::json::exception& e) {
    throw ParameterError("bad JSON in " + path.string() + ": " + e.what());
  }
}

}  // namespace sparseua
