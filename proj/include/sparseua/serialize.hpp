// Copyright 2026 The sparseua Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "sparseua/attention.hpp"
#include "sparseua/construction.hpp"
#include "sparseua/patterns.hpp"
#include "sparseua/probmaps.hpp"
#include "sparseua/training.hpp"
#include "sparseua/verify.hpp"

namespace sparseua {

using Json = nlohmann::ordered_json;

inline constexpr const char* kToolVersion = "0.1.0";
inline constexpr int kManifestSchema = 1;

/// {n, p, sets}; indices are 1-based in the file.
Json pattern_to_json(const SparsityPattern& pat);
/// Throws PatternError on malformed input.
SparsityPattern pattern_from_json(const Json& j);

/// AssumptionReport fields; gamma is 1-based.
Json report_to_json(const AssumptionReport& rep);

/// One CSV row: kind, params, input, output (vectors joined by ';').
std::string probmap_csv_header();
std::string probmap_csv_row(const ProbabilityMapSpec& spec, const Vector& input, const Vector& output);

Json assumption2_to_json(const ProbabilityMapSpec& spec, double zeta, double eta, std::size_t n,
                         const Assumption2Report& rep);

Json construction_report_to_json(const ConstructionReport& rep);

/// Shape-tagged matrices: {"rows", "cols", "data"} row-major.
Json matrix_to_json(const Matrix& m);
Matrix matrix_from_json(const Json& j);
Json block_to_json(const BlockWeights& w);
BlockWeights block_from_json(const Json& j);
Json params_to_json(const ModelParams& p);
ModelParams params_from_json(const Json& j);
Json train_config_to_json(const TrainConfig& cfg, const std::string& pattern_spec);

/// Weights plus Adam moments and step count.
Json checkpoint_to_json(const ModelParams& p, const AdamState& opt);
void checkpoint_from_json(const Json& j, ModelParams& p, AdamState& opt);

std::string metrics_csv(const std::vector<MetricRow>& rows);

/// Subcommand, parameters, seed, version, outputs.
struct RunManifest {
  std::string subcommand;
  Json parameters = Json::object();
  std::optional<std::uint64_t> seed;
  std::vector<std::string> outputs;
  int exit_code = 0;
};
Json manifest_to_json(const RunManifest& m);

void write_text(const std::filesystem::path& path, const std::string& text);
std::string read_text(const std::filesystem::path& path);
void write_json(const std::filesystem::path& path, const Json& j);
Json read_json(const std::filesystem::path& path);

}  // namespace sparseua
