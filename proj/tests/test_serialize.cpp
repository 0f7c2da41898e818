// Copyright 2026 The sparseua Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <utility>

#include "generators.hpp"
#include "grad_check.hpp"
#include "sparseua/serialize.hpp"

namespace sparseua {
namespace {

TEST(PatternJson, RoundTripIsOneBased) {
  Rng rng(3);
  for (int trial = 0; trial < 30; ++trial) {
    const std::size_t n = testing::gen_size(rng, 2, 15);
    const auto pat = trial % 2 ? testing::gen_named_pattern(rng, n) : testing::gen_pattern(rng, n, 2, 0.3);
    const Json j = pattern_to_json(pat);
    EXPECT_EQ(pattern_from_json(Json::parse(j.dump())), pat);
  }
  const Json j = pattern_to_json(dense(2));
  EXPECT_EQ(j.dump(), R"({"n":2,"p":1,"sets":[[[1,2],[1,2]]]})");
}

TEST(PatternJson, RejectsMalformed) {
  EXPECT_THROW(pattern_from_json(Json::parse(R"({"n":2,"p":1,"sets":[[[0],[1]]]})")), PatternError);
  EXPECT_THROW(pattern_from_json(Json::parse(R"({"n":2,"p":1,"sets":[[[3],[1]]]})")), PatternError);
  EXPECT_THROW(pattern_from_json(Json::parse(R"({"n":2,"p":2,"sets":[[[1],[1]]]})")), PatternError);
  EXPECT_THROW(pattern_from_json(Json::parse(R"({"n":2,"p":1,"sets":[[[1]]]})")), PatternError);
  EXPECT_THROW(pattern_from_json(Json::parse(R"({"n":2,"p":1,"sets":[[[],[1]]]})")), PatternError);
  EXPECT_THROW(pattern_from_json(Json::parse(R"({"n":"two","p":1,"sets":[]})")), PatternError);
  EXPECT_THROW(pattern_from_json(Json::parse(R"({"p":1})")), PatternError);
}

TEST(ReportJson, GammaIsOneBased) {
  const auto rep = full_report(strided(4, 2));
  const Json j = report_to_json(rep);
  EXPECT_EQ(j.at("gamma"), Json::parse("[1,2,3,4]"));
  EXPECT_EQ(j.at("gamma_status"), "proven");
  EXPECT_EQ(j.at("coverage_s"), 2);
  EXPECT_TRUE(j.at("holds").get<bool>());
}

TEST(ProbmapCsv, RowLayout) {
  Vector in(2), out(2);
  in << 1.0, -0.5;
  out << 0.75, 0.25;
  EXPECT_EQ(probmap_csv_header(), "kind,params,input,output\n");
  EXPECT_EQ(probmap_csv_row(ProbabilityMapSpec::top_k(2), in, out), "topk,k=2,1;-0.5,0.75;0.25\n");
  EXPECT_EQ(probmap_csv_row(ProbabilityMapSpec::softmax(), in, out), "softmax,,1;-0.5,0.75;0.25\n");
}

TEST(Checkpoint, RoundTripIsBitExact) {
  const TrainConfig cfg = testing::grad_check_config();
  const ModelParams p = ModelParams::init(cfg, 8);
  AdamState opt{ModelParams::init(cfg, 9), ModelParams::init(cfg, 10), 17};
  const Json j = Json::parse(checkpoint_to_json(p, opt).dump());
  ModelParams p2;
  AdamState opt2;
  checkpoint_from_json(j, p2, opt2);
  EXPECT_EQ(opt2.step, 17u);
  const auto a = p.tensors();
  const auto b = std::as_const(p2).tensors();
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t t = 0; t < a.size(); ++t) {
    ASSERT_EQ(a[t].second, b[t].second);
    for (Eigen::Index i = 0; i < a[t].second; ++i) ASSERT_EQ(a[t].first[i], b[t].first[i]);
  }
  EXPECT_EQ(opt2.v.out_proj, opt.v.out_proj);
  EXPECT_THROW(checkpoint_from_json(Json::parse(R"({"format":"other"})"), p2, opt2), ParameterError);
  EXPECT_THROW(matrix_from_json(Json::parse(R"({"rows":2,"cols":2,"data":[1,2,3]})")), std::invalid_argument);
}

TEST(Metrics, CsvHeaderAndRows) {
  const std::string csv = metrics_csv({{0, 2.5, 0.25, 0.1}, {10, 0.5, 1.0, 1.0}});
  EXPECT_EQ(csv, "step,loss,masked_accuracy\n0,2.5,0.25\n10,0.5,1\n");
}

TEST(Manifest, VersionedFields) {
  RunManifest m{"construct", Json{{"n", 2}}, 7, {"out/report.json"}, 1};
  const Json j = manifest_to_json(m);
  EXPECT_EQ(j.at("schema"), kManifestSchema);
  EXPECT_EQ(j.at("version"), kToolVersion);
  EXPECT_EQ(j.at("seed"), 7);
  EXPECT_EQ(j.at("exit_code"), 1);
  m.seed.reset();
  EXPECT_TRUE(manifest_to_json(m).at("seed").is_null());
}

}  // namespace
}  // namespace sparseua
