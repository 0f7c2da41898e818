// Copyright 2026 The sparseua Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>
#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <string>

#include "sparseua/serialize.hpp"

namespace fs = std::filesystem;

namespace sparseua {
namespace {

class Cli : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() / ("sparseua_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  int run(const std::string& args) const {
    const std::string cmd = std::string(SPARSEUA_CLI) + " " + args + " > " + (dir_ / "stdout.txt").string() +
                            " 2> " + (dir_ / "stderr.txt").string();
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  }
  std::string out(const std::string& sub) const { return (dir_ / sub).string(); }

  fs::path dir_;
};

TEST_F(Cli, PatternWritesOutputsAndManifest) {
  EXPECT_EQ(run("pattern --kind strided --n 16 --w 4 --config union --out " + out("a")), 0);
  EXPECT_TRUE(fs::exists(out("a/pattern.json")));
  EXPECT_TRUE(fs::exists(out("a/stats.csv")));
  const Json m = read_json(out("a/manifest.json"));
  EXPECT_EQ(m.at("subcommand"), "pattern");
  EXPECT_EQ(m.at("schema"), kManifestSchema);
  EXPECT_EQ(m.at("exit_code"), 0);
  EXPECT_EQ(pattern_from_json(read_json(out("a/pattern.json"))), strided(16, 4));
  EXPECT_EQ(read_text(out("a/stats.csv")).rfind("kind,n,w,g,config,p,sparsity,connection_count", 0), 0u);
}

TEST_F(Cli, RandomPatternNeedsSeed) {
  EXPECT_EQ(run("pattern --kind random --n 16 --sparsity 0.5 --out " + out("a")), 2);
  EXPECT_EQ(run("pattern --kind random --n 16 --sparsity 0.5 --seed 3 --out " + out("a")), 0);
  EXPECT_EQ(run("pattern --kind moon --n 16 --out " + out("a")), 2);
  EXPECT_EQ(run("pattern --n 16"), 2);
  EXPECT_EQ(run("launch"), 2);
}

TEST_F(Cli, VerifyExitCodes) {
  ASSERT_EQ(run("pattern --kind star --n 12 --w 2 --out " + out("a")), 0);
  EXPECT_EQ(run("verify --pattern " + out("a/pattern.json") + " --out " + out("b")), 0);
  EXPECT_TRUE(read_json(out("b/report.json")).at("holds").get<bool>());
  write_text(out("bad.json"), R"({"n":3,"p":1,"sets":[[[2],[1],[3]]]})");
  EXPECT_EQ(run("verify --pattern " + out("bad.json") + " --out " + out("c")), 1);
  EXPECT_EQ(read_json(out("c/manifest.json")).at("exit_code"), 1);
  write_text(out("broken.json"), R"({"n":3,"p":1,"sets":[[[0],[1],[3]]]})");
  EXPECT_EQ(run("verify --pattern " + out("broken.json") + " --out " + out("d")), 2);
  write_text(out("garbage.json"), "{not json");
  EXPECT_EQ(run("verify --pattern " + out("garbage.json") + " --out " + out("d")), 2);
}

TEST_F(Cli, Probmap) {
  EXPECT_EQ(run("probmap --map topk:2 --input 1,2,3 --out " + out("a")), 0);
  const std::string csv = read_text(out("a/probmap.csv"));
  EXPECT_EQ(csv.rfind("kind,params,input,output\ntopk,k=2,1;2;3,0;", 0), 0u);
  EXPECT_EQ(run("probmap --map entmax:1.5 --columns 5 --length 4 --out " + out("b")), 2);
  EXPECT_EQ(run("probmap --map entmax:1.5 --columns 5 --length 4 --seed 1 --out " + out("b")), 0);
  EXPECT_EQ(run("probmap --map argmax --input 1 --out " + out("c")), 2);
  EXPECT_EQ(run("probmap --map softmax --input 1,x --out " + out("c")), 2);
}

TEST_F(Cli, ProbmapCheck) {
  EXPECT_EQ(run("probmap-check --map softmax --zeta 0.5 --eta 0.01 --n 8 --trials 2000 --seed 1 --out " + out("a")), 0);
  EXPECT_TRUE(read_json(out("a/check.json")).at("pass").get<bool>());
  EXPECT_EQ(run("probmap-check --map softmax --zeta 0.5 --eta 0.01 --n 8 --trials 100 --out " + out("b")), 2);
  EXPECT_EQ(run("probmap-check --map softmax --zeta 0 --eta 0.01 --n 8 --trials 100 --seed 1 --out " + out("b")), 2);
}

TEST_F(Cli, ConstructExitCodesAndDeterminism) {
  EXPECT_EQ(run("construct --n 2 --d 1 --delta 0.5 --pattern dense --seed 5 --out " + out("a")), 0);
  EXPECT_EQ(run("construct --n 2 --d 1 --delta 0.5 --pattern dense --seed 5 --out " + out("b")), 0);
  EXPECT_EQ(read_text(out("a/report.json")), read_text(out("b/report.json")));
  const Json rep = read_json(out("a/report.json"));
  for (const char* key : {"config", "num_sequences", "num_ids", "distinct", "min_gap_delta_units", "depth_counts",
                          "mod_check", "soft_max_deviation"})
    EXPECT_TRUE(rep.contains(key)) << key;
  EXPECT_EQ(run("construct --n 2 --d 1 --delta 0.5 --pattern dense --mode soft --seed 5 --out " + out("c")), 0);
  EXPECT_TRUE(read_json(out("c/report.json")).at("soft_max_deviation").is_number());
  EXPECT_EQ(run("construct --n 2 --d 1 --delta 0.4 --pattern dense --seed 5 --out " + out("d")), 2);
  EXPECT_EQ(run("construct --n 2 --d 1 --delta 0.5 --pattern dense --out " + out("d")), 2);
  EXPECT_EQ(run("construct --n 2 --d 1 --delta 0.5 --pattern dense --mode fuzzy --seed 1 --out " + out("d")), 2);
  EXPECT_EQ(run("construct --n 3 --d 1 --delta 0.5 --pattern window_global:0:0 --seed 1 --out " + out("d")), 2);
}

TEST_F(Cli, TrainWritesMetricsAndCheckpoint) {
  write_text(out("cfg.json"), R"({"n":8,"vocab":4,"d":8,"h":2,"m":4,"r":8,"layers":1,"pattern":"strided:2",
    "head_config":"union","steps":6,"batch":4,"eval_every":3,"eval_size":8,"seed":2})");
  EXPECT_EQ(run("train --config " + out("cfg.json") + " --out " + out("a")), 0);
  const std::string metrics = read_text(out("a/metrics.csv"));
  EXPECT_EQ(metrics.rfind("step,loss,masked_accuracy\n0,", 0), 0u);
  EXPECT_NE(metrics.find("\n6,"), std::string::npos);
  ModelParams p;
  AdamState opt;
  checkpoint_from_json(read_json(out("a/checkpoint.json")), p, opt);
  EXPECT_EQ(opt.step, 6u);
  EXPECT_EQ(read_json(out("a/manifest.json")).at("seed"), 2);
  EXPECT_EQ(run("train --config " + out("cfg.json") + " --out " + out("b")), 0);
  EXPECT_EQ(read_text(out("a/metrics.csv")), read_text(out("b/metrics.csv")));

  write_text(out("noseed.json"), R"({"n":8,"vocab":4,"pattern":"dense","steps":1})");
  EXPECT_EQ(run("train --config " + out("noseed.json") + " --out " + out("c")), 2);
  write_text(out("badtype.json"), R"({"n":"eight","seed":1})");
  EXPECT_EQ(run("train --config " + out("badtype.json") + " --out " + out("c")), 2);
}

}  // namespace
}  // namespace sparseua
