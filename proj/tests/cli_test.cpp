// Copyright 2026 The Synthesis Harness Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>
#include <sys/wait.h>
#include <unistd.h>

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include <json.hpp>

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

const std::string kCli = SYNTH_CLI_PATH;
const fs::path kData = SYNTH_DATA_DIR;

struct Result {
  int code = -1;
  std::string out;
};

Result run(const std::string& args) {
  Result r;
  FILE* p = ::popen((kCli + " " + args + " 2>/dev/null").c_str(), "r");
  char buf[4096];
  std::size_t n;
  while ((n = std::fread(buf, 1, sizeof buf, p)) > 0) r.out.append(buf, n);
  const int status = ::pclose(p);
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("synth_cli_" + name + "_" + std::to_string(::getpid()));
  fs::remove_all(p);
  return p;
}

std::string movies() { return "--corpus " + (kData / "movies_sample.jsonl").string(); }
std::string trials() { return "--schema trials --corpus " + (kData / "trials_sample.jsonl").string(); }

TEST(Cli, NoVerbIsUsageError) { EXPECT_EQ(run("").code, 1); }

TEST(Cli, HelpSucceeds) {
  const Result r = run("improve --help");
  EXPECT_EQ(r.code, 0);
  EXPECT_NE(r.out.find("--policy"), std::string::npos);
}

TEST(Cli, ConfigErrorsExitOne) {
  EXPECT_EQ(run("improve --corpus /nonexistent.jsonl --out " + scratch("x").string()).code, 1);
  EXPECT_EQ(run("flip " + movies() + " --out " + scratch("y").string()).code, 1);  // flip needs trials
  EXPECT_EQ(run("improve " + movies() + " --policy bogus").code, 1);
  EXPECT_EQ(run("improve " + movies() + " --config /nonexistent/config.json").code, 1);
}

TEST(Cli, ImproveOnSampleData) {
  const fs::path out = scratch("improve");
  const Result r = run("improve " + movies() + " --max-tokens 16 --out " + out.string());
  ASSERT_EQ(r.code, 0) << r.out;
  const json agg = json::parse(r.out);
  EXPECT_EQ(agg["type"], "aggregate");
  EXPECT_EQ(agg["study"], "improve");
  EXPECT_EQ(agg["n_errors"], 0);
  EXPECT_TRUE(fs::exists(out / "records.jsonl"));
  EXPECT_TRUE(fs::exists(out / "metrics.tsv"));
}

TEST(Cli, ConfigFileAndFlagOverlay) {
  const fs::path dir = scratch("overlay");
  fs::create_directories(dir);
  const fs::path cfg = dir / "config.json";
  std::ofstream(cfg) << json{{"corpus", {{"path", (kData / "movies_sample.jsonl").string()}}},
                             {"permutation", {{"count", 50}}},
                             {"decode", {{"max_tokens", 8}}},
                             {"output_dir", (dir / "out").string()}}
                            .dump();
  const Result r = run("permute --config " + cfg.string() + " --permutations 3 --seed 9");
  ASSERT_EQ(r.code, 0);
  std::ifstream rec(dir / "out" / "records.jsonl");
  std::string first;
  std::getline(rec, first);
  const json c = json::parse(first)["config"];
  EXPECT_EQ(c["permutation"]["count"], 3);
  EXPECT_EQ(c["seed"], 9);
  EXPECT_EQ(c["decode"]["max_tokens"], 8);
  EXPECT_EQ(c["study"], "permutation");
}

TEST(Cli, AllStudyVerbsRunOnSamples) {
  const std::string quick = " --max-tokens 10 --permutations 3 --fractions 0.5,1.0";
  EXPECT_EQ(run("calibrate " + movies() + " --out " + scratch("c1").string()).code, 0);
  EXPECT_EQ(run("calibrate " + trials() + " --measurer keyword --out " + scratch("c2").string()).code, 0);
  EXPECT_EQ(run("permute " + movies() + quick + " --out " + scratch("p").string()).code, 0);
  EXPECT_EQ(run("compose " + movies() + quick + " --out " + scratch("co").string()).code, 0);
  EXPECT_EQ(run("flip " + trials() + quick + " --measurer keyword --out " + scratch("f").string()).code, 0);
  EXPECT_EQ(run("improve " + trials() + quick + " --measurer keyword --policy agree_or_abstain --out " +
                scratch("i").string())
                .code,
            0);
}

TEST(Cli, InstanceFailuresExitTwo) {
  // An external generator that dies on every request.
  const Result r = run("improve " + movies() + " --generator external --generator-endpoint 'exec:exit 0' --out " +
                       scratch("fail").string());
  EXPECT_EQ(r.code, 2);
  const json agg = json::parse(r.out);
  EXPECT_GT(agg["n_errors"].get<int>(), 0);
}

TEST(Cli, ExternalGeneratorViaEcho) {
  const std::string ep = "'exec:" + kCli + " serve-echo --reply \"a superb film\" --reply \"a dull film\"'";
  const Result r = run("improve " + movies() + " --generator external --generator-endpoint " + ep + " --out " +
                       scratch("echo").string());
  EXPECT_EQ(r.code, 0);
}

TEST(Cli, PlotData) {
  const fs::path out = scratch("plot");
  ASSERT_EQ(run("permute " + movies() + " --max-tokens 8 --permutations 4 --out " + out.string()).code, 0);
  const Result r = run("plotdata --record " + (out / "records.jsonl").string() + " --figure spread_hist --bins 3");
  ASSERT_EQ(r.code, 0);
  EXPECT_EQ(r.out.substr(0, r.out.find('\n')), "bin_lo\tbin_hi\tcount");
  EXPECT_EQ(std::count(r.out.begin(), r.out.end(), '\n'), 4);
  EXPECT_EQ(run("plotdata --record " + (out / "records.jsonl").string() + " --figure pie").code, 1);
  EXPECT_EQ(run("plotdata --record " + (out / "records.jsonl").string() + " --figure sensitivity_scatter").code, 2);
  EXPECT_EQ(run("plotdata --record /nonexistent --figure spread_hist").code, 2);
}

TEST(Cli, ServeEchoStdio) {
  const fs::path dir = scratch("echo_in");
  fs::create_directories(dir);
  std::ofstream(dir / "in.ndjson") << R"({"req_id":"a","conditioning":"x","n":2}
{"req_id":"b","text":"good"}
)";
  const Result r = run("serve-echo --reply hi < " + (dir / "in.ndjson").string());
  EXPECT_EQ(r.code, 0);
  EXPECT_EQ(std::count(r.out.begin(), r.out.end(), '\n'), 4);
  EXPECT_NE(r.out.find(R"("text":"hi")"), std::string::npos);
  EXPECT_NE(r.out.find(R"("req_id":"b")"), std::string::npos);
  EXPECT_EQ(run("serve-echo --measurer external < /dev/null").code, 1);
}

}  // namespace
