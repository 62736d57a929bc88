// Copyright 2026 The lfsr Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "ae_ledger.hpp"
#include "cli.hpp"
#include "lfsr/checkpoint.hpp"
#include "lfsr/dataset.hpp"
#include "lfsr/signal.hpp"
#include "lfsr/trainer.hpp"
#include "test_util.hpp"
#include "vnet_ledger.hpp"

#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

#include <cstdlib>
#include <fstream>
#include <iterator>
#include <sstream>

namespace lfsr {
namespace {

using nlohmann::json;
namespace fs = std::filesystem;

struct Result {
  int code;
  std::string out, err;
};

Result lfsr_cli(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

const json kMicro = {
    {"ae", {{"base_width", 8}, {"latent_channels", 8}, {"dilations", {1, 3}}, {"residual_kernel", 3}}},
    {"discriminator", {{"resolutions", {256, 128}}, {"channels", 4}}},
    {"vnet", {{"latent_channels", 8}, {"base_width", 8}, {"time_embed_dim", 16}}},
    {"train", {{"batch", 2}, {"chunk_len", 2048}, {"steps", 3}, {"log_every", 1}}},
    {"cfm", {{"batch", 2}, {"chunk_len", 2048}, {"steps", 3}, {"log_every", 1}}}};

class CliTest : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    root_ = new fs::path(testing::scratch_dir("cli"));
    std::ofstream(root() / "micro.json") << kMicro.dump(2);
    ASSERT_EQ(lfsr_cli({"synth-data", "--out", (root() / "corpus").string(), "--items", "3", "--duration", "1"}).code,
              0);
    ASSERT_EQ(lfsr_cli({"train-ae", "--config", config(), "--out", ae_dir(), "--manifest", corpus()}).code, 0);
    ASSERT_EQ(lfsr_cli({"train-cfm", "--config", config(), "--out", cfm_dir(), "--manifest", corpus(),
                        "--ae-checkpoint", ae_dir() + "/checkpoint"})
                  .code,
              0);
  }
  static void TearDownTestSuite() {
    delete root_;
    root_ = nullptr;
  }

  static const fs::path& root() { return *root_; }
  static std::string config() { return (root() / "micro.json").string(); }
  static std::string corpus() { return (root() / "corpus").string(); }
  static std::string ae_dir() { return (root() / "ae").string(); }
  static std::string cfm_dir() { return (root() / "cfm").string(); }
  static std::string ae_ckpt() { return ae_dir() + "/checkpoint"; }
  static std::string vnet_ckpt() { return cfm_dir() + "/checkpoint"; }
  static std::string first_wav() { return (root() / "corpus" / "item_0000.wav").string(); }

 private:
  static fs::path* root_;
};

fs::path* CliTest::root_ = nullptr;

TEST(Cli, SynthDataIsSeededAndCounted) {
  const fs::path dir = testing::scratch_dir("cli_synth");
  const auto a = lfsr_cli({"synth-data", "--out", (dir / "a").string(), "--items", "4", "--duration", "0.5",
                           "--seed", "7"});
  ASSERT_EQ(a.code, 0) << a.err;
  EXPECT_NE(a.out.find("manifest.jsonl"), std::string::npos);
  const PairManifest m = PairManifest::read(dir / "a");
  EXPECT_EQ(m.entries.size(), 4u);
  EXPECT_EQ(m.target_rate, 8000);
  EXPECT_EQ(m.source_rates, std::vector<int>{2000});

  ASSERT_EQ(lfsr_cli({"synth-data", "--out", (dir / "b").string(), "--items", "4", "--duration", "0.5", "--seed",
                      "7"})
                .code,
            0);
  for (const auto& e : m.entries) EXPECT_EQ(slurp(dir / "a" / e.path), slurp(dir / "b" / e.path)) << e.path;
  EXPECT_EQ(slurp(dir / "a" / "manifest.jsonl"), slurp(dir / "b" / "manifest.jsonl"));
}

TEST(Cli, UsageErrorsExitWithTwo) {
  const auto zero = lfsr_cli({"synth-data", "--out", testing::scratch_dir("cli_zero").string(), "--items", "0"});
  EXPECT_EQ(zero.code, 2);
  EXPECT_NE(zero.err.find("--items"), std::string::npos);
  EXPECT_EQ(lfsr_cli({}).code, 2);
  EXPECT_EQ(lfsr_cli({"bogus"}).code, 2);
  EXPECT_EQ(lfsr_cli({"--help"}).code, 0);
}

TEST(Cli, ConfigProblemsAreEnumeratedWithKeyPaths) {
  const fs::path dir = testing::scratch_dir("cli_badcfg");
  json bad = kMicro;
  bad["train"]["optimizer"] = {{"lr", -1.0}};
  bad["vnet"]["latent_channels"] = 4;
  bad["train"]["wat"] = 1;
  std::ofstream(dir / "bad.json") << bad.dump();
  const auto r = lfsr_cli({"train-ae", "--config", (dir / "bad.json").string(), "--out", (dir / "out").string(),
                           "--manifest", (dir / "none").string()});
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("train.wat"), std::string::npos) << r.err;

  bad.erase("train");
  bad["train"] = {{"optimizer", {{"lr", -1.0}}}};
  std::ofstream(dir / "bad2.json") << bad.dump();
  const auto r2 = lfsr_cli({"train-ae", "--config", (dir / "bad2.json").string(), "--out",
                            (dir / "out").string(), "--manifest", (dir / "none").string()});
  EXPECT_EQ(r2.code, 2);
  EXPECT_NE(r2.err.find("train.optimizer.lr"), std::string::npos) << r2.err;
  EXPECT_NE(r2.err.find("vnet.latent_channels"), std::string::npos) << r2.err;
}

TEST_F(CliTest, TrainCfmRequiresAutoencoderCheckpoint) {
  const auto r = lfsr_cli({"train-cfm", "--config", config(), "--out", (root() / "x").string()});
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("--ae-checkpoint"), std::string::npos) << r.err;
}

TEST_F(CliTest, CompletedRunLeavesCheckpointAndResolvedConfig) {
  for (const auto& dir : {ae_dir(), cfm_dir()}) {
    EXPECT_EQ(load_checkpoint(fs::path(dir) / "checkpoint").step, 3) << dir;
    std::ifstream in(fs::path(dir) / "config.resolved.json");
    const json snapshot = json::parse(in);
    EXPECT_EQ(snapshot["ae"]["latent_channels"], 8);
    EXPECT_EQ(snapshot["train"]["optimizer"]["lr"], 0.0003);  // defaults are spelled out
    EXPECT_EQ(snapshot["data"]["manifest"], corpus());
  }
}

TEST_F(CliTest, ResumePicksUpStepCounter) {
  const std::string out = (root() / "resumed").string();
  const auto r = lfsr_cli({"train-ae", "--config", config(), "--out", out, "--manifest", corpus(), "--resume",
                           ae_ckpt(), "--steps", "5"});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("resumed at step 3"), std::string::npos) << r.out;
  std::ifstream log(fs::path(out) / "train_log.jsonl");
  std::string line;
  std::vector<long> steps;
  while (std::getline(log, line)) steps.push_back(json::parse(line)["step"].get<long>());
  EXPECT_EQ(steps, (std::vector<long>{4, 5}));
  EXPECT_EQ(load_checkpoint(fs::path(out) / "checkpoint").step, 5);
}

TEST_F(CliTest, WorkersDefaultFromEnvironment) {
  ::setenv("LFSR_WORKERS", "3", 1);
  const std::string out = (root() / "env_workers").string();
  const auto r = lfsr_cli({"train-ae", "--config", config(), "--out", out, "--manifest", corpus(), "--steps", "1"});
  ::unsetenv("LFSR_WORKERS");
  ASSERT_EQ(r.code, 0) << r.err;
  std::ifstream in(fs::path(out) / "config.resolved.json");
  EXPECT_EQ(json::parse(in)["data"]["workers"], 3);
}

TEST_F(CliTest, InferIsDeterministicPerSeed) {
  const fs::path dir = root() / "infer";
  const auto run = [&](const std::string& name, const std::string& seed) {
    return lfsr_cli({"infer", "--input", first_wav(), "--source-rate", "2000", "--output", (dir / name).string(),
                     "--ae", ae_ckpt(), "--vnet", vnet_ckpt(), "--seed", seed});
  };
  ASSERT_EQ(run("a.wav", "4").code, 0);
  ASSERT_EQ(run("b.wav", "4").code, 0);
  ASSERT_EQ(run("c.wav", "5").code, 0);
  EXPECT_EQ(slurp(dir / "a.wav"), slurp(dir / "b.wav"));
  EXPECT_NE(slurp(dir / "a.wav"), slurp(dir / "c.wav"));
  const AudioClip out = load_wav(dir / "a.wav");
  EXPECT_EQ(out.rate, 8000);
  EXPECT_EQ(out.size(), load_wav(first_wav()).size());
  std::ifstream side(dir / "a.wav.json");
  EXPECT_EQ(json::parse(side)["steps"], 1);
}

TEST_F(CliTest, InferRejectsBadArguments) {
  const std::string out = (root() / "infer_bad" / "x.wav").string();
  EXPECT_EQ(lfsr_cli({"infer", "--input", first_wav(), "--source-rate", "2000", "--output", out, "--ae", ae_ckpt(),
                      "--vnet", vnet_ckpt(), "--steps", "0"})
                .code,
            2);
  EXPECT_EQ(lfsr_cli({"infer", "--input", (root() / "missing.wav").string(), "--source-rate", "2000", "--output",
                      out, "--ae", ae_ckpt(), "--vnet", vnet_ckpt()})
                .code,
            2);
  // Velocity network paired with a different autoencoder.
  const std::string other = (root() / "other_ae").string();
  ASSERT_EQ(lfsr_cli({"train-ae", "--config", config(), "--out", other, "--manifest", corpus(), "--steps", "1"}).code,
            0);
  const auto r = lfsr_cli({"infer", "--input", first_wav(), "--source-rate", "2000", "--output", out, "--ae",
                           other + "/checkpoint", "--vnet", vnet_ckpt()});
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("--vnet"), std::string::npos) << r.err;
}

TEST_F(CliTest, EvalOnIdenticalDirectoriesIsZero) {
  const auto r = lfsr_cli({"eval", "--ref", corpus(), "--est", corpus(), "--source-rate", "2000", "--report",
                           (root() / "eval.jsonl").string()});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("LSD-HF"), std::string::npos);
  std::ifstream in(root() / "eval.jsonl");
  std::string line, last;
  int rows = 0;
  while (std::getline(in, line)) {
    const json j = json::parse(line);
    EXPECT_EQ(j["lsd"], 0.0);
    EXPECT_EQ(j["lsd_hf"], 0.0);
    last = j["file"];
    ++rows;
  }
  EXPECT_EQ(rows, 4);
  EXPECT_EQ(last, "mean");
}

TEST_F(CliTest, EvalWarnsAboutUnpairedFiles) {
  const fs::path est = root() / "partial";
  fs::create_directories(est);
  fs::copy_file(first_wav(), est / "item_0000.wav", fs::copy_options::overwrite_existing);
  fs::copy_file(first_wav(), est / "stray.wav", fs::copy_options::overwrite_existing);
  const auto r = lfsr_cli({"eval", "--ref", corpus(), "--est", est.string(), "--source-rate", "2000"});
  EXPECT_EQ(r.code, 0);
  EXPECT_NE(r.err.find("stray.wav"), std::string::npos) << r.err;
}

TEST_F(CliTest, StatsMatchLedgersAndScaleWithSteps) {
  const auto one = lfsr_cli({"stats", "--ae", ae_ckpt(), "--vnet", vnet_ckpt(), "--json"});
  const auto eight = lfsr_cli({"stats", "--ae", ae_ckpt(), "--vnet", vnet_ckpt(), "--json", "--steps", "8"});
  ASSERT_EQ(one.code, 0) << one.err;
  ASSERT_EQ(eight.code, 0) << eight.err;
  const json a = json::parse(one.out), b = json::parse(eight.out);

  const AutoencoderConfig ae_cfg = kMicro["ae"].get<AutoencoderConfig>();
  const testing::VnetLedger vnet(8, 8, 16);
  const auto [enc, dec] = testing::ae_macs(ae_cfg, 8000.0);
  EXPECT_EQ(a["inference_steps"], 1);
  EXPECT_EQ(a["ae_params"].get<double>(), testing::ae_param_count(ae_cfg));
  EXPECT_EQ(a["vnet_params"].get<double>(), vnet.params());
  EXPECT_EQ(a["params"].get<double>(), testing::ae_param_count(ae_cfg) + vnet.params());
  EXPECT_NEAR(a["encoder_flops"].get<double>(), 2 * enc, 1e-9 * enc);
  EXPECT_NEAR(a["decoder_flops"].get<double>(), 2 * dec, 1e-9 * dec);
  EXPECT_NEAR(a["vnet_flops_per_step"].get<double>(), 2 * vnet.macs(8000.0 / 512.0), 1e-9 * vnet.macs(15.625));

  EXPECT_EQ(b["inference_steps"], 8);
  EXPECT_EQ(b["encoder_flops"], a["encoder_flops"]);
  EXPECT_EQ(b["decoder_flops"], a["decoder_flops"]);
  const auto vnet_term = [](const json& j) {
    return j["flops"].get<double>() - j["encoder_flops"].get<double>() - j["decoder_flops"].get<double>();
  };
  const double vnet_term_1 = vnet_term(a), vnet_term_8 = vnet_term(b);
  EXPECT_NEAR(vnet_term_8, 8 * vnet_term_1, 1e-6 * vnet_term_8);
}

TEST_F(CliTest, StatsTableUsesComplexityColumns) {
  const auto r = lfsr_cli({"stats", "--ae", ae_ckpt(), "--vnet", vnet_ckpt()});
  ASSERT_EQ(r.code, 0) << r.err;
  std::istringstream lines(r.out);
  std::string header, row;
  std::getline(lines, header);
  std::getline(lines, row);
  const auto steps = header.find("Inference Steps"), para = header.find("Para."), flops = header.find("FLOPs");
  ASSERT_NE(steps, std::string::npos);
  ASSERT_NE(para, std::string::npos);
  ASSERT_NE(flops, std::string::npos);
  EXPECT_LT(steps, para);
  EXPECT_LT(para, flops);
  EXPECT_EQ(row.substr(0, 1), "1");
  EXPECT_NE(row.find(" M"), std::string::npos);
  EXPECT_NE(row.find(" G"), std::string::npos);
}

TEST(Cli, ShippedToyConfigIsValid) {
  const RunConfig c = load_run_config(fs::path(LFSR_SOURCE_DIR) / "configs" / "toy.json");
  EXPECT_NO_THROW(c.validate());
  EXPECT_EQ(c.train.steps, 5000);
  EXPECT_EQ(c.cfm.steps, 20000);
  EXPECT_EQ(c.vnet.base_width, 32);
}

TEST(Cli, StatsForShippedToyConfigMatchLedgers) {
  const RunConfig cfg = load_run_config(fs::path(LFSR_SOURCE_DIR) / "configs" / "toy.json");
  const fs::path dir = testing::scratch_dir("cli_toy_stats");
  Checkpoint ae_ckpt, vnet_ckpt;
  ae_ckpt.module = "autoencoder";
  ae_ckpt.config = {{"ae", cfg.ae}, {"target_rate", 8000}};
  ae_ckpt.put("ae/", Autoencoder<float>(cfg.ae, 1).parameters());
  vnet_ckpt.module = "velocity_net";
  vnet_ckpt.config = {{"vnet", cfg.vnet}, {"target_rate", 8000}};
  vnet_ckpt.put("vnet/", VelocityNet<float>(cfg.vnet, 2).parameters());
  save_checkpoint(ae_ckpt, dir / "ae");
  save_checkpoint(vnet_ckpt, dir / "vnet");

  const auto r = lfsr_cli({"stats", "--ae", (dir / "ae").string(), "--vnet", (dir / "vnet").string(), "--json"});
  ASSERT_EQ(r.code, 0) << r.err;
  const json j = json::parse(r.out);
  const testing::VnetLedger vnet(double(cfg.vnet.latent_channels), double(cfg.vnet.base_width),
                                 double(cfg.vnet.time_embed_dim));
  const auto [enc, dec] = testing::ae_macs(cfg.ae, 8000.0);
  EXPECT_EQ(j["params"].get<double>(), testing::ae_param_count(cfg.ae) + vnet.params());
  const double expected = 2 * (enc + dec) + 2 * vnet.macs(15.625);
  EXPECT_NEAR(j["flops"].get<double>(), expected, 1e-9 * expected);
  RecordProperty("toy_params", std::to_string(j["params"].get<long>()));
  RecordProperty("toy_gflops", std::to_string(j["flops"].get<double>() / 1e9));
}

}  // namespace
}  // namespace lfsr
