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

#include "cli.hpp"

#include "lfsr/cfm.hpp"
#include "lfsr/checkpoint.hpp"
#include "lfsr/config_util.hpp"
#include "lfsr/dataset.hpp"
#include "lfsr/errors.hpp"
#include "lfsr/metrics.hpp"
#include "lfsr/run_config.hpp"
#include "lfsr/signal.hpp"
#include "lfsr/trainer.hpp"

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <limits>
#include <optional>
#include <sstream>

namespace lfsr::cli {
namespace {

using nlohmann::json;
namespace fs = std::filesystem;

const CLI::Range kAtLeastOne(1, std::numeric_limits<int>::max());

int default_workers() {
  const char* env = std::getenv("LFSR_WORKERS");
  if (env == nullptr) return 1;
  try {
    const int n = std::stoi(env);
    return n >= 1 ? n : 1;
  } catch (const std::exception&) {
    return 1;
  }
}

void write_json(const fs::path& file, const json& j) {
  if (file.has_parent_path()) fs::create_directories(file.parent_path());
  std::ofstream out(file);
  if (!out) throw IoError("cannot write " + file.string());
  out << j.dump(2) << '\n';
}

std::string fixed(double v, int digits) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(digits) << v;
  return os.str();
}

// ---------------------------------------------------------------------------

struct SynthArgs {
  fs::path out;
  std::uint64_t seed = 0;
  int items = 16;
  int rate = 8000;
  double duration = 2.0;
  std::vector<int> source_rates;
};

int synth_data(const SynthArgs& a, std::ostream& out) {
  const PairManifest m = synth_toy_corpus(a.out, a.seed, a.items, a.duration, a.rate, a.source_rates);
  write_json(a.out / "synth_config.json", {{"seed", a.seed},
                                           {"items", a.items},
                                           {"rate", a.rate},
                                           {"duration", a.duration},
                                           {"source_rates", m.source_rates}});
  out << (a.out / "manifest.jsonl").string() << '\n';
  return kExitOk;
}

struct TrainArgs {
  fs::path config, out, resume, ae_checkpoint, manifest;
  long steps = -1;
  int workers = 1;
};

RunConfig resolve_config(const TrainArgs& a) {
  RunConfig cfg = load_run_config(a.config);
  if (!a.manifest.empty()) cfg.data.manifest = a.manifest.string();
  cfg.data.workers = a.workers;
  if (cfg.data.manifest.empty())
    throw config::ConfigError({"data.manifest: not set; give it in the config or pass --manifest"});
  cfg.validate();
  return cfg;
}

template <typename Trainer>
int train(Trainer& trainer, const StageConfig& stage, const TrainArgs& a, std::ostream& out) {
  if (!a.resume.empty()) {
    trainer.restore(load_checkpoint(a.resume));
    out << "resumed at step " << trainer.steps_done() << '\n';
  }
  RunOptions opts;
  opts.out_dir = a.out;
  opts.total_steps = a.steps;
  opts.on_log = [&](const json& r) { out << r.dump() << '\n' << std::flush; };
  run_training(trainer, stage, opts);
  out << "checkpoint " << (a.out / "checkpoint").string() << '\n';
  return kExitOk;
}

int train_ae(const TrainArgs& a, std::ostream& out) {
  const RunConfig cfg = resolve_config(a);
  const PairManifest manifest = PairManifest::read(cfg.data.manifest);
  manifest.validate();
  write_json(a.out / "config.resolved.json", cfg);
  AeTrainer trainer(manifest, cfg);
  return train(trainer, cfg.train, a, out);
}

int train_cfm(const TrainArgs& a, std::ostream& out) {
  const RunConfig cfg = resolve_config(a);
  const PairManifest manifest = PairManifest::read(cfg.data.manifest);
  manifest.validate();
  json snapshot = cfg;
  snapshot["ae_checkpoint"] = a.ae_checkpoint.string();
  write_json(a.out / "config.resolved.json", snapshot);
  CfmTrainer trainer(manifest, load_checkpoint(a.ae_checkpoint), cfg);
  return train(trainer, cfg.cfm, a, out);
}

// ---------------------------------------------------------------------------

struct Models {
  Autoencoder<float> ae;
  VelocityNet<float> vnet;
  int target_rate;
};

Models load_models(const fs::path& ae_dir, const fs::path& vnet_dir, int rate_override) {
  const Checkpoint ae_ckpt = load_checkpoint(ae_dir);
  const Checkpoint vnet_ckpt = load_checkpoint(vnet_dir);
  Models m{load_autoencoder(ae_ckpt), load_velocity_net(vnet_ckpt), rate_override};
  const std::string expected = vnet_ckpt.config.value("ae_fingerprint", std::string());
  const std::uint64_t actual = m.ae.parameters().fingerprint();
  if (!expected.empty() && std::stoull(expected, nullptr, 16) != actual) {
    std::ostringstream fp;
    fp << std::hex << std::setw(16) << std::setfill('0') << actual;
    throw config::ConfigError({"--vnet: trained against autoencoder " + expected + ", but --ae holds " + fp.str()});
  }
  if (m.target_rate <= 0) m.target_rate = vnet_ckpt.config.value("target_rate", 0);
  if (m.target_rate <= 0) m.target_rate = ae_ckpt.config.value("target_rate", 0);
  if (m.target_rate <= 0) throw config::ConfigError({"--target-rate: not recorded in the checkpoints; pass it"});
  return m;
}

struct InferArgs {
  fs::path input, output, ae, vnet;
  int source_rate = 0;
  int target_rate = 0;
  int steps = 1;
  std::uint64_t seed = 0;
};

int infer(const InferArgs& a, std::ostream& out, std::ostream& err) {
  const Models m = load_models(a.ae, a.vnet, a.target_rate);
  AudioClip clip = load_wav(a.input);
  if (clip.rate != a.source_rate) clip = resample(clip, a.source_rate);
  const AudioClip result = super_resolve(clip, m.ae, m.vnet, SuperResolveConfig{m.target_rate, a.steps, a.seed});
  if (a.output.has_parent_path()) fs::create_directories(a.output.parent_path());
  const SaveReport report = save_wav(result, a.output);
  if (report.clipped) err << "warning: " << report.clipped_samples << " samples saturated\n";
  write_json(fs::path(a.output.string() + ".json"), {{"input", a.input.string()},
                                                     {"source_rate", a.source_rate},
                                                     {"target_rate", m.target_rate},
                                                     {"steps", a.steps},
                                                     {"seed", a.seed},
                                                     {"ae", a.ae.string()},
                                                     {"vnet", a.vnet.string()}});
  out << a.output.string() << '\n';
  return kExitOk;
}

struct EvalArgs {
  fs::path ref, est, report;
  int source_rate = 0;
  int workers = 1;
};

int eval(const EvalArgs& a, std::ostream& out, std::ostream& err) {
  const EvalReport r = eval_dir(a.ref, a.est, a.source_rate, {}, a.workers);
  for (const auto& name : r.unpaired) err << "warning: unpaired file " << name << '\n';
  r.write_table(out);
  if (!a.report.empty()) {
    if (a.report.has_parent_path()) fs::create_directories(a.report.parent_path());
    std::ofstream f(a.report);
    if (!f) throw IoError("cannot write " + a.report.string());
    r.write_jsonl(f);
  }
  return kExitOk;
}

struct StatsArgs {
  fs::path ae, vnet;
  int rate = 0;
  int steps = 1;
  bool as_json = false;
};

int stats(const StatsArgs& a, std::ostream& out) {
  const Models m = load_models(a.ae, a.vnet, a.rate);
  const ComplexityReport r = complexity(m.ae, m.vnet, m.target_rate, a.steps);
  if (a.as_json) {
    out << json{{"inference_steps", r.inference_steps},
                {"params", r.params()},
                {"flops", r.flops()},
                {"target_rate", m.target_rate},
                {"ae_params", r.ae_params},
                {"vnet_params", r.vnet_params},
                {"encoder_flops", r.encoder_flops},
                {"decoder_flops", r.decoder_flops},
                {"vnet_flops_per_step", r.vnet_flops_per_step}}
               .dump()
        << '\n';
    return kExitOk;
  }
  const std::string steps = std::to_string(r.inference_steps);
  const std::string params = fixed(double(r.params()) / 1e6, 2) + " M";
  const std::string flops = fixed(r.flops() / 1e9, 2) + " G";
  out << std::left << std::setw(17) << "Inference Steps" << std::setw(12) << "Para." << "FLOPs\n"
      << std::setw(17) << steps << std::setw(12) << params << flops << '\n';
  return kExitOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Latent flow-matching audio super-resolution", "lfsr"};
  app.require_subcommand(1);
  const int env_workers = default_workers();

  SynthArgs synth;
  auto* synth_cmd = app.add_subcommand("synth-data", "Write a seeded synthetic toy corpus and manifest");
  synth_cmd->add_option("--out", synth.out, "Output directory")->required();
  synth_cmd->add_option("--seed", synth.seed, "Corpus seed")->capture_default_str();
  synth_cmd->add_option("--items", synth.items, "Number of clips")->check(kAtLeastOne)->capture_default_str();
  synth_cmd->add_option("--rate", synth.rate, "Sample rate in Hz")->check(kAtLeastOne)->capture_default_str();
  synth_cmd->add_option("--duration", synth.duration, "Clip length in seconds")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  synth_cmd->add_option("--source-rate", synth.source_rates, "Degraded rates to list (default rate/4)");

  TrainArgs ae_args, cfm_args;
  const auto add_train = [&](const char* name, const char* help, TrainArgs& t) {
    auto* cmd = app.add_subcommand(name, help);
    cmd->add_option("--config", t.config, "Run configuration (JSON)")->required()->check(CLI::ExistingFile);
    cmd->add_option("--out", t.out, "Directory for checkpoints, logs and the resolved config")->required();
    cmd->add_option("--resume", t.resume, "Checkpoint directory to continue from")->check(CLI::ExistingDirectory);
    cmd->add_option("--manifest", t.manifest, "Overrides data.manifest");
    cmd->add_option("--steps", t.steps, "Overrides the stage step budget")->check(CLI::NonNegativeNumber);
    t.workers = env_workers;
    cmd->add_option("--workers", t.workers, "Data-loading threads (default $LFSR_WORKERS or 1)")
        ->check(kAtLeastOne);
    return cmd;
  };
  auto* train_ae_cmd = add_train("train-ae", "Stage 1: adversarial autoencoder training", ae_args);
  auto* train_cfm_cmd = add_train("train-cfm", "Stage 2: flow matching on frozen latents", cfm_args);
  train_cfm_cmd->add_option("--ae-checkpoint", cfm_args.ae_checkpoint, "Trained autoencoder checkpoint")
      ->required()
      ->check(CLI::ExistingDirectory);

  InferArgs inf;
  auto* infer_cmd = app.add_subcommand("infer", "Super-resolve one WAV file");
  infer_cmd->add_option("--input", inf.input, "Low-resolution WAV")->required()->check(CLI::ExistingFile);
  infer_cmd->add_option("--output", inf.output, "Output WAV at the target rate")->required();
  infer_cmd->add_option("--source-rate", inf.source_rate, "Band limit of the input in Hz")
      ->required()
      ->check(kAtLeastOne);
  infer_cmd->add_option("--target-rate", inf.target_rate, "Defaults to the rate recorded in the checkpoints")
      ->check(kAtLeastOne);
  infer_cmd->add_option("--steps", inf.steps, "Euler steps")->check(kAtLeastOne)->capture_default_str();
  infer_cmd->add_option("--seed", inf.seed, "Initial-noise seed")->capture_default_str();
  infer_cmd->add_option("--ae", inf.ae, "Autoencoder checkpoint")->required()->check(CLI::ExistingDirectory);
  infer_cmd->add_option("--vnet", inf.vnet, "Velocity-network checkpoint")->required()->check(CLI::ExistingDirectory);

  EvalArgs ev;
  auto* eval_cmd = app.add_subcommand("eval", "LSD and LSD-HF over paired WAV directories");
  eval_cmd->add_option("--ref", ev.ref, "Reference directory")->required()->check(CLI::ExistingDirectory);
  eval_cmd->add_option("--est", ev.est, "Estimate directory")->required()->check(CLI::ExistingDirectory);
  eval_cmd->add_option("--source-rate", ev.source_rate, "Degraded rate; LSD-HF covers bins above its Nyquist")
      ->required()
      ->check(kAtLeastOne);
  eval_cmd->add_option("--report", ev.report, "Optional JSONL report file");
  ev.workers = env_workers;
  eval_cmd->add_option("--workers", ev.workers, "Scoring threads (default $LFSR_WORKERS or 1)")
      ->check(kAtLeastOne);

  StatsArgs st;
  auto* stats_cmd = app.add_subcommand("stats", "Inference steps, parameter count and FLOPs per second of audio");
  stats_cmd->add_option("--ae", st.ae, "Autoencoder checkpoint")->required()->check(CLI::ExistingDirectory);
  stats_cmd->add_option("--vnet", st.vnet, "Velocity-network checkpoint")->required()->check(CLI::ExistingDirectory);
  stats_cmd->add_option("--rate", st.rate, "Output rate in Hz (default from the checkpoints)")
      ->check(kAtLeastOne);
  stats_cmd->add_option("--steps", st.steps, "Euler steps")->check(kAtLeastOne)->capture_default_str();
  stats_cmd->add_flag("--json", st.as_json, "Machine-readable output with the per-component terms");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*synth_cmd) return synth_data(synth, out);
    if (*train_ae_cmd) return train_ae(ae_args, out);
    if (*train_cfm_cmd) return train_cfm(cfm_args, out);
    if (*infer_cmd) return infer(inf, out, err);
    if (*eval_cmd) return eval(ev, out, err);
    if (*stats_cmd) return stats(st, out);
  } catch (const config::ConfigError& e) {
    err << "configuration error:\n";
    for (const auto& p : e.problems()) err << "  " << p << '\n';
    return kExitUsage;
  } catch (const NumericError& e) {
    err << "numeric failure at step " << e.step() << ": " << e.what() << '\n';
    return kExitNumeric;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  }
  return kExitUsage;
}

}  // namespace lfsr::cli
