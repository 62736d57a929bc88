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

#include "lfsr/run_config.hpp"

#include "lfsr/config_util.hpp"
#include "lfsr/errors.hpp"

#include <fstream>

namespace lfsr {
namespace {

using nlohmann::json;

json stage_json(const StageConfig& s) {
  return {{"steps", s.steps},
          {"batch", s.batch},
          {"chunk_len", s.chunk_len},
          {"seed", s.seed},
          {"log_every", s.log_every},
          {"checkpoint_every", s.checkpoint_every},
          {"optimizer", s.optimizer}};
}

void read_stage(config::KeyReader& r, StageConfig& s) {
  r.read("steps", s.steps);
  r.read("batch", s.batch);
  r.read("chunk_len", s.chunk_len);
  r.read("seed", s.seed);
  r.read("log_every", s.log_every);
  r.read("checkpoint_every", s.checkpoint_every);
  r.nested("optimizer", [&](const json& j, const std::string& path) { read_optimizer(j, path, s.optimizer); });
}

void check_stage(const std::string& path, const StageConfig& s, std::vector<std::string>& problems) {
  if (s.steps < 0) problems.push_back(path + ".steps: must be non-negative");
  if (s.batch < 1) problems.push_back(path + ".batch: must be at least 1");
  if (s.chunk_len < 1) problems.push_back(path + ".chunk_len: must be positive");
  if (s.log_every < 1) problems.push_back(path + ".log_every: must be at least 1");
  if (s.checkpoint_every < 0) problems.push_back(path + ".checkpoint_every: must be non-negative");
  try {
    s.optimizer.validate();
  } catch (const std::invalid_argument& e) {
    problems.push_back(path + "." + e.what());
  }
}

template <typename T>
void check(const std::string& path, const T& section, std::vector<std::string>& problems) {
  try {
    section.validate();
  } catch (const std::invalid_argument& e) {
    problems.push_back(path + ": " + e.what());
  }
}

}  // namespace

void RunConfig::validate() const {
  std::vector<std::string> problems;
  if (data.source_rate < 0) problems.push_back("data.source_rate: must be non-negative");
  if (data.workers < 1) problems.push_back("data.workers: must be at least 1");
  check("ae", ae, problems);
  check("discriminator", discriminator, problems);
  check("vnet", vnet, problems);
  if (vnet.latent_channels != ae.latent_channels)
    problems.push_back("vnet.latent_channels: must equal ae.latent_channels (" +
                       std::to_string(ae.latent_channels) + ")");
  check_stage("train", train, problems);
  check_stage("cfm", cfm, problems);
  if (ae.hop() > 0) {
    for (const auto& [name, stage] : {std::pair<const char*, const StageConfig*>{"train", &train}, {"cfm", &cfm}}) {
      if (stage->chunk_len % ae.hop() != 0)
        problems.push_back(std::string(name) + ".chunk_len: must be a multiple of the autoencoder hop " +
                           std::to_string(ae.hop()));
    }
  }
  if (cfm.cache_epochs < 0) problems.push_back("cfm.cache_epochs: must be non-negative");
  if (eval.n_fft < 0) problems.push_back("eval.n_fft: must be non-negative");
  if (eval.hop < 0) problems.push_back("eval.hop: must be non-negative");
  if (!(eval.eps > 0)) problems.push_back("eval.eps: must be positive");
  if (eval.n_steps < 1) problems.push_back("eval.n_steps: must be at least 1");
  if (!problems.empty()) throw config::ConfigError(std::move(problems));
}

void to_json(json& j, const RunConfig& c) {
  json cfm = stage_json(c.cfm);
  cfm["cache_epochs"] = c.cfm.cache_epochs;
  j = {{"data", {{"manifest", c.data.manifest}, {"source_rate", c.data.source_rate}, {"workers", c.data.workers}}},
       {"ae", c.ae},
       {"discriminator", c.discriminator},
       {"vnet", c.vnet},
       {"cfm", cfm},
       {"train", stage_json(c.train)},
       {"eval",
        {{"n_fft", c.eval.n_fft},
         {"hop", c.eval.hop},
         {"eps", c.eval.eps},
         {"n_steps", c.eval.n_steps},
         {"seed", c.eval.seed}}}};
}

void from_json(const json& j, RunConfig& c) {
  config::KeyReader root(j, "config");
  std::vector<std::string> problems;
  const auto section = [&](const std::string& key, auto&& fn) {
    root.nested(key, [&](const json& s, const std::string&) {
      config::KeyReader r(s, key);
      fn(r);
      r.finish();
    });
  };
  section("data", [&](config::KeyReader& r) {
    r.read("manifest", c.data.manifest);
    r.read("source_rate", c.data.source_rate);
    r.read("workers", c.data.workers);
  });
  // Module sections carry their own strict readers rooted at the section name.
  root.nested("ae", [&](const json& s, const std::string&) {
    if (!s.is_null()) c.ae = s.get<AutoencoderConfig>();
  });
  root.nested("discriminator", [&](const json& s, const std::string&) {
    if (!s.is_null()) c.discriminator = s.get<DiscriminatorConfig>();
  });
  root.nested("vnet", [&](const json& s, const std::string&) {
    if (!s.is_null()) c.vnet = s.get<VelocityNetConfig>();
  });
  section("train", [&](config::KeyReader& r) { read_stage(r, c.train); });
  section("cfm", [&](config::KeyReader& r) {
    read_stage(r, c.cfm);
    r.read("cache_epochs", c.cfm.cache_epochs);
  });
  section("eval", [&](config::KeyReader& r) {
    r.read("n_fft", c.eval.n_fft);
    r.read("hop", c.eval.hop);
    r.read("eps", c.eval.eps);
    r.read("n_steps", c.eval.n_steps);
    r.read("seed", c.eval.seed);
  });
  try {
    root.finish();
  } catch (const config::ConfigError& e) {
    // Top-level unknown keys read better without the synthetic root name.
    for (auto p : e.problems()) {
      if (p.rfind("config.", 0) == 0) p = p.substr(7);
      problems.push_back(p);
    }
    throw config::ConfigError(std::move(problems));
  }
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config file " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw config::ConfigError({path.string() + ": " + e.what()});
  }
  RunConfig cfg = j.get<RunConfig>();
  cfg.validate();
  return cfg;
}

}  // namespace lfsr
