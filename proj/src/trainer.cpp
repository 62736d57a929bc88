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

#include "lfsr/trainer.hpp"

#include "lfsr/cfm.hpp"
#include "lfsr/config_util.hpp"
#include "lfsr/errors.hpp"

#include <chrono>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <thread>

namespace lfsr {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

int pick_source_rate(const PairManifest& manifest, const RunConfig& cfg) {
  int rate = cfg.data.source_rate;
  if (rate == 0) {
    if (manifest.source_rates.empty())
      throw config::ConfigError({"data.source_rate: not set and the manifest lists no source rates"});
    rate = manifest.source_rates.front();
  }
  if (rate >= manifest.target_rate)
    throw config::ConfigError({"data.source_rate: " + std::to_string(rate) + " must be below the target rate " +
                               std::to_string(manifest.target_rate)});
  return rate;
}

template <typename Fn>
void parallel_for(std::size_t n, int workers, Fn fn) {
  const std::size_t w = std::min<std::size_t>(n, static_cast<std::size_t>(std::max(workers, 1)));
  if (w <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::thread> pool;
  std::vector<std::exception_ptr> errors(w);
  for (std::size_t k = 0; k < w; ++k) {
    pool.emplace_back([&, k] {
      try {
        for (std::size_t i = k; i < n; i += w) fn(i);
      } catch (...) {
        errors[k] = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

std::string rng_to_string(const std::mt19937_64& rng) {
  std::ostringstream os;
  os << rng;
  return os.str();
}

void rng_from_string(std::mt19937_64& rng, const std::string& s) {
  std::istringstream is(s);
  is >> rng;
  if (!is) throw config::ConfigError({"checkpoint rng_state: unreadable"});
}

const RunConfig& validated(const RunConfig& cfg) {
  cfg.validate();
  return cfg;
}

void expect_module(const Checkpoint& ckpt, const std::string& module) {
  if (ckpt.module != module)
    throw config::ConfigError({"checkpoint holds module '" + ckpt.module + "', expected '" + module + "'"});
}

std::string hex(std::uint64_t v) {
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << v;
  return os.str();
}

double elapsed_ms(std::chrono::steady_clock::time_point since) {
  return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - since).count();
}

Matrix<float> row(const AudioClip& clip) { return clip.samples.transpose().cast<float>(); }

}  // namespace

double lr_at_step(const OptimizerConfig& opt, long completed_steps, int batch, std::size_t epoch_size) {
  const long epoch = opt.decay_every_steps > 0
                         ? completed_steps / opt.decay_every_steps
                         : static_cast<long>(static_cast<std::uint64_t>(completed_steps) * batch / epoch_size);
  return scheduled_lr(opt, epoch);
}

// ---------------------------------------------------------------------------
// Stage 1

AeTrainer::AeTrainer(const PairManifest& manifest, const RunConfig& cfg)
    : cfg_(validated(cfg)),
      source_rate_(pick_source_rate(manifest, cfg)),
      target_rate_(manifest.target_rate),
      stream_(manifest, source_rate_, cfg.train.chunk_len, cfg.train.seed),
      ae_(cfg.ae, cfg.train.seed),
      disc_(cfg.discriminator, cfg.train.seed + 1),
      opt_g_(ae_.parameters(), cfg.train.optimizer),
      opt_d_(disc_.parameters(), cfg.train.optimizer),
      rng_(cfg.train.seed) {}

double AeTrainer::current_lr() const {
  return lr_at_step(cfg_.train.optimizer, step_, cfg_.train.batch, stream_.epoch_size());
}

std::vector<TrainingChunk> AeTrainer::batch_chunks() const {
  const std::size_t batch = static_cast<std::size_t>(cfg_.train.batch);
  const std::uint64_t base = static_cast<std::uint64_t>(step_) * batch;
  const std::size_t epoch = stream_.epoch_size();
  std::vector<TrainingChunk> out(batch);
  parallel_for(batch, cfg_.data.workers, [&](std::size_t i) {
    const std::uint64_t s = base + i;
    out[i] = stream_.chunk(s / epoch, static_cast<std::size_t>(s % epoch));
  });
  return out;
}

json AeTrainer::step() {
  const Checkpoint before = checkpoint();
  try {
    return step_impl();
  } catch (const NumericError&) {
    restore(before);
    throw;
  }
}

json AeTrainer::step_impl() {
  const auto start = std::chrono::steady_clock::now();
  const long step_no = step_ + 1;
  const double lr = current_lr();
  const std::vector<TrainingChunk> chunks = batch_chunks();
  const float inv_batch = 1.0f / static_cast<float>(chunks.size());
  NoiseInjector noise(cfg_.ae.noise_scale, rng_());

  // Generator forward pass, kept for the G step.
  ad::Tape<float> g_tape;
  std::vector<ad::Var<float>> real, fake;
  for (const auto& c : chunks) {
    real.push_back(g_tape.constant(row(c.hr)));
    auto latent = ae_.encode(g_tape, real.back());
    if (noise.scale() > 0) {
      latent = ops::add(latent, g_tape.constant(noise.draw<float>(latent.rows(), latent.cols())));
    }
    fake.push_back(ae_.decode(g_tape, latent));
  }

  // Discriminator step on detached reconstructions.
  ad::Tape<float> d_tape;
  ad::Var<float> l_d;
  for (std::size_t b = 0; b < chunks.size(); ++b) {
    auto term = loss_d(disc_(d_tape, d_tape.constant(real[b].value())),
                       disc_(d_tape, d_tape.constant(fake[b].value())));
    l_d = b == 0 ? term : ops::add(l_d, term);
  }
  l_d = ops::scale(l_d, inv_batch);
  const double l_d_value = l_d.value()(0, 0);
  if (!std::isfinite(l_d_value)) throw NumericError(step_no, "non-finite discriminator loss");
  disc_.parameters().zero_grad();
  d_tape.backward(l_d);
  opt_d_.step(lr);
  json phases = json::array({"d"});

  // Generator step against the updated discriminator, which stays fixed here.
  disc_.parameters().set_trainable(false);
  ad::Var<float> l_g, l_r;
  for (std::size_t b = 0; b < chunks.size(); ++b) {
    auto g = loss_g(disc_(g_tape, fake[b]));
    auto r = loss_r(real[b], fake[b]);
    l_g = b == 0 ? g : ops::add(l_g, g);
    l_r = b == 0 ? r : ops::add(l_r, r);
  }
  disc_.parameters().set_trainable(true);
  l_g = ops::scale(l_g, inv_batch);
  l_r = ops::scale(l_r, inv_batch);
  const auto total = ops::add(l_g, l_r);
  const double l_g_value = l_g.value()(0, 0), l_r_value = l_r.value()(0, 0), total_value = total.value()(0, 0);
  if (!std::isfinite(total_value)) throw NumericError(step_no, "non-finite generator loss");
  ae_.parameters().zero_grad();
  g_tape.backward(total);
  opt_g_.step(lr);
  phases.push_back("g");

  step_ = step_no;
  return {{"step", step_no}, {"l_d", l_d_value}, {"l_g", l_g_value}, {"l_r", l_r_value},
          {"l_gen", total_value}, {"lr", lr}, {"phases", phases}, {"wall_ms", elapsed_ms(start)}};
}

Checkpoint AeTrainer::checkpoint() const {
  Checkpoint ckpt;
  ckpt.module = "autoencoder";
  ckpt.config = {{"ae", cfg_.ae},
                 {"discriminator", cfg_.discriminator},
                 {"source_rate", source_rate_},
                 {"target_rate", target_rate_}};
  ckpt.put("ae/", ae_.parameters());
  ckpt.put("disc/", disc_.parameters());
  opt_g_.save(ckpt, "opt_g/");
  opt_d_.save(ckpt, "opt_d/");
  ckpt.rng_state = rng_to_string(rng_);
  ckpt.step = step_;
  return ckpt;
}

void AeTrainer::restore(const Checkpoint& ckpt) {
  expect_module(ckpt, "autoencoder");
  ckpt.get("ae/", ae_.parameters());
  ckpt.get("disc/", disc_.parameters());
  opt_g_.load(ckpt, "opt_g/", ckpt.step);
  opt_d_.load(ckpt, "opt_d/", ckpt.step);
  rng_from_string(rng_, ckpt.rng_state);
  step_ = ckpt.step;
}

// ---------------------------------------------------------------------------
// Stage 2

CfmTrainer::CfmTrainer(const PairManifest& manifest, const Checkpoint& ae_ckpt, const RunConfig& cfg)
    : cfg_(validated(cfg)),
      source_rate_(pick_source_rate(manifest, cfg)),
      target_rate_(manifest.target_rate),
      stream_(manifest, source_rate_, cfg.cfm.chunk_len, cfg.cfm.seed),
      ae_(cfg.ae, 0),
      ae_fingerprint_(0),
      net_(cfg.vnet, cfg.cfm.seed),
      opt_(net_.parameters(), cfg.cfm.optimizer),
      rng_(cfg.cfm.seed) {
  expect_module(ae_ckpt, "autoencoder");
  ae_ckpt.get("ae/", ae_.parameters());
  ae_.parameters().set_trainable(false);
  ae_fingerprint_ = ae_.parameters().fingerprint();
}

double CfmTrainer::current_lr() const {
  return lr_at_step(cfg_.cfm.optimizer, step_, cfg_.cfm.batch, stream_.epoch_size());
}

CfmTrainer::LatentPair CfmTrainer::latents(std::uint64_t sample) {
  const std::size_t size = stream_.epoch_size();
  std::uint64_t epoch = sample / size;
  const std::size_t slot = static_cast<std::size_t>(sample % size);
  const bool cached = cfg_.cfm.cache_epochs > 0;
  if (cached) {
    epoch %= static_cast<std::uint64_t>(cfg_.cfm.cache_epochs);
    const auto it = cache_.find(epoch * size + slot);
    if (it != cache_.end()) return it->second;
  }
  const TrainingChunk c = stream_.chunk(epoch, slot);
  LatentPair pair{ae_.encode(c.hr.samples).latent, ae_.encode(c.lr.samples).latent};
  if (cached) cache_.emplace(epoch * size + slot, pair);
  return pair;
}

json CfmTrainer::step() {
  const auto start = std::chrono::steady_clock::now();
  const long step_no = step_ + 1;
  const double lr = current_lr();
  const auto batch = static_cast<std::size_t>(cfg_.cfm.batch);
  const std::uint64_t base = static_cast<std::uint64_t>(step_) * batch;

  std::vector<LatentPair> pairs(batch);
  if (cfg_.cfm.cache_epochs > 0) {
    for (std::size_t b = 0; b < batch; ++b) pairs[b] = latents(base + b);
  } else {
    parallel_for(batch, cfg_.data.workers, [&](std::size_t b) {
      const std::size_t size = stream_.epoch_size();
      const std::uint64_t s = base + b;
      const TrainingChunk c = stream_.chunk(s / size, static_cast<std::size_t>(s % size));
      pairs[b] = {ae_.encode(c.hr.samples).latent, ae_.encode(c.lr.samples).latent};
    });
  }

  const std::mt19937_64 rng_before = rng_;
  std::uniform_real_distribution<double> uniform(0.0, 1.0);
  std::vector<FlowPath<float>> paths;
  std::vector<Latent<float>> conds;
  for (auto& p : pairs) {
    const auto t = static_cast<float>(uniform(rng_));
    paths.push_back(sample_path(p.hr, rng_, t));
    conds.push_back(std::move(p.lr));
  }

  ad::Tape<float> tape;
  const auto loss = cfm_loss(tape, as_model(net_), paths, conds);
  const double value = loss.value()(0, 0);
  if (!std::isfinite(value)) {
    rng_ = rng_before;
    throw NumericError(step_no, "non-finite flow-matching loss");
  }
  net_.parameters().zero_grad();
  tape.backward(loss);
  opt_.step(lr);

  step_ = step_no;
  return {{"step", step_no}, {"l_cfm", value}, {"lr", lr}, {"wall_ms", elapsed_ms(start)}};
}

Checkpoint CfmTrainer::checkpoint() const {
  Checkpoint ckpt;
  ckpt.module = "velocity_net";
  ckpt.config = {{"vnet", cfg_.vnet}, {"ae", cfg_.ae}, {"source_rate", source_rate_}, {"target_rate", target_rate_},
                 {"ae_fingerprint", hex(ae_fingerprint_)}};
  ckpt.put("vnet/", net_.parameters());
  opt_.save(ckpt, "opt/");
  ckpt.rng_state = rng_to_string(rng_);
  ckpt.step = step_;
  return ckpt;
}

void CfmTrainer::restore(const Checkpoint& ckpt) {
  expect_module(ckpt, "velocity_net");
  if (ckpt.config.value("ae_fingerprint", std::string()) != hex(ae_fingerprint_))
    throw config::ConfigError({"checkpoint was trained against a different autoencoder"});
  ckpt.get("vnet/", net_.parameters());
  opt_.load(ckpt, "opt/", ckpt.step);
  rng_from_string(rng_, ckpt.rng_state);
  step_ = ckpt.step;
}

// ---------------------------------------------------------------------------

Autoencoder<float> load_autoencoder(const Checkpoint& ckpt) {
  expect_module(ckpt, "autoencoder");
  AutoencoderConfig cfg;
  try {
    cfg = ckpt.config.at("ae").get<AutoencoderConfig>();
  } catch (const json::exception& e) {
    throw config::ConfigError({std::string("checkpoint config: ") + e.what()});
  }
  Autoencoder<float> ae(cfg, 0);
  ckpt.get("ae/", ae.parameters());
  return ae;
}

VelocityNet<float> load_velocity_net(const Checkpoint& ckpt) {
  expect_module(ckpt, "velocity_net");
  VelocityNetConfig cfg;
  try {
    cfg = ckpt.config.at("vnet").get<VelocityNetConfig>();
  } catch (const json::exception& e) {
    throw config::ConfigError({std::string("checkpoint config: ") + e.what()});
  }
  VelocityNet<float> net(cfg, 0);
  ckpt.get("vnet/", net.parameters());
  return net;
}

template <typename Trainer>
Checkpoint run_training(Trainer& trainer, const StageConfig& stage, const RunOptions& opts) {
  const long total = opts.total_steps >= 0 ? opts.total_steps : stage.steps;
  const long log_every = opts.log_every > 0 ? opts.log_every : stage.log_every;
  const long ckpt_every = opts.checkpoint_every >= 0 ? opts.checkpoint_every : stage.checkpoint_every;
  const bool persist = !opts.out_dir.empty();

  std::ofstream log;
  if (persist) {
    fs::create_directories(opts.out_dir);
    log.open(opts.out_dir / "train_log.jsonl", std::ios::app);
    if (!log) throw IoError("cannot open " + (opts.out_dir / "train_log.jsonl").string());
  }
  const auto save = [&](const Checkpoint& ckpt) {
    const fs::path final_dir = opts.out_dir / "checkpoint";
    const fs::path tmp = opts.out_dir / "checkpoint.tmp";
    const fs::path old = opts.out_dir / "checkpoint.old";
    fs::remove_all(tmp);
    save_checkpoint(ckpt, tmp);
    fs::remove_all(old);
    if (fs::exists(final_dir)) fs::rename(final_dir, old);
    fs::rename(tmp, final_dir);
    fs::remove_all(old);
  };

  while (trainer.steps_done() < total) {
    json record;
    try {
      record = trainer.step();
    } catch (const NumericError&) {
      if (persist) save(trainer.checkpoint());
      throw;
    }
    const long s = trainer.steps_done();
    if (s == 1 || s % log_every == 0 || s == total) {
      if (persist) log << record.dump() << '\n' << std::flush;
      if (opts.on_log) opts.on_log(record);
    }
    if (persist && ckpt_every > 0 && s % ckpt_every == 0 && s < total) save(trainer.checkpoint());
  }
  Checkpoint final_ckpt = trainer.checkpoint();
  if (persist) save(final_ckpt);
  return final_ckpt;
}

template Checkpoint run_training<AeTrainer>(AeTrainer&, const StageConfig&, const RunOptions&);
template Checkpoint run_training<CfmTrainer>(CfmTrainer&, const StageConfig&, const RunOptions&);

}  // namespace lfsr
