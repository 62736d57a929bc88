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

#include "lfsr/checkpoint.hpp"

#include "lfsr/config_util.hpp"
#include "lfsr/errors.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <sstream>

namespace lfsr {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

static_assert(std::endian::native == std::endian::little, "payload is written in host byte order");

std::string fnv1a_hex(const char* data, std::size_t n) {
  std::uint64_t h = 1469598103934665603ULL;
  for (std::size_t i = 0; i < n; ++i) {
    h ^= static_cast<unsigned char>(data[i]);
    h *= 1099511628211ULL;
  }
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << h;
  return os.str();
}

}  // namespace

template <typename Scalar>
void Checkpoint::put(const std::string& prefix, const ParameterStore<Scalar>& store) {
  for (const auto& p : store.items()) arrays[prefix + p->name] = p->value.template cast<float>();
}

template <typename Scalar>
void Checkpoint::get(const std::string& prefix, ParameterStore<Scalar>& store) const {
  std::vector<std::string> problems;
  for (const auto& p : store.items()) {
    const std::string key = prefix + p->name;
    const auto it = arrays.find(key);
    if (it == arrays.end()) {
      problems.push_back(key + ": missing from checkpoint");
    } else if (it->second.rows() != p->value.rows() || it->second.cols() != p->value.cols()) {
      problems.push_back(key + ": checkpoint shape " + std::to_string(it->second.rows()) + "x" +
                         std::to_string(it->second.cols()) + " does not match configured " +
                         std::to_string(p->value.rows()) + "x" + std::to_string(p->value.cols()));
    }
  }
  if (!problems.empty()) throw config::ConfigError(std::move(problems));
  for (const auto& p : store.items()) p->value = arrays.at(prefix + p->name).template cast<Scalar>();
}

template void Checkpoint::put(const std::string&, const ParameterStore<float>&);
template void Checkpoint::put(const std::string&, const ParameterStore<double>&);
template void Checkpoint::get(const std::string&, ParameterStore<float>&) const;
template void Checkpoint::get(const std::string&, ParameterStore<double>&) const;

void save_checkpoint(const Checkpoint& ckpt, const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create checkpoint directory " + dir.string() + ": " + ec.message());

  json directory = json::object();
  std::string payload;
  for (const auto& [name, m] : ckpt.arrays) {
    // Row-major so the payload reads naturally as a (rows, cols) array.
    const Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> rm = m;
    const std::size_t bytes = sizeof(float) * static_cast<std::size_t>(rm.size());
    const std::size_t offset = payload.size();
    payload.append(reinterpret_cast<const char*>(rm.data()), bytes);
    directory[name] = {{"shape", {rm.rows(), rm.cols()}},
                       {"dtype", "float32"},
                       {"offset", offset},
                       {"fnv1a", fnv1a_hex(payload.data() + offset, bytes)}};
  }

  const json manifest = {{"format_version", kCheckpointVersion},
                         {"module", ckpt.module},
                         {"step", ckpt.step},
                         {"rng_state", ckpt.rng_state},
                         {"config", ckpt.config},
                         {"arrays", directory}};

  // Write to temporaries and rename so a crash never leaves a half checkpoint.
  const auto write = [&](const fs::path& target, const std::string& bytes) {
    const fs::path tmp = target.string() + ".tmp";
    {
      std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
      out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
      if (!out) throw IoError("cannot write " + tmp.string());
    }
    fs::rename(tmp, target, ec);
    if (ec) throw IoError("cannot rename " + tmp.string() + ": " + ec.message());
  };
  write(dir / "payload.bin", payload);
  write(dir / "manifest.json", manifest.dump(2) + "\n");
}

Checkpoint load_checkpoint(const fs::path& dir) {
  const fs::path manifest_path = dir / "manifest.json";
  std::ifstream mf(manifest_path);
  if (!mf) throw IoError("cannot open checkpoint manifest " + manifest_path.string());
  json manifest;
  try {
    manifest = json::parse(mf);
  } catch (const json::exception& e) {
    throw FormatError("manifest.json", std::string("malformed checkpoint manifest: ") + e.what());
  }

  Checkpoint ckpt;
  try {
    const int version = manifest.at("format_version").get<int>();
    if (version != kCheckpointVersion) throw UnsupportedVersionError(version);
    ckpt.module = manifest.at("module").get<std::string>();
    ckpt.step = manifest.at("step").get<long>();
    ckpt.rng_state = manifest.at("rng_state").get<std::string>();
    ckpt.config = manifest.at("config");
  } catch (const json::exception& e) {
    throw FormatError("manifest.json", std::string("incomplete checkpoint manifest: ") + e.what());
  }

  std::ifstream pf(dir / "payload.bin", std::ios::binary);
  if (!pf) throw IoError("cannot open checkpoint payload " + (dir / "payload.bin").string());
  const std::string payload((std::istreambuf_iterator<char>(pf)), std::istreambuf_iterator<char>());

  const json& directory = manifest.contains("arrays") ? manifest.at("arrays") : json::object();
  for (const auto& [name, entry] : directory.items()) {
    long long rows = 0, cols = 0, offset = 0;
    std::string dtype, checksum;
    try {
      rows = entry.at("shape").at(0).get<long long>();
      cols = entry.at("shape").at(1).get<long long>();
      offset = entry.at("offset").get<long long>();
      dtype = entry.at("dtype").get<std::string>();
      checksum = entry.at("fnv1a").get<std::string>();
    } catch (const json::exception& e) {
      throw IntegrityError(name, std::string("malformed directory entry: ") + e.what());
    }
    if (dtype != "float32") throw IntegrityError(name, "unsupported dtype " + dtype);
    if (rows < 0 || cols < 0 || offset < 0) throw IntegrityError(name, "negative shape or offset");
    const unsigned long long bytes = sizeof(float) * static_cast<unsigned long long>(rows) * cols;
    if (static_cast<unsigned long long>(offset) + bytes > payload.size())
      throw IntegrityError(name, "extends past the end of the payload");
    if (fnv1a_hex(payload.data() + offset, bytes) != checksum)
      throw IntegrityError(name, "checksum mismatch (shape or offset does not match payload)");
    Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> rm(rows, cols);
    if (bytes > 0) std::memcpy(rm.data(), payload.data() + offset, bytes);
    ckpt.arrays[name] = rm;
  }
  return ckpt;
}

}  // namespace lfsr
