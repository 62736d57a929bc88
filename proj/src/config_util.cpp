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

#include "lfsr/config_util.hpp"

namespace lfsr::config {

namespace {

std::string join(const std::vector<std::string>& problems) {
  std::string out = "invalid configuration:";
  for (const auto& p : problems) out += "\n  " + p;
  return out;
}

}  // namespace

ConfigError::ConfigError(std::vector<std::string> problems)
    : std::runtime_error(join(problems)), problems_(std::move(problems)) {}

KeyReader::KeyReader(const nlohmann::json& section, std::string path)
    : section_(section), path_(std::move(path)) {
  if (!section_.is_object() && !section_.is_null()) {
    problems_.push_back(path_ + ": expected an object");
  }
}

void KeyReader::nested(const std::string& key,
                       const std::function<void(const nlohmann::json&, const std::string&)>& fn) {
  seen_.insert(key);
  static const nlohmann::json kNull;
  const bool present = section_.is_object() && section_.contains(key);
  try {
    fn(present ? section_.at(key) : kNull, path_ + "." + key);
  } catch (const ConfigError& e) {
    problems_.insert(problems_.end(), e.problems().begin(), e.problems().end());
  }
}

void KeyReader::finish() {
  if (section_.is_object()) {
    for (const auto& [key, value] : section_.items()) {
      if (!seen_.count(key)) problems_.push_back(path_ + "." + key + ": unknown key");
    }
  }
  if (!problems_.empty()) throw ConfigError(problems_);
}

}  // namespace lfsr::config
