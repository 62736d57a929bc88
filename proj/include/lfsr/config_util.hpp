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

// Strict JSON section reading: every key must be known, errors carry the full
// dotted key path.

#pragma once

#include <nlohmann/json.hpp>

#include <functional>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

namespace lfsr::config {

class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(std::vector<std::string> problems);
  const std::vector<std::string>& problems() const { return problems_; }

 private:
  std::vector<std::string> problems_;
};

class KeyReader {
 public:
  KeyReader(const nlohmann::json& section, std::string path);

  /// Reads `key` into `out` when present; absent keys keep their default.
  template <typename T>
  void read(const std::string& key, T& out) {
    seen_.insert(key);
    if (!section_.is_object() || !section_.contains(key)) return;
    try {
      out = section_.at(key).template get<T>();
    } catch (const ConfigError& e) {
      problems_.insert(problems_.end(), e.problems().begin(), e.problems().end());
    } catch (const std::exception& e) {
      problems_.push_back(path_ + "." + key + ": " + e.what());
    }
  }

  /// Hands the sub-object at `key` (null when absent) and its dotted path to
  /// `fn`; ConfigErrors thrown by `fn` are merged into this reader.
  void nested(const std::string& key, const std::function<void(const nlohmann::json&, const std::string&)>& fn);

  /// Throws ConfigError if any key was unknown or failed to parse.
  void finish();

 private:
  const nlohmann::json& section_;
  std::string path_;
  std::set<std::string> seen_;
  std::vector<std::string> problems_;
};

}  // namespace lfsr::config
