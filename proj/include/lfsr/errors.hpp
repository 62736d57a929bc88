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

// Error taxonomy. Argument errors use std::invalid_argument; configuration
// errors live in config_util.hpp.

#pragma once

#include <stdexcept>
#include <string>

namespace lfsr {

/// Malformed file content; carries the RIFF chunk id (or other section) at fault.
class FormatError : public std::runtime_error {
 public:
  FormatError(std::string chunk, const std::string& what)
      : std::runtime_error(what + " [chunk '" + chunk + "']"), chunk_(std::move(chunk)) {}
  const std::string& chunk() const { return chunk_; }

 private:
  std::string chunk_;
};

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A non-finite value appeared; `step` is the solver or training step.
class NumericError : public std::runtime_error {
 public:
  NumericError(long step, const std::string& what)
      : std::runtime_error(what + " at step " + std::to_string(step)), step_(step) {}
  long step() const { return step_; }

 private:
  long step_;
};

/// Checkpoint payload inconsistent with its manifest; names the array.
class IntegrityError : public std::runtime_error {
 public:
  IntegrityError(std::string array, const std::string& what)
      : std::runtime_error("array '" + array + "': " + what), array_(std::move(array)) {}
  const std::string& array() const { return array_; }

 private:
  std::string array_;
};

class UnsupportedVersionError : public std::runtime_error {
 public:
  explicit UnsupportedVersionError(int version)
      : std::runtime_error("unsupported checkpoint format_version " + std::to_string(version)),
        version_(version) {}
  int version() const { return version_; }

 private:
  int version_;
};

}  // namespace lfsr
