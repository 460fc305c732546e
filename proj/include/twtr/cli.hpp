// Copyright 2026 The twtr Authors
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

#pragma once

#include <filesystem>
#include <iosfwd>
#include <cstdint>
#include <map>
#include <string>

namespace twtr {

/// Process exit codes of the command-line tool.
enum ExitCode : int {
  kExitOk = 0,
  kExitUsage = 1,
  kExitInputNotFound = 2,
  kExitDuplicateIds = 3,
  kExitSynthesisShortfall = 4,
  kExitBadCheckpoint = 5,
  kExitEmptyEvaluation = 6,
};

/// Layered key=value settings: built-in defaults, then a config file, then
/// command-line flags.
class Settings {
 public:
  Settings();

  /// Lines of "key = value"; '#' starts a comment. Unknown keys are errors.
  void merge_file(const std::filesystem::path& path);
  void set(const std::string& key, const std::string& value);

  const std::string& get(const std::string& key) const;
  int get_int(const std::string& key) const;
  std::uint64_t get_u64(const std::string& key) const;
  double get_double(const std::string& key) const;
  bool get_bool(const std::string& key) const;

  const std::map<std::string, std::string>& values() const { return values_; }
  std::uint64_t hash() const;

 private:
  std::map<std::string, std::string> values_;
};

/// Runs one command. Data goes to `out`, diagnostics to `err`.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace twtr
