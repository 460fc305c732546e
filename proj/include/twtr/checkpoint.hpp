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
#include <string>

#include "twtr/encoders.hpp"
#include "twtr/model.hpp"

namespace twtr {

/// Raised for unreadable, truncated or tampered checkpoints.
class CheckpointError : public Error {
 public:
  using Error::Error;
};

struct Checkpoint {
  ModelParameters params;
  EncoderConfig encoder;
};

/// Binary little-endian layout:
///   "TWTRCKPT" u32 version
///   u64 n + n bytes of JSON {"model": ..., "encoder": ...}
///   u64 FNV-1a hash of the model config JSON
///   u32 tensor count, then per tensor: u32 name length, name, u64 rows,
///   u64 cols, rows*cols float64 in row-major order
///   u64 FNV-1a hash of every preceding byte
void save_checkpoint(const std::filesystem::path& path, const Checkpoint& checkpoint);
Checkpoint load_checkpoint(const std::filesystem::path& path);

std::string to_json(const EncoderConfig& config);
EncoderConfig encoder_config_from_json(const std::string& json);

}  // namespace twtr
