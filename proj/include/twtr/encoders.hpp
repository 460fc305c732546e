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

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "twtr/text.hpp"
#include "twtr/types.hpp"

namespace twtr {

/// N x D_v patch embeddings for one sampled frame.
struct FramePatchFeatures {
  Matrix patches;
};

/// L x D_t token embeddings plus the tokens they were computed from.
struct TokenEmbeddings {
  Matrix tokens;
  std::vector<std::string> token_strings;
};

struct EncoderConfig {
  std::string kind = "stub";
  int n_patches = 4;
  int d_v = 512;
  int d_t = 768;
  std::uint64_t seed = 17;
};

class TextEncoder {
 public:
  virtual ~TextEncoder() = default;
  virtual TokenEmbeddings encode(const std::string& text) const = 0;
  virtual int dim() const = 0;
};

class FrameEncoder {
 public:
  virtual ~FrameEncoder() = default;
  virtual FramePatchFeatures encode(const std::string& frame_ref) const = 0;
};

/// Text encoder over word tokens. Each distinct token maps to a seeded
/// pseudo-random unit vector, so unrelated tokens are nearly orthogonal.
class StubTextEncoder : public TextEncoder {
 public:
  explicit StubTextEncoder(EncoderConfig config);

  TokenEmbeddings encode(const std::string& text) const override;
  int dim() const override { return config_.d_t; }
  RowVector token_vector(const std::string& token) const;
  const EncoderConfig& config() const { return config_; }

 private:
  EncoderConfig config_;
};

/// Frame encoder keyed by an opaque frame id: patch i of frame f is a
/// seeded vector derived from (f, i).
class StubFrameEncoder : public FrameEncoder {
 public:
  explicit StubFrameEncoder(EncoderConfig config);

  FramePatchFeatures encode(const std::string& frame_id) const override;
  const EncoderConfig& config() const { return config_; }

 private:
  EncoderConfig config_;
};

/// Precomputed features stored as a little-endian sidecar file: a header of
/// two uint32 values (N, D_v) followed by N x D_v float32 rows per frame.
class SidecarFeatures : public FrameEncoder {
 public:
  static SidecarFeatures load(const std::filesystem::path& path);
  static void write(const std::filesystem::path& path, const std::vector<FramePatchFeatures>& frames);

  std::size_t frame_count() const { return frames_.size(); }
  int n_patches() const { return n_patches_; }
  int d_v() const { return d_v_; }

  /// Frame reference is the frame's decimal position in the file.
  FramePatchFeatures encode(const std::string& frame_ref) const override;
  const FramePatchFeatures& frame(std::size_t frame_index) const;
  const std::vector<FramePatchFeatures>& frames() const { return frames_; }

 private:
  int n_patches_ = 0;
  int d_v_ = 0;
  std::vector<FramePatchFeatures> frames_;
};

/// Frame indices at `rate_fps`, capped at `max_frames` by evenly spaced
/// floor-rounded subsampling. A clip shorter than one sampling period still
/// yields its first frame.
std::vector<std::size_t> sample_frames(double video_length_s, double rate_fps, std::size_t max_frames);

/// Evenly spaced subset of {0..count-1} with at most `max_frames` entries.
std::vector<std::size_t> subsample_uniform(std::size_t count, std::size_t max_frames);

}  // namespace twtr
