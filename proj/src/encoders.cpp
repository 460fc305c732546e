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

#include "twtr/encoders.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <random>

namespace twtr {

namespace {

RowVector seeded_unit_vector(std::uint64_t key, int dim) {
  std::mt19937_64 rng(key);
  std::normal_distribution<Real> normal(0.0, 1.0);
  RowVector v(dim);
  for (int i = 0; i < dim; ++i) v(i) = normal(rng);
  const Real n = v.norm();
  return n > 0 ? RowVector(v / n) : v;
}

void check_dims(const EncoderConfig& c) {
  if (c.n_patches < 1 || c.d_v < 1 || c.d_t < 1) throw Error("encoder dimensions must be positive");
}

std::uint32_t read_u32(std::istream& in) {
  unsigned char b[4];
  if (!in.read(reinterpret_cast<char*>(b), 4)) throw Error("truncated sidecar header");
  return std::uint32_t(b[0]) | std::uint32_t(b[1]) << 8 | std::uint32_t(b[2]) << 16 |
         std::uint32_t(b[3]) << 24;
}

void write_u32(std::ostream& out, std::uint32_t v) {
  const unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                              static_cast<unsigned char>(v >> 16), static_cast<unsigned char>(v >> 24)};
  out.write(reinterpret_cast<const char*>(b), 4);
}

}  // namespace

StubTextEncoder::StubTextEncoder(EncoderConfig config) : config_(std::move(config)) {
  check_dims(config_);
}

RowVector StubTextEncoder::token_vector(const std::string& token) const {
  return seeded_unit_vector(fnv1a64(token, fnv1a64("text", config_.seed)), config_.d_t);
}

TokenEmbeddings StubTextEncoder::encode(const std::string& text) const {
  auto tokens = token_strings(text);
  if (tokens.empty()) throw Error("cannot encode empty text");
  TokenEmbeddings out;
  out.tokens.resize(static_cast<Eigen::Index>(tokens.size()), config_.d_t);
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    out.tokens.row(static_cast<Eigen::Index>(i)) = token_vector(tokens[i]);
  }
  out.token_strings = std::move(tokens);
  return out;
}

StubFrameEncoder::StubFrameEncoder(EncoderConfig config) : config_(std::move(config)) {
  check_dims(config_);
}

FramePatchFeatures StubFrameEncoder::encode(const std::string& frame_id) const {
  if (frame_id.empty()) throw Error("unresolvable frame reference ''");
  FramePatchFeatures f;
  f.patches.resize(config_.n_patches, config_.d_v);
  const auto base = fnv1a64(frame_id, fnv1a64("frame", config_.seed));
  for (int i = 0; i < config_.n_patches; ++i) {
    f.patches.row(i) = seeded_unit_vector(base ^ (0x9e3779b97f4a7c15ULL * std::uint64_t(i + 1)), config_.d_v);
  }
  return f;
}

SidecarFeatures SidecarFeatures::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("unresolvable frame reference: cannot open " + path.string());
  SidecarFeatures s;
  s.n_patches_ = static_cast<int>(read_u32(in));
  s.d_v_ = static_cast<int>(read_u32(in));
  if (s.n_patches_ < 1 || s.d_v_ < 1) throw Error("bad sidecar header in " + path.string());
  const std::size_t per_frame = std::size_t(s.n_patches_) * std::size_t(s.d_v_);
  std::vector<unsigned char> buf(per_frame * 4);
  while (in.peek() != std::char_traits<char>::eof()) {
    if (!in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size()))) {
      throw Error("truncated frame in sidecar " + path.string());
    }
    FramePatchFeatures f;
    f.patches.resize(s.n_patches_, s.d_v_);
    for (std::size_t k = 0; k < per_frame; ++k) {
      const std::uint32_t bits = std::uint32_t(buf[4 * k]) | std::uint32_t(buf[4 * k + 1]) << 8 |
                                 std::uint32_t(buf[4 * k + 2]) << 16 | std::uint32_t(buf[4 * k + 3]) << 24;
      f.patches(static_cast<Eigen::Index>(k / s.d_v_), static_cast<Eigen::Index>(k % s.d_v_)) =
          std::bit_cast<float>(bits);
    }
    s.frames_.push_back(std::move(f));
  }
  return s;
}

void SidecarFeatures::write(const std::filesystem::path& path, const std::vector<FramePatchFeatures>& frames) {
  if (frames.empty()) throw Error("sidecar needs at least one frame");
  const auto n = frames.front().patches.rows();
  const auto d = frames.front().patches.cols();
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  write_u32(out, static_cast<std::uint32_t>(n));
  write_u32(out, static_cast<std::uint32_t>(d));
  for (const auto& f : frames) {
    if (f.patches.rows() != n || f.patches.cols() != d) throw Error("sidecar frames differ in shape");
    for (Eigen::Index r = 0; r < n; ++r) {
      for (Eigen::Index c = 0; c < d; ++c) {
        write_u32(out, std::bit_cast<std::uint32_t>(static_cast<float>(f.patches(r, c))));
      }
    }
  }
}

FramePatchFeatures SidecarFeatures::encode(const std::string& frame_ref) const {
  std::size_t index = 0;
  std::size_t used = 0;
  try {
    index = std::stoul(frame_ref, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || used != frame_ref.size()) throw Error("unresolvable frame reference '" + frame_ref + "'");
  return frame(index);
}

const FramePatchFeatures& SidecarFeatures::frame(std::size_t frame_index) const {
  if (frame_index >= frames_.size()) {
    throw Error("unresolvable frame reference #" + std::to_string(frame_index));
  }
  return frames_[frame_index];
}

std::vector<std::size_t> subsample_uniform(std::size_t count, std::size_t max_frames) {
  if (max_frames == 0) throw Error("max_frames must be at least 1");
  std::vector<std::size_t> out;
  if (count <= max_frames) {
    for (std::size_t i = 0; i < count; ++i) out.push_back(i);
    return out;
  }
  for (std::size_t i = 0; i < max_frames; ++i) out.push_back(i * count / max_frames);
  return out;
}

std::vector<std::size_t> sample_frames(double video_length_s, double rate_fps, std::size_t max_frames) {
  if (!(video_length_s > 0)) throw Error("video length must be positive");
  if (!(rate_fps > 0)) throw Error("sampling rate must be positive");
  const auto count = std::max<std::size_t>(1, static_cast<std::size_t>(std::floor(video_length_s * rate_fps)));
  return subsample_uniform(count, max_frames);
}

}  // namespace twtr
