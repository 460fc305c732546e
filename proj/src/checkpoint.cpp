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

#include "twtr/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

#include <nlohmann/json.hpp>

namespace twtr {

namespace {

constexpr char kMagic[8] = {'T', 'W', 'T', 'R', 'C', 'K', 'P', 'T'};
constexpr std::uint32_t kVersion = 1;

class Writer {
 public:
  void bytes(const void* p, std::size_t n) {
    const auto* c = static_cast<const char*>(p);
    buf_.insert(buf_.end(), c, c + n);
  }
  template <typename T>
  void integer(T v) {
    for (std::size_t i = 0; i < sizeof(T); ++i) buf_.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
  }
  void text(const std::string& s) { bytes(s.data(), s.size()); }
  const std::string& data() const { return buf_; }

 private:
  std::string buf_;
};

class Reader {
 public:
  explicit Reader(const std::string& buf, std::size_t end) : buf_(buf), end_(end) {}
  const char* take(std::size_t n) {
    if (n > end_ - pos_) throw CheckpointError("checkpoint is truncated");
    const char* p = buf_.data() + pos_;
    pos_ += n;
    return p;
  }
  template <typename T>
  T integer() {
    const auto* p = reinterpret_cast<const unsigned char*>(take(sizeof(T)));
    T v = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i) v |= T(p[i]) << (8 * i);
    return v;
  }
  std::string text(std::size_t n) { return std::string(take(n), n); }
  std::size_t position() const { return pos_; }

 private:
  const std::string& buf_;
  std::size_t end_;
  std::size_t pos_ = 0;
};

}  // namespace

std::string to_json(const EncoderConfig& c) {
  return nlohmann::json{{"kind", c.kind}, {"n_patches", c.n_patches}, {"d_v", c.d_v}, {"d_t", c.d_t}, {"seed", c.seed}}
      .dump();
}

EncoderConfig encoder_config_from_json(const std::string& text) {
  const auto j = nlohmann::json::parse(text);
  EncoderConfig c;
  c.kind = j.at("kind");
  c.n_patches = j.at("n_patches");
  c.d_v = j.at("d_v");
  c.d_t = j.at("d_t");
  c.seed = j.at("seed");
  return c;
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ck) {
  Writer w;
  w.bytes(kMagic, sizeof kMagic);
  w.integer<std::uint32_t>(kVersion);
  const auto model_json = to_json(ck.params.config());
  const auto meta = "{\"model\":" + model_json + ",\"encoder\":" + to_json(ck.encoder) + "}";
  w.integer<std::uint64_t>(meta.size());
  w.text(meta);
  w.integer<std::uint64_t>(fnv1a64(model_json));
  w.integer<std::uint32_t>(static_cast<std::uint32_t>(ck.params.tensors().size()));
  for (const auto& [name, m] : ck.params.tensors()) {
    w.integer<std::uint32_t>(static_cast<std::uint32_t>(name.size()));
    w.text(name);
    w.integer<std::uint64_t>(static_cast<std::uint64_t>(m.rows()));
    w.integer<std::uint64_t>(static_cast<std::uint64_t>(m.cols()));
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
      for (Eigen::Index c = 0; c < m.cols(); ++c) w.integer<std::uint64_t>(std::bit_cast<std::uint64_t>(m(r, c)));
    }
  }
  const auto digest = fnv1a64(w.data());
  w.integer<std::uint64_t>(digest);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write checkpoint " + path.string());
  out.write(w.data().data(), static_cast<std::streamsize>(w.data().size()));
  if (!out) throw Error("failed writing checkpoint " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw InputNotFound("input not found: " + path.string());
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("cannot open checkpoint " + path.string());
  const std::string buf((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (buf.size() < sizeof kMagic + 8 || std::memcmp(buf.data(), kMagic, sizeof kMagic) != 0) {
    throw CheckpointError("not a checkpoint: " + path.string());
  }
  const std::size_t body = buf.size() - 8;
  {
    Reader tail(buf, buf.size());
    tail.take(body);
    if (tail.integer<std::uint64_t>() != fnv1a64(std::string_view(buf.data(), body))) {
      throw CheckpointError("checkpoint content hash mismatch: " + path.string());
    }
  }
  Reader r(buf, body);
  r.take(sizeof kMagic);
  if (r.integer<std::uint32_t>() != kVersion) throw CheckpointError("unsupported checkpoint version");
  const auto meta_len = r.integer<std::uint64_t>();
  nlohmann::json meta;
  try {
    meta = nlohmann::json::parse(r.text(meta_len));
  } catch (const nlohmann::json::exception& e) {
    throw CheckpointError(std::string("corrupt checkpoint metadata: ") + e.what());
  }
  const auto model_json = meta.at("model").dump();
  if (r.integer<std::uint64_t>() != fnv1a64(model_json)) throw CheckpointError("checkpoint config hash mismatch");
  Checkpoint ck;
  ModelConfig config;
  try {
    config = model_config_from_json(model_json);
    ck.encoder = encoder_config_from_json(meta.at("encoder").dump());
  } catch (const std::exception& e) {
    throw CheckpointError(std::string("bad checkpoint config: ") + e.what());
  }
  const auto expected = ModelParameters::initialize(config);
  ModelParameters::Map tensors;
  const auto count = r.integer<std::uint32_t>();
  for (std::uint32_t t = 0; t < count; ++t) {
    const auto name = r.text(r.integer<std::uint32_t>());
    const auto rows = r.integer<std::uint64_t>();
    const auto cols = r.integer<std::uint64_t>();
    if (!expected.contains(name)) throw CheckpointError("unexpected tensor '" + name + "'");
    const auto& shape = expected.at(name);
    if (rows != std::uint64_t(shape.rows()) || cols != std::uint64_t(shape.cols())) {
      throw CheckpointError("tensor '" + name + "' has the wrong shape");
    }
    Matrix m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
      for (Eigen::Index j = 0; j < m.cols(); ++j) m(i, j) = std::bit_cast<double>(r.integer<std::uint64_t>());
    }
    tensors.emplace(name, std::move(m));
  }
  if (r.position() != body) throw CheckpointError("trailing bytes in checkpoint");
  if (tensors.size() != expected.tensors().size()) throw CheckpointError("checkpoint is missing tensors");
  ck.params = ModelParameters(config, std::move(tensors));
  if (!ck.params.all_finite()) throw CheckpointError("checkpoint contains non-finite values");
  return ck;
}

}  // namespace twtr
