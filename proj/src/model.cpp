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

#include "twtr/model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include <nlohmann/json.hpp>

namespace twtr {

using nlohmann::json;

namespace {

constexpr const char* kLinkName[3] = {"vs", "vc", "cs"};
constexpr Real kEmbedStd = 0.02;

std::string link_name(Link l) { return kLinkName[static_cast<int>(l)]; }

Mask all_valid(Eigen::Index n) { return Mask::Constant(n, true); }

// Rows with mask == true, in order.
Matrix valid_rows(const Matrix& m, const Mask& mask) {
  if (mask.size() != m.rows()) throw Error("mask length does not match row count");
  Matrix out(mask.count(), m.cols());
  Eigen::Index r = 0;
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    if (mask(i)) out.row(r++) = m.row(i);
  }
  return out;
}

class Initializer {
 public:
  explicit Initializer(std::uint64_t seed) : rng_(seed) {}

  Matrix normal(Eigen::Index rows, Eigen::Index cols, Real stddev, Real mean = 0.0) {
    std::normal_distribution<Real> dist(0.0, 1.0);
    Matrix m(rows, cols);
    for (Eigen::Index c = 0; c < cols; ++c) {
      for (Eigen::Index r = 0; r < rows; ++r) m(r, c) = mean + stddev * dist(rng_);
    }
    return m;
  }
  Matrix xavier(Eigen::Index fan_in, Eigen::Index fan_out) {
    return normal(fan_in, fan_out, std::sqrt(2.0 / Real(fan_in + fan_out)));
  }

 private:
  std::mt19937_64 rng_;
};

void add_attention_block(ModelParameters::Map& t, Initializer& init, const std::string& p, int d) {
  for (const char* w : {"wq", "wk", "wv"}) t[p + "." + w] = init.xavier(d, d);
  for (const char* bias : {"bq", "bk", "bv"}) t[p + "." + bias] = Matrix::Zero(1, d);
}

void add_layer_norm(ModelParameters::Map& t, const std::string& p, int d) {
  t[p + "_g"] = Matrix::Ones(1, d);
  t[p + "_b"] = Matrix::Zero(1, d);
}

void add_aoa_stack(ModelParameters::Map& t, Initializer& init, const std::string& stack, const ModelConfig& c) {
  const int d = c.d_model;
  for (int l = 0; l < c.aoa_layers; ++l) {
    const auto p = stack + "." + std::to_string(l);
    add_attention_block(t, init, p, d);
    t[p + ".wi"] = init.xavier(2 * d, d);
    t[p + ".bi"] = Matrix::Zero(1, d);
    t[p + ".wg"] = init.xavier(2 * d, d);
    t[p + ".bg"] = Matrix::Zero(1, d);
    add_layer_norm(t, p + ".ln", d);
  }
}

void add_fuser(ModelParameters::Map& t, Initializer& init, const std::string& fuser, const ModelConfig& c) {
  const int d = c.d_model;
  const int ff = c.ffn_mult * d;
  t[fuser + ".cls"] = init.normal(1, d, kEmbedStd);
  t[fuser + ".type"] = init.normal(4, d, kEmbedStd);
  t[fuser + ".pos"] = init.normal(c.max_sequence, d, kEmbedStd);
  for (int l = 0; l < c.fuse_layers; ++l) {
    const auto p = fuser + "." + std::to_string(l);
    add_attention_block(t, init, p, d);
    t[p + ".wo"] = init.xavier(d, d);
    t[p + ".bo"] = Matrix::Zero(1, d);
    add_layer_norm(t, p + ".ln1", d);
    t[p + ".w1"] = init.xavier(d, ff);
    t[p + ".b1"] = Matrix::Zero(1, ff);
    t[p + ".w2"] = init.xavier(ff, d);
    t[p + ".b2"] = Matrix::Zero(1, d);
    add_layer_norm(t, p + ".ln2", d);
  }
}

}  // namespace

// ---------------------------------------------------------------------------
// Config

void ModelConfig::validate() const {
  if (d_model < 1 || d_text < 1 || d_visual < 1 || n_patches < 1) throw Error("model dimensions must be positive");
  if (aoa_layers < 1 || fuse_layers < 1) throw Error("layer counts must be positive");
  if (aoa_heads < 1 || d_model % aoa_heads != 0) throw Error("d_model must be divisible by aoa_heads");
  if (fuse_heads < 1 || d_model % fuse_heads != 0) throw Error("d_model must be divisible by fuse_heads");
  if (ffn_mult < 1 || max_text_tokens < 1 || max_sequence < 1) throw Error("bad model sizes");
  if (!(threshold > 0 && threshold < 1)) throw Error("threshold must lie in (0, 1)");
  if (!(links[0] || links[1] || links[2])) throw Error("at least one relation link must be active");
}

std::string to_json(const ModelConfig& c) {
  json j{{"d_model", c.d_model},
         {"d_text", c.d_text},
         {"d_visual", c.d_visual},
         {"n_patches", c.n_patches},
         {"aoa_layers", c.aoa_layers},
         {"aoa_heads", c.aoa_heads},
         {"fuse_layers", c.fuse_layers},
         {"fuse_heads", c.fuse_heads},
         {"ffn_mult", c.ffn_mult},
         {"max_text_tokens", c.max_text_tokens},
         {"max_sequence", c.max_sequence},
         {"text_positions", c.text_positions},
         {"threshold", c.threshold},
         {"seed", c.seed},
         {"event_alert", c.event_alert},
         {"fusion", c.fusion == Fusion::pairwise ? "pairwise" : "single_stream"},
         {"links", c.links}};
  return j.dump();
}

ModelConfig model_config_from_json(const std::string& text) {
  const auto j = json::parse(text);
  ModelConfig c;
  c.d_model = j.at("d_model");
  c.d_text = j.at("d_text");
  c.d_visual = j.at("d_visual");
  c.n_patches = j.at("n_patches");
  c.aoa_layers = j.at("aoa_layers");
  c.aoa_heads = j.at("aoa_heads");
  c.fuse_layers = j.at("fuse_layers");
  c.fuse_heads = j.at("fuse_heads");
  c.ffn_mult = j.at("ffn_mult");
  c.max_text_tokens = j.at("max_text_tokens");
  c.max_sequence = j.at("max_sequence");
  c.text_positions = j.at("text_positions");
  c.threshold = j.at("threshold");
  c.seed = j.at("seed");
  c.event_alert = j.at("event_alert");
  c.fusion = j.at("fusion").get<std::string>() == "pairwise" ? Fusion::pairwise : Fusion::single_stream;
  c.links = j.at("links").get<std::array<bool, 3>>();
  c.validate();
  return c;
}

std::uint64_t config_hash(const ModelConfig& config) { return fnv1a64(to_json(config)); }

// ---------------------------------------------------------------------------
// Parameters

ModelParameters::ModelParameters(ModelConfig config, Map tensors)
    : config_(std::move(config)), tensors_(std::move(tensors)) {}

ModelParameters ModelParameters::initialize(const ModelConfig& c) {
  c.validate();
  Initializer init(c.seed);
  const int d = c.d_model;
  Map t;
  t["gate_table"] = init.normal(3, d, 0.1, 1.0);
  t["proj_claim.w"] = init.xavier(c.d_text, d);
  t["proj_speech.w"] = init.xavier(c.d_text, d);
  t["proj_screen.w"] = init.xavier(c.d_text, d);
  t["proj_patch.w"] = init.xavier(c.d_visual, d);
  for (const char* p : {"proj_claim.b", "proj_speech.b", "proj_screen.b", "proj_patch.b"}) t[p] = Matrix::Zero(1, d);
  t["embed.cls_text"] = init.normal(1, d, kEmbedStd);
  t["embed.pos_text"] = init.normal(c.max_text_tokens, d, kEmbedStd);
  t["embed.pos_patch"] = init.normal(c.n_patches, d, kEmbedStd);
  add_aoa_stack(t, init, "aoa_text", c);
  add_aoa_stack(t, init, "aoa_patch", c);
  for (Link l : kLinks) add_fuser(t, init, "fuser_" + link_name(l), c);
  add_fuser(t, init, "fuser_single", c);
  for (Link l : kLinks) {
    const auto p = "head_" + link_name(l);
    t[p + ".w1"] = init.xavier(d, d);
    t[p + ".b1"] = Matrix::Zero(1, d);
    t[p + ".w2"] = init.xavier(d, 1);
    t[p + ".b2"] = Matrix::Zero(1, 1);
  }
  t["combiner.w_in"] = init.normal(1, d, 1.0);
  t["combiner.type"] = init.normal(3, d, kEmbedStd);
  for (const char* w : {"combiner.wq", "combiner.wk", "combiner.wv"}) t[w] = init.xavier(d, d);
  t["combiner.w_out"] = Matrix::Zero(d, 1);
  t["combiner.b_out"] = Matrix::Zero(1, 1);
  return ModelParameters(c, std::move(t));
}

ModelParameters ModelParameters::zeros_like() const {
  Map t;
  for (const auto& [name, m] : tensors_) t[name] = Matrix::Zero(m.rows(), m.cols());
  return ModelParameters(config_, std::move(t));
}

const Matrix& ModelParameters::at(const std::string& name) const {
  auto it = tensors_.find(name);
  if (it == tensors_.end()) throw Error("unknown parameter '" + name + "'");
  return it->second;
}

Matrix& ModelParameters::at(const std::string& name) {
  auto it = tensors_.find(name);
  if (it == tensors_.end()) throw Error("unknown parameter '" + name + "'");
  return it->second;
}

std::size_t ModelParameters::parameter_count() const {
  std::size_t n = 0;
  for (const auto& [name, m] : tensors_) n += static_cast<std::size_t>(m.size());
  return n;
}

bool ModelParameters::all_finite() const {
  return std::all_of(tensors_.begin(), tensors_.end(), [](const auto& kv) { return kv.second.allFinite(); });
}

std::string ModelParameters::group_of(const std::string& name) { return name.substr(0, name.find('.')); }

std::vector<std::string> ModelParameters::groups() const {
  std::vector<std::string> out;
  for (const auto& [name, m] : tensors_) {
    auto g = group_of(name);
    if (out.empty() || out.back() != g) out.push_back(std::move(g));
  }
  return out;
}

double ConsistencyScores::operator[](Link l) const {
  switch (l) {
    case Link::vs:
      return c_vs;
    case Link::vc:
      return c_vc;
    case Link::cs:
      return c_cs;
  }
  return c_vs;
}

// ---------------------------------------------------------------------------
// Inputs

FeatureBuilder::FeatureBuilder(const TextEncoder& text_encoder, const EventTagger& tagger, int max_text_tokens)
    : text_encoder_(text_encoder), tagger_(tagger), max_text_tokens_(max_text_tokens) {
  if (max_text_tokens_ < 1) throw Error("max_text_tokens must be positive");
}

TextInput FeatureBuilder::text(const std::string& s) const {
  auto emb = text_encoder_.encode(s);
  const auto n = static_cast<std::size_t>(emb.tokens.rows());
  auto alert = to_alert_indices(n, tag_events(s, tagger_));
  const auto keep = std::min<std::size_t>(n, static_cast<std::size_t>(max_text_tokens_));
  alert.resize(keep);
  return make_text_input(emb.tokens.topRows(static_cast<Eigen::Index>(keep)), std::move(alert));
}

PostInput FeatureBuilder::build(const VideoPost& post, std::size_t max_frames) const {
  if (post.frames.empty()) throw Error("post '" + post.post_id + "' has no frames");
  PostInput in;
  in.claim = text(post.claim);
  for (const auto& s : post.speech_sentences) {
    if (!tokenize(s).empty()) in.speech.push_back(text(s));
  }
  for (const auto& s : post.screen_text_sentences) {
    if (!tokenize(s).empty()) in.screen_text.push_back(text(s));
  }
  for (auto i : subsample_uniform(post.frames.size(), max_frames)) {
    in.frames.push_back(make_frame_input(post.frames[i].patches));
  }
  in.frame_mask = all_valid(static_cast<Eigen::Index>(in.frames.size()));
  return in;
}

TextInput make_text_input(Matrix tokens, AlertIndexSequence alert) {
  if (static_cast<Eigen::Index>(alert.size()) != tokens.rows()) throw Error("alert indices do not match token count");
  const auto n = tokens.rows();
  return TextInput{std::move(tokens), std::move(alert), all_valid(n)};
}

FrameInput make_frame_input(Matrix patches) {
  const auto n = patches.rows();
  return FrameInput{std::move(patches), all_valid(n)};
}

std::vector<PostInput> pad_batch(const std::vector<PostInput>& batch, Real fill) {
  Eigen::Index max_tokens = 0;
  std::size_t max_frames = 0;
  auto visit = [&](const TextInput& t) { max_tokens = std::max(max_tokens, t.tokens.rows()); };
  for (const auto& p : batch) {
    visit(p.claim);
    for (const auto& t : p.speech) visit(t);
    for (const auto& t : p.screen_text) visit(t);
    max_frames = std::max(max_frames, p.frames.size());
  }
  auto pad_text = [&](const TextInput& t) {
    TextInput out;
    const auto n = t.tokens.rows();
    out.tokens = Matrix::Constant(max_tokens, t.tokens.cols(), fill);
    out.tokens.topRows(n) = t.tokens;
    out.alert = t.alert;
    out.alert.resize(static_cast<std::size_t>(max_tokens), 0);
    out.mask = Mask::Constant(max_tokens, false);
    out.mask.head(n) = t.mask;
    return out;
  };
  std::vector<PostInput> out;
  for (const auto& p : batch) {
    PostInput q;
    q.claim = pad_text(p.claim);
    for (const auto& t : p.speech) q.speech.push_back(pad_text(t));
    for (const auto& t : p.screen_text) q.screen_text.push_back(pad_text(t));
    q.frames = p.frames;
    q.frame_mask = Mask::Constant(static_cast<Eigen::Index>(max_frames), false);
    q.frame_mask.head(p.frame_mask.size()) = p.frame_mask;
    while (q.frames.size() < max_frames) {
      const auto& shape = p.frames.front().patches;
      q.frames.push_back(FrameInput{Matrix::Constant(shape.rows(), shape.cols(), fill),
                                    Mask::Constant(shape.rows(), false)});
    }
    out.push_back(std::move(q));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Graph

namespace graph {

Binder::Binder(Tape& tape, const ModelParameters& params, ModelParameters* grads)
    : tape_(tape), params_(params), grads_(grads) {}

Var Binder::operator()(const std::string& name) {
  auto it = bound_.find(name);
  if (it != bound_.end()) return it->second;
  const Matrix& value = params_.at(name);
  Var v = tape_.parameter(value, grads_ ? &grads_->at(name) : nullptr);
  bound_.emplace(name, v);
  return v;
}

Var alert_gate(Binder& b, const AlertIndexSequence& indices, const Mask& mask) {
  const auto n = static_cast<Eigen::Index>(indices.size());
  if (mask.size() != n) throw Error("alert mask length mismatch");
  if (!b.config().event_alert) return b.tape().constant(Matrix::Ones(n, b.config().d_model));
  std::vector<int> rows(indices.size(), 0);
  for (std::size_t i = 0; i < indices.size(); ++i) {
    if (!mask(static_cast<Eigen::Index>(i))) continue;
    if (indices[i] < 0 || indices[i] > 2) throw Error("alert index outside {0, 1, 2}");
    rows[i] = indices[i];
  }
  return ag::gather_rows(b("gate_table"), std::move(rows));
}

Var gate_project(Binder& b, Var tokens, Var gates, const std::string& projection) {
  Var h = ag::tanh(ag::add_row(ag::matmul(tokens, b(projection + ".w")), b(projection + ".b")));
  if (h.rows() != gates.rows() || h.cols() != gates.cols()) throw Error("gate_project: gate shape mismatch");
  return ag::hadamard(gates, h);
}

Var aoa_layer(Binder& b, const std::string& p, Var x, const ag::Blocks& blocks) {
  auto linear = [&](Var in, const std::string& w, const std::string& bias) {
    return ag::add_row(ag::matmul(in, b(p + "." + w)), b(p + "." + bias));
  };
  Var q = linear(x, "wq", "bq");
  Var k = linear(x, "wk", "bk");
  Var v = linear(x, "wv", "bv");
  Var attended = ag::multi_head_attention(q, k, v, all_valid(x.rows()), b.config().aoa_heads, blocks);
  Var qa = ag::concat_cols(q, attended);
  Var info = linear(qa, "wi", "bi");
  Var gate = ag::sigmoid(linear(qa, "wg", "bg"));
  return ag::layer_norm(x + ag::hadamard(gate, info), b(p + ".ln_g"), b(p + ".ln_b"));
}

Var aoa_stack(Binder& b, const std::string& stack, Var x, const ag::Blocks& blocks) {
  for (int l = 0; l < b.config().aoa_layers; ++l) x = aoa_layer(b, stack + "." + std::to_string(l), x, blocks);
  return x;
}

namespace {

// `table` row 0 is the [cls] embedding; texts[i] lists the table rows of text
// i. Runs every "[cls] + text" sequence through the text stack at once and
// returns the [cls] outputs, one row per text.
Var text_cls(Binder& b, Var table, const std::vector<std::vector<int>>& texts) {
  std::vector<int> order;
  std::vector<int> starts;
  ag::Blocks blocks;
  for (const auto& rows : texts) {
    starts.push_back(static_cast<int>(order.size()));
    blocks.emplace_back(order.size(), rows.size() + 1);
    order.push_back(0);
    order.insert(order.end(), rows.begin(), rows.end());
  }
  Var x = ag::gather_rows(table, std::move(order));
  return ag::gather_rows(aoa_stack(b, "aoa_text", x, blocks), std::move(starts));
}

Var transformer_layer(Binder& b, const std::string& p, Var x, const ag::Blocks& blocks) {
  auto linear = [&](Var in, const std::string& w, const std::string& bias) {
    return ag::add_row(ag::matmul(in, b(p + "." + w)), b(p + "." + bias));
  };
  Var attended = ag::multi_head_attention(linear(x, "wq", "bq"), linear(x, "wk", "bk"), linear(x, "wv", "bv"),
                                          all_valid(x.rows()), b.config().fuse_heads, blocks);
  Var h = ag::layer_norm(x + linear(attended, "wo", "bo"), b(p + ".ln1_g"), b(p + ".ln1_b"));
  Var ff = linear(ag::gelu(linear(h, "w1", "b1")), "w2", "b2");
  return ag::layer_norm(h + ff, b(p + ".ln2_g"), b(p + ".ln2_b"));
}

Var zero_row(Binder& b) { return b.tape().constant(Matrix::Zero(1, b.config().d_model)); }

}  // namespace

Var encode_texts(Binder& b, const std::vector<TextRef>& texts) {
  if (texts.empty()) throw Error("encode_texts: no texts");
  const auto& cfg = b.config();
  // One product per projection; std::map keeps the grouping order fixed.
  std::map<std::string, std::vector<std::size_t>> groups;
  for (std::size_t i = 0; i < texts.size(); ++i) {
    const TextInput& t = *texts[i].text;
    const auto n = t.tokens.rows();
    if (n < 1) throw Error("empty text input");
    if (static_cast<Eigen::Index>(t.alert.size()) != n || t.mask.size() != n) {
      throw Error("text input: tokens, alert indices and mask differ in length");
    }
    if (!t.mask.any()) throw Error("text input: every token is padding");
    if (cfg.text_positions && t.mask.count() > cfg.max_text_tokens) {
      throw Error("text: sequence longer than the " + std::to_string(cfg.max_text_tokens) + "-row position table");
    }
    groups[texts[i].projection].push_back(i);
  }
  std::vector<Var> parts = {b("embed.cls_text")};
  std::vector<std::vector<int>> rows_of(texts.size());
  int offset = 1;
  for (const auto& [projection, members] : groups) {
    Eigen::Index total = 0;
    for (auto i : members) total += texts[i].text->mask.count();
    Matrix tokens(total, texts[members.front()].text->tokens.cols());
    AlertIndexSequence alert;
    std::vector<int> pos;
    Eigen::Index r = 0;
    for (auto i : members) {
      const TextInput& t = *texts[i].text;
      if (t.tokens.cols() != tokens.cols()) throw Error("text input: token widths differ");
      int rank = 0;
      for (Eigen::Index j = 0; j < t.tokens.rows(); ++j) {
        if (!t.mask(j)) continue;
        tokens.row(r++) = t.tokens.row(j);
        alert.push_back(t.alert[static_cast<std::size_t>(j)]);
        pos.push_back(rank++);
        rows_of[i].push_back(offset++);
      }
    }
    Var h = gate_project(b, b.tape().constant(std::move(tokens)), alert_gate(b, alert, all_valid(total)),
                         projection);
    if (cfg.text_positions) h = h + ag::gather_rows(b("embed.pos_text"), std::move(pos));
    parts.push_back(h);
  }
  return text_cls(b, ag::concat_rows(parts), rows_of);
}

Var encode_frames(Binder& b, const std::vector<const FrameInput*>& frames) {
  if (frames.empty()) throw Error("encode_frames: no frames");
  const auto& cfg = b.config();
  Eigen::Index total = 0;
  for (const auto* f : frames) {
    if (f->patches.rows() < 1 || f->mask.size() != f->patches.rows()) throw Error("frame has no patches");
    if (!f->mask.any()) throw Error("frame: every patch is padding");
    if (f->mask.count() > cfg.n_patches) {
      throw Error("frame: sequence longer than the " + std::to_string(cfg.n_patches) + "-row position table");
    }
    total += f->mask.count();
  }
  Matrix patches(total, frames.front()->patches.cols());
  std::vector<int> pos;
  ag::Blocks blocks;
  Eigen::Index r = 0;
  for (const auto* f : frames) {
    if (f->patches.cols() != patches.cols()) throw Error("frame: patch widths differ");
    blocks.emplace_back(r, f->mask.count());
    int rank = 0;
    for (Eigen::Index j = 0; j < f->patches.rows(); ++j) {
      if (!f->mask(j)) continue;
      patches.row(r++) = f->patches.row(j);
      pos.push_back(rank++);
    }
  }
  Var v = ag::tanh(ag::add_row(ag::matmul(b.tape().constant(std::move(patches)), b("proj_patch.w")),
                               b("proj_patch.b")));
  v = v + ag::gather_rows(b("embed.pos_patch"), std::move(pos));
  return ag::block_mean_rows(aoa_stack(b, "aoa_patch", v, blocks), blocks);
}

Var fuse(Binder& b, const std::string& fuser, Var source, const std::vector<Sequence>& sequences) {
  if (sequences.empty()) throw Error("fuse: no sequences");
  const auto& cfg = b.config();
  // Row 0 of every lookup table below is the [cls] row or a zero row.
  std::vector<int> order;
  std::vector<int> pos;
  std::vector<int> type;
  std::vector<int> starts;
  ag::Blocks blocks;
  for (const auto& seq : sequences) {
    if (seq.empty()) throw Error("fuse: every modality is absent");
    starts.push_back(static_cast<int>(order.size()));
    const auto start = static_cast<Eigen::Index>(order.size());
    order.push_back(0);
    pos.push_back(0);
    type.push_back(0);
    for (const auto& seg : seq) {
      if (seg.rows.empty()) throw Error("fuse: malformed segment");
      if (static_cast<int>(seg.rows.size()) > cfg.max_sequence) {
        throw Error("fusion segment: sequence longer than the " + std::to_string(cfg.max_sequence) +
                    "-row position table");
      }
      for (std::size_t j = 0; j < seg.rows.size(); ++j) {
        if (seg.rows[j] < 0 || seg.rows[j] >= source.rows()) throw Error("fuse: segment row out of range");
        order.push_back(static_cast<int>(seg.rows[j]) + 1);
        pos.push_back(static_cast<int>(j) + 1);
        type.push_back(static_cast<int>(seg.slot) + 1);
      }
    }
    blocks.emplace_back(start, static_cast<Eigen::Index>(order.size()) - start);
  }
  Var x = ag::gather_rows(ag::concat_rows<Real>({b(fuser + ".cls"), source}), std::move(order)) +
          ag::gather_rows(ag::concat_rows<Real>({zero_row(b), b(fuser + ".pos")}), std::move(pos)) +
          ag::gather_rows(ag::concat_rows<Real>({zero_row(b), b(fuser + ".type")}), std::move(type));
  for (int l = 0; l < cfg.fuse_layers; ++l) x = transformer_layer(b, fuser + "." + std::to_string(l), x, blocks);
  return ag::gather_rows(x, std::move(starts));
}

Var score_head(Binder& b, Link link, Var relations) {
  const auto p = "head_" + link_name(link);
  Var h = ag::tanh(ag::add_row(ag::matmul(relations, b(p + ".w1")), b(p + ".b1")));
  return ag::sigmoid(ag::add_row(ag::matmul(h, b(p + ".w2")), b(p + ".b2")));
}

Var combine(Binder& b, const std::array<std::optional<Var>, 3>& scores) {
  std::vector<Var> active;
  std::vector<int> links;
  for (Link l : kLinks) {
    const auto& c = scores[static_cast<std::size_t>(l)];
    if (!c) continue;
    if (c->cols() != 1 || (!active.empty() && c->rows() != active.front().rows())) {
      throw Error("combine: scores must be columns of equal length");
    }
    active.push_back(*c);
    links.push_back(static_cast<int>(l));
  }
  if (active.empty()) throw Error("combine: no relation scores");
  const auto n = active.front().rows();
  const auto k = static_cast<Eigen::Index>(active.size());
  // Record-major rows: record r, link j sits at row r * k + j.
  std::vector<int> order;
  std::vector<int> type;
  ag::Blocks blocks;
  for (Eigen::Index r = 0; r < n; ++r) {
    blocks.emplace_back(r * k, k);
    for (Eigen::Index j = 0; j < k; ++j) {
      order.push_back(static_cast<int>(j * n + r));
      type.push_back(links[static_cast<std::size_t>(j)]);
    }
  }
  Var c = ag::gather_rows(ag::concat_rows(active), std::move(order));
  Var e = ag::matmul(c, b("combiner.w_in")) + ag::gather_rows(b("combiner.type"), std::move(type));
  Var attended = ag::multi_head_attention(ag::matmul(e, b("combiner.wq")), ag::matmul(e, b("combiner.wk")),
                                          ag::matmul(e, b("combiner.wv")), all_valid(e.rows()), 1, blocks);
  Var pooled = ag::block_mean_rows(attended, blocks);
  return ag::sigmoid(ag::add_row(ag::matmul(pooled, b("combiner.w_out")), b("combiner.b_out")));
}

ForwardTrace forward(Binder& b, const std::vector<const PostInput*>& batch) {
  if (batch.empty()) throw Error("forward: empty batch");
  const auto& cfg = b.config();
  struct Layout {
    std::vector<Eigen::Index> frames;
    Eigen::Index claim = 0;
    std::vector<Eigen::Index> speech;
    std::vector<Eigen::Index> screen;
  };
  std::vector<Layout> layout(batch.size());
  std::vector<TextRef> texts;
  std::vector<const FrameInput*> frames;
  for (std::size_t r = 0; r < batch.size(); ++r) {
    const PostInput& in = *batch[r];
    if (in.frames.empty() || in.frame_mask.size() != static_cast<Eigen::Index>(in.frames.size()) ||
        !in.frame_mask.any()) {
      throw Error("forward: post needs at least one valid frame");
    }
    auto& lay = layout[r];
    for (std::size_t i = 0; i < in.frames.size(); ++i) {
      if (!in.frame_mask(static_cast<Eigen::Index>(i))) continue;
      lay.frames.push_back(static_cast<Eigen::Index>(frames.size()));
      frames.push_back(&in.frames[i]);
    }
    lay.claim = static_cast<Eigen::Index>(texts.size());
    texts.push_back({&in.claim, "proj_claim"});
    for (const auto& t : in.speech) {
      lay.speech.push_back(static_cast<Eigen::Index>(texts.size()));
      texts.push_back({&t, "proj_speech"});
    }
    for (const auto& t : in.screen_text) {
      lay.screen.push_back(static_cast<Eigen::Index>(texts.size()));
      texts.push_back({&t, "proj_screen"});
    }
  }
  const Var frame_rows = encode_frames(b, frames);
  const Var text_rows = encode_texts(b, texts);
  const Var source = ag::concat_rows<Real>({frame_rows, text_rows});
  const auto nf = frame_rows.rows();
  auto shifted = [nf](std::vector<Eigen::Index> rows) {
    for (auto& i : rows) i += nf;
    return rows;
  };

  auto segment = [&](const Layout& lay, Slot slot) -> std::optional<Segment> {
    switch (slot) {
      case Slot::video:
        return Segment{slot, lay.frames};
      case Slot::screen:
        if (lay.screen.empty()) return std::nullopt;
        return Segment{slot, shifted(lay.screen)};
      case Slot::speech:
        if (lay.speech.empty()) return std::nullopt;
        return Segment{slot, shifted(lay.speech)};
      case Slot::claim:
        return Segment{slot, {lay.claim + nf}};
    }
    return std::nullopt;
  };
  // Absent modalities are simply left out of the sequence.
  auto all = [&](std::initializer_list<Slot> slots) {
    std::vector<Sequence> out;
    for (const auto& lay : layout) {
      Sequence seq;
      for (Slot s : slots) {
        if (auto seg = segment(lay, s)) seq.push_back(std::move(*seg));
      }
      out.push_back(std::move(seq));
    }
    return out;
  };

  ForwardTrace trace;
  if (cfg.fusion == Fusion::pairwise) {
    if (cfg.link_active(Link::vs)) {
      trace.relations[0] = fuse(b, "fuser_vs", source, all({Slot::video, Slot::screen, Slot::speech}));
    }
    if (cfg.link_active(Link::vc)) {
      trace.relations[1] = fuse(b, "fuser_vc", source, all({Slot::video, Slot::screen, Slot::claim}));
    }
    if (cfg.link_active(Link::cs)) trace.relations[2] = fuse(b, "fuser_cs", source, all({Slot::claim, Slot::speech}));
  } else {
    const Var r = fuse(b, "fuser_single", source, all({Slot::video, Slot::screen, Slot::speech, Slot::claim}));
    for (Link l : kLinks) {
      if (cfg.link_active(l)) trace.relations[static_cast<std::size_t>(l)] = r;
    }
  }
  for (Link l : kLinks) {
    const auto k = static_cast<std::size_t>(l);
    if (trace.relations[k]) trace.scores[k] = score_head(b, l, *trace.relations[k]);
  }
  trace.p_inconsistent = combine(b, trace.scores);
  return trace;
}

}  // namespace graph

// ---------------------------------------------------------------------------
// Evaluation API

Matrix alert_gate(const AlertIndexSequence& indices, const ModelParameters& params) {
  graph::Tape tape;
  graph::Binder b(tape, params);
  return graph::alert_gate(b, indices, all_valid(static_cast<Eigen::Index>(indices.size()))).value();
}

Matrix gate_project(const Matrix& tokens, const Matrix& gates, const ModelParameters& params,
                    const std::string& projection) {
  graph::Tape tape;
  graph::Binder b(tape, params);
  return graph::gate_project(b, tape.constant(tokens), tape.constant(gates), projection).value();
}

RowVector aoa_encode(const Matrix& sequence, const Mask& mask, const ModelParameters& params,
                     const std::string& stack) {
  if (stack != "aoa_text") throw Error("aoa_encode: only the text stack carries a [cls] token");
  if (sequence.rows() < 1 || mask.size() != sequence.rows()) throw Error("aoa_encode: malformed sequence");
  if (!mask.any()) throw Error("aoa_encode: every position is padding");
  graph::Tape tape;
  graph::Binder b(tape, params);
  std::vector<int> rows;
  for (int i = 1; i <= mask.count(); ++i) rows.push_back(i);
  graph::Var table = ag::concat_rows<Real>({b("embed.cls_text"), tape.constant(valid_rows(sequence, mask))});
  return graph::text_cls(b, table, {rows}).value();
}

RowVector encode_frame(const FrameInput& frame, const ModelParameters& params) {
  graph::Tape tape;
  graph::Binder b(tape, params);
  return graph::encode_frames(b, {&frame}).value();
}

RowVector pairwise_fuse(const std::vector<std::pair<Slot, Matrix>>& segments, const ModelParameters& params,
                        const std::string& fuser) {
  graph::Tape tape;
  graph::Binder b(tape, params);
  if (segments.empty()) throw Error("fuse: every modality is absent");
  std::vector<graph::Var> parts;
  graph::Sequence seq;
  Eigen::Index next = 0;
  for (const auto& [slot, rows] : segments) {
    if (rows.rows() < 1) throw Error("fuse: malformed segment");
    parts.push_back(tape.constant(rows));
    graph::Segment seg{slot, {}};
    for (Eigen::Index i = 0; i < rows.rows(); ++i) seg.rows.push_back(next++);
    seq.push_back(std::move(seg));
  }
  return graph::fuse(b, fuser, ag::concat_rows(parts), {seq}).value();
}

ConsistencyScores score(const RowVector& r_vs, const RowVector& r_vc, const RowVector& r_cs,
                        const ModelParameters& params) {
  graph::Tape tape;
  graph::Binder b(tape, params);
  ConsistencyScores s;
  s.r_vs = r_vs;
  s.r_vc = r_vc;
  s.r_cs = r_cs;
  s.c_vs = graph::score_head(b, Link::vs, tape.constant(r_vs)).value()(0, 0);
  s.c_vc = graph::score_head(b, Link::vc, tape.constant(r_vc)).value()(0, 0);
  s.c_cs = graph::score_head(b, Link::cs, tape.constant(r_cs)).value()(0, 0);
  return s;
}

double predict(const ConsistencyScores& scores, const ModelParameters& params) {
  graph::Tape tape;
  graph::Binder b(tape, params);
  std::array<std::optional<graph::Var>, 3> c;
  for (Link l : kLinks) {
    if (params.config().link_active(l)) {
      c[static_cast<std::size_t>(l)] = tape.constant(Matrix::Constant(1, 1, scores[l]));
    }
  }
  return graph::combine(b, c).value()(0, 0);
}

Label decide(double p_inconsistent, double threshold) {
  return p_inconsistent >= threshold ? Label::inconsistent : Label::consistent;
}

Modality explain(const ConsistencyScores& scores) {
  std::vector<std::pair<double, Link>> ranked;
  for (Link l : kLinks) {
    const double v = scores[l];
    ranked.emplace_back(std::isnan(v) ? std::numeric_limits<double>::infinity() : v, l);
  }
  // stable_sort keeps vs < vc < cs among equal values.
  std::stable_sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
  const Link a = std::min(ranked[0].second, ranked[1].second);
  const Link b = std::max(ranked[0].second, ranked[1].second);
  if (a == Link::vs && b == Link::vc) return Modality::video;
  if (a == Link::vs && b == Link::cs) return Modality::speech;
  return Modality::claim;
}

Modality explain(const Verdict& verdict) {
  if (verdict.predicted_label != Label::inconsistent) throw Error("explain: verdict is consistent");
  return explain(verdict.scores);
}

namespace {

std::vector<Verdict> verdicts(const graph::ForwardTrace& trace, std::size_t n, const ModelConfig& config) {
  const double nan = std::numeric_limits<double>::quiet_NaN();
  std::vector<Verdict> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto row = static_cast<Eigen::Index>(i);
    auto c = [&](Link l) {
      const auto& s = trace.scores[static_cast<std::size_t>(l)];
      return s ? s->value()(row, 0) : nan;
    };
    auto r = [&](Link l) {
      const auto& s = trace.relations[static_cast<std::size_t>(l)];
      return s ? RowVector(s->value().row(row)) : RowVector();
    };
    Verdict& v = out[i];
    v.scores.c_vs = c(Link::vs);
    v.scores.c_vc = c(Link::vc);
    v.scores.c_cs = c(Link::cs);
    v.scores.r_vs = r(Link::vs);
    v.scores.r_vc = r(Link::vc);
    v.scores.r_cs = r(Link::cs);
    v.p_inconsistent = trace.p_inconsistent.value()(row, 0);
    v.predicted_label = decide(v.p_inconsistent, config.threshold);
    v.explanation = v.predicted_label == Label::inconsistent ? explain(v.scores) : Modality::none;
  }
  return out;
}

std::vector<Verdict> run_forward(const std::vector<const PostInput*>& batch, const ModelParameters& params) {
  graph::Tape tape;
  graph::Binder b(tape, params);
  return verdicts(graph::forward(b, batch), batch.size(), params.config());
}

}  // namespace

Verdict forward(const PostInput& input, const ModelParameters& params) { return run_forward({&input}, params).front(); }

std::vector<Verdict> forward_batch(const std::vector<PostInput>& batch, const ModelParameters& params) {
  if (batch.empty()) return {};
  const auto padded = pad_batch(batch);
  std::vector<const PostInput*> ptrs;
  for (const auto& p : padded) ptrs.push_back(&p);
  return run_forward(ptrs, params);
}

double loss_and_gradient(const std::vector<const PostInput*>& batch, const std::vector<Label>& labels,
                         const ModelParameters& params, ModelParameters* grads,
                         std::vector<double>* probabilities) {
  if (probabilities) probabilities->clear();
  if (batch.empty() || batch.size() != labels.size()) throw Error("loss: batch and labels differ in size");
  graph::Tape tape;
  graph::Binder b(tape, params, grads);
  const auto trace = graph::forward(b, batch);
  std::vector<Real> targets;
  for (auto l : labels) targets.push_back(l == Label::inconsistent ? 1.0 : 0.0);
  graph::Var loss = ag::scale(ag::binary_cross_entropy_sum(trace.p_inconsistent, std::move(targets)),
                              Real(1) / Real(batch.size()));
  if (probabilities) {
    const auto& p = trace.p_inconsistent.value();
    probabilities->assign(p.data(), p.data() + p.rows());
  }
  if (grads) tape.backward(loss);
  return loss.value()(0, 0);
}

}  // namespace twtr
