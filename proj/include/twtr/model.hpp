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

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "twtr/autograd.hpp"
#include "twtr/corpus.hpp"
#include "twtr/encoders.hpp"
#include "twtr/event_structures.hpp"
#include "twtr/types.hpp"

namespace twtr {

enum class Fusion { pairwise, single_stream };

/// Relation links scored by the model, in explanation tie-break order.
enum class Link : int { vs = 0, vc = 1, cs = 2 };
inline constexpr std::array<Link, 3> kLinks = {Link::vs, Link::vc, Link::cs};

/// Modality slots of the fusion transformers; also rows of their type tables.
enum class Slot : int { video = 0, screen = 1, speech = 2, claim = 3 };

struct ModelConfig {
  int d_model = 512;
  int d_text = 768;
  int d_visual = 512;
  int n_patches = 4;
  int aoa_layers = 2;
  int aoa_heads = 4;
  int fuse_layers = 1;
  int fuse_heads = 4;
  int ffn_mult = 2;
  int max_text_tokens = 64;
  int max_sequence = 64;
  bool text_positions = true;
  double threshold = 0.5;
  std::uint64_t seed = 7;

  // Ablation switches.
  bool event_alert = true;
  Fusion fusion = Fusion::pairwise;
  std::array<bool, 3> links = {true, true, true};

  bool link_active(Link l) const { return links[static_cast<int>(l)]; }
  void validate() const;
};

std::string to_json(const ModelConfig& config);
ModelConfig model_config_from_json(const std::string& json);
std::uint64_t config_hash(const ModelConfig& config);

/// Named dense tensors. A tensor's group is the part of its name before the
/// first '.', e.g. "aoa_text.0.wq" belongs to "aoa_text".
class ModelParameters {
 public:
  using Map = std::map<std::string, Matrix>;

  ModelParameters() = default;
  ModelParameters(ModelConfig config, Map tensors);

  /// Seeded initialization; the combiner's output layer starts at zero so an
  /// untrained model predicts exactly 0.5.
  static ModelParameters initialize(const ModelConfig& config);

  /// Same names and shapes, all zeros.
  ModelParameters zeros_like() const;

  const ModelConfig& config() const { return config_; }
  const Map& tensors() const { return tensors_; }
  Map& tensors() { return tensors_; }
  const Matrix& at(const std::string& name) const;
  Matrix& at(const std::string& name);
  bool contains(const std::string& name) const { return tensors_.count(name) > 0; }
  std::size_t parameter_count() const;
  bool all_finite() const;

  static std::string group_of(const std::string& name);
  std::vector<std::string> groups() const;

 private:
  ModelConfig config_;
  Map tensors_;
};

struct ConsistencyScores {
  double c_vs = 0.5;
  double c_vc = 0.5;
  double c_cs = 0.5;
  RowVector r_vs;
  RowVector r_vc;
  RowVector r_cs;

  double operator[](Link l) const;
};

struct Verdict {
  double p_inconsistent = 0.5;
  Label predicted_label = Label::consistent;
  Modality explanation = Modality::none;
  ConsistencyScores scores;
};

/// Model-ready text: token rows, alert indices and validity mask. Rows with
/// mask == false are padding and never influence any output.
struct TextInput {
  Matrix tokens;
  AlertIndexSequence alert;
  Mask mask;
};

struct FrameInput {
  Matrix patches;
  Mask mask;
};

struct PostInput {
  TextInput claim;
  std::vector<TextInput> speech;
  std::vector<TextInput> screen_text;
  std::vector<FrameInput> frames;
  /// Validity of each frame slot; padded slots are skipped entirely.
  Mask frame_mask;
};

/// Turns records into model inputs with the configured text encoder and
/// event tagger. Texts longer than `max_text_tokens` are truncated.
class FeatureBuilder {
 public:
  FeatureBuilder(const TextEncoder& text_encoder, const EventTagger& tagger, int max_text_tokens);

  TextInput text(const std::string& text) const;
  PostInput build(const VideoPost& post, std::size_t max_frames) const;

 private:
  const TextEncoder& text_encoder_;
  const EventTagger& tagger_;
  int max_text_tokens_;
};

/// Unpadded input from raw matrices (all positions valid).
TextInput make_text_input(Matrix tokens, AlertIndexSequence alert);
FrameInput make_frame_input(Matrix patches);

/// Pads every text to the longest token count and every post to the longest
/// frame count in the batch, filling padded rows with `fill`.
std::vector<PostInput> pad_batch(const std::vector<PostInput>& batch, Real fill = 0.0);

// ---------------------------------------------------------------------------
// Differentiable graph. Every public model operation below is a thin
// evaluation wrapper around these builders, and training differentiates the
// same builders, so one code path serves both.
namespace graph {

using Tape = ag::Tape<Real>;
using Var = ag::Var<Real>;

/// Binds parameter tensors into a tape on first use. With a gradient store
/// attached, bound tensors accumulate their gradients there.
class Binder {
 public:
  Binder(Tape& tape, const ModelParameters& params, ModelParameters* grads = nullptr);

  Var operator()(const std::string& name);
  Tape& tape() { return tape_; }
  const ModelConfig& config() const { return params_.config(); }

 private:
  Tape& tape_;
  const ModelParameters& params_;
  ModelParameters* grads_;
  std::map<std::string, Var> bound_;
};

Var alert_gate(Binder& b, const AlertIndexSequence& indices, const Mask& mask);
Var gate_project(Binder& b, Var tokens, Var gates, const std::string& projection);
Var aoa_layer(Binder& b, const std::string& prefix, Var x, const ag::Blocks& blocks);
Var aoa_stack(Binder& b, const std::string& stack, Var x, const ag::Blocks& blocks);

// The builders below take many independent sequences at once and return one
// row per sequence. Padded rows are dropped before anything is computed.

struct TextRef {
  const TextInput* text;
  std::string projection;
};
/// [cls] output of the text stack for every text.
Var encode_texts(Binder& b, const std::vector<TextRef>& texts);
/// Masked mean of the patch stack output for every frame.
Var encode_frames(Binder& b, const std::vector<const FrameInput*>& frames);

/// Rows of `source` forming one modality of a fused sequence.
struct Segment {
  Slot slot;
  std::vector<Eigen::Index> rows;
};
using Sequence = std::vector<Segment>;
/// [cls] output of a fusion transformer for every sequence.
Var fuse(Binder& b, const std::string& fuser, Var source, const std::vector<Sequence>& sequences);
/// One score per relation row.
Var score_head(Binder& b, Link link, Var relations);
/// One probability per record from n x 1 score columns of the active links.
Var combine(Binder& b, const std::array<std::optional<Var>, 3>& scores);

/// Row i of every member belongs to batch[i].
struct ForwardTrace {
  Var p_inconsistent;
  std::array<std::optional<Var>, 3> scores;
  std::array<std::optional<Var>, 3> relations;
};
ForwardTrace forward(Binder& b, const std::vector<const PostInput*>& batch);

}  // namespace graph

// ---------------------------------------------------------------------------
// Evaluation API.

/// L x D gate rows looked up from the three-row gate table.
Matrix alert_gate(const AlertIndexSequence& indices, const ModelParameters& params);

/// gates .* tanh(tokens * W + b) with W, b from projection "proj_claim",
/// "proj_speech", "proj_screen" or "proj_patch".
Matrix gate_project(const Matrix& tokens, const Matrix& gates, const ModelParameters& params,
                    const std::string& projection);

/// Prepends the learned [cls] row, runs the AoA stack and returns the [cls] output.
RowVector aoa_encode(const Matrix& sequence, const Mask& mask, const ModelParameters& params,
                     const std::string& stack = "aoa_text");

RowVector encode_frame(const FrameInput& frame, const ModelParameters& params);

/// [cls] output of a fusion transformer over the present segments; absent
/// modalities are simply not passed.
RowVector pairwise_fuse(const std::vector<std::pair<Slot, Matrix>>& segments, const ModelParameters& params,
                        const std::string& fuser);

ConsistencyScores score(const RowVector& r_vs, const RowVector& r_vc, const RowVector& r_cs,
                        const ModelParameters& params);

/// Probability of "inconsistent" from the three link scores.
double predict(const ConsistencyScores& scores, const ModelParameters& params);

Label decide(double p_inconsistent, double threshold = 0.5);

/// Shared modality of the two lowest-scoring links. Ties are broken in link
/// order vs < vc < cs; NaN scores (links removed by ablation) rank last.
Modality explain(const ConsistencyScores& scores);
Modality explain(const Verdict& verdict);

Verdict forward(const PostInput& input, const ModelParameters& params);
std::vector<Verdict> forward_batch(const std::vector<PostInput>& batch, const ModelParameters& params);

/// Mean cross-entropy of a batch and, when `grads` is given, its gradient
/// accumulated into `grads`. Per-record probabilities go to `probabilities`
/// when given.
double loss_and_gradient(const std::vector<const PostInput*>& batch, const std::vector<Label>& labels,
                         const ModelParameters& params, ModelParameters* grads,
                         std::vector<double>* probabilities = nullptr);

}  // namespace twtr
