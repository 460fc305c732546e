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
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "twtr/corpus.hpp"
#include "twtr/model.hpp"

namespace twtr {

struct TrainConfig {
  double learning_rate = 5e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  /// Weight matrices with more input rows than this take proportionally
  /// smaller steps, so wide models train at the same rate as narrow ones.
  /// 0 turns the scaling off.
  std::size_t reference_fan_in = 64;
  std::size_t batch_size = 16;
  std::size_t epochs = 50;
  std::size_t max_frames = 18;
  /// Epochs without a validation accuracy gain before stopping.
  std::size_t patience = 10;
  /// Stop as soon as training accuracy reaches this value.
  std::optional<double> target_train_accuracy;
  std::uint64_t seed = 7;

  void validate() const;
};

/// Step multiplier of one parameter tensor: min(1, reference_fan_in / rows)
/// for projection matrices, 1 for biases, norms and lookup tables.
double step_scale(const std::string& name, const Matrix& tensor, std::size_t reference_fan_in);

/// A record turned into model input, with what evaluation needs to know.
struct EncodedPost {
  std::string post_id;
  PostInput input;
  Label label = Label::consistent;
  Taxonomy taxonomy = Taxonomy::pristine;
};
using EncodedSet = std::vector<EncodedPost>;

/// Encodes every record with all of its frames.
EncodedSet encode_posts(const Corpus& corpus, const FeatureBuilder& features);

/// Same records, each keeping at most `max_frames` evenly spaced frames.
EncodedSet cap_frames(const EncodedSet& set, std::size_t max_frames);

class TrainingDiverged : public Error {
 public:
  using Error::Error;
};

struct EpochStats {
  std::size_t epoch = 0;
  double train_loss = 0.0;      // mean minibatch loss during the epoch
  double train_accuracy = 0.0;  // predictions made during the epoch
  std::optional<double> val_accuracy;
};

struct TrainResult {
  ModelParameters params;
  std::vector<EpochStats> curve;
  std::size_t best_epoch = 0;
  /// Largest |gradient| seen per parameter group over all steps.
  std::map<std::string, double> grad_max_abs;
};

/// Adam on mean cross-entropy. With a validation set the parameters of the
/// best validation epoch are returned (early stopping after `patience`
/// epochs without a gain); otherwise the final parameters are.
TrainResult train(const EncodedSet& train_set, const EncodedSet& val_set, const ModelParameters& init,
                  const TrainConfig& config);

struct Confusion {
  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t fn = 0;
  std::size_t tn = 0;
  std::size_t total() const { return tp + fp + fn + tn; }
};

struct TaxonomyBreakdown {
  std::size_t count = 0;
  std::size_t correct = 0;
};

struct EvalResult {
  Confusion confusion;
  double accuracy = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  /// Binary F1 on the inconsistent class; 1.0 when there are no positive
  /// labels and no positive predictions.
  double f1 = 0.0;
  /// Among correctly flagged inconsistent records, the share whose
  /// explanation names the manipulated modality; 0 when there are none.
  double explanation_accuracy = 0.0;
  std::map<Taxonomy, TaxonomyBreakdown> per_taxonomy;
};

class EmptyEvaluation : public Error {
 public:
  using Error::Error;
};

EvalResult metrics_from_confusion(const Confusion& c);

EvalResult evaluate(const ModelParameters& params, const EncodedSet& subset);

/// Inputs shared by the ablation protocols; every run starts from the same
/// seed.
struct Experiment {
  EncodedSet train;
  EncodedSet val;
  EncodedSet test;
  ModelConfig model;
  TrainConfig training;
};

struct AblationRow {
  std::string label;
  EvalResult result;
  std::map<std::string, double> grad_max_abs;
};
using AblationTable = std::vector<AblationRow>;

AblationTable ablate_frames(const Experiment& experiment, const std::vector<std::size_t>& frame_counts);
/// Rows: full model, without the event alert gate, without pairwise fusion.
AblationTable ablate_modules(const Experiment& experiment);
/// Rows: full model, then each relation pair removed in turn.
AblationTable ablate_modality_pairs(const Experiment& experiment);

/// Tab-separated table with a header row.
void write_table_tsv(const AblationTable& table, const std::string& first_column, std::ostream& out);

}  // namespace twtr
