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
#include <map>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "twtr/corpus.hpp"
#include "twtr/encoders.hpp"
#include "twtr/event_structures.hpp"
#include "twtr/types.hpp"

namespace twtr {

enum class SpanKind { trigger, argument };
enum class NliLabel { entailment, neutral, contradiction };

std::string_view to_string(SpanKind kind);
std::string_view to_string(NliLabel label);

struct ManipulationCandidate {
  std::string original_claim;
  TokenSpan target_span;
  SpanKind target_kind = SpanKind::argument;
  std::string substitution;
  std::string candidate_claim;
  NliLabel nli_label = NliLabel::neutral;
  double contradiction_score = 0.0;
};

/// A generator declined one record; the pipeline reports it and moves on.
class GenerationSkipped : public Error {
 public:
  using Error::Error;
};

/// Raised when no contradiction-labelled manipulation exists for a text.
class NoFakeClaim : public GenerationSkipped {
 public:
  using GenerationSkipped::GenerationSkipped;
};

/// Raised when a balanced dataset cannot be filled.
class SynthesisShortfall : public Error {
 public:
  using Error::Error;
};

// ---------------------------------------------------------------------------
// Model interfaces

struct MaskedPrediction {
  std::string text;
  double score = 0.0;
};

class MaskedLM {
 public:
  virtual ~MaskedLM() = default;
  /// Ranked fillers for the "[MASK]" in `masked_text`; `original` is the
  /// masked-out phrase.
  virtual std::vector<MaskedPrediction> fill(const std::string& masked_text, const std::string& original) const = 0;
};

struct NliResult {
  NliLabel label = NliLabel::neutral;
  double contradiction = 0.0;
};

class NLIScorer {
 public:
  virtual ~NLIScorer() = default;
  virtual NliResult score(const std::string& premise, const std::string& hypothesis) const = 0;
};

class SentenceEmbedder {
 public:
  virtual ~SentenceEmbedder() = default;
  virtual RowVector embed(const std::string& sentence) const = 0;
};

class VideoEmbedder {
 public:
  virtual ~VideoEmbedder() = default;
  virtual RowVector embed(const VideoPost& post) const = 0;
};

/// Phrase table keyed by the normalized masked phrase. Phrases missing from
/// the table fall back to swapping any word that belongs to one of the swap
/// classes for each other member of its class.
class StubMaskedLM : public MaskedLM {
 public:
  using Table = std::map<std::string, std::vector<MaskedPrediction>>;

  StubMaskedLM(Table table, std::vector<std::vector<std::string>> swap_classes = {});
  static StubMaskedLM covid_default();

  std::vector<MaskedPrediction> fill(const std::string& masked_text, const std::string& original) const override;

 private:
  Table table_;
  std::vector<std::vector<std::string>> swap_classes_;
};

/// Judges the span where premise and hypothesis differ:
/// an antonymous word pair is a contradiction (0.95); a synonymous pair is
/// an entailment; swapping one named entity for another is a contradiction
/// scored 0.5 + 0.4 (1 - token Jaccard of the two spans); anything else is
/// neutral.
class StubNLI : public NLIScorer {
 public:
  using Pairs = std::set<std::pair<std::string, std::string>>;

  StubNLI(Pairs antonyms, Pairs synonyms, std::set<std::string> entities);
  static StubNLI covid_default();

  NliResult score(const std::string& premise, const std::string& hypothesis) const override;

 private:
  bool related(const Pairs& pairs, const std::string& a, const std::string& b) const;

  Pairs antonyms_;
  Pairs synonyms_;
  std::set<std::string> entities_;
};

/// Mean of the stub text encoder's token vectors.
class StubSentenceEmbedder : public SentenceEmbedder {
 public:
  explicit StubSentenceEmbedder(EncoderConfig config = {});
  RowVector embed(const std::string& sentence) const override;

 private:
  StubTextEncoder encoder_;
};

/// Mean of every patch row of every frame.
class PooledFrameEmbedder : public VideoEmbedder {
 public:
  RowVector embed(const VideoPost& post) const override;
};

// ---------------------------------------------------------------------------
// Pipeline

enum class SpanPolicy { prefer_argument, random };

struct SynthesisConfig {
  std::size_t top_k = 10;
  SpanPolicy policy = SpanPolicy::prefer_argument;
  std::uint64_t seed = 7;
  std::size_t evidence_sentences = 1;
};

/// Everything the generators need, borrowed for the duration of a run.
struct Generators {
  const EventTagger& tagger;
  const MaskedLM& masker;
  const NLIScorer& nli;
  const SentenceEmbedder& sentences;
  const VideoEmbedder& videos;
  std::set<std::string> vocabulary;
  SynthesisConfig config;
};

struct ProvenanceEntry {
  std::string post_id;  // emitted id, or the source id of a skipped attempt
  Taxonomy taxonomy = Taxonomy::pristine;
  std::vector<std::string> source_ids;
  std::string original;
  std::string replacement;
  std::optional<SpanKind> span_kind;
  std::string substitution;
  double contradiction_score = 0.0;
  std::string rejection;  // empty for emitted records
};

struct SynthesisReport {
  std::vector<ProvenanceEntry> entries;

  void reject(const std::string& source_id, Taxonomy taxonomy, std::string reason);
  std::size_t emitted() const;
  /// One JSON object per line.
  void write_jsonl(std::ostream& out) const;
  void write_jsonl(const std::filesystem::path& path) const;
};

/// Masked-LM fillers for `span`, the original phrase excluded, best first,
/// at most `k`. A failing masker yields no candidates and a report line.
std::vector<ManipulationCandidate> propose_substitutions(const std::string& claim, TokenSpan span, SpanKind kind,
                                                         const MaskedLM& masker, std::size_t k = 10,
                                                         std::vector<std::string>* failures = nullptr);

/// Keeps candidates whose substituted tokens all occur in `vocabulary`.
std::vector<ManipulationCandidate> filter_vocab(std::vector<ManipulationCandidate> candidates,
                                                const std::set<std::string>& vocabulary);

/// Labels every candidate with `nli` (premise = original text).
std::vector<ManipulationCandidate> score_candidates(std::vector<ManipulationCandidate> candidates,
                                                    const NLIScorer& nli);

/// Highest contradiction score among contradiction-labelled candidates; ties
/// go to the lexicographically smaller substitution. Throws NoFakeClaim.
ManipulationCandidate rank_by_contradiction(const std::string& original,
                                            std::vector<ManipulationCandidate> candidates, const NLIScorer& nli);

/// Every contradiction-labelled single-span manipulation of `text`, in
/// preference order: span policy order first, then rank_by_contradiction
/// order within a span. Throws NoFakeClaim when there is none.
std::vector<ManipulationCandidate> manipulation_alternatives(const std::string& text, const Generators& g);

struct FakeClaim {
  VideoPost post;
  std::string source_id;
  ManipulationCandidate chosen;
  std::vector<ManipulationCandidate> alternatives;  // chosen is one of these
};

/// tag -> propose -> filter -> rank on the post's claim.
FakeClaim generate_fake_claim(const VideoPost& post, const Generators& g);

/// One fake per distinct substitution. Fakes are visited by ascending source
/// post_id; a fake whose substitution is taken switches to its next unused
/// alternative, or else is regenerated from the most similar unused claim in
/// `pool`, or dropped when nothing qualifies.
std::vector<FakeClaim> dedup_alternatives(std::vector<FakeClaim> fakes, const Corpus& pool, const Generators& g,
                                          SynthesisReport* report = nullptr);

struct FakeSpeech {
  VideoPost post;
  std::vector<std::size_t> evidence;  // indices of manipulated sentences
  std::vector<ManipulationCandidate> edits;
};

/// Indices of the `m` speech sentences most similar to the claim, best first;
/// ties go to the lower index.
std::vector<std::size_t> select_evidence(const VideoPost& post, const SentenceEmbedder& embedder, std::size_t m);

/// Manipulates the evidence sentences and leaves every other sentence as is.
/// Throws NoFakeClaim when no evidence sentence can be manipulated.
FakeSpeech generate_fake_speech(const VideoPost& post, const Generators& g);

/// Index into `corpus` of the most similar other video (different post_id and
/// link); ties go to the lowest post_id.
std::size_t match_video(const VideoPost& post, const Corpus& corpus, const VideoEmbedder& embedder);

/// Source record with frames and link swapped for the matched video.
VideoPost generate_fake_video(const VideoPost& post, const Corpus& corpus, const VideoEmbedder& embedder);

/// Lowercased argument phrases plus capitalized words.
std::set<std::string> named_entities(const std::string& text, const EventTagger& tagger);

/// Index into `corpus` of the speech sharing the most entities with the
/// claim (at least one); ties go to the lowest post_id. Empty when none.
std::optional<std::size_t> match_speech(const VideoPost& post, const Corpus& corpus, const EventTagger& tagger);

/// Borrows the matched speech. Throws GenerationSkipped when none shares an entity.
VideoPost fill_missing_speech(const VideoPost& post, const Corpus& corpus, const EventTagger& tagger);

/// Weights for the claim, speech and video taxonomies. Filled-in speech
/// counts toward the speech share.
struct TaxonomyMix {
  double claim = 1.0;
  double speech = 1.0;
  double video = 1.0;
};
TaxonomyMix parse_mix(const std::string& text);

/// Pristine records followed by as many fakes, apportioned over the mix by
/// largest remainder. Throws SynthesisShortfall when a quota cannot be met.
Corpus build_balanced_dataset(const Corpus& pristine, const Generators& g, const TaxonomyMix& mix,
                              std::uint64_t seed, SynthesisReport* report = nullptr);

}  // namespace twtr
