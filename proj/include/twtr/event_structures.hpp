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
#include <memory>
#include <set>
#include <string>
#include <vector>

#include "twtr/text.hpp"
#include "twtr/types.hpp"

namespace twtr {

/// Trigger and argument spans over the tokens produced by `tokenize`.
struct EventStructure {
  std::vector<TokenSpan> triggers;
  std::vector<TokenSpan> arguments;

  bool empty() const { return triggers.empty() && arguments.empty(); }
  friend bool operator==(const EventStructure&, const EventStructure&) = default;
};

/// 0 = outside any event element, 1 = trigger, 2 = argument.
using AlertIndexSequence = std::vector<int>;

/// Raised when a tagger cannot produce an answer at all, as opposed to
/// answering "no events" with an empty structure.
class TaggerUnavailable : public Error {
 public:
  using Error::Error;
};

class EventTagger {
 public:
  virtual ~EventTagger() = default;
  virtual EventStructure tag(const std::string& text) const = 0;
};

/// Deterministic tagger that matches lowercase phrases from a trigger lexicon
/// and an argument lexicon, longest match first. Argument matches that
/// would overlap a trigger are dropped.
class LexiconTagger : public EventTagger {
 public:
  LexiconTagger() = default;
  LexiconTagger(std::set<std::string> triggers, std::set<std::string> arguments);

  /// Lexicon seeded with the most frequent COVID-domain event triggers and
  /// arguments, plus the phrases needed by the worked manipulation examples.
  static LexiconTagger covid_default();

  EventStructure tag(const std::string& text) const override;

  const std::set<std::string>& trigger_lexicon() const { return triggers_; }
  const std::set<std::string>& argument_lexicon() const { return arguments_; }

 private:
  std::set<std::string> triggers_;
  std::set<std::string> arguments_;
};

/// Disease names and topic nouns; every "<disease> <topic>" pairing is an
/// argument phrase of the default lexicon.
const std::vector<std::string>& disease_names();
const std::vector<std::string>& disease_topics();

/// Looks up externally produced structures keyed by exact text. Loaded from a
/// JSONL file of {"text": ..., "triggers": [[b,e],...], "arguments": [[b,e],...]}.
/// Texts missing from the table raise TaggerUnavailable.
class PrecomputedTagger : public EventTagger {
 public:
  explicit PrecomputedTagger(std::map<std::string, EventStructure> table);
  static PrecomputedTagger load(const std::filesystem::path& path);

  EventStructure tag(const std::string& text) const override;

 private:
  std::map<std::string, EventStructure> table_;
};

/// Builds the tagger selected by `kind` ("stub" or "external").
std::unique_ptr<EventTagger> make_tagger(const std::string& kind,
                                         const std::filesystem::path& external_table = {});

/// Tags `text` and checks the spans against its tokenization.
EventStructure tag_events(const std::string& text, const EventTagger& tagger);

/// Per-token alert indices. Triggers win where a trigger and an argument overlap.
AlertIndexSequence to_alert_indices(std::size_t token_count, const EventStructure& structure);

/// Surface text of a token span, taken verbatim from the source string.
std::string span_text(const std::string& text, const std::vector<Token>& tokens, TokenSpan span);

}  // namespace twtr
