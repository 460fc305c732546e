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

#include "twtr/event_structures.hpp"

#include <algorithm>
#include <fstream>

#include <nlohmann/json.hpp>

namespace twtr {

namespace {

std::set<std::string> normalized(const std::set<std::string>& phrases) {
  std::set<std::string> out;
  for (const auto& p : phrases) {
    auto n = normalize_phrase(p);
    if (!n.empty()) out.insert(std::move(n));
  }
  return out;
}

std::size_t max_phrase_tokens(const std::set<std::string>& phrases) {
  std::size_t best = 0;
  for (const auto& p : phrases) {
    best = std::max<std::size_t>(best, std::count(p.begin(), p.end(), ' ') + 1);
  }
  return best;
}

// Greedy left-to-right longest match.
std::vector<TokenSpan> match(const std::vector<Token>& tokens, const std::set<std::string>& lexicon) {
  std::vector<TokenSpan> spans;
  const std::size_t longest = max_phrase_tokens(lexicon);
  std::size_t i = 0;
  while (i < tokens.size()) {
    std::size_t matched = 0;
    for (std::size_t len = std::min(longest, tokens.size() - i); len >= 1; --len) {
      std::string phrase = tokens[i].text;
      for (std::size_t k = 1; k < len; ++k) phrase += " " + tokens[i + k].text;
      if (lexicon.count(phrase)) {
        matched = len;
        break;
      }
    }
    if (matched) {
      spans.push_back({i, i + matched});
      i += matched;
    } else {
      ++i;
    }
  }
  return spans;
}

std::vector<TokenSpan> parse_spans(const nlohmann::json& j) {
  std::vector<TokenSpan> spans;
  for (const auto& s : j) spans.push_back({s.at(0).get<std::size_t>(), s.at(1).get<std::size_t>()});
  return spans;
}

}  // namespace

LexiconTagger::LexiconTagger(std::set<std::string> triggers, std::set<std::string> arguments)
    : triggers_(normalized(triggers)), arguments_(normalized(arguments)) {}

LexiconTagger LexiconTagger::covid_default() {
  std::set<std::string> triggers = {
      // frequent in original claims
      "fight", "infect", "protect", "prevent", "help", "stop", "quarantine", "contain", "confirm",
      "threat", "plunge", "mandate", "deal", "cause",
      // frequent in generated claims
      "produce", "increase", "create", "develop", "remove", "avoid", "identify", "support",
      "generate", "rule", "allow", "establish",
      // worked examples
      "warns", "dent", "finally returned home"};
  std::set<std::string> arguments = {
      "coronavirus", "omicron", "pfizer", "covid", "delta", "moderna", "booster", "mask",
      "lockdown", "protest", "social distance", "ban", "vaccine", "variant", "death", "cancer",
      "hospital", "who", "community", "medical service", "drug", "viruses", "migration", "media",
      "icu",
      // worked examples
      "officials", "outbreaks of the coronavirus", "omicron variant", "economic recovery",
      "getting vaccinated booster shots"};
  for (const auto& disease : disease_names()) {
    for (const auto& topic : disease_topics()) arguments.insert(disease + " " + topic);
  }
  return LexiconTagger(std::move(triggers), std::move(arguments));
}

const std::vector<std::string>& disease_names() {
  static const std::vector<std::string> names = {"measles", "ebola",   "zika",  "cholera",
                                                 "dengue",  "malaria", "polio", "mpox",
                                                 "typhoid", "rabies",  "flu",   "tuberculosis"};
  return names;
}

const std::vector<std::string>& disease_topics() {
  static const std::vector<std::string> topics = {"outbreak", "cases",    "vaccine", "deaths",
                                                  "patients", "clinics",  "testing", "wave"};
  return topics;
}

EventStructure LexiconTagger::tag(const std::string& text) const {
  const auto tokens = tokenize(text);
  EventStructure out;
  out.triggers = match(tokens, triggers_);
  for (const auto& arg : match(tokens, arguments_)) {
    const bool clash = std::any_of(out.triggers.begin(), out.triggers.end(),
                                   [&](const TokenSpan& t) { return t.overlaps(arg); });
    if (!clash) out.arguments.push_back(arg);
  }
  return out;
}

PrecomputedTagger::PrecomputedTagger(std::map<std::string, EventStructure> table)
    : table_(std::move(table)) {}

PrecomputedTagger PrecomputedTagger::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw TaggerUnavailable("cannot open event table " + path.string());
  std::map<std::string, EventStructure> table;
  std::string line;
  while (std::getline(in, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const auto j = nlohmann::json::parse(line);
    EventStructure s;
    s.triggers = parse_spans(j.value("triggers", nlohmann::json::array()));
    s.arguments = parse_spans(j.value("arguments", nlohmann::json::array()));
    table[j.at("text").get<std::string>()] = std::move(s);
  }
  return PrecomputedTagger(std::move(table));
}

EventStructure PrecomputedTagger::tag(const std::string& text) const {
  auto it = table_.find(text);
  if (it == table_.end()) throw TaggerUnavailable("no precomputed events for text: " + text);
  return it->second;
}

std::unique_ptr<EventTagger> make_tagger(const std::string& kind,
                                         const std::filesystem::path& external_table) {
  if (kind == "stub") return std::make_unique<LexiconTagger>(LexiconTagger::covid_default());
  if (kind == "external") {
    return std::make_unique<PrecomputedTagger>(PrecomputedTagger::load(external_table));
  }
  throw Error("unknown tagger kind '" + kind + "'");
}

EventStructure tag_events(const std::string& text, const EventTagger& tagger) {
  if (text.empty()) throw Error("cannot tag empty text");
  auto structure = tagger.tag(text);
  const auto n = tokenize(text).size();
  auto check = [&](const std::vector<TokenSpan>& spans) {
    for (const auto& s : spans) {
      if (s.empty() || s.end > n) throw Error("tagger returned a span outside the text");
    }
  };
  check(structure.triggers);
  check(structure.arguments);
  return structure;
}

AlertIndexSequence to_alert_indices(std::size_t token_count, const EventStructure& structure) {
  AlertIndexSequence indices(token_count, 0);
  auto paint = [&](const std::vector<TokenSpan>& spans, int value) {
    for (const auto& s : spans) {
      if (s.begin > s.end || s.end > token_count) {
        throw Error("event span [" + std::to_string(s.begin) + "," + std::to_string(s.end) +
                    ") outside " + std::to_string(token_count) + " tokens");
      }
      for (std::size_t i = s.begin; i < s.end; ++i) indices[i] = value;
    }
  };
  paint(structure.arguments, 2);
  paint(structure.triggers, 1);
  return indices;
}

std::string span_text(const std::string& text, const std::vector<Token>& tokens, TokenSpan span) {
  if (span.empty() || span.end > tokens.size()) throw Error("span outside token sequence");
  const auto b = tokens[span.begin].begin;
  const auto e = tokens[span.end - 1].end;
  return text.substr(b, e - b);
}

}  // namespace twtr
