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

#include "twtr/synthesis.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <numeric>
#include <sstream>

#include <nlohmann/json.hpp>

namespace twtr {

namespace {

constexpr const char* kMask = "[MASK]";

bool better(const ManipulationCandidate& a, const ManipulationCandidate& b) {
  if (a.contradiction_score != b.contradiction_score) return a.contradiction_score > b.contradiction_score;
  return a.substitution < b.substitution;
}

std::vector<ManipulationCandidate> contradictions_ranked(std::vector<ManipulationCandidate> scored) {
  std::vector<ManipulationCandidate> out;
  for (auto& c : scored) {
    if (c.nli_label == NliLabel::contradiction) out.push_back(std::move(c));
  }
  std::stable_sort(out.begin(), out.end(), better);
  return out;
}

VideoPost as_fake(const VideoPost& source, Taxonomy taxonomy, const std::string& suffix) {
  VideoPost p = source;
  p.post_id = source.post_id + "#" + suffix;
  p.taxonomy = taxonomy;
  p.label = label_of(taxonomy);
  return p;
}

FakeClaim make_fake_claim(const VideoPost& source, std::vector<ManipulationCandidate> alternatives,
                          std::size_t pick) {
  FakeClaim f;
  f.post = as_fake(source, Taxonomy::fake_claim, "claim");
  f.source_id = source.post_id;
  f.chosen = alternatives.at(pick);
  f.post.claim = f.chosen.candidate_claim;
  f.alternatives = std::move(alternatives);
  return f;
}

std::optional<std::size_t> first_unused(const std::vector<ManipulationCandidate>& alts,
                                        const std::set<std::string>& used) {
  for (std::size_t i = 0; i < alts.size(); ++i) {
    if (!used.count(normalize_phrase(alts[i].substitution))) return i;
  }
  return std::nullopt;
}

std::set<std::string> token_set(const std::vector<std::string>& tokens) { return {tokens.begin(), tokens.end()}; }

double jaccard(const std::set<std::string>& a, const std::set<std::string>& b) {
  std::size_t common = 0;
  for (const auto& x : a) common += b.count(x);
  const std::size_t total = a.size() + b.size() - common;
  return total == 0 ? 1.0 : double(common) / double(total);
}

}  // namespace

std::string_view to_string(SpanKind kind) { return kind == SpanKind::trigger ? "trigger" : "argument"; }

std::string_view to_string(NliLabel label) {
  switch (label) {
    case NliLabel::entailment:
      return "entailment";
    case NliLabel::neutral:
      return "neutral";
    case NliLabel::contradiction:
      return "contradiction";
  }
  return "neutral";
}

// ---------------------------------------------------------------------------
// Stubs

StubMaskedLM::StubMaskedLM(Table table, std::vector<std::vector<std::string>> swap_classes)
    : swap_classes_(std::move(swap_classes)) {
  for (auto& [phrase, fills] : table) table_[normalize_phrase(phrase)] = std::move(fills);
}

StubMaskedLM StubMaskedLM::covid_default() {
  Table table = {
      {"outbreaks of the coronavirus",
       {{"the spread of the virus", 0.31},
        {"the spread of ebola", 0.22},
        {"outbreaks of the coronavirus", 0.20},
        {"cases of the virus", 0.12},
        {"the pandemic", 0.08}}},
      {"dent", {{"hurt", 0.40}, {"slow", 0.25}, {"facilitate", 0.15}, {"delay", 0.10}}},
      {"getting vaccinated booster shots",
       {{"getting a booster", 0.30}, {"getting infected", 0.25}, {"wearing masks", 0.20}}},
      {"finally returned home",
       {{"arrived home", 0.30}, {"lost home", 0.20}, {"returned home", 0.20}, {"gone home", 0.10}}},
  };
  return StubMaskedLM(std::move(table), {disease_names()});
}

std::vector<MaskedPrediction> StubMaskedLM::fill(const std::string& masked_text, const std::string& original) const {
  const auto key = normalize_phrase(original);
  if (auto it = table_.find(key); it != table_.end()) return it->second;
  std::vector<MaskedPrediction> out;
  const auto words = token_strings(original);
  for (std::size_t i = 0; i < words.size(); ++i) {
    for (const auto& cls : swap_classes_) {
      if (std::find(cls.begin(), cls.end(), words[i]) == cls.end()) continue;
      for (const auto& other : cls) {
        if (other == words[i]) continue;
        auto replaced = words;
        replaced[i] = other;
        auto phrase = join(replaced, " ");
        // Deterministic pseudo-probability in (0, 1).
        const double score = double(fnv1a64(masked_text + "|" + phrase) % 9973 + 1) / 9974.0;
        out.push_back({std::move(phrase), score});
      }
    }
  }
  std::stable_sort(out.begin(), out.end(), [](const auto& a, const auto& b) {
    return a.score != b.score ? a.score > b.score : a.text < b.text;
  });
  return out;
}

StubNLI::StubNLI(Pairs antonyms, Pairs synonyms, std::set<std::string> entities)
    : antonyms_(std::move(antonyms)), synonyms_(std::move(synonyms)), entities_(std::move(entities)) {}

StubNLI StubNLI::covid_default() {
  Pairs antonyms = {{"dent", "facilitate"},  {"vaccinated", "infected"}, {"returned", "lost"},
                    {"increase", "decrease"}, {"rise", "fall"},          {"confirm", "deny"},
                    {"allow", "ban"},          {"support", "oppose"},     {"protect", "endanger"},
                    {"help", "hinder"},        {"prevent", "cause"},      {"contain", "spread"},
                    {"open", "close"},         {"approve", "reject"},     {"ease", "tighten"}};
  Pairs synonyms = {{"dent", "hurt"},      {"dent", "slow"},       {"returned", "arrived"},
                    {"outbreaks", "spread"}, {"coronavirus", "virus"}, {"vaccinated", "booster"}};
  std::set<std::string> entities = {"coronavirus", "covid", "covid-19", "sars", "china",       "wuhan",
                                    "india",       "italy", "australia", "pfizer", "moderna",  "astrazeneca",
                                    "omicron",     "delta", "who",       "cdc",    "fda"};
  for (const auto& d : disease_names()) entities.insert(d);
  return StubNLI(std::move(antonyms), std::move(synonyms), std::move(entities));
}

bool StubNLI::related(const Pairs& pairs, const std::string& a, const std::string& b) const {
  return pairs.count({a, b}) > 0 || pairs.count({b, a}) > 0;
}

NliResult StubNLI::score(const std::string& premise, const std::string& hypothesis) const {
  const auto p = token_strings(premise);
  const auto h = token_strings(hypothesis);
  std::size_t prefix = 0;
  while (prefix < p.size() && prefix < h.size() && p[prefix] == h[prefix]) ++prefix;
  std::size_t suffix = 0;
  while (suffix < p.size() - prefix && suffix < h.size() - prefix &&
         p[p.size() - 1 - suffix] == h[h.size() - 1 - suffix]) {
    ++suffix;
  }
  const std::vector<std::string> a(p.begin() + long(prefix), p.end() - long(suffix));
  const std::vector<std::string> b(h.begin() + long(prefix), h.end() - long(suffix));
  if (a.empty() && b.empty()) return {NliLabel::entailment, 0.0};
  if (a.empty() || b.empty()) return {NliLabel::neutral, 0.1};

  auto any_pair = [&](const Pairs& pairs) {
    if (related(pairs, join(a, " "), join(b, " "))) return true;
    for (const auto& x : a) {
      for (const auto& y : b) {
        if (related(pairs, x, y)) return true;
      }
    }
    return false;
  };
  if (any_pair(antonyms_)) return {NliLabel::contradiction, 0.95};

  std::set<std::string> ents_a;
  std::set<std::string> ents_b;
  for (const auto& x : a) {
    if (entities_.count(x)) ents_a.insert(x);
  }
  for (const auto& y : b) {
    if (entities_.count(y)) ents_b.insert(y);
  }
  if (!ents_a.empty() && !ents_b.empty() && ents_a != ents_b) {
    return {NliLabel::contradiction, 0.5 + 0.4 * (1.0 - jaccard(token_set(a), token_set(b)))};
  }
  if (any_pair(synonyms_)) return {NliLabel::entailment, 0.05};
  return {NliLabel::neutral, 0.1};
}

StubSentenceEmbedder::StubSentenceEmbedder(EncoderConfig config) : encoder_(std::move(config)) {}

RowVector StubSentenceEmbedder::embed(const std::string& sentence) const {
  return encoder_.encode(sentence).tokens.colwise().mean();
}

RowVector PooledFrameEmbedder::embed(const VideoPost& post) const {
  if (post.frames.empty()) throw Error("post '" + post.post_id + "' has no frames");
  RowVector sum = RowVector::Zero(post.frames.front().patches.cols());
  Eigen::Index rows = 0;
  for (const auto& f : post.frames) {
    sum += f.patches.colwise().sum();
    rows += f.patches.rows();
  }
  return sum / Real(rows);
}

// ---------------------------------------------------------------------------
// Report

void SynthesisReport::reject(const std::string& source_id, Taxonomy taxonomy, std::string reason) {
  ProvenanceEntry e;
  e.post_id = source_id;
  e.taxonomy = taxonomy;
  e.source_ids = {source_id};
  e.rejection = std::move(reason);
  entries.push_back(std::move(e));
}

std::size_t SynthesisReport::emitted() const {
  return static_cast<std::size_t>(
      std::count_if(entries.begin(), entries.end(), [](const auto& e) { return e.rejection.empty(); }));
}

void SynthesisReport::write_jsonl(std::ostream& out) const {
  for (const auto& e : entries) {
    nlohmann::json j{{"post_id", e.post_id},
                     {"taxonomy", std::string(to_string(e.taxonomy))},
                     {"sources", e.source_ids},
                     {"status", e.rejection.empty() ? "emitted" : "skipped"}};
    if (!e.original.empty()) j["original"] = e.original;
    if (!e.replacement.empty()) j["replacement"] = e.replacement;
    if (e.span_kind) j["span_kind"] = std::string(to_string(*e.span_kind));
    if (!e.substitution.empty()) {
      j["substitution"] = e.substitution;
      j["contradiction_score"] = e.contradiction_score;
    }
    if (!e.rejection.empty()) j["reason"] = e.rejection;
    out << j.dump() << '\n';
  }
}

void SynthesisReport::write_jsonl(const std::filesystem::path& path) const {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  write_jsonl(out);
}

// ---------------------------------------------------------------------------
// Claim manipulation

std::vector<ManipulationCandidate> propose_substitutions(const std::string& claim, TokenSpan span, SpanKind kind,
                                                         const MaskedLM& masker, std::size_t k,
                                                         std::vector<std::string>* failures) {
  const auto tokens = tokenize(claim);
  if (span.empty() || span.end > tokens.size()) throw Error("span outside the claim");
  const std::size_t b = tokens[span.begin].begin;
  const std::size_t e = tokens[span.end - 1].end;
  const std::string original = claim.substr(b, e - b);
  const std::string masked = claim.substr(0, b) + kMask + claim.substr(e);

  std::vector<MaskedPrediction> fills;
  try {
    fills = masker.fill(masked, original);
  } catch (const std::exception& ex) {
    if (failures) failures->push_back(std::string("masked LM failed on '") + original + "': " + ex.what());
    return {};
  }
  std::stable_sort(fills.begin(), fills.end(), [](const auto& x, const auto& y) {
    return x.score != y.score ? x.score > y.score : x.text < y.text;
  });
  const auto original_norm = normalize_phrase(original);
  std::vector<ManipulationCandidate> out;
  std::set<std::string> seen;
  for (const auto& f : fills) {
    if (out.size() >= k) break;
    const auto norm = normalize_phrase(f.text);
    if (norm.empty() || norm == original_norm || !seen.insert(norm).second) continue;
    ManipulationCandidate c;
    c.original_claim = claim;
    c.target_span = span;
    c.target_kind = kind;
    c.substitution = f.text;
    c.candidate_claim = claim.substr(0, b) + f.text + claim.substr(e);
    out.push_back(std::move(c));
  }
  return out;
}

std::vector<ManipulationCandidate> filter_vocab(std::vector<ManipulationCandidate> candidates,
                                                const std::set<std::string>& vocabulary) {
  std::vector<ManipulationCandidate> out;
  for (auto& c : candidates) {
    const auto words = token_strings(c.substitution);
    if (std::all_of(words.begin(), words.end(), [&](const auto& w) { return vocabulary.count(w) > 0; })) {
      out.push_back(std::move(c));
    }
  }
  return out;
}

std::vector<ManipulationCandidate> score_candidates(std::vector<ManipulationCandidate> candidates,
                                                    const NLIScorer& nli) {
  for (auto& c : candidates) {
    const auto r = nli.score(c.original_claim, c.candidate_claim);
    c.nli_label = r.label;
    c.contradiction_score = r.contradiction;
  }
  return candidates;
}

ManipulationCandidate rank_by_contradiction(const std::string& original,
                                            std::vector<ManipulationCandidate> candidates, const NLIScorer& nli) {
  for (auto& c : candidates) c.original_claim = original;
  auto ranked = contradictions_ranked(score_candidates(std::move(candidates), nli));
  if (ranked.empty()) throw NoFakeClaim("no contradiction candidate for '" + original + "'");
  return ranked.front();
}

std::vector<ManipulationCandidate> manipulation_alternatives(const std::string& text, const Generators& g) {
  EventStructure structure;
  try {
    structure = tag_events(text, g.tagger);
  } catch (const TaggerUnavailable& e) {
    throw NoFakeClaim(std::string("event tagger unavailable: ") + e.what());
  }
  if (structure.empty()) throw NoFakeClaim("no event structure in '" + text + "'");

  std::vector<std::pair<TokenSpan, SpanKind>> spans;
  for (const auto& s : structure.arguments) spans.emplace_back(s, SpanKind::argument);
  if (g.config.policy == SpanPolicy::prefer_argument) {
    for (const auto& s : structure.triggers) spans.emplace_back(s, SpanKind::trigger);
  } else {
    for (const auto& s : structure.triggers) spans.emplace_back(s, SpanKind::trigger);
    std::stable_sort(spans.begin(), spans.end(),
                     [](const auto& a, const auto& b) { return a.first.begin < b.first.begin; });
    stable_shuffle(spans, g.config.seed ^ fnv1a64(text));
  }

  std::vector<ManipulationCandidate> out;
  for (const auto& [span, kind] : spans) {
    auto proposed = propose_substitutions(text, span, kind, g.masker, g.config.top_k);
    auto ranked = contradictions_ranked(score_candidates(filter_vocab(std::move(proposed), g.vocabulary), g.nli));
    for (auto& c : ranked) out.push_back(std::move(c));
  }
  if (out.empty()) throw NoFakeClaim("no contradiction candidate for '" + text + "'");
  return out;
}

FakeClaim generate_fake_claim(const VideoPost& post, const Generators& g) {
  return make_fake_claim(post, manipulation_alternatives(post.claim, g), 0);
}

std::vector<FakeClaim> dedup_alternatives(std::vector<FakeClaim> fakes, const Corpus& pool, const Generators& g,
                                          SynthesisReport* report) {
  std::stable_sort(fakes.begin(), fakes.end(),
                   [](const FakeClaim& a, const FakeClaim& b) { return a.source_id < b.source_id; });
  std::set<std::string> used_subs;
  std::set<std::string> used_sources;
  for (const auto& f : fakes) used_sources.insert(f.source_id);

  std::vector<FakeClaim> out;
  for (auto& f : fakes) {
    if (auto pick = first_unused(f.alternatives, used_subs)) {
      used_subs.insert(normalize_phrase(f.alternatives[*pick].substitution));
      const VideoPost* source = pool.find(f.source_id);
      VideoPost base = f.post;
      if (source) {
        base = *source;
      } else {
        base.post_id = f.source_id;
        base.claim = f.chosen.original_claim;
      }
      out.push_back(make_fake_claim(base, std::move(f.alternatives), *pick));
      continue;
    }
    // Every alternative is taken: regenerate from the most similar unused claim.
    const RowVector anchor = g.sentences.embed(f.chosen.original_claim);
    std::vector<std::pair<double, std::size_t>> ranked;
    for (std::size_t i = 0; i < pool.size(); ++i) {
      if (used_sources.count(pool[i].post_id) || pool[i].taxonomy != Taxonomy::pristine) continue;
      ranked.emplace_back(cosine_similarity(anchor, g.sentences.embed(pool[i].claim)), i);
    }
    std::stable_sort(ranked.begin(), ranked.end(), [&](const auto& a, const auto& b) {
      return a.first != b.first ? a.first > b.first : pool[a.second].post_id < pool[b.second].post_id;
    });
    bool replaced = false;
    for (const auto& [sim, i] : ranked) {
      std::vector<ManipulationCandidate> alts;
      try {
        alts = manipulation_alternatives(pool[i].claim, g);
      } catch (const NoFakeClaim&) {
        continue;
      }
      if (auto pick = first_unused(alts, used_subs)) {
        used_subs.insert(normalize_phrase(alts[*pick].substitution));
        used_sources.insert(pool[i].post_id);
        out.push_back(make_fake_claim(pool[i], std::move(alts), *pick));
        replaced = true;
        break;
      }
    }
    if (!replaced && report) {
      report->reject(f.source_id, Taxonomy::fake_claim, "substitution already used and no similar claim qualifies");
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Speech, video and missing modalities

std::vector<std::size_t> select_evidence(const VideoPost& post, const SentenceEmbedder& embedder, std::size_t m) {
  const RowVector claim = embedder.embed(post.claim);
  std::vector<std::pair<double, std::size_t>> sims;
  for (std::size_t i = 0; i < post.speech_sentences.size(); ++i) {
    if (tokenize(post.speech_sentences[i]).empty()) continue;
    sims.emplace_back(cosine_similarity(claim, embedder.embed(post.speech_sentences[i])), i);
  }
  std::stable_sort(sims.begin(), sims.end(), [](const auto& a, const auto& b) {
    return a.first != b.first ? a.first > b.first : a.second < b.second;
  });
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < sims.size() && i < m; ++i) out.push_back(sims[i].second);
  return out;
}

FakeSpeech generate_fake_speech(const VideoPost& post, const Generators& g) {
  if (post.speech_sentences.empty()) throw Error("post '" + post.post_id + "' has no speech to manipulate");
  FakeSpeech out;
  out.post = as_fake(post, Taxonomy::fake_speech, "speech");
  for (auto i : select_evidence(post, g.sentences, g.config.evidence_sentences)) {
    try {
      auto alts = manipulation_alternatives(post.speech_sentences[i], g);
      out.post.speech_sentences[i] = alts.front().candidate_claim;
      out.evidence.push_back(i);
      out.edits.push_back(std::move(alts.front()));
    } catch (const NoFakeClaim&) {
    }
  }
  if (out.evidence.empty()) throw GenerationSkipped("no manipulable evidence sentence");
  return out;
}

std::size_t match_video(const VideoPost& post, const Corpus& corpus, const VideoEmbedder& embedder) {
  if (corpus.size() < 2) throw Error("adversarial matching needs at least two videos");
  const RowVector anchor = embedder.embed(post);
  std::optional<std::size_t> best;
  double best_sim = 0.0;
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    const auto& q = corpus[i];
    if (q.post_id == post.post_id || (!post.video_link.empty() && q.video_link == post.video_link)) continue;
    const double sim = cosine_similarity(anchor, embedder.embed(q));
    if (!best || sim > best_sim || (sim == best_sim && q.post_id < corpus[*best].post_id)) {
      best = i;
      best_sim = sim;
    }
  }
  if (!best) throw Error("no other video to match against");
  return *best;
}

VideoPost generate_fake_video(const VideoPost& post, const Corpus& corpus, const VideoEmbedder& embedder) {
  const auto& match = corpus[match_video(post, corpus, embedder)];
  VideoPost out = as_fake(post, Taxonomy::fake_video, "video");
  out.frames = match.frames;
  out.video_link = match.video_link;
  return out;
}

std::set<std::string> named_entities(const std::string& text, const EventTagger& tagger) {
  std::set<std::string> out;
  const auto tokens = tokenize(text);
  try {
    for (const auto& s : tag_events(text, tagger).arguments) {
      std::vector<std::string> words;
      for (auto i = s.begin; i < s.end; ++i) words.push_back(tokens[i].text);
      out.insert(join(words, " "));
    }
  } catch (const TaggerUnavailable&) {
  }
  for (const auto& t : tokens) {
    if (std::isupper(static_cast<unsigned char>(text[t.begin]))) out.insert(t.text);
  }
  return out;
}

std::optional<std::size_t> match_speech(const VideoPost& post, const Corpus& corpus, const EventTagger& tagger) {
  const auto wanted = named_entities(post.claim, tagger);
  std::optional<std::size_t> best;
  std::size_t best_count = 0;
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    const auto& q = corpus[i];
    if (q.post_id == post.post_id || q.speech_sentences.empty()) continue;
    std::set<std::string> have;
    for (const auto& s : q.speech_sentences) {
      if (tokenize(s).empty()) continue;
      const auto e = named_entities(s, tagger);
      have.insert(e.begin(), e.end());
    }
    std::size_t count = 0;
    for (const auto& e : wanted) count += have.count(e);
    if (count == 0) continue;
    if (!best || count > best_count || (count == best_count && q.post_id < corpus[*best].post_id)) {
      best = i;
      best_count = count;
    }
  }
  return best;
}

VideoPost fill_missing_speech(const VideoPost& post, const Corpus& corpus, const EventTagger& tagger) {
  if (!post.speech_sentences.empty()) throw Error("post '" + post.post_id + "' already has speech");
  const auto match = match_speech(post, corpus, tagger);
  if (!match) throw GenerationSkipped("no speech shares an entity with the claim");
  VideoPost out = as_fake(post, Taxonomy::filled_speech, "speech");
  out.speech_sentences = corpus[*match].speech_sentences;
  return out;
}

// ---------------------------------------------------------------------------
// Balanced dataset

TaxonomyMix parse_mix(const std::string& text) {
  std::vector<double> w;
  std::stringstream ss(text);
  std::string part;
  while (std::getline(ss, part, ',')) {
    try {
      std::size_t used = 0;
      w.push_back(std::stod(part, &used));
      if (used != part.size()) throw Error("");
    } catch (const std::exception&) {
      throw Error("bad mix component '" + part + "'");
    }
  }
  if (w.size() != 3) throw Error("mix needs three comma-separated weights (claim,speech,video)");
  if (std::any_of(w.begin(), w.end(), [](double x) { return !(x >= 0); }) || w[0] + w[1] + w[2] <= 0) {
    throw Error("mix weights must be nonnegative with a positive sum");
  }
  return {w[0], w[1], w[2]};
}

Corpus build_balanced_dataset(const Corpus& pristine, const Generators& g, const TaxonomyMix& mix,
                              std::uint64_t seed, SynthesisReport* report) {
  if (pristine.empty()) throw Error("pristine corpus is empty");
  for (const auto& p : pristine.posts()) {
    if (p.taxonomy != Taxonomy::pristine) throw Error("record '" + p.post_id + "' is not pristine");
  }
  const std::size_t n = pristine.size();
  const auto quota = apportion(n, {mix.claim, mix.speech, mix.video});
  SynthesisReport local;
  SynthesisReport& rep = report ? *report : local;

  auto order = [&](std::uint64_t salt) {
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    stable_shuffle(idx, seed ^ salt);
    return idx;
  };

  // Fake claims, one per substitution.
  std::vector<FakeClaim> claims;
  {
    const auto idx = order(0x636c61696dULL);
    std::set<std::string> tried;
    std::size_t cursor = 0;
    while (claims.size() < quota[0] && cursor < n) {
      std::vector<FakeClaim> batch = claims;
      while (batch.size() < quota[0] && cursor < n) {
        const auto& post = pristine[idx[cursor++]];
        if (tried.count(post.post_id)) continue;
        tried.insert(post.post_id);
        try {
          batch.push_back(generate_fake_claim(post, g));
        } catch (const GenerationSkipped& e) {
          rep.reject(post.post_id, Taxonomy::fake_claim, e.what());
        }
      }
      std::vector<VideoPost> unused;
      for (const auto& p : pristine.posts()) {
        if (!tried.count(p.post_id)) unused.push_back(p);
      }
      claims = dedup_alternatives(std::move(batch), Corpus(unused, pristine.n_patches(), pristine.d_v()), g, &rep);
      for (const auto& c : claims) tried.insert(c.source_id);
    }
  }

  std::vector<VideoPost> speech;
  std::vector<std::vector<ManipulationCandidate>> speech_edits;
  {
    const auto idx = order(0x737065656368ULL);
    for (std::size_t c = 0; c < n && speech.size() < quota[1]; ++c) {
      const auto& post = pristine[idx[c]];
      try {
        if (post.speech_sentences.empty()) {
          speech.push_back(fill_missing_speech(post, pristine, g.tagger));
          speech_edits.emplace_back();
        } else {
          auto fake = generate_fake_speech(post, g);
          speech.push_back(std::move(fake.post));
          speech_edits.push_back(std::move(fake.edits));
        }
      } catch (const GenerationSkipped& e) {
        rep.reject(post.post_id, post.speech_sentences.empty() ? Taxonomy::filled_speech : Taxonomy::fake_speech,
                   e.what());
      }
    }
  }

  std::vector<VideoPost> video;
  if (quota[2] > 0) {
    const auto idx = order(0x766964656fULL);
    for (std::size_t c = 0; c < n && video.size() < quota[2]; ++c) {
      video.push_back(generate_fake_video(pristine[idx[c]], pristine, g.videos));
    }
  }

  if (claims.size() < quota[0] || speech.size() < quota[1] || video.size() < quota[2]) {
    std::ostringstream msg;
    msg << "synthesis shortfall: claim " << claims.size() << "/" << quota[0] << ", speech " << speech.size() << "/"
        << quota[1] << ", video " << video.size() << "/" << quota[2];
    throw SynthesisShortfall(msg.str());
  }

  std::vector<VideoPost> all = pristine.posts();
  for (const auto& c : claims) {
    ProvenanceEntry e;
    e.post_id = c.post.post_id;
    e.taxonomy = Taxonomy::fake_claim;
    e.source_ids = {c.source_id};
    e.original = c.chosen.original_claim;
    e.replacement = c.chosen.candidate_claim;
    e.span_kind = c.chosen.target_kind;
    e.substitution = c.chosen.substitution;
    e.contradiction_score = c.chosen.contradiction_score;
    rep.entries.push_back(std::move(e));
    all.push_back(c.post);
  }
  for (std::size_t i = 0; i < speech.size(); ++i) {
    const auto& p = speech[i];
    ProvenanceEntry e;
    e.post_id = p.post_id;
    e.taxonomy = p.taxonomy;
    const auto source = p.post_id.substr(0, p.post_id.rfind('#'));
    e.source_ids = {source};
    if (p.taxonomy == Taxonomy::filled_speech) {
      const auto donor = match_speech(*pristine.find(source), pristine, g.tagger);
      e.source_ids.push_back(pristine[*donor].post_id);
    } else {
      const auto& edit = speech_edits[i].front();
      e.original = edit.original_claim;
      e.replacement = edit.candidate_claim;
      e.span_kind = edit.target_kind;
      e.substitution = edit.substitution;
      e.contradiction_score = edit.contradiction_score;
    }
    rep.entries.push_back(std::move(e));
    all.push_back(p);
  }
  for (const auto& p : video) {
    ProvenanceEntry e;
    e.post_id = p.post_id;
    e.taxonomy = Taxonomy::fake_video;
    const auto source = p.post_id.substr(0, p.post_id.rfind('#'));
    e.source_ids = {source, pristine[match_video(*pristine.find(source), pristine, g.videos)].post_id};
    e.original = pristine.find(source)->video_link;
    e.replacement = p.video_link;
    rep.entries.push_back(std::move(e));
    all.push_back(p);
  }
  return Corpus(std::move(all), pristine.n_patches(), pristine.d_v());
}

}  // namespace twtr
