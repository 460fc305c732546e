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

#include "twtr/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>

#include <nlohmann/json.hpp>

namespace twtr {

using nlohmann::json;

namespace {

constexpr const char* kHeaderKey = "twtr_corpus";

bool blank(const std::string& line) { return line.find_first_not_of(" \t\r") == std::string::npos; }

std::vector<std::string> string_list(const json& j, const char* key) {
  if (!j.contains(key)) return {};
  return j.at(key).get<std::vector<std::string>>();
}

// Throws Error with a human-readable reason; the caller turns it into a rejection.
VideoPost parse_record(const json& j, int n_patches, int d_v, const std::filesystem::path& base_dir) {
  for (const char* key : {"post_id", "video_link", "claim", "label", "taxonomy"}) {
    if (!j.contains(key)) throw Error(std::string("missing required field '") + key + "'");
  }
  VideoPost p;
  p.post_id = j.at("post_id").get<std::string>();
  p.video_link = j.at("video_link").get<std::string>();
  p.claim = j.at("claim").get<std::string>();
  if (p.post_id.empty()) throw Error("empty post_id");
  if (p.claim.empty()) throw Error("empty claim");
  p.speech_sentences = string_list(j, "speech");
  p.screen_text_sentences = string_list(j, "screen_text");
  p.label = parse_label(j.at("label").get<std::string>());
  p.taxonomy = parse_taxonomy(j.at("taxonomy").get<std::string>());
  if (label_of(p.taxonomy) != p.label) throw Error("label does not match taxonomy");
  p.verified_account = j.value("verified", true);

  if (j.contains("frames")) {
    for (const auto& frame : j.at("frames")) {
      const auto values = frame.get<std::vector<double>>();
      if (values.size() != std::size_t(n_patches) * std::size_t(d_v)) {
        throw Error("frame has " + std::to_string(values.size()) + " values, expected " +
                    std::to_string(n_patches * d_v));
      }
      FramePatchFeatures f;
      f.patches = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
          values.data(), n_patches, d_v);
      if (!f.patches.allFinite()) throw Error("non-finite frame feature");
      p.frames.push_back(std::move(f));
    }
  } else if (j.contains("frames_ref")) {
    const auto sidecar = SidecarFeatures::load(base_dir / j.at("frames_ref").get<std::string>());
    if (sidecar.n_patches() != n_patches || sidecar.d_v() != d_v) {
      throw Error("sidecar geometry does not match corpus header");
    }
    p.frames = sidecar.frames();
  } else {
    throw Error("missing required field 'frames'");
  }
  if (p.frames.empty()) throw Error("record has no frames");
  p.video_length_s = j.value("video_length_s", static_cast<double>(p.frames.size()));
  if (!(p.video_length_s >= 0)) throw Error("negative video length");
  return p;
}

json record_json(const VideoPost& p) {
  json frames = json::array();
  for (const auto& f : p.frames) {
    json row = json::array();
    for (Eigen::Index r = 0; r < f.patches.rows(); ++r) {
      for (Eigen::Index c = 0; c < f.patches.cols(); ++c) row.push_back(f.patches(r, c));
    }
    frames.push_back(std::move(row));
  }
  return json{{"post_id", p.post_id},
              {"video_link", p.video_link},
              {"claim", p.claim},
              {"speech", p.speech_sentences},
              {"screen_text", p.screen_text_sentences},
              {"frames", std::move(frames)},
              {"label", std::string(to_string(p.label))},
              {"taxonomy", std::string(to_string(p.taxonomy))},
              {"verified", p.verified_account},
              {"video_length_s", p.video_length_s}};
}

}  // namespace

Corpus::Corpus(std::vector<VideoPost> posts, int n_patches, int d_v)
    : posts_(std::move(posts)), n_patches_(n_patches), d_v_(d_v) {
  std::set<std::string> seen;
  for (const auto& p : posts_) {
    if (!seen.insert(p.post_id).second) throw DuplicatePostId("duplicate post_id '" + p.post_id + "'");
    for (const auto& f : p.frames) {
      if (f.patches.rows() != n_patches_ || f.patches.cols() != d_v_) {
        throw Error("post '" + p.post_id + "' has frames of the wrong shape");
      }
    }
  }
}

const VideoPost* Corpus::find(const std::string& post_id) const {
  for (const auto& p : posts_) {
    if (p.post_id == post_id) return &p;
  }
  return nullptr;
}

Corpus Corpus::subset(const std::vector<std::string>& post_ids) const {
  std::map<std::string, const VideoPost*> index;
  for (const auto& p : posts_) index[p.post_id] = &p;
  std::vector<VideoPost> out;
  for (const auto& id : post_ids) {
    auto it = index.find(id);
    if (it == index.end()) throw Error("post '" + id + "' not in corpus");
    out.push_back(*it->second);
  }
  return Corpus(std::move(out), n_patches_, d_v_);
}

IngestResult ingest(std::istream& in, const IngestOptions& options, const std::filesystem::path& base_dir) {
  IngestResult result;
  std::vector<VideoPost> posts;
  std::set<std::string> seen;
  int n_patches = 0;
  int d_v = 0;
  bool have_header = false;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (blank(line)) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::parse_error& e) {
      result.rejections.push_back({line_no, "", std::string("malformed line: ") + e.what()});
      continue;
    }
    if (!have_header) {
      if (!j.is_object() || !j.contains(kHeaderKey)) {
        throw Error("line " + std::to_string(line_no) + ": expected corpus header");
      }
      n_patches = j.at("n_patches").get<int>();
      d_v = j.at("d_v").get<int>();
      if (n_patches < 1 || d_v < 1) throw Error("corpus header has nonpositive dimensions");
      have_header = true;
      continue;
    }
    std::string id = j.is_object() ? j.value("post_id", std::string()) : std::string();
    try {
      if (!j.is_object()) throw Error("record is not an object");
      auto post = parse_record(j, n_patches, d_v, base_dir);
      if (options.drop_unverified && !post.verified_account) {
        result.rejections.push_back({line_no, post.post_id, "unverified account"});
        continue;
      }
      if (!seen.insert(post.post_id).second) {
        throw DuplicatePostId("line " + std::to_string(line_no) + ": duplicate post_id '" + post.post_id + "'");
      }
      posts.push_back(std::move(post));
    } catch (const DuplicatePostId&) {
      throw;
    } catch (const std::exception& e) {
      result.rejections.push_back({line_no, id, e.what()});
    }
  }
  result.corpus = Corpus(std::move(posts), n_patches, d_v);
  return result;
}

IngestResult ingest(const std::filesystem::path& path, const IngestOptions& options) {
  std::ifstream in(path);
  if (!in) throw InputNotFound("input not found: " + path.string());
  return ingest(in, options, path.parent_path());
}

void serialize(const Corpus& corpus, std::ostream& out) {
  out << json{{kHeaderKey, 1}, {"n_patches", corpus.n_patches()}, {"d_v", corpus.d_v()}}.dump() << '\n';
  for (const auto& p : corpus.posts()) out << record_json(p).dump() << '\n';
}

void serialize(const Corpus& corpus, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  serialize(corpus, out);
}

Corpus dedup_by_video(const Corpus& corpus) {
  std::map<std::string, std::size_t> keep;  // link -> index of lowest post_id
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    auto [it, inserted] = keep.emplace(corpus[i].video_link, i);
    if (!inserted && corpus[i].post_id < corpus[it->second].post_id) it->second = i;
  }
  std::vector<bool> kept(corpus.size(), false);
  for (const auto& [link, i] : keep) kept[i] = true;
  std::vector<VideoPost> out;
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    if (kept[i]) out.push_back(corpus[i]);
  }
  return Corpus(std::move(out), corpus.n_patches(), corpus.d_v());
}

FilterResult filter_verifiable(const Corpus& corpus, const EventTagger& tagger) {
  FilterResult result;
  std::vector<VideoPost> out;
  for (const auto& p : corpus.posts()) {
    try {
      if (tag_events(p.claim, tagger).triggers.empty()) {
        result.removed.push_back({0, p.post_id, "no event structure"});
        continue;
      }
    } catch (const std::exception& e) {
      result.flagged.push_back({0, p.post_id, std::string("tagger failure: ") + e.what()});
      continue;
    }
    out.push_back(p);
  }
  result.corpus = Corpus(std::move(out), corpus.n_patches(), corpus.d_v());
  return result;
}

std::vector<std::size_t> apportion(std::size_t total, const std::vector<double>& weights) {
  const double sum = std::accumulate(weights.begin(), weights.end(), 0.0);
  if (weights.empty() || !(sum > 0)) throw Error("apportion needs positive weights");
  std::vector<std::size_t> counts(weights.size());
  std::vector<double> remainder(weights.size());
  std::size_t assigned = 0;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    if (weights[i] < 0) throw Error("apportion weights must be nonnegative");
    const double exact = double(total) * weights[i] / sum;
    counts[i] = static_cast<std::size_t>(std::floor(exact));
    remainder[i] = exact - double(counts[i]);
    assigned += counts[i];
  }
  std::vector<std::size_t> order(weights.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return remainder[a] > remainder[b] + 1e-12; });
  for (std::size_t k = 0; assigned < total; ++k, ++assigned) ++counts[order[k % order.size()]];
  return counts;
}

CorpusSplit split(const Corpus& corpus, std::uint64_t seed) {
  const std::size_t n = corpus.size();
  if (n < 10) throw Error("corpus too small to split (" + std::to_string(n) + " < 10 records)");
  const std::size_t n_val = (n + 5) / 10;
  const std::size_t n_test = (n + 5) / 10;

  std::vector<std::string> by_label[2];
  for (const auto& p : corpus.posts()) by_label[p.label == Label::inconsistent].push_back(p.post_id);
  const std::vector<double> sizes = {double(by_label[0].size()), double(by_label[1].size())};
  const auto val_quota = apportion(n_val, sizes);
  // Give test the opposite tie-break so small splits do not both lean one way.
  auto test_quota = apportion(n_test, {sizes[1], sizes[0]});
  std::swap(test_quota[0], test_quota[1]);
  for (int c = 0; c < 2; ++c) {
    // Keep both quotas within the class by shifting overflow to the other class.
    while (val_quota[c] + test_quota[c] > by_label[c].size() && test_quota[c] > 0) {
      --test_quota[c];
      ++test_quota[1 - c];
    }
  }

  CorpusSplit out;
  for (int c = 0; c < 2; ++c) {
    auto ids = by_label[c];
    std::sort(ids.begin(), ids.end());
    stable_shuffle(ids, seed * 2 + std::uint64_t(c) + 0x51ed27);
    for (std::size_t i = 0; i < ids.size(); ++i) {
      if (i < val_quota[c]) {
        out.val.push_back(ids[i]);
      } else if (i < val_quota[c] + test_quota[c]) {
        out.test.push_back(ids[i]);
      } else {
        out.train.push_back(ids[i]);
      }
    }
  }
  for (auto* part : {&out.train, &out.val, &out.test}) std::sort(part->begin(), part->end());
  return out;
}

void save_split(const CorpusSplit& s, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  out << json{{"train", s.train}, {"val", s.val}, {"test", s.test}}.dump(1) << '\n';
}

CorpusSplit load_split(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InputNotFound("input not found: " + path.string());
  const auto j = json::parse(in);
  return {j.at("train").get<std::vector<std::string>>(), j.at("val").get<std::vector<std::string>>(),
          j.at("test").get<std::vector<std::string>>()};
}

std::set<std::string> corpus_vocabulary(const Corpus& corpus) {
  std::set<std::string> vocab;
  for (const auto& p : corpus.posts()) {
    for (auto& t : token_strings(p.claim)) vocab.insert(std::move(t));
    for (const auto& s : p.speech_sentences) {
      for (auto& t : token_strings(s)) vocab.insert(std::move(t));
    }
  }
  return vocab;
}

}  // namespace twtr
