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
#include <iosfwd>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "twtr/encoders.hpp"
#include "twtr/event_structures.hpp"
#include "twtr/types.hpp"

namespace twtr {

struct VideoPost {
  std::string post_id;
  std::string video_link;
  std::string claim;
  std::vector<FramePatchFeatures> frames;
  std::vector<std::string> speech_sentences;
  std::vector<std::string> screen_text_sentences;
  Label label = Label::consistent;
  Taxonomy taxonomy = Taxonomy::pristine;
  bool verified_account = true;
  double video_length_s = 0.0;
};

/// Why a record was rejected or flagged; `line` is 1-based, 0 when unknown.
struct RecordIssue {
  std::size_t line = 0;
  std::string post_id;
  std::string reason;
};

class DuplicatePostId : public Error {
 public:
  using Error::Error;
};

/// Immutable collection of validated records sharing one patch geometry.
class Corpus {
 public:
  Corpus() = default;
  Corpus(std::vector<VideoPost> posts, int n_patches, int d_v);

  const std::vector<VideoPost>& posts() const { return posts_; }
  std::size_t size() const { return posts_.size(); }
  bool empty() const { return posts_.empty(); }
  const VideoPost& operator[](std::size_t i) const { return posts_[i]; }
  int n_patches() const { return n_patches_; }
  int d_v() const { return d_v_; }

  const VideoPost* find(const std::string& post_id) const;
  Corpus subset(const std::vector<std::string>& post_ids) const;

 private:
  std::vector<VideoPost> posts_;
  int n_patches_ = 0;
  int d_v_ = 0;
};

struct IngestOptions {
  bool drop_unverified = false;
};

struct IngestResult {
  Corpus corpus;
  std::vector<RecordIssue> rejections;
};

/// Reads the line-delimited record format. The first non-blank line is a
/// header {"twtr_corpus": 1, "n_patches": N, "d_v": D}; each following line is
/// one record. Records that fail validation are reported, duplicates throw.
IngestResult ingest(std::istream& in, const IngestOptions& options = {},
                    const std::filesystem::path& base_dir = {});
IngestResult ingest(const std::filesystem::path& path, const IngestOptions& options = {});

/// Writes header plus one record per line with frames inline.
void serialize(const Corpus& corpus, std::ostream& out);
void serialize(const Corpus& corpus, const std::filesystem::path& path);

/// Keeps one record per video link, the one with the lowest post_id.
Corpus dedup_by_video(const Corpus& corpus);

struct FilterResult {
  Corpus corpus;
  std::vector<RecordIssue> removed;  // "no event structure"
  std::vector<RecordIssue> flagged;  // tagger failures
};

/// Keeps records whose claim has at least one event trigger.
FilterResult filter_verifiable(const Corpus& corpus, const EventTagger& tagger);

struct CorpusSplit {
  std::vector<std::string> train;
  std::vector<std::string> val;
  std::vector<std::string> test;
};

/// Deterministic 80/10/10 partition stratified by label.
CorpusSplit split(const Corpus& corpus, std::uint64_t seed);

void save_split(const CorpusSplit& split, const std::filesystem::path& path);
CorpusSplit load_split(const std::filesystem::path& path);

/// Lowercased tokens of every claim and speech sentence.
std::set<std::string> corpus_vocabulary(const Corpus& corpus);

/// Largest-remainder apportionment of `total` across `weights`; ties in the
/// fractional part go to the lower index.
std::vector<std::size_t> apportion(std::size_t total, const std::vector<double>& weights);

}  // namespace twtr
