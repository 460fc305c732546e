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

#include <random>
#include <string>
#include <vector>

#include "twtr/corpus.hpp"
#include "twtr/demo_corpus.hpp"
#include "twtr/model.hpp"
#include "twtr/synthesis.hpp"
#include "twtr/train_eval.hpp"

namespace twtr::testing {

inline VideoPost make_post(const std::string& id, const std::string& link, const std::string& claim,
                           Taxonomy taxonomy = Taxonomy::pristine, int n_patches = 2, int d_v = 3,
                           std::size_t n_frames = 1, double fill = 0.25) {
  VideoPost p;
  p.post_id = id;
  p.video_link = link;
  p.claim = claim;
  p.taxonomy = taxonomy;
  p.label = label_of(taxonomy);
  for (std::size_t f = 0; f < n_frames; ++f) {
    FramePatchFeatures frame;
    frame.patches = Matrix::Constant(n_patches, d_v, fill + 0.125 * double(f));
    p.frames.push_back(std::move(frame));
  }
  p.video_length_s = double(n_frames);
  return p;
}

inline Matrix random_matrix(Eigen::Index rows, Eigen::Index cols, std::mt19937_64& rng, double scale = 1.0) {
  std::normal_distribution<double> normal(0.0, scale);
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = normal(rng);
  return m;
}

/// Small model suitable for exhaustive checks.
inline ModelConfig tiny_config(int d = 8, int heads = 1, int layers = 1) {
  ModelConfig c;
  c.d_model = d;
  c.d_text = 6;
  c.d_visual = 5;
  c.n_patches = 3;
  c.aoa_layers = layers;
  c.aoa_heads = heads;
  c.fuse_layers = layers;
  c.fuse_heads = heads;
  c.max_text_tokens = 12;
  c.max_sequence = 12;
  return c;
}

inline TextInput random_text(std::mt19937_64& rng, int d_text, int length) {
  AlertIndexSequence alert(static_cast<std::size_t>(length));
  for (auto& a : alert) a = static_cast<int>(rng() % 3);
  return make_text_input(random_matrix(length, d_text, rng), std::move(alert));
}

/// Random unpadded input for `config`. Speech or screen text may be absent.
inline PostInput random_post(std::mt19937_64& rng, const ModelConfig& config, bool allow_missing = true) {
  PostInput in;
  auto len = [&](int max) { return 1 + static_cast<int>(rng() % static_cast<std::uint64_t>(max)); };
  in.claim = random_text(rng, config.d_text, len(5));
  const int n_speech = allow_missing ? static_cast<int>(rng() % 3) : 1 + static_cast<int>(rng() % 2);
  for (int i = 0; i < n_speech; ++i) in.speech.push_back(random_text(rng, config.d_text, len(4)));
  const int n_screen = allow_missing ? static_cast<int>(rng() % 2) : 1;
  for (int i = 0; i < n_screen; ++i) in.screen_text.push_back(random_text(rng, config.d_text, len(3)));
  const int n_frames = len(3);
  for (int i = 0; i < n_frames; ++i) {
    in.frames.push_back(make_frame_input(random_matrix(len(config.n_patches), config.d_visual, rng)));
  }
  in.frame_mask = Mask::Constant(n_frames, true);
  return in;
}

/// Default stub components for synthesis runs.
struct StubWorld {
  LexiconTagger tagger = LexiconTagger::covid_default();
  StubMaskedLM masker = StubMaskedLM::covid_default();
  StubNLI nli = StubNLI::covid_default();
  EncoderConfig encoder{"stub", 4, 512, 768, 17};
  StubSentenceEmbedder sentences{encoder};
  PooledFrameEmbedder videos;
  StubTextEncoder text_encoder{encoder};

  Generators generators(const Corpus& pool, SynthesisConfig config = {}) const {
    return Generators{tagger, masker, nli, sentences, videos, corpus_vocabulary(pool), config};
  }
  FeatureBuilder features() const { return FeatureBuilder(text_encoder, tagger, 64); }
};

/// 32 balanced records for the overfit check: 16 fakes synthesized from demo
/// posts 0-15 and the untouched pristine posts 16-31, so no fake sits next to
/// the record it was made from.
inline Corpus overfit_corpus(const StubWorld& world) {
  DemoCorpusConfig dc;
  dc.n_posts = 32;
  dc.seed = 5;
  const Corpus all = make_demo_corpus(dc);
  std::vector<std::string> sources;
  for (std::size_t i = 0; i < 16; ++i) sources.push_back(all[i].post_id);
  const Corpus pool = all.subset(sources);
  const Corpus built = build_balanced_dataset(pool, world.generators(pool), {}, 3);
  std::vector<VideoPost> posts;
  for (const auto& p : built.posts()) {
    if (p.taxonomy != Taxonomy::pristine) posts.push_back(p);
  }
  for (std::size_t i = 16; i < 32; ++i) posts.push_back(all[i]);
  return Corpus(std::move(posts), all.n_patches(), all.d_v());
}

}  // namespace twtr::testing
