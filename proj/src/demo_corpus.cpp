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

#include "twtr/demo_corpus.hpp"

#include <cstdio>
#include <random>

#include "twtr/event_structures.hpp"
#include "twtr/text.hpp"

namespace twtr {

namespace {

const std::vector<std::string> kPlaces = {"Ohio",  "Texas",   "Lagos", "Manila", "Lima",
                                          "Delhi", "Nairobi", "Dhaka", "Quito",  "Hanoi"};
const std::vector<std::string> kTriggers = {"confirm", "contain", "fight", "identify", "prevent", "stop"};
const std::vector<std::string> kFillers = {"Residents were asked to stay calm.",
                                           "More updates are expected later this week.",
                                           "Local clinics extended their opening hours.",
                                           "Schools remain open for now."};

RowVector direction(const std::string& key, int dim, std::uint64_t seed) {
  std::mt19937_64 rng(fnv1a64(key, seed));
  std::normal_distribution<Real> normal(0.0, 1.0);
  RowVector v(dim);
  for (int i = 0; i < dim; ++i) v(i) = normal(rng);
  return v / v.norm();
}

}  // namespace

Corpus make_demo_corpus(const DemoCorpusConfig& c) {
  if (c.n_posts == 0 || c.n_patches < 1 || c.d_v < 1 || c.frames_per_video < 1) {
    throw Error("demo corpus sizes must be positive");
  }
  std::mt19937_64 rng(c.seed);
  auto pick = [&](const std::vector<std::string>& from) { return from[rng() % from.size()]; };
  std::normal_distribution<Real> noise(0.0, 1.0);
  const auto& diseases = disease_names();
  const auto& topics = disease_topics();

  std::vector<VideoPost> posts;
  for (std::size_t i = 0; i < c.n_posts; ++i) {
    VideoPost p;
    char id[32];
    std::snprintf(id, sizeof id, "p%04zu", i);
    p.post_id = id;
    p.video_link = "https://video.example/" + p.post_id;
    const auto& disease = diseases[i % diseases.size()];
    const auto topic = pick(topics);
    // Distinct (disease, place) pairs for the first 120 records.
    const auto& place = kPlaces[(i + i / diseases.size()) % kPlaces.size()];
    const auto trigger = pick(kTriggers);
    p.claim = place + " officials " + trigger + " the " + disease + " " + topic + ".";
    if (c.missing_speech_every == 0 || (i + 1) % c.missing_speech_every != 0) {
      p.speech_sentences.push_back(pick(kFillers));
      p.speech_sentences.push_back("Doctors in " + place + " said the " + disease + " " + topic +
                                   " needs close attention.");
      p.speech_sentences.push_back(pick(kFillers));
    }
    p.screen_text_sentences.push_back(place + " health update");

    const RowVector base = direction(disease, c.d_v, c.seed) + 0.5 * direction(place, c.d_v, c.seed);
    for (std::size_t f = 0; f < c.frames_per_video; ++f) {
      FramePatchFeatures frame;
      frame.patches.resize(c.n_patches, c.d_v);
      for (int k = 0; k < c.n_patches; ++k) {
        RowVector row = base;
        for (int d = 0; d < c.d_v; ++d) row(d) += 0.02 * noise(rng);
        frame.patches.row(k) = row;
      }
      p.frames.push_back(std::move(frame));
    }
    p.video_length_s = double(c.frames_per_video);
    p.label = Label::consistent;
    p.taxonomy = Taxonomy::pristine;
    p.verified_account = true;
    posts.push_back(std::move(p));
  }
  return Corpus(std::move(posts), c.n_patches, c.d_v);
}

}  // namespace twtr
