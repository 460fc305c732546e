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

#include "twtr/corpus.hpp"

namespace twtr {

struct DemoCorpusConfig {
  std::size_t n_posts = 48;
  int n_patches = 4;
  int d_v = 512;
  std::size_t frames_per_video = 4;
  /// Every k-th record has no speech transcript (0 disables).
  std::size_t missing_speech_every = 6;
  std::uint64_t seed = 11;
};

/// Synthetic pristine outbreak-news posts. Each video's frames are drawn
/// around a direction tied to its disease and place, so similar stories have
/// similar videos, and every claim carries a manipulable argument phrase.
Corpus make_demo_corpus(const DemoCorpusConfig& config);

}  // namespace twtr
