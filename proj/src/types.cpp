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

#include "twtr/types.hpp"

namespace twtr {

std::string_view to_string(Label label) {
  return label == Label::consistent ? "consistent" : "inconsistent";
}

std::string_view to_string(Taxonomy taxonomy) {
  switch (taxonomy) {
    case Taxonomy::pristine:
      return "pristine";
    case Taxonomy::fake_claim:
      return "fake_claim";
    case Taxonomy::fake_speech:
      return "fake_speech";
    case Taxonomy::fake_video:
      return "fake_video";
    case Taxonomy::filled_speech:
      return "filled_speech";
  }
  return "pristine";
}

std::string_view to_string(Modality modality) {
  switch (modality) {
    case Modality::none:
      return "none";
    case Modality::video:
      return "video";
    case Modality::speech:
      return "speech";
    case Modality::claim:
      return "claim";
  }
  return "none";
}

Label parse_label(std::string_view s) {
  if (s == "consistent") return Label::consistent;
  if (s == "inconsistent") return Label::inconsistent;
  throw Error("unknown label '" + std::string(s) + "'");
}

Taxonomy parse_taxonomy(std::string_view s) {
  for (auto t : {Taxonomy::pristine, Taxonomy::fake_claim, Taxonomy::fake_speech,
                 Taxonomy::fake_video, Taxonomy::filled_speech}) {
    if (to_string(t) == s) return t;
  }
  throw Error("unknown taxonomy '" + std::string(s) + "'");
}

Modality parse_modality(std::string_view s) {
  for (auto m : {Modality::none, Modality::video, Modality::speech, Modality::claim}) {
    if (to_string(m) == s) return m;
  }
  throw Error("unknown modality '" + std::string(s) + "'");
}

}  // namespace twtr
