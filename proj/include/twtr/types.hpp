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
#include <stdexcept>
#include <string>
#include <string_view>

#include <Eigen/Dense>

namespace twtr {

using Real = double;

template <class T>
using MatrixX = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic>;
template <class T>
using RowVectorX = Eigen::Matrix<T, 1, Eigen::Dynamic>;
template <class T>
using VectorX = Eigen::Matrix<T, Eigen::Dynamic, 1>;

using Matrix = MatrixX<Real>;
using RowVector = RowVectorX<Real>;
using Vector = VectorX<Real>;

/// Per-position validity flags; true marks a real (non-padded) position.
using Mask = Eigen::Array<bool, Eigen::Dynamic, 1>;

enum class Label { consistent, inconsistent };

enum class Taxonomy { pristine, fake_claim, fake_speech, fake_video, filled_speech };

/// Modality flagged by an explanation.
enum class Modality { none, video, speech, claim };

std::string_view to_string(Label label);
std::string_view to_string(Taxonomy taxonomy);
std::string_view to_string(Modality modality);

Label parse_label(std::string_view s);
Taxonomy parse_taxonomy(std::string_view s);
Modality parse_modality(std::string_view s);

/// Label implied by a taxonomy: only pristine records are consistent.
constexpr Label label_of(Taxonomy t) {
  return t == Taxonomy::pristine ? Label::consistent : Label::inconsistent;
}

/// Modality that an inconsistent taxonomy manipulates.
constexpr Modality manipulated_modality(Taxonomy t) {
  switch (t) {
    case Taxonomy::fake_claim:
      return Modality::claim;
    case Taxonomy::fake_speech:
    case Taxonomy::filled_speech:
      return Modality::speech;
    case Taxonomy::fake_video:
      return Modality::video;
    case Taxonomy::pristine:
      break;
  }
  return Modality::none;
}

/// Half-open token range [begin, end).
struct TokenSpan {
  std::size_t begin = 0;
  std::size_t end = 0;

  std::size_t size() const { return end - begin; }
  bool empty() const { return end <= begin; }
  bool contains(std::size_t i) const { return i >= begin && i < end; }
  bool overlaps(const TokenSpan& o) const { return begin < o.end && o.begin < end; }
  friend bool operator==(const TokenSpan&, const TokenSpan&) = default;
};

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InputNotFound : public Error {
 public:
  using Error::Error;
};

}  // namespace twtr
