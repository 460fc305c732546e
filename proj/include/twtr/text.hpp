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
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "twtr/types.hpp"

namespace twtr {

/// A word-level token with its byte offsets into the source text.
struct Token {
  std::string text;  // lowercased surface form
  std::size_t begin = 0;
  std::size_t end = 0;
};

/// Splits on whitespace; runs of word characters form one token and every
/// other printable character is its own token. Apostrophes, hyphens, '#'
/// and '@' stay inside words so "china's" and "#covid" survive intact.
std::vector<Token> tokenize(std::string_view text);

std::vector<std::string> token_strings(std::string_view text);

std::string to_lower(std::string_view s);

/// Joins the lowercased tokens of a phrase with single spaces.
std::string normalize_phrase(std::string_view phrase);

std::string join(const std::vector<std::string>& parts, std::string_view sep);

std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t seed = 0xcbf29ce484222325ULL);

/// Fisher-Yates on raw mt19937_64 draws; unlike std::shuffle the permutation
/// is identical across standard library implementations.
template <class T>
void stable_shuffle(std::vector<T>& items, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  for (std::size_t i = items.size(); i > 1; --i) {
    const std::size_t j = static_cast<std::size_t>(rng() % i);
    std::swap(items[i - 1], items[j]);
  }
}

template <class Derived1, class Derived2>
typename Derived1::Scalar cosine_similarity(const Eigen::MatrixBase<Derived1>& a,
                                            const Eigen::MatrixBase<Derived2>& b) {
  using Scalar = typename Derived1::Scalar;
  const Scalar na = a.norm();
  const Scalar nb = b.norm();
  if (na == Scalar(0) || nb == Scalar(0)) return Scalar(0);
  return a.cwiseProduct(b).sum() / (na * nb);
}

}  // namespace twtr
