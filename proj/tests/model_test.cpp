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

#include <gtest/gtest.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <map>
#include <random>
#include <set>

#include "support/fixtures.hpp"
#include "support/reference.hpp"
#include "twtr/model.hpp"

namespace twtr {
namespace {

using testing::random_matrix;
using testing::random_post;
using testing::tiny_config;

// Every tensor redrawn, so no parameter sits at a special value.
ModelParameters randomized(const ModelConfig& c, std::uint64_t seed = 1, double scale = 0.5) {
  auto P = ModelParameters::initialize(c);
  std::mt19937_64 rng(seed);
  for (auto& [name, m] : P.tensors()) m = random_matrix(m.rows(), m.cols(), rng, scale);
  return P;
}

double max_diff(const Matrix& a, const Matrix& b) { return (a - b).cwiseAbs().maxCoeff(); }

TEST(Config, JsonRoundTripAndValidation) {
  auto c = tiny_config(8, 2, 2);
  c.links = {true, false, true};
  c.fusion = Fusion::single_stream;
  c.event_alert = false;
  EXPECT_EQ(to_json(model_config_from_json(to_json(c))), to_json(c));
  EXPECT_EQ(config_hash(c), config_hash(model_config_from_json(to_json(c))));
  c.links = {false, false, false};
  EXPECT_THROW(c.validate(), Error);
  auto d = tiny_config(8, 3);
  EXPECT_THROW(d.validate(), Error);
}

TEST(Parameters, DefaultShapesAndGroups) {
  const auto P = ModelParameters::initialize(ModelConfig{});
  EXPECT_EQ(P.at("gate_table").rows(), 3);
  EXPECT_EQ(P.at("gate_table").cols(), 512);
  EXPECT_EQ(P.at("proj_claim.w").rows(), 768);
  EXPECT_EQ(P.at("proj_patch.w").rows(), 512);
  EXPECT_TRUE(P.all_finite());
  const auto groups = P.groups();
  for (const char* g : {"gate_table", "proj_claim", "proj_speech", "proj_screen", "proj_patch", "aoa_text",
                        "aoa_patch", "fuser_vs", "fuser_vc", "fuser_cs", "head_vs", "head_vc", "head_cs", "combiner"}) {
    EXPECT_NE(std::find(groups.begin(), groups.end(), g), groups.end()) << g;
  }
  EXPECT_EQ(ModelParameters::group_of("aoa_text.0.wq"), "aoa_text");
  EXPECT_EQ(ModelParameters::initialize(ModelConfig{}).at("aoa_text.1.wq"), P.at("aoa_text.1.wq"));
  EXPECT_THROW(P.at("nope"), Error);
}

TEST(AlertGate, TableLookup) {
  const auto P = randomized(tiny_config());
  const Matrix zeros = alert_gate({0, 0, 0}, P);
  for (int i = 0; i < 3; ++i) EXPECT_EQ(zeros.row(i), P.at("gate_table").row(0));
  const Matrix g = alert_gate({0, 1, 2}, P);
  EXPECT_EQ(g, P.at("gate_table"));
  EXPECT_EQ(alert_gate({2, 0, 1, 1}, P), alert_gate({2, 0, 1, 1}, P));
  EXPECT_THROW(alert_gate({0, 3}, P), Error);
}

TEST(GateProject, ZeroAndIdentityGates) {
  const auto P = randomized(tiny_config());
  std::mt19937_64 rng(2);
  const Matrix tokens = random_matrix(3, 6, rng);
  EXPECT_EQ(gate_project(tokens, Matrix::Zero(3, 8), P, "proj_claim"), Matrix::Zero(3, 8));
  const Matrix plain = reference::lin(tokens, P.at("proj_claim.w"), P.at("proj_claim.b")).array().tanh().matrix();
  EXPECT_LT(max_diff(gate_project(tokens, Matrix::Ones(3, 8), P, "proj_claim"), plain), 1e-15);
  EXPECT_THROW(gate_project(tokens, Matrix::Ones(2, 8), P, "proj_claim"), Error);
}

TEST(GateProject, MatchesElementwiseOracle) {
  const auto P = randomized(tiny_config());
  std::mt19937_64 rng(3);
  const Matrix tokens = random_matrix(4, 6, rng);
  const Matrix gates = random_matrix(4, 8, rng);
  const Matrix got = gate_project(tokens, gates, P, "proj_speech");
  for (int i = 0; i < 4; ++i) {
    for (int j = 0; j < 8; ++j) {
      double z = P.at("proj_speech.b")(0, j);
      for (int k = 0; k < 6; ++k) z += tokens(i, k) * P.at("proj_speech.w")(k, j);
      EXPECT_NEAR(got(i, j), gates(i, j) * std::tanh(z), 1e-15);
      EXPECT_LE(std::abs(got(i, j)), std::abs(gates(i, j)));
    }
  }
}

TEST(AoaEncode, MatchesUnrolledLayer) {
  for (int heads : {1, 2}) {
    const auto P = randomized(tiny_config(8, heads, 1), 4);
    std::mt19937_64 rng(5);
    const Matrix seq = random_matrix(3, 8, rng);
    Matrix x(4, 8);
    x << P.at("embed.cls_text"), seq;
    const RowVector want = reference::aoa_layer(P, "aoa_text.0", x, heads).row(0);
    EXPECT_LT(max_diff(aoa_encode(seq, Mask::Constant(3, true), P), want), 1e-14);
  }
}

TEST(AoaEncode, PaddingIsIgnored) {
  const auto P = randomized(tiny_config(8, 2, 2), 6);
  std::mt19937_64 rng(7);
  Matrix seq = random_matrix(5, 8, rng);
  Mask mask(5);
  mask << true, false, true, true, false;
  const RowVector a = aoa_encode(seq, mask, P);
  seq.row(1).setConstant(1e6);
  seq.row(4) = random_matrix(1, 8, rng);
  EXPECT_EQ(aoa_encode(seq, mask, P), a);
  Matrix compact(3, 8);
  compact << seq.row(0), seq.row(2), seq.row(3);
  EXPECT_EQ(aoa_encode(compact, Mask::Constant(3, true), P), a);
  EXPECT_THROW(aoa_encode(seq, Mask::Constant(5, false), P), Error);
}

TEST(AoaEncode, SingleTokenDependsOnClsAndToken) {
  const auto P = randomized(tiny_config(8, 1, 1), 8);
  Matrix one(1, 8);
  one.setConstant(0.3);
  Matrix x(2, 8);
  x << P.at("embed.cls_text"), one;
  EXPECT_LT(max_diff(aoa_encode(one, Mask::Constant(1, true), P), reference::aoa_layer(P, "aoa_text.0", x, 1).row(0)),
            1e-14);
}

TEST(EncodeFrame, MatchesReferenceAndPoolsOnePosition) {
  const auto P = randomized(tiny_config(8, 2, 2), 9);
  std::mt19937_64 rng(10);
  const Matrix patches = random_matrix(3, 5, rng);
  EXPECT_LT(max_diff(encode_frame(make_frame_input(patches), P), reference::frame(P, patches)), 1e-14);
  const Matrix single = patches.topRows(1);
  Matrix x = reference::lin(single, P.at("proj_patch.w"), P.at("proj_patch.b")).array().tanh().matrix() +
             P.at("embed.pos_patch").topRows(1);
  for (int l = 0; l < 2; ++l) x = reference::aoa_layer(P, "aoa_patch." + std::to_string(l), x, 2);
  EXPECT_LT(max_diff(encode_frame(make_frame_input(single), P), x), 1e-14);
}

TEST(EncodeFrame, SymmetricDuplicateRowsPoolToAnyPosition) {
  auto P = randomized(tiny_config(8, 1, 1), 11);
  P.at("embed.pos_patch").rowwise() = P.at("embed.pos_patch").row(0).eval();
  Matrix patches(3, 5);
  patches.rowwise() = RowVector::LinSpaced(5, -1, 1);
  const RowVector pooled = encode_frame(make_frame_input(patches), P);
  const RowVector one = encode_frame(make_frame_input(patches.topRows(1)), P);
  EXPECT_LT(max_diff(pooled, one), 1e-14);
}

TEST(EncodeFrame, ZeroPatchesZeroBiasGivePositionOnlyInput) {
  auto P = randomized(tiny_config(8, 1, 1), 12);
  P.at("proj_patch.b").setZero();
  const Matrix zero = Matrix::Zero(2, 5);
  // tanh(0) = 0, so the stack sees the position rows alone.
  Matrix x = P.at("embed.pos_patch").topRows(2);
  x = reference::aoa_layer(P, "aoa_patch.0", x, 1);
  EXPECT_LT(max_diff(encode_frame(make_frame_input(zero), P), x.colwise().mean()), 1e-14);
}

TEST(PairwiseFuse, MatchesUnrolledTransformer) {
  for (int heads : {1, 2}) {
    const auto P = randomized(tiny_config(8, heads, 1), 13);
    std::mt19937_64 rng(14);
    const std::vector<std::pair<Slot, Matrix>> segs = {{Slot::video, random_matrix(1, 8, rng)},
                                                       {Slot::screen, random_matrix(1, 8, rng)},
                                                       {Slot::speech, random_matrix(1, 8, rng)}};
    EXPECT_LT(max_diff(pairwise_fuse(segs, P, "fuser_vs"), reference::fuse(P, "fuser_vs", segs)), 1e-14);
    const std::vector<std::pair<Slot, Matrix>> longer = {{Slot::claim, random_matrix(1, 8, rng)},
                                                         {Slot::speech, random_matrix(3, 8, rng)}};
    EXPECT_LT(max_diff(pairwise_fuse(longer, P, "fuser_cs"), reference::fuse(P, "fuser_cs", longer)), 1e-14);
  }
}

TEST(PairwiseFuse, TypeEmbeddingsBreakSymmetry) {
  const auto P = randomized(tiny_config(8, 1, 1), 15);
  std::mt19937_64 rng(16);
  const Matrix a = random_matrix(1, 8, rng), b = random_matrix(1, 8, rng);
  const RowVector r1 = pairwise_fuse({{Slot::claim, a}, {Slot::speech, b}}, P, "fuser_cs");
  const RowVector r2 = pairwise_fuse({{Slot::speech, a}, {Slot::claim, b}}, P, "fuser_cs");
  EXPECT_GT(max_diff(r1, r2), 1e-6);
  EXPECT_THROW(pairwise_fuse({}, P, "fuser_cs"), Error);
}

TEST(Forward, ClaimSpeechLinkIgnoresScreenAndVideo) {
  const auto c = tiny_config(8, 2, 1);
  const auto P = randomized(c, 17);
  std::mt19937_64 rng(18);
  auto in = random_post(rng, c, false);
  const auto base = forward(in, P);
  in.screen_text.front().tokens.setConstant(0.7);
  in.frames.front().patches.setConstant(-0.4);
  const auto changed = forward(in, P);
  EXPECT_EQ(changed.scores.r_cs, base.scores.r_cs);
  EXPECT_GT(max_diff(changed.scores.r_vs, base.scores.r_vs), 1e-9);
  EXPECT_GT(max_diff(changed.scores.r_vc, base.scores.r_vc), 1e-9);
}

TEST(Score, ZeroMlpGivesHalf) {
  auto P = randomized(tiny_config(), 19);
  for (const char* l : {"vs", "vc", "cs"}) {
    for (const char* n : {".w1", ".b1", ".w2", ".b2"}) P.at(std::string("head_") + l + n).setZero();
  }
  std::mt19937_64 rng(20);
  const auto s = score(random_matrix(1, 8, rng), random_matrix(1, 8, rng), random_matrix(1, 8, rng), P);
  EXPECT_EQ(s.c_vs, 0.5);
  EXPECT_EQ(s.c_vc, 0.5);
  EXPECT_EQ(s.c_cs, 0.5);
}

TEST(Score, LargeBiasSaturatesAndOracleMatches) {
  auto P = randomized(tiny_config(), 21);
  std::mt19937_64 rng(22);
  const RowVector r = random_matrix(1, 8, rng);
  const auto s = score(r, r, r, P);
  EXPECT_NEAR(s.c_vs, reference::head(P, "vs", r), 1e-15);
  EXPECT_NEAR(s.c_vc, reference::head(P, "vc", r), 1e-15);
  EXPECT_NEAR(s.c_cs, reference::head(P, "cs", r), 1e-15);
  P.at("head_vc.b2")(0, 0) = 1e3;
  EXPECT_EQ(score(r, r, r, P).c_vc, 1.0);
}

TEST(Predict, UntrainedIsHalfAndBoundaryIsInconsistent) {
  const auto P = ModelParameters::initialize(tiny_config());
  ConsistencyScores s;
  s.c_vs = 0.1;
  s.c_vc = 0.8;
  s.c_cs = 0.4;
  EXPECT_EQ(predict(s, P), 0.5);
  EXPECT_EQ(decide(0.5), Label::inconsistent);
  EXPECT_EQ(decide(std::nextafter(0.5, 0.0)), Label::consistent);
  EXPECT_EQ(decide(0.3, 0.25), Label::inconsistent);
}

TEST(Predict, MatchesUnrolledCombiner) {
  const auto P = randomized(tiny_config(), 23);
  ConsistencyScores s;
  s.c_vs = 0.15;
  s.c_vc = 0.9;
  s.c_cs = 0.55;
  EXPECT_NEAR(predict(s, P), reference::combine(P, {{0, 0.15}, {1, 0.9}, {2, 0.55}}), 1e-15);
  EXPECT_EQ(predict(s, P), predict(s, P));
  auto c = tiny_config();
  c.links = {true, false, true};
  auto Q = P;
  Q = ModelParameters(c, P.tensors());
  EXPECT_NEAR(predict(s, Q), reference::combine(P, {{0, 0.15}, {2, 0.55}}), 1e-15);
}

ConsistencyScores triple(double vs, double vc, double cs) {
  ConsistencyScores s;
  s.c_vs = vs;
  s.c_vc = vc;
  s.c_cs = cs;
  return s;
}

TEST(Explain, WorkedCases) {
  EXPECT_EQ(explain(triple(0.2, 0.9, 0.1)), Modality::speech);
  EXPECT_EQ(explain(triple(0.1, 0.2, 0.9)), Modality::video);
  EXPECT_EQ(explain(triple(0.9, 0.2, 0.1)), Modality::claim);
}

TEST(Explain, AllOrderingsHitEachModalityTwice) {
  std::array<double, 3> v = {0.1, 0.5, 0.9};
  std::map<Modality, int> fibers;
  do {
    const auto m = explain(triple(v[0], v[1], v[2]));
    // Oracle: the link with the largest score is the one not involving the modality.
    const auto top = std::max_element(v.begin(), v.end()) - v.begin();
    const Modality want = top == 0 ? Modality::claim : top == 1 ? Modality::speech : Modality::video;
    EXPECT_EQ(m, want);
    ++fibers[m];
  } while (std::next_permutation(v.begin(), v.end()));
  EXPECT_EQ(fibers, (std::map<Modality, int>{{Modality::video, 2}, {Modality::speech, 2}, {Modality::claim, 2}}));
}

TEST(Explain, TiesAndRemovedLinks) {
  EXPECT_EQ(explain(triple(0.3, 0.3, 0.3)), Modality::video);
  EXPECT_EQ(explain(triple(0.5, 0.2, 0.2)), Modality::claim);
  EXPECT_EQ(explain(triple(0.2, 0.5, 0.2)), Modality::speech);
  const double nan = std::numeric_limits<double>::quiet_NaN();
  EXPECT_EQ(explain(triple(nan, 0.9, 0.1)), Modality::claim);
  EXPECT_EQ(explain(triple(0.9, nan, 0.1)), Modality::speech);
  Verdict v;
  v.predicted_label = Label::consistent;
  EXPECT_THROW(explain(v), Error);
}

TEST(Forward, MatchesReferenceNetwork) {
  for (auto fusion : {Fusion::pairwise, Fusion::single_stream}) {
    for (bool alert : {true, false}) {
      auto c = tiny_config(8, 2, 2);
      c.fusion = fusion;
      c.event_alert = alert;
      const auto P = randomized(c, 24);
      std::mt19937_64 rng(25);
      for (int trial = 0; trial < 10; ++trial) {
        const auto in = random_post(rng, c);
        const auto v = forward(in, P);
        const auto want = reference::forward(P, in);
        EXPECT_NEAR(v.p_inconsistent, want.p, 1e-13);
        EXPECT_NEAR(v.scores.c_vs, want.c[0], 1e-13);
        EXPECT_NEAR(v.scores.c_vc, want.c[1], 1e-13);
        EXPECT_NEAR(v.scores.c_cs, want.c[2], 1e-13);
        EXPECT_LT(max_diff(v.scores.r_vc, want.r[1]), 1e-13);
      }
    }
  }
}

TEST(Forward, DeterministicAndVerdictInvariant) {
  const auto c = tiny_config(8, 2, 1);
  const auto P = randomized(c, 26, 1.0);
  std::mt19937_64 rng(27);
  int both[2] = {0, 0};
  for (int trial = 0; trial < 40; ++trial) {
    const auto in = random_post(rng, c);
    const auto a = forward(in, P);
    const auto b = forward(in, P);
    EXPECT_EQ(a.p_inconsistent, b.p_inconsistent);
    EXPECT_EQ(a.scores.r_vs, b.scores.r_vs);
    EXPECT_GE(a.p_inconsistent, 0.0);
    EXPECT_LE(a.p_inconsistent, 1.0);
    for (Link l : kLinks) {
      EXPECT_GE(a.scores[l], 0.0);
      EXPECT_LE(a.scores[l], 1.0);
    }
    EXPECT_EQ(a.explanation == Modality::none, a.predicted_label == Label::consistent);
    ++both[a.predicted_label == Label::inconsistent];
  }
  EXPECT_GT(both[0], 0);
  EXPECT_GT(both[1], 0);
}

TEST(Forward, RemovedLinkReportsNaN) {
  auto c = tiny_config();
  c.links = {false, true, true};
  const auto P = randomized(c, 28);
  std::mt19937_64 rng(29);
  const auto v = forward(random_post(rng, c), P);
  EXPECT_TRUE(std::isnan(v.scores.c_vs));
  EXPECT_EQ(v.scores.r_vs.size(), 0);
  EXPECT_FALSE(std::isnan(v.scores.c_vc));
}

TEST(Forward, BatchEqualsLoop) {
  const auto c = tiny_config(8, 2, 2);
  const auto P = randomized(c, 30);
  std::mt19937_64 rng(31);
  std::vector<PostInput> batch;
  for (int i = 0; i < 7; ++i) batch.push_back(random_post(rng, c));
  const auto together = forward_batch(batch, P);
  ASSERT_EQ(together.size(), batch.size());
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const auto alone = forward(batch[i], P);
    EXPECT_NEAR(together[i].p_inconsistent, alone.p_inconsistent, 1e-12);
    for (Link l : kLinks) EXPECT_NEAR(together[i].scores[l], alone.scores[l], 1e-12);
    EXPECT_LT(max_diff(together[i].scores.r_cs, alone.scores.r_cs), 1e-12);
    EXPECT_EQ(together[i].predicted_label, alone.predicted_label);
  }
  EXPECT_TRUE(forward_batch({}, P).empty());
}

TEST(Forward, PaddingFillDoesNotMatter) {
  const auto c = tiny_config(8, 2, 2);
  const auto P = randomized(c, 32);
  std::mt19937_64 rng(33);
  std::vector<PostInput> batch;
  for (int i = 0; i < 5; ++i) batch.push_back(random_post(rng, c));
  const auto a = pad_batch(batch, 0.0);
  const auto b = pad_batch(batch, 123.0);
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const auto va = forward(a[i], P);
    const auto vb = forward(b[i], P);
    const auto raw = forward(batch[i], P);
    EXPECT_EQ(va.p_inconsistent, vb.p_inconsistent);
    EXPECT_EQ(va.p_inconsistent, raw.p_inconsistent);
    EXPECT_EQ(va.scores.r_vs, raw.scores.r_vs);
  }
}

TEST(Forward, ZeroGateTableMakesTextContentIrrelevant) {
  const auto c = tiny_config(8, 2, 1);
  auto P = randomized(c, 34);
  P.at("gate_table").setZero();
  std::mt19937_64 rng(35);
  // Gated tokens are zero, so only [cls] and the positions reach the stack.
  const Matrix tok_a = random_matrix(3, 6, rng), tok_b = random_matrix(3, 6, rng);
  const auto in_a = make_text_input(tok_a, {0, 1, 2});
  const auto in_b = make_text_input(tok_b, {2, 2, 0});
  auto post = random_post(rng, c, false);
  post.claim = in_a;
  const auto va = forward(post, P);
  post.claim = in_b;
  const auto vb = forward(post, P);
  EXPECT_EQ(va.scores.r_cs, vb.scores.r_cs);
  EXPECT_EQ(va.p_inconsistent, vb.p_inconsistent);
}

TEST(Forward, FrameOrderMatters) {
  const auto c = tiny_config(8, 2, 1);
  const auto P = randomized(c, 36);
  std::mt19937_64 rng(37);
  auto in = random_post(rng, c, false);
  while (in.frames.size() < 2) in = random_post(rng, c, false);
  const auto a = forward(in, P);
  std::swap(in.frames[0], in.frames[1]);
  EXPECT_GT(max_diff(forward(in, P).scores.r_vs, a.scores.r_vs), 1e-9);
}

TEST(Forward, InputErrors) {
  const auto c = tiny_config();
  const auto P = randomized(c, 38);
  std::mt19937_64 rng(39);
  auto in = random_post(rng, c);
  in.frames.clear();
  in.frame_mask = Mask();
  EXPECT_THROW(forward(in, P), Error);
  auto long_text = random_post(rng, c);
  long_text.claim = testing::random_text(rng, c.d_text, c.max_text_tokens + 1);
  EXPECT_THROW(forward(long_text, P), Error);
}

TEST(LossAndGradient, MatchesFiniteDifferencesOnSampledEntries) {
  const auto c = tiny_config(8, 1, 1);
  const auto P = randomized(c, 40, 0.4);
  std::mt19937_64 rng(41);
  std::vector<PostInput> posts;
  for (int i = 0; i < 3; ++i) posts.push_back(random_post(rng, c, false));
  const std::vector<const PostInput*> batch = {&posts[0], &posts[1], &posts[2]};
  const std::vector<Label> labels = {Label::inconsistent, Label::consistent, Label::inconsistent};
  auto G = P.zeros_like();
  std::vector<double> probs;
  const double loss = loss_and_gradient(batch, labels, P, &G, &probs);
  double want = 0;
  for (std::size_t i = 0; i < 3; ++i) {
    const double p = reference::forward(P, posts[i]).p;
    EXPECT_NEAR(probs[i], p, 1e-13);
    want -= labels[i] == Label::inconsistent ? std::log(p) : std::log(1 - p);
  }
  EXPECT_NEAR(loss, want / 3, 1e-13);
  for (const auto& [name, m] : P.tensors()) {
    if (name.rfind("fuser_single", 0) == 0) {
      EXPECT_EQ(G.at(name).cwiseAbs().maxCoeff(), 0.0);
      continue;
    }
    const Eigen::Index j = static_cast<Eigen::Index>(rng() % static_cast<std::uint64_t>(m.size()));
    auto plus = P, minus = P;
    plus.at(name).data()[j] += 1e-6;
    minus.at(name).data()[j] -= 1e-6;
    const double numeric =
        (loss_and_gradient(batch, labels, plus, nullptr) - loss_and_gradient(batch, labels, minus, nullptr)) / 2e-6;
    EXPECT_NEAR(G.at(name).data()[j], numeric, 1e-6 * std::max(1.0, std::abs(numeric))) << name;
  }
}

}  // namespace
}  // namespace twtr
