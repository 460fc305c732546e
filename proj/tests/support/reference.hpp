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

// Straight-line re-implementation of the network with plain Eigen, used as an
// oracle for the tape-based model. It shares no code with the library.

#include <cmath>
#include <numbers>
#include <string>
#include <utility>
#include <vector>

#include "twtr/model.hpp"

namespace twtr::reference {

inline Matrix lin(const Matrix& x, const Matrix& w, const Matrix& b) {
  Matrix y = x * w;
  for (Eigen::Index i = 0; i < y.rows(); ++i) y.row(i) += b.row(0);
  return y;
}

inline double sigm(double x) { return 1.0 / (1.0 + std::exp(-x)); }

inline Matrix attention(const Matrix& q, const Matrix& k, const Matrix& v, int heads) {
  const auto dh = q.cols() / heads;
  Matrix out(q.rows(), q.cols());
  for (int h = 0; h < heads; ++h) {
    for (Eigen::Index i = 0; i < q.rows(); ++i) {
      std::vector<double> w(static_cast<std::size_t>(k.rows()));
      double mx = -1e300, total = 0;
      for (Eigen::Index j = 0; j < k.rows(); ++j) {
        double s = 0;
        for (Eigen::Index c = 0; c < dh; ++c) s += q(i, h * dh + c) * k(j, h * dh + c);
        w[j] = s / std::sqrt(double(dh));
        mx = std::max(mx, w[j]);
      }
      for (auto& x : w) total += (x = std::exp(x - mx));
      for (Eigen::Index c = 0; c < dh; ++c) {
        double acc = 0;
        for (Eigen::Index j = 0; j < k.rows(); ++j) acc += w[j] / total * v(j, h * dh + c);
        out(i, h * dh + c) = acc;
      }
    }
  }
  return out;
}

inline Matrix layer_norm(const Matrix& x, const Matrix& g, const Matrix& b) {
  Matrix y(x.rows(), x.cols());
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    const double mean = x.row(i).mean();
    double var = 0;
    for (Eigen::Index j = 0; j < x.cols(); ++j) var += (x(i, j) - mean) * (x(i, j) - mean);
    var /= double(x.cols());
    for (Eigen::Index j = 0; j < x.cols(); ++j) y(i, j) = (x(i, j) - mean) / std::sqrt(var + 1e-5) * g(0, j) + b(0, j);
  }
  return y;
}

inline Matrix gelu(const Matrix& x) {
  return x.unaryExpr([](double a) {
    return 0.5 * a * (1 + std::tanh(std::sqrt(2 / std::numbers::pi) * (a + 0.044715 * a * a * a)));
  });
}

inline Matrix aoa_layer(const ModelParameters& P, const std::string& p, const Matrix& x, int heads) {
  auto at = [&](const char* n) { return P.at(p + "." + n); };
  const Matrix q = lin(x, at("wq"), at("bq"));
  const Matrix att = attention(q, lin(x, at("wk"), at("bk")), lin(x, at("wv"), at("bv")), heads);
  Matrix qa(x.rows(), 2 * x.cols());
  qa << q, att;
  const Matrix info = lin(qa, at("wi"), at("bi"));
  const Matrix gate = lin(qa, at("wg"), at("bg")).unaryExpr(&sigm);
  return layer_norm(x + gate.cwiseProduct(info), at("ln_g"), at("ln_b"));
}

/// [cls] output of the text stack for unpadded tokens.
inline RowVector text(const ModelParameters& P, const Matrix& tokens, const AlertIndexSequence& alert,
                      const std::string& projection) {
  const auto& c = P.config();
  Matrix h = lin(tokens, P.at(projection + ".w"), P.at(projection + ".b")).array().tanh().matrix();
  for (Eigen::Index i = 0; i < h.rows(); ++i) {
    if (c.event_alert) h.row(i) = h.row(i).cwiseProduct(P.at("gate_table").row(alert[i]));
    if (c.text_positions) h.row(i) += P.at("embed.pos_text").row(i);
  }
  Matrix x(h.rows() + 1, h.cols());
  x << P.at("embed.cls_text"), h;
  for (int l = 0; l < c.aoa_layers; ++l) x = aoa_layer(P, "aoa_text." + std::to_string(l), x, c.aoa_heads);
  return x.row(0);
}

inline RowVector frame(const ModelParameters& P, const Matrix& patches) {
  const auto& c = P.config();
  Matrix x = lin(patches, P.at("proj_patch.w"), P.at("proj_patch.b")).array().tanh().matrix();
  x += P.at("embed.pos_patch").topRows(x.rows());
  for (int l = 0; l < c.aoa_layers; ++l) x = aoa_layer(P, "aoa_patch." + std::to_string(l), x, c.aoa_heads);
  return x.colwise().mean();
}

inline RowVector fuse(const ModelParameters& P, const std::string& fuser,
                      const std::vector<std::pair<Slot, Matrix>>& segments) {
  const auto& c = P.config();
  Eigen::Index n = 1;
  for (const auto& s : segments) n += s.second.rows();
  Matrix x(n, c.d_model);
  x.row(0) = P.at(fuser + ".cls");
  Eigen::Index r = 1;
  for (const auto& [slot, rows] : segments) {
    for (Eigen::Index j = 0; j < rows.rows(); ++j, ++r) {
      x.row(r) = rows.row(j) + P.at(fuser + ".pos").row(j) + P.at(fuser + ".type").row(static_cast<int>(slot));
    }
  }
  for (int l = 0; l < c.fuse_layers; ++l) {
    const auto p = fuser + "." + std::to_string(l);
    auto at = [&](const char* nm) { return P.at(p + "." + nm); };
    const Matrix att = attention(lin(x, at("wq"), at("bq")), lin(x, at("wk"), at("bk")), lin(x, at("wv"), at("bv")),
                                 c.fuse_heads);
    const Matrix h = layer_norm(x + lin(att, at("wo"), at("bo")), at("ln1_g"), at("ln1_b"));
    x = layer_norm(h + lin(gelu(lin(h, at("w1"), at("b1"))), at("w2"), at("b2")), at("ln2_g"), at("ln2_b"));
  }
  return x.row(0);
}

inline double head(const ModelParameters& P, const std::string& link, const RowVector& r) {
  const Matrix h = lin(r, P.at("head_" + link + ".w1"), P.at("head_" + link + ".b1")).array().tanh().matrix();
  return sigm(lin(h, P.at("head_" + link + ".w2"), P.at("head_" + link + ".b2"))(0, 0));
}

/// `scores` holds (link index, c) for the active links in link order.
inline double combine(const ModelParameters& P, const std::vector<std::pair<int, double>>& scores) {
  Matrix e(static_cast<Eigen::Index>(scores.size()), P.config().d_model);
  for (std::size_t j = 0; j < scores.size(); ++j) {
    e.row(j) = scores[j].second * P.at("combiner.w_in").row(0) + P.at("combiner.type").row(scores[j].first);
  }
  const Matrix att = attention(e * P.at("combiner.wq"), e * P.at("combiner.wk"), e * P.at("combiner.wv"), 1);
  const RowVector pooled = att.colwise().mean();
  return sigm((pooled * P.at("combiner.w_out"))(0, 0) + P.at("combiner.b_out")(0, 0));
}

struct Output {
  double p = 0;
  double c[3] = {0, 0, 0};
  RowVector r[3];
};

/// Forward pass over the unpadded parts of `in`.
inline Output forward(const ModelParameters& P, const PostInput& in) {
  const auto& c = P.config();
  auto valid = [](const Matrix& m, const Mask& mask) {
    Matrix out(mask.count(), m.cols());
    Eigen::Index r = 0;
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
      if (mask(i)) out.row(r++) = m.row(i);
    }
    return out;
  };
  auto text_of = [&](const TextInput& t, const std::string& proj) {
    AlertIndexSequence a;
    for (Eigen::Index i = 0; i < t.mask.size(); ++i) {
      if (t.mask(i)) a.push_back(t.alert[i]);
    }
    return text(P, valid(t.tokens, t.mask), a, proj);
  };
  auto stack = [](const std::vector<RowVector>& rows) {
    Matrix m(static_cast<Eigen::Index>(rows.size()), rows.front().cols());
    for (std::size_t i = 0; i < rows.size(); ++i) m.row(i) = rows[i];
    return m;
  };
  std::vector<RowVector> frames, speech, screen;
  for (std::size_t f = 0; f < in.frames.size(); ++f) {
    if (in.frame_mask(f)) frames.push_back(frame(P, valid(in.frames[f].patches, in.frames[f].mask)));
  }
  for (const auto& t : in.speech) speech.push_back(text_of(t, "proj_speech"));
  for (const auto& t : in.screen_text) screen.push_back(text_of(t, "proj_screen"));
  const Matrix claim = text_of(in.claim, "proj_claim");

  auto seq = [&](std::vector<Slot> slots) {
    std::vector<std::pair<Slot, Matrix>> out;
    for (Slot s : slots) {
      if (s == Slot::video) out.emplace_back(s, stack(frames));
      if (s == Slot::screen && !screen.empty()) out.emplace_back(s, stack(screen));
      if (s == Slot::speech && !speech.empty()) out.emplace_back(s, stack(speech));
      if (s == Slot::claim) out.emplace_back(s, claim);
    }
    return out;
  };
  Output o;
  const char* names[3] = {"vs", "vc", "cs"};
  std::vector<std::pair<int, double>> active;
  RowVector single;
  if (c.fusion == Fusion::single_stream) {
    single = fuse(P, "fuser_single", seq({Slot::video, Slot::screen, Slot::speech, Slot::claim}));
  }
  const std::vector<Slot> slots[3] = {{Slot::video, Slot::screen, Slot::speech},
                                      {Slot::video, Slot::screen, Slot::claim},
                                      {Slot::claim, Slot::speech}};
  for (int l = 0; l < 3; ++l) {
    if (!c.links[l]) {
      o.c[l] = std::numeric_limits<double>::quiet_NaN();
      continue;
    }
    o.r[l] = c.fusion == Fusion::pairwise ? fuse(P, std::string("fuser_") + names[l], seq(slots[l])) : single;
    o.c[l] = head(P, names[l], o.r[l]);
    active.emplace_back(l, o.c[l]);
  }
  o.p = combine(P, active);
  return o;
}

}  // namespace twtr::reference
