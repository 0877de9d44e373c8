// Copyright 2026 The stex Authors.
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

// Embedding-arithmetic exchange baseline. The OE is the same-POS word (or
// phrase) closest to RE; every other same-POS unit similar enough to OE is
// swapped for the nearest neighbour of w_i - w_OE + w_RE.

#pragma once

#include <string>
#include <unordered_set>
#include <vector>

#include "stex/common.hpp"
#include "stex/embed.hpp"
#include "stex/exchange.hpp"
#include "stex/text.hpp"

namespace stex {

struct RrtConfig {
  double rrt = 0.2;
  double start_threshold = 0.1;
  double step = 0.05;

  static RrtConfig unigram(double rrt) { return {rrt, 0.1, 0.05}; }
  static RrtConfig fourgram(double rrt) { return {rrt, 0.3, 0.01}; }
};

struct BaselineResult {
  Tokens output;           // word tokens; phrase units are split back into words
  Tokens units;            // the (possibly phrased) line that was edited
  Tokens output_units;
  std::string oe;
  std::string re_unit;
  double threshold = 0.0;
  double actual_rr = 0.0;  // replaced words / words, OE swap included
  std::size_t replaced_units = 0;
};

// Nearest neighbour of w_i - w_oe + w_re, never the unit itself.
inline std::string analogy_replacement(const std::string& unit, const Embeddings& emb, std::span<const double> oe_vec,
                                       std::span<const double> re_vec) {
  const auto w = emb.lookup(unit);
  if (!w) throw Error(Errc::kOovEntity, "analogy_replacement: '" + unit + "' not in vocabulary");
  Vector shifted(emb.dim);
  for (std::size_t k = 0; k < emb.dim; ++k) shifted[k] = (*w)[k] - oe_vec[k] + re_vec[k];
  return nearest_neighbor(shifted, emb, {unit});
}

// `phraser` set selects four-gram mode: the line is regrouped into phrase
// units first and a multi-word RE is looked up as a joined phrase.
inline BaselineResult w2v_stem(const Tokens& sentence, const Tokens& re, const RrtConfig& cfg, const Embeddings& emb,
                               const PosLexicon& lexicon, const Phraser* phraser = nullptr) {
  if (cfg.step <= 0.0) throw Error(Errc::kInvalidArgument, "w2v_stem: threshold step must be positive");
  if (re.empty()) throw Error(Errc::kInvalidArgument, "w2v_stem: empty replacement entity");
  BaselineResult r;
  r.units = phraser ? phraser->apply(sentence) : sentence;
  r.re_unit = re.size() == 1 ? re[0] : join_phrase(re);
  const auto re_vec = emb.lookup(r.re_unit);
  if (!re_vec) throw Error(Errc::kOovEntity, "w2v_stem: RE '" + r.re_unit + "' not in vocabulary");
  const PosTag re_tag = lexicon.tag(r.re_unit);

  std::vector<std::size_t> same_pos;
  std::size_t total_words = 0;
  std::vector<std::size_t> weight(r.units.size(), 0);
  for (std::size_t i = 0; i < r.units.size(); ++i) {
    const auto& u = r.units[i];
    if (!is_word_token(u)) continue;
    weight[i] = split_phrase(u).size();
    total_words += weight[i];
    if (u != r.re_unit && lexicon.tag(u) == re_tag && emb.vocab.contains(u)) same_pos.push_back(i);
  }
  if (same_pos.empty()) throw Error(Errc::kNoOe, "w2v_stem: no in-vocabulary unit shares the RE's POS");

  std::size_t oe_index = same_pos.front();
  double best = -2.0;
  for (auto i : same_pos) {
    const double c = cosine(*emb.lookup(r.units[i]), *re_vec);
    if (c > best) {
      best = c;
      oe_index = i;
    }
  }
  r.oe = r.units[oe_index];
  const auto oe_vec = *emb.lookup(r.oe);

  const double min_rate = static_cast<double>(weight[oe_index]) / static_cast<double>(total_words);
  if (min_rate > cfg.rrt) {
    throw Error(Errc::kRrtUnsatisfiable,
                "w2v_stem: swapping the OE alone replaces " + format_double(min_rate) + " of the words, above rrt " +
                    format_double(cfg.rrt));
  }

  struct Other {
    std::size_t index;
    double sim;
    std::string replacement;
  };
  std::vector<Other> others;
  for (auto i : same_pos) {
    if (i == oe_index) continue;
    others.push_back({i, cosine(*emb.lookup(r.units[i]), oe_vec), analogy_replacement(r.units[i], emb, oe_vec, *re_vec)});
  }

  // Stateless sweep: each threshold is evaluated against the original line.
  std::vector<const Other*> chosen;
  for (std::size_t k = 0;; ++k) {
    const double threshold = cfg.start_threshold + static_cast<double>(k) * cfg.step;
    chosen.clear();
    std::size_t replaced_words = weight[oe_index];
    for (const auto& o : others) {
      if (o.sim >= threshold - kStTolerance) {
        chosen.push_back(&o);
        replaced_words += weight[o.index];
      }
    }
    const double rate = static_cast<double>(replaced_words) / static_cast<double>(total_words);
    if (rate <= cfg.rrt) {
      r.threshold = threshold;
      r.actual_rr = rate;
      break;
    }
  }

  r.output_units = r.units;
  r.output_units[oe_index] = r.re_unit;
  for (const auto* o : chosen) r.output_units[o->index] = o->replacement;
  r.replaced_units = chosen.size() + 1;
  for (const auto& u : r.output_units) {
    if (u.find(kPhraseJoiner) != std::string::npos && is_word_token(u)) {
      for (auto& w : split_phrase(u)) r.output.push_back(std::move(w));
    } else {
      r.output.push_back(u);
    }
  }
  return r;
}

}  // namespace stex
