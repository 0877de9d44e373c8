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

// Fixtures and brute-force oracles shared by the unit and acceptance tests.

#pragma once

#include <cmath>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "stex/stex.hpp"

namespace stex::fixtures {

// Embeddings from an explicit token -> vector list, in the given order.
inline Embeddings make_embeddings(const std::vector<std::pair<std::string, Vector>>& rows,
                                  EmbeddingKind kind = EmbeddingKind::kUnigram) {
  if (rows.empty()) throw Error(Errc::kInvalidArgument, "make_embeddings: no rows");
  std::vector<std::string> tokens;
  Embeddings e;
  e.dim = rows.front().second.size();
  e.kind = kind;
  for (const auto& [t, v] : rows) {
    if (v.size() != e.dim) throw Error(Errc::kDimensionMismatch, "make_embeddings: ragged rows");
    tokens.push_back(t);
    e.data.insert(e.data.end(), v.begin(), v.end());
  }
  e.vocab = Vocab(tokens, std::vector<std::size_t>(tokens.size(), 1));
  return e;
}

// The baseline's hand-built 2-D fixture.
inline Embeddings weather_2d() {
  return make_embeddings({{"sun", {1.0, 0.0}}, {"rain", {-1.0, 0.0}}, {"beach", {0.9, 0.1}}, {"umbrella", {-0.9, 0.1}}});
}

// Every token tagged NOUN.
inline PosLexicon all_nouns(const std::vector<std::string>& words) {
  PosLexicon lex;
  for (const auto& w : words) lex.words[w] = PosTag::kNoun;
  return lex;
}

// Two planted topics: each line draws words from one cluster only.
struct TwoClusters {
  Corpus corpus;
  std::vector<std::string> a;
  std::vector<std::string> b;
};

inline TwoClusters two_cluster_corpus(std::size_t lines, std::uint64_t seed, std::size_t words_per_cluster = 20) {
  TwoClusters out;
  for (std::size_t i = 0; i < words_per_cluster; ++i) {
    out.a.push_back("alpha" + std::to_string(i));
    out.b.push_back("beta" + std::to_string(i));
  }
  Rng rng(seed);
  for (std::size_t l = 0; l < lines; ++l) {
    const auto& words = l % 2 == 0 ? out.a : out.b;
    Tokens line;
    const std::size_t len = 6 + rng.below(7);
    for (std::size_t k = 0; k < len; ++k) line.push_back(words[rng.below(words.size())]);
    out.corpus.push_back(std::move(line));
  }
  return out;
}

struct ClusterSeparation {
  double intra = 0.0;
  double inter = 0.0;
};

inline ClusterSeparation cluster_separation(const Embeddings& emb, const TwoClusters& c) {
  auto mean_cos = [&](const std::vector<std::string>& x, const std::vector<std::string>& y, bool same) {
    double sum = 0.0;
    std::size_t n = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
      for (std::size_t j = same ? i + 1 : 0; j < y.size(); ++j) {
        sum += cosine(*emb.lookup(x[i]), *emb.lookup(y[j]));
        ++n;
      }
    }
    return sum / static_cast<double>(n);
  };
  return {(mean_cos(c.a, c.a, true) + mean_cos(c.b, c.b, true)) / 2.0, mean_cos(c.a, c.b, false)};
}

// ---------------------------------------------------------------------------
// W2V-STEM brute-force oracle (unigram mode): direct evaluation of the
// replacement rules with an exhaustive nearest-neighbour scan.

inline std::string brute_nearest(const Vector& q, const Embeddings& emb, const std::string& skip) {
  std::string best;
  double best_cos = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < emb.vocab.size(); ++i) {
    const auto& t = emb.vocab.token(i);
    if (t == skip) continue;
    double d = 0.0;
    double nq = 0.0;
    double nr = 0.0;
    for (std::size_t k = 0; k < emb.dim; ++k) {
      d += q[k] * emb.row(i)[k];
      nq += q[k] * q[k];
      nr += emb.row(i)[k] * emb.row(i)[k];
    }
    const double c = d / std::sqrt(nq * nr);
    if (c > best_cos) {
      best_cos = c;
      best = t;
    }
  }
  return best;
}

struct OracleResult {
  Tokens output;
  double rate = 0.0;
  bool unsatisfiable = false;
};

inline OracleResult brute_w2v_stem(const Tokens& s, const std::string& re, double rrt, double start, double step,
                                   const Embeddings& emb, const PosLexicon& lex) {
  const PosTag tag = lex.tag(re);
  const auto re_v = *emb.lookup(re);
  std::vector<std::size_t> cands;
  std::size_t words = 0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (!is_word_token(s[i])) continue;
    ++words;
    if (s[i] != re && lex.tag(s[i]) == tag && emb.lookup(s[i])) cands.push_back(i);
  }
  if (cands.empty()) throw Error(Errc::kNoOe, "oracle: no candidate");
  std::size_t oe = cands[0];
  for (auto i : cands) {
    if (cosine(*emb.lookup(s[i]), re_v) > cosine(*emb.lookup(s[oe]), re_v)) oe = i;
  }
  const auto oe_v = *emb.lookup(s[oe]);
  OracleResult r;
  if (1.0 / static_cast<double>(words) > rrt) {
    r.unsatisfiable = true;
    return r;
  }
  for (int k = 0;; ++k) {
    const double t = start + k * step;
    Tokens out = s;
    out[oe] = re;
    std::size_t replaced = 1;
    for (auto i : cands) {
      if (i == oe) continue;
      if (cosine(*emb.lookup(s[i]), oe_v) >= t - 1e-9) {
        Vector q(emb.dim);
        for (std::size_t d = 0; d < emb.dim; ++d) q[d] = (*emb.lookup(s[i]))[d] - oe_v[d] + re_v[d];
        out[i] = brute_nearest(q, emb, s[i]);
        ++replaced;
      }
    }
    const double rate = static_cast<double>(replaced) / static_cast<double>(words);
    if (rate <= rrt) {
      r.output = out;
      r.rate = rate;
      return r;
    }
  }
}

// Random small fixture: up to 20 words with random 3-D vectors, a sentence
// of at most 10 tokens drawn from them and an RE from the vocabulary.
struct StemCase {
  Embeddings emb;
  PosLexicon lex;
  Tokens sentence;
  std::string re;
  double rrt = 0.5;
};

inline StemCase random_stem_case(std::uint64_t seed) {
  Rng rng(seed);
  const std::size_t v = 4 + rng.below(17);
  std::vector<std::pair<std::string, Vector>> rows;
  std::vector<std::string> words;
  for (std::size_t i = 0; i < v; ++i) {
    Vector x(3);
    for (auto& c : x) c = rng.normal();
    words.push_back("w" + std::to_string(i));
    rows.emplace_back(words.back(), x);
  }
  StemCase c;
  c.emb = make_embeddings(rows);
  c.lex = all_nouns({});
  // Mix of nouns and verbs so the POS filter matters.
  for (std::size_t i = 0; i < v; ++i) c.lex.words[words[i]] = rng.below(4) == 0 ? PosTag::kVerb : PosTag::kNoun;
  c.re = words[rng.below(v)];
  c.lex.words[c.re] = PosTag::kNoun;
  const std::size_t len = 2 + rng.below(9);
  for (std::size_t i = 0; i < len; ++i) {
    c.sentence.push_back(rng.below(6) == 0 ? "," : words[rng.below(v)]);
  }
  // Make sure at least one noun besides the RE is present.
  for (const auto& w : words) {
    if (w != c.re && c.lex.words[w] == PosTag::kNoun) {
      c.sentence[0] = w;
      break;
    }
  }
  for (auto& t : c.sentence) {
    if (t == c.re) t = c.sentence[0];
  }
  static constexpr double kRates[] = {0.2, 0.4, 0.6, 0.8, 1.0};
  c.rrt = kRates[rng.below(5)];
  return c;
}

// ---------------------------------------------------------------------------
// Infiller fixtures

// 50 masked pairs over a 40-word vocabulary, 8-12 tokens per line, masked by
// tier like the training data.
inline std::vector<MaskedPair> overfit_pairs(std::size_t n = 50, std::uint64_t seed = 17) {
  Rng rng(seed);
  std::vector<std::string> words;
  for (int i = 0; i < 40; ++i) words.push_back("t" + std::to_string(i));
  std::vector<TokenSequence> lines;
  for (std::size_t i = 0; i < n; ++i) {
    TokenSequence s;
    const std::size_t len = 8 + rng.below(5);
    for (std::size_t k = 0; k < len; ++k) s.tokens.push_back(words[rng.below(words.size())]);
    lines.push_back(std::move(s));
  }
  return make_training_masks(lines, seed).pairs;
}

// Tiny pairs for gradient checks: vocab of about 30, length up to 8.
inline std::vector<MaskedPair> grad_pairs() {
  std::vector<MaskedPair> out;
  Rng rng(5);
  for (int p = 0; p < 2; ++p) {
    TokenSequence tgt;
    for (int k = 0; k < 8; ++k) tgt.tokens.push_back("g" + std::to_string(rng.below(25)));
    TokenSequence in = tgt;
    in.tokens[2] = std::string(kMaskToken);
    in.tokens[5] = std::string(kMaskToken);
    out.push_back({in, tgt, 0.3});
  }
  return out;
}

inline nn::InfillVocab vocab_of_size(std::size_t size) {
  std::vector<std::string> t = nn::special_tokens();
  for (std::size_t i = 0; t.size() < size; ++i) t.push_back("g" + std::to_string(i));
  return nn::InfillVocab(t);
}

}  // namespace stex::fixtures
