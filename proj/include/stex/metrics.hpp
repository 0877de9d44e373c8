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

// Automatic evaluation metrics: character n-gram language model and SLOR
// fluency, lexicon sentiment and SPA, CSS, STES, TTR, averaged BLEU and
// Pearson correlation.

#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <concepts>
#include <map>
#include <limits>
#include <numeric>
#include <span>
#include <sstream>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "stex/common.hpp"
#include "stex/corpus.hpp"
#include "stex/embed.hpp"
#include "stex/text.hpp"

namespace stex {

// ---------------------------------------------------------------------------
// Character language model

// Anything that turns text into a symbol sequence (end sentinel included)
// and scores a symbol given its history.
template <typename M>
concept CharModel = requires(const M& m, std::string_view text, std::span<const int> history, int symbol) {
  { m.symbols(text) } -> std::convertible_to<std::vector<int>>;
  { m.log_prob(history, symbol) } -> std::convertible_to<double>;
};

// Interpolated Witten-Bell character n-gram model over bytes:
//   P(c | h) = (C(h c) + T(h) P(c | h')) / (C(h) + T(h))
// where T(h) counts distinct successors of h and h' drops the oldest symbol.
// The recursion bottoms out in a uniform distribution over the alphabet,
// which always holds the end sentinel and an unknown-symbol slot.
class CharLm {
 public:
  static constexpr int kEos = 256;
  static constexpr int kBos = 257;
  static constexpr int kUnk = 258;

  CharLm() = default;

  static CharLm train(const std::vector<std::string>& lines, int order = 6) {
    if (order < 1) throw Error(Errc::kInvalidArgument, "CharLm: order must be >= 1");
    CharLm lm;
    lm.order_ = order;
    lm.counts_.resize(static_cast<std::size_t>(order));
    std::vector<bool> seen(259, false);
    seen[kEos] = seen[kUnk] = true;
    for (const auto& line : lines) {
      for (unsigned char c : line) seen[c] = true;
    }
    lm.set_alphabet(seen);
    for (const auto& line : lines) {
      const auto syms = lm.symbols(line);
      for (std::size_t i = 0; i < syms.size(); ++i) {
        for (int k = 0; k < order; ++k) {
          auto& ctx = lm.counts_[static_cast<std::size_t>(k)][lm.context_key(std::span<const int>(syms.data(), i), k)];
          ctx.total += 1.0;
          ctx.next[syms[i]] += 1.0;
        }
      }
    }
    return lm;
  }

  // No counts: every symbol of the alphabet gets 1/|alphabet|. `extra` are
  // byte symbols added to the always-present end and unknown symbols.
  static CharLm uniform(std::string_view extra, int order = 1) {
    CharLm lm;
    lm.order_ = order;
    lm.counts_.resize(static_cast<std::size_t>(order));
    std::vector<bool> seen(259, false);
    seen[kEos] = seen[kUnk] = true;
    for (unsigned char c : extra) seen[c] = true;
    lm.set_alphabet(seen);
    return lm;
  }

  int order() const { return order_; }
  std::size_t alphabet_size() const { return alphabet_.size(); }
  const std::vector<int>& alphabet() const { return alphabet_; }

  // Bytes mapped into the alphabet (unknown bytes become kUnk), plus kEos.
  std::vector<int> symbols(std::string_view text) const {
    std::vector<int> out;
    out.reserve(text.size() + 1);
    for (unsigned char c : text) out.push_back(in_alphabet_[c] ? static_cast<int>(c) : kUnk);
    out.push_back(kEos);
    return out;
  }

  double prob(std::span<const int> history, int symbol) const {
    if (symbol < 0 || symbol >= static_cast<int>(in_alphabet_.size()) || !in_alphabet_[static_cast<std::size_t>(symbol)]) {
      symbol = kUnk;
    }
    double p = 1.0 / static_cast<double>(alphabet_.size());
    for (int k = 0; k < order_; ++k) {
      const auto& table = counts_[static_cast<std::size_t>(k)];
      auto it = table.find(context_key(history, k));
      if (it == table.end() || it->second.total <= 0.0) continue;
      const auto& ctx = it->second;
      const double types = static_cast<double>(ctx.next.size());
      auto hit = ctx.next.find(symbol);
      const double c = hit == ctx.next.end() ? 0.0 : hit->second;
      p = (c + types * p) / (ctx.total + types);
    }
    return p;
  }

  double log_prob(std::span<const int> history, int symbol) const { return std::log(prob(history, symbol)); }

  std::string serialize() const {
    std::ostringstream out;
    out << "stex-charlm 1 " << order_ << ' ' << alphabet_.size() << '\n';
    for (std::size_t i = 0; i < alphabet_.size(); ++i) out << (i ? " " : "") << alphabet_[i];
    out << '\n';
    for (int k = 0; k < order_; ++k) {
      // Sorted so the file is byte-stable.
      std::map<std::u16string, const Context*> sorted;
      for (const auto& [key, ctx] : counts_[static_cast<std::size_t>(k)]) sorted.emplace(key, &ctx);
      for (const auto& [key, ctx] : sorted) {
        std::map<int, double> next(ctx->next.begin(), ctx->next.end());
        for (const auto& [sym, n] : next) {
          out << k << '\t';
          for (std::size_t i = 0; i < key.size(); ++i) out << (i ? "," : "") << static_cast<int>(key[i]);
          out << '\t' << sym << '\t' << static_cast<long long>(n) << '\n';
        }
      }
    }
    return out.str();
  }

  static CharLm deserialize(const std::vector<std::string>& lines, const std::string& origin = "charlm") {
    auto fail = [&](const std::string& why) { return Error(Errc::kParse, origin + ": " + why); };
    if (lines.size() < 2) throw fail("truncated");
    const auto head = split_ws(lines[0]);
    if (head.size() != 4 || head[0] != "stex-charlm" || head[1] != "1") throw fail("bad header");
    CharLm lm;
    lm.order_ = static_cast<int>(parse_int(head[2]));
    if (lm.order_ < 1) throw fail("bad order");
    lm.counts_.resize(static_cast<std::size_t>(lm.order_));
    std::vector<bool> seen(259, false);
    for (const auto& s : split_ws(lines[1])) {
      const auto v = parse_int(s);
      if (v < 0 || v > kUnk) throw fail("bad alphabet symbol");
      seen[static_cast<std::size_t>(v)] = true;
    }
    seen[kEos] = seen[kUnk] = true;
    lm.set_alphabet(seen);
    for (std::size_t i = 2; i < lines.size(); ++i) {
      if (lines[i].empty()) continue;
      const auto f = split_on(lines[i], '\t');
      if (f.size() != 4) throw fail("bad count row " + std::to_string(i + 1));
      const auto k = parse_int(f[0]);
      if (k < 0 || k >= lm.order_) throw fail("bad order in row " + std::to_string(i + 1));
      std::u16string key;
      if (!f[1].empty()) {
        for (const auto& s : split_on(f[1], ',')) key.push_back(static_cast<char16_t>(parse_int(s)));
      }
      const double n = parse_double(f[3]);
      auto& ctx = lm.counts_[static_cast<std::size_t>(k)][key];
      ctx.total += n;
      ctx.next[static_cast<int>(parse_int(f[2]))] += n;
    }
    return lm;
  }

 private:
  struct Context {
    double total = 0.0;
    std::unordered_map<int, double> next;
  };

  void set_alphabet(const std::vector<bool>& seen) {
    in_alphabet_ = seen;
    alphabet_.clear();
    for (std::size_t s = 0; s < seen.size(); ++s) {
      if (seen[s] && static_cast<int>(s) != kBos) alphabet_.push_back(static_cast<int>(s));
    }
  }

  // The k most recent symbols of the history, left-padded with kBos.
  static std::u16string context_key(std::span<const int> history, int k) {
    std::u16string key(static_cast<std::size_t>(k), static_cast<char16_t>(kBos));
    const std::size_t n = std::min(history.size(), static_cast<std::size_t>(k));
    for (std::size_t i = 0; i < n; ++i) {
      key[static_cast<std::size_t>(k) - n + i] = static_cast<char16_t>(history[history.size() - n + i]);
    }
    return key;
  }

  int order_ = 1;
  std::vector<int> alphabet_;
  std::vector<bool> in_alphabet_ = std::vector<bool>(259, false);
  std::vector<std::unordered_map<std::u16string, Context>> counts_;
};

inline CharLm load_char_lm(const std::string& path) { return CharLm::deserialize(read_lines(path), path); }

// exp of the mean negative log-probability per symbol, end sentinel included.
template <CharModel M>
double char_perplexity(const M& lm, std::string_view text) {
  if (text.empty()) throw Error(Errc::kInvalidArgument, "char_perplexity: empty text");
  const std::vector<int> syms = lm.symbols(text);
  double nll = 0.0;
  for (std::size_t i = 0; i < syms.size(); ++i) nll -= lm.log_prob(std::span<const int>(syms.data(), i), syms[i]);
  return std::exp(nll / static_cast<double>(syms.size()));
}

// Character-level SLOR: -ln PPL(S) + sum_w |w| ln PPL(w) / sum_w |w|, with
// each word scored in isolation.
template <CharModel M>
double slor(const Tokens& sentence, const M& lm) {
  if (sentence.empty()) throw Error(Errc::kInvalidArgument, "slor: empty sentence");
  const double whole = std::log(char_perplexity(lm, join(sentence)));
  double weighted = 0.0;
  double chars = 0.0;
  for (const auto& w : sentence) {
    const auto len = static_cast<double>(w.size());
    weighted += len * std::log(char_perplexity(lm, w));
    chars += len;
  }
  return -whole + weighted / chars;
}

struct Rescaled {
  std::vector<double> values;
  double clamped_fraction = 0.0;
};

// z-score with the population deviation, clamp to [-3, 3], map to z/6 + 0.5.
inline Rescaled rescale_slor(std::span<const double> values) {
  Rescaled out;
  if (values.empty()) return out;
  const double n = static_cast<double>(values.size());
  const double mean = std::accumulate(values.begin(), values.end(), 0.0) / n;
  double var = 0.0;
  for (double v : values) var += (v - mean) * (v - mean);
  const double sd = std::sqrt(var / n);
  if (!(sd > 0.0)) {
    warn("rescale_slor: zero variance, every value maps to 0.5");
    out.values.assign(values.size(), 0.5);
    return out;
  }
  std::size_t clamped = 0;
  for (double v : values) {
    double z = (v - mean) / sd;
    if (z < -3.0 || z > 3.0) {
      ++clamped;
      z = std::clamp(z, -3.0, 3.0);
    }
    out.values.push_back(z / 6.0 + 0.5);
  }
  out.clamped_fraction = static_cast<double>(clamped) / n;
  return out;
}

// ---------------------------------------------------------------------------
// Sentiment

struct SentimentLexicon {
  std::unordered_map<std::string, double> valence;  // in [-4, 4]
  std::unordered_set<std::string> negators;
  std::unordered_map<std::string, double> intensifiers;  // multiplier

  bool contains(const std::string& token) const { return valence.contains(token); }
};

// "token<TAB>valence" lines, plus an optional companion file of
// "token<TAB>negator" or "token<TAB><multiplier>" lines.
inline SentimentLexicon load_sentiment_lexicon(const std::string& path, const std::string& modifiers_path = {}) {
  SentimentLexicon lex;
  const auto lines = read_lines(path);
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (trim(lines[i]).empty() || lines[i][0] == '#') continue;
    const auto f = split_on(lines[i], '\t');
    if (f.size() < 2) throw Error(Errc::kParse, path + ":" + std::to_string(i + 1) + ": expected token<TAB>valence");
    const double v = parse_double(trim(f[1]));
    if (!std::isfinite(v) || v < -4.0 || v > 4.0) {
      throw Error(Errc::kParse, path + ":" + std::to_string(i + 1) + ": valence must be finite and in [-4,4]");
    }
    lex.valence[trim(f[0])] = v;
  }
  if (modifiers_path.empty()) return lex;
  const auto mods = read_lines(modifiers_path);
  for (std::size_t i = 0; i < mods.size(); ++i) {
    if (trim(mods[i]).empty() || mods[i][0] == '#') continue;
    const auto f = split_on(mods[i], '\t');
    if (f.size() != 2) {
      throw Error(Errc::kParse, modifiers_path + ":" + std::to_string(i + 1) + ": expected token<TAB>negator|<multiplier>");
    }
    const std::string value = trim(f[1]);
    if (value == "negator") {
      lex.negators.insert(trim(f[0]));
    } else {
      lex.intensifiers[trim(f[0])] = parse_double(value);
    }
  }
  return lex;
}

struct SentimentScore {
  double compound = 0.0;
  Sentiment label = Sentiment::kNeutral;
};

inline constexpr double kNegationScale = -0.74;
inline constexpr double kExclamationBoost = 0.292;
inline constexpr int kMaxExclamations = 3;
inline constexpr double kCompoundAlpha = 15.0;
inline constexpr double kClassThreshold = 0.05;
inline constexpr std::size_t kNegationWindow = 3;

inline SentimentScore sentiment_score(const Tokens& tokens, const SentimentLexicon& lex) {
  double sum = 0.0;
  int exclamations = 0;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (tokens[i] == "!") ++exclamations;
    auto it = lex.valence.find(tokens[i]);
    if (it == lex.valence.end()) continue;
    double v = it->second;
    if (i > 0) {
      if (auto m = lex.intensifiers.find(tokens[i - 1]); m != lex.intensifiers.end()) v *= m->second;
    }
    for (std::size_t back = 1; back <= kNegationWindow && back <= i; ++back) {
      if (lex.negators.contains(tokens[i - back])) {
        v *= kNegationScale;
        break;
      }
    }
    sum += v;
  }
  const double boost = kExclamationBoost * std::min(exclamations, kMaxExclamations);
  if (sum > 0) sum += boost;
  if (sum < 0) sum -= boost;
  SentimentScore out;
  out.compound = std::clamp(sum / std::sqrt(sum * sum + kCompoundAlpha), -1.0, 1.0);
  if (out.compound >= kClassThreshold) {
    out.label = Sentiment::kPositive;
  } else if (out.compound <= -kClassThreshold) {
    out.label = Sentiment::kNegative;
  }
  return out;
}

// Fraction of (input, output) pairs whose sentiment class agrees.
inline double spa(const std::vector<std::pair<Tokens, Tokens>>& pairs, const SentimentLexicon& lex) {
  if (pairs.empty()) throw Error(Errc::kInvalidArgument, "spa: no pairs");
  std::size_t same = 0;
  for (const auto& [in, out] : pairs) {
    if (sentiment_score(in, lex).label == sentiment_score(out, lex).label) ++same;
  }
  return static_cast<double>(same) / static_cast<double>(pairs.size());
}

// ---------------------------------------------------------------------------
// Content similarity, STES, TTR

inline double css(const Tokens& output, const Tokens& re, const Embeddings& emb) {
  return angular_similarity(embed_text(output, emb), embed_text(re, emb));
}

// Harmonic mean of SPA (a), rescaled SLOR (b) and CSS (c).
inline double stes(double a, double b, double c) {
  for (double x : {a, b, c}) {
    if (!(x >= 0.0 && x <= 1.0)) throw Error(Errc::kInvalidArgument, "stes: arguments must lie in [0,1]");
  }
  const double denom = a * b + a * c + b * c;
  if (denom == 0.0) return 0.0;
  return 3.0 * a * b * c / denom;
}

inline double ttr(const Tokens& tokens) {
  std::unordered_set<std::string> types;
  std::size_t words = 0;
  for (const auto& t : tokens) {
    if (!is_word_token(t)) continue;
    types.insert(t);
    ++words;
  }
  if (words == 0) throw Error(Errc::kInvalidArgument, "ttr: no word tokens");
  return static_cast<double>(types.size()) / static_cast<double>(words);
}

// ---------------------------------------------------------------------------
// BLEU

inline constexpr double kBleuEpsilon = 1e-9;

struct BleuBreakdown {
  std::array<double, 4> precision{};     // p_n, NaN when the order is skipped
  std::array<bool, 4> counted{};
  double brevity_penalty = 1.0;
  double average = 0.0;
};

// Mean of BLEU-1..4 where BLEU-n = BP * p_n. Zero matches give p_n = eps.
// Orders for which neither side has any n-gram are left out of the mean.
inline BleuBreakdown bleu_breakdown(const Tokens& candidate, const Tokens& reference) {
  if (candidate.empty() || reference.empty()) throw Error(Errc::kInvalidArgument, "bleu: empty input");
  BleuBreakdown out;
  const double c = static_cast<double>(candidate.size());
  const double r = static_cast<double>(reference.size());
  out.brevity_penalty = std::min(1.0, std::exp(1.0 - r / c));
  double sum = 0.0;
  int orders = 0;
  for (std::size_t n = 1; n <= 4; ++n) {
    auto grams = [n](const Tokens& t) {
      std::map<Tokens, std::size_t> m;
      for (std::size_t i = 0; i + n <= t.size(); ++i) {
        ++m[Tokens(t.begin() + static_cast<std::ptrdiff_t>(i), t.begin() + static_cast<std::ptrdiff_t>(i + n))];
      }
      return m;
    };
    const auto cg = grams(candidate);
    const auto rg = grams(reference);
    out.precision[n - 1] = std::numeric_limits<double>::quiet_NaN();
    if (cg.empty() && rg.empty()) continue;
    std::size_t total = 0;
    std::size_t matched = 0;
    for (const auto& [g, k] : cg) {
      total += k;
      if (auto it = rg.find(g); it != rg.end()) matched += std::min(k, it->second);
    }
    const double p = matched > 0 ? static_cast<double>(matched) / static_cast<double>(total) : kBleuEpsilon;
    out.precision[n - 1] = p;
    out.counted[n - 1] = true;
    sum += out.brevity_penalty * p;
    ++orders;
  }
  out.average = sum / orders;
  return out;
}

inline double bleu_avg(const Tokens& candidate, const Tokens& reference) {
  return bleu_breakdown(candidate, reference).average;
}

// ---------------------------------------------------------------------------
// Correlation

inline double pearson(std::span<const double> xs, std::span<const double> ys) {
  if (xs.size() != ys.size() || xs.size() < 2) {
    throw Error(Errc::kInvalidArgument, "pearson: need two equal-length series of at least 2 values");
  }
  const double n = static_cast<double>(xs.size());
  const double mx = std::accumulate(xs.begin(), xs.end(), 0.0) / n;
  const double my = std::accumulate(ys.begin(), ys.end(), 0.0) / n;
  double sxy = 0.0;
  double sxx = 0.0;
  double syy = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    sxy += (xs[i] - mx) * (ys[i] - my);
    sxx += (xs[i] - mx) * (xs[i] - mx);
    syy += (ys[i] - my) * (ys[i] - my);
  }
  if (sxx == 0.0 || syy == 0.0) throw Error(Errc::kZeroVariance, "pearson: a series has zero variance");
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

}  // namespace stex
