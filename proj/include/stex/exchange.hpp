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

// Entity replacement and similarity masking.
//
// Given a line S and a replacement entity RE, the original entity OE is the
// candidate span of S most similar to RE. S' is S with OE swapped for RE.
// Every word of S' is then scored by its similarity to OE and words above a
// similarity threshold ST are masked. ST starts at a base value and rises in
// 0.05 steps until the fraction of masked words is at most the masking-rate
// threshold MRT. Adjacent masks are merged to give S''.

#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <unordered_map>
#include <vector>

#include "stex/common.hpp"
#include "stex/corpus.hpp"
#include "stex/embed.hpp"
#include "stex/text.hpp"

namespace stex {

// ---------------------------------------------------------------------------
// Part-of-speech tagging

enum class PosTag { kNoun, kVerb, kAdj, kOther };

inline const char* pos_tag_name(PosTag t) {
  switch (t) {
    case PosTag::kNoun: return "NOUN";
    case PosTag::kVerb: return "VERB";
    case PosTag::kAdj: return "ADJ";
    case PosTag::kOther: return "OTHER";
  }
  return "OTHER";
}

inline PosTag parse_pos_tag(std::string_view name) {
  if (name == "NOUN") return PosTag::kNoun;
  if (name == "VERB") return PosTag::kVerb;
  if (name == "ADJ") return PosTag::kAdj;
  if (name == "OTHER") return PosTag::kOther;
  throw Error(Errc::kParse, "unknown POS tag '" + std::string(name) + "'");
}

struct SuffixRule {
  std::string suffix;
  PosTag tag;
};

struct PosLexicon {
  std::unordered_map<std::string, PosTag> words;
  std::vector<SuffixRule> suffix_rules;  // first match wins

  // Closed-class words plus the default suffix rules.
  static PosLexicon with_defaults() {
    PosLexicon lex;
    static constexpr std::string_view kClosedClass[] = {
        "a", "an", "the", "this", "that", "these", "those", "my", "your", "his", "her", "its", "our", "their",
        "i", "you", "he", "she", "it", "we", "they", "me", "him", "us", "them", "myself", "what", "which",
        "who", "whom", "whose", "and", "or", "but", "nor", "so", "yet", "if", "because", "while", "although",
        "of", "in", "on", "at", "to", "for", "with", "from", "by", "about", "into", "over", "under", "after",
        "before", "between", "through", "during", "without", "within", "up", "down", "out", "off", "as",
        "than", "then", "there", "here", "when", "where", "why", "how", "all", "any", "some", "no", "not",
        "every", "each", "both", "few", "more", "most", "much", "many", "such", "only", "own", "same",
        "too", "very", "just", "also", "again", "ever", "never", "always", "is", "am", "are", "was",
        "were", "be", "been", "being", "has", "have", "had", "do", "does", "did", "will", "would", "shall",
        "should", "can", "could", "may", "might", "must", "don't", "didn't", "doesn't", "isn't", "wasn't",
        "aren't", "weren't", "won't", "can't", "couldn't", "wouldn't", "shouldn't", "i'm", "it's", "i've",
        "we're", "they're", "you're", "that's", "there's", "really", "quite", "even", "still", "well"};
    for (auto w : kClosedClass) lex.words.emplace(std::string(w), PosTag::kOther);
    lex.suffix_rules = {{"ly", PosTag::kOther},   {"ing", PosTag::kVerb},  {"ed", PosTag::kVerb},
                        {"ous", PosTag::kAdj},    {"ful", PosTag::kAdj},   {"able", PosTag::kAdj},
                        {"ible", PosTag::kAdj},   {"less", PosTag::kAdj},  {"ive", PosTag::kAdj}};
    return lex;
  }

  PosTag tag(std::string_view token) const {
    if (!is_word_token(token)) return PosTag::kOther;
    if (auto it = words.find(std::string(token)); it != words.end()) return it->second;
    if (token.find(kPhraseJoiner) != std::string_view::npos) {
      PosTag head = PosTag::kOther;
      for (const auto& part : split_phrase(token)) {
        const PosTag t = tag(part);
        if (t != PosTag::kOther) head = t;
      }
      return head;
    }
    for (const auto& rule : suffix_rules) {
      // The stem must keep at least three characters so "bed" or "red" stay nouns.
      if (token.size() >= rule.suffix.size() + 3 && token.ends_with(rule.suffix)) return rule.tag;
    }
    return PosTag::kNoun;
  }
};

// "token<TAB>TAG" lines layered on top of the defaults.
inline PosLexicon load_pos_lexicon(const std::string& path) {
  PosLexicon lex = PosLexicon::with_defaults();
  const auto lines = read_lines(path);
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (trim(lines[i]).empty() || lines[i][0] == '#') continue;
    const auto f = split_on(lines[i], '\t');
    if (f.size() != 2) throw Error(Errc::kParse, path + ":" + std::to_string(i + 1) + ": expected token<TAB>TAG");
    lex.words[trim(f[0])] = parse_pos_tag(trim(f[1]));
  }
  return lex;
}

inline std::vector<PosTag> pos_tag(const Tokens& tokens, const PosLexicon& lexicon) {
  std::vector<PosTag> tags;
  tags.reserve(tokens.size());
  for (const auto& t : tokens) tags.push_back(lexicon.tag(t));
  return tags;
}

// Tag of the last non-OTHER token, or OTHER when there is none.
inline PosTag head_tag(std::span<const PosTag> tags) {
  for (auto it = tags.rbegin(); it != tags.rend(); ++it) {
    if (*it != PosTag::kOther) return *it;
  }
  return PosTag::kOther;
}

// ---------------------------------------------------------------------------
// Entity replacement

struct CandidateSpan {
  std::size_t start = 0;
  std::size_t end = 0;  // exclusive
  std::string text;
  PosTag head_tag = PosTag::kOther;

  std::size_t size() const { return end - start; }
  bool contains(const CandidateSpan& other) const { return start <= other.start && other.end <= end; }
  bool overlaps(const CandidateSpan& other) const { return start < other.end && other.start < end; }
  bool operator==(const CandidateSpan&) const = default;
};

inline Tokens span_tokens(const Tokens& tokens, const CandidateSpan& span) {
  return Tokens(tokens.begin() + static_cast<std::ptrdiff_t>(span.start),
                tokens.begin() + static_cast<std::ptrdiff_t>(span.end));
}

inline CandidateSpan make_span(const Tokens& tokens, std::span<const PosTag> tags, std::size_t start, std::size_t end) {
  CandidateSpan s;
  s.start = start;
  s.end = end;
  s.text = join(span_tokens(tokens, s));
  s.head_tag = head_tag(tags.subspan(start, end - start));
  return s;
}

// Spans of 1..max_len punctuation-free tokens whose head tag equals the
// RE's; when the RE has several tokens, every punctuation-free span of the
// same length is also a candidate. Ordered by (start, length).
inline std::vector<CandidateSpan> extract_candidates(const Tokens& tokens, std::span<const PosTag> tags,
                                                     PosTag re_head_tag, std::size_t re_token_count,
                                                     std::size_t max_len = 4) {
  if (tags.size() != tokens.size()) throw Error(Errc::kDimensionMismatch, "extract_candidates: tags/tokens size");
  std::vector<CandidateSpan> out;
  for (std::size_t start = 0; start < tokens.size(); ++start) {
    for (std::size_t len = 1; len <= max_len && start + len <= tokens.size(); ++len) {
      const std::size_t end = start + len;
      if (!is_word_token(tokens[end - 1])) break;  // spans never cross punctuation or masks
      CandidateSpan span = make_span(tokens, tags, start, end);
      if (span.head_tag == re_head_tag || (re_token_count > 1 && len == re_token_count)) out.push_back(std::move(span));
    }
  }
  return out;
}

// The candidate most similar to RE. When no candidate can be scored, every
// single word of S is tried instead. Ties go to the leftmost, then shortest.
inline CandidateSpan select_oe(const Tokens& sentence, std::span<const PosTag> tags, const Tokens& re,
                               const std::vector<CandidateSpan>& candidates, const Embeddings& emb) {
  const Vector re_vec = embed_text(re, emb);
  std::optional<CandidateSpan> best;
  double best_sim = -1.0;
  auto consider = [&](const CandidateSpan& c) {
    const Tokens words = span_tokens(sentence, c);
    if (words == re) return;
    Vector v;
    try {
      v = embed_text(words, emb);
    } catch (const Error&) {
      return;
    }
    const double sim = angular_similarity(v, re_vec);
    const bool better = !best || sim > best_sim ||
                        (sim == best_sim && (c.start < best->start || (c.start == best->start && c.size() < best->size())));
    if (better) {
      best = c;
      best_sim = sim;
    }
  };
  for (const auto& c : candidates) consider(c);
  if (!best) {
    for (std::size_t i = 0; i < sentence.size(); ++i) {
      if (is_word_token(sentence[i])) consider(make_span(sentence, tags, i, i + 1));
    }
  }
  if (!best) throw Error(Errc::kNoOe, "no scorable original entity for RE '" + join(re) + "'");
  return *best;
}

inline Tokens replace_entity(const Tokens& sentence, const CandidateSpan& oe, const Tokens& re) {
  if (oe.start > oe.end || oe.end > sentence.size()) throw Error(Errc::kInvalidArgument, "replace_entity: span out of range");
  Tokens out(sentence.begin(), sentence.begin() + static_cast<std::ptrdiff_t>(oe.start));
  out.insert(out.end(), re.begin(), re.end());
  out.insert(out.end(), sentence.begin() + static_cast<std::ptrdiff_t>(oe.end), sentence.end());
  return out;
}

// ---------------------------------------------------------------------------
// Similarity masking

// Per-token similarity of S' to OE. Word-level scores come from the token's
// own vector; a candidate span that is more similar to OE than one of its
// member words lifts that word to the span's score. RE tokens, punctuation,
// OOV tokens, and spans overlapping the replaced OE all score 0.
inline std::vector<double> score_similarity_to_oe(const Tokens& replaced, const Tokens& original,
                                                  const CandidateSpan& oe, std::size_t re_token_count,
                                                  const std::vector<CandidateSpan>& candidates,
                                                  const Embeddings& emb) {
  const Vector oe_vec = embed_text(span_tokens(original, oe), emb);
  const std::size_t re_begin = oe.start;
  const std::size_t re_end = oe.start + re_token_count;
  auto scorable = [&](std::size_t i) {
    return (i < re_begin || i >= re_end) && is_word_token(replaced[i]) && emb.vocab.contains(replaced[i]);
  };

  std::vector<double> sim(replaced.size(), 0.0);
  for (std::size_t i = 0; i < replaced.size(); ++i) {
    if (scorable(i)) sim[i] = angular_similarity(*emb.lookup(replaced[i]), oe_vec);
  }

  const auto shift = static_cast<std::ptrdiff_t>(re_token_count) - static_cast<std::ptrdiff_t>(oe.size());
  for (const auto& c : candidates) {
    if (c.overlaps(oe)) continue;
    double span_sim = 0.0;
    try {
      span_sim = angular_similarity(embed_text(span_tokens(original, c), emb), oe_vec);
    } catch (const Error&) {
      continue;
    }
    const std::size_t start = c.start >= oe.end ? static_cast<std::size_t>(static_cast<std::ptrdiff_t>(c.start) + shift) : c.start;
    for (std::size_t i = start; i < start + c.size(); ++i) {
      if (scorable(i)) sim[i] = std::max(sim[i], span_sim);
    }
  }
  return sim;
}

inline constexpr double kStStep = 0.05;
inline constexpr double kStCap = 1.05;
// Slack on the ST comparison so grid values like 0.4 + 2 * 0.05 behave as 0.5.
inline constexpr double kStTolerance = 1e-9;

struct MaskOutcome {
  Tokens masked;              // S'' after merging
  double final_st = 0.0;
  double actual_mr = 0.0;     // masked words / words in S', before merging
  std::size_t masked_words = 0;
  std::size_t iterations = 0;
};

inline MaskOutcome mask_similar(const Tokens& replaced, std::span<const double> similarity, double mrt, double base_st) {
  if (similarity.size() != replaced.size()) throw Error(Errc::kDimensionMismatch, "mask_similar: one score per token");
  if (!(mrt >= 0.0 && mrt <= 1.0)) throw Error(Errc::kInvalidArgument, "mask_similar: mrt must be in [0,1]");
  if (!(base_st > 0.0 && base_st <= 1.0)) throw Error(Errc::kInvalidArgument, "mask_similar: base_st must be in (0,1]");

  const std::size_t words = count_words(replaced);
  MaskOutcome out;
  for (std::size_t step = 0;; ++step) {
    double st = base_st + static_cast<double>(step) * kStStep;
    if (st >= kStCap - kStTolerance) st = kStCap;
    std::size_t hits = 0;
    for (std::size_t i = 0; i < replaced.size(); ++i) {
      if (is_word_token(replaced[i]) && similarity[i] >= st - kStTolerance) ++hits;
    }
    const double rate = words == 0 ? 0.0 : static_cast<double>(hits) / static_cast<double>(words);
    out.iterations = step + 1;
    if (rate <= mrt || st == kStCap) {
      out.final_st = st;
      out.actual_mr = rate;
      out.masked_words = hits;
      break;
    }
  }
  Tokens pre = replaced;
  for (std::size_t i = 0; i < pre.size(); ++i) {
    if (is_word_token(pre[i]) && similarity[i] >= out.final_st - kStTolerance) pre[i] = std::string(kMaskToken);
  }
  out.masked = merge_masks(pre);
  return out;
}

// Base ST paired with each MRT; linear in between, clamped to [0.1, 0.4].
inline double default_base_st(double mrt) {
  if (!(mrt >= 0.0 && mrt <= 1.0)) throw Error(Errc::kInvalidArgument, "default_base_st: mrt must be in [0,1]");
  static constexpr std::pair<double, double> kTable[] = {{0.2, 0.4}, {0.4, 0.3}, {0.6, 0.2}, {0.8, 0.1}};
  for (auto [m, st] : kTable) {
    if (mrt == m) return st;
  }
  return std::clamp(0.5 - 0.5 * mrt, 0.1, 0.4);
}

// ---------------------------------------------------------------------------
// Full plan

struct ExchangePlan {
  TokenSequence original;
  Tokens re;
  CandidateSpan oe;
  std::vector<CandidateSpan> candidates;
  TokenSequence replaced;
  std::vector<double> token_similarity;
  double mrt = 0.0;
  double base_st = 0.0;
  double final_st = 0.0;
  TokenSequence masked;
  double actual_mr = 0.0;
};

inline ExchangePlan plan_exchange(const TokenSequence& sentence, const Tokens& re, double mrt, double base_st,
                                  const Embeddings& emb, const PosLexicon& lexicon) {
  if (re.empty()) throw Error(Errc::kInvalidArgument, "plan_exchange: empty replacement entity");
  ExchangePlan plan;
  plan.original = sentence;
  plan.re = re;
  plan.mrt = mrt;
  plan.base_st = base_st;
  const auto tags = pos_tag(sentence.tokens, lexicon);
  const auto re_tags = pos_tag(re, lexicon);
  plan.candidates = extract_candidates(sentence.tokens, tags, head_tag(re_tags), re.size());
  plan.oe = select_oe(sentence.tokens, tags, re, plan.candidates, emb);
  plan.replaced = {replace_entity(sentence.tokens, plan.oe, re), sentence.sentiment};
  plan.token_similarity =
      score_similarity_to_oe(plan.replaced.tokens, sentence.tokens, plan.oe, re.size(), plan.candidates, emb);
  MaskOutcome m = mask_similar(plan.replaced.tokens, plan.token_similarity, mrt, base_st);
  plan.final_st = m.final_st;
  plan.actual_mr = m.actual_mr;
  plan.masked = {std::move(m.masked), sentence.sentiment};
  return plan;
}

// One tab-separated record: S, RE, OE, final ST, actual MR, S''.
inline std::string format_plan_record(const Tokens& s, const Tokens& re, const std::string& oe, double final_st,
                                      double actual_rate, const Tokens& masked) {
  char st[32];
  char mr[32];
  std::snprintf(st, sizeof st, "%.2f", final_st);
  std::snprintf(mr, sizeof mr, "%.4f", actual_rate);
  return join(s) + '\t' + join(re) + '\t' + oe + '\t' + st + '\t' + mr + '\t' + join(masked);
}

inline std::string format_plan(const ExchangePlan& plan) {
  return format_plan_record(plan.original.tokens, plan.re, plan.oe.text, plan.final_st, plan.actual_mr,
                            plan.masked.tokens);
}

}  // namespace stex
