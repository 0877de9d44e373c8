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

// Corpus ingestion: loading, filtering, normalization, sentiment labels,
// class balancing, train/test splits and the tiered masking used to build
// infiller training pairs.

#pragma once

#include <array>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include "stex/common.hpp"
#include "stex/text.hpp"

namespace stex {

enum class Sentiment { kPositive, kNeutral, kNegative, kUnlabeled };

inline const char* sentiment_name(Sentiment s) {
  switch (s) {
    case Sentiment::kPositive: return "positive";
    case Sentiment::kNeutral: return "neutral";
    case Sentiment::kNegative: return "negative";
    case Sentiment::kUnlabeled: return "unlabeled";
  }
  return "unlabeled";
}

inline Sentiment parse_sentiment(std::string_view name) {
  if (name == "positive") return Sentiment::kPositive;
  if (name == "neutral") return Sentiment::kNeutral;
  if (name == "negative") return Sentiment::kNegative;
  if (name == "unlabeled") return Sentiment::kUnlabeled;
  throw Error(Errc::kParse, "unknown sentiment '" + std::string(name) + "'");
}

struct RawRecord {
  std::string text;
  std::optional<int> stars;
  std::string source_id;
};

struct TokenSequence {
  Tokens tokens;
  Sentiment sentiment = Sentiment::kUnlabeled;

  bool operator==(const TokenSequence&) const = default;
};

struct MaskedPair {
  TokenSequence input;
  TokenSequence target;
  double tier = 0.0;
};

struct CorpusSplit {
  std::vector<TokenSequence> train;
  std::vector<TokenSequence> test;
  std::uint64_t seed = 0;
};

enum class CorpusFormat { kLines, kTsv };

struct RecordError {
  std::size_t line = 0;  // 1-based
  std::string message;
};

struct LoadResult {
  std::vector<RawRecord> records;
  std::vector<RecordError> errors;
};

// ---------------------------------------------------------------------------
// Loading

inline LoadResult load_corpus(const std::string& path, CorpusFormat format) {
  const auto lines = read_lines(path);
  LoadResult out;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    const std::string& line = lines[i];
    if (trim(line).empty()) continue;
    const std::string id = path + ":" + std::to_string(i + 1);
    if (format == CorpusFormat::kLines) {
      out.records.push_back({trim(line), std::nullopt, id});
      continue;
    }
    const auto tab = line.find('\t');
    if (tab == std::string::npos) {
      out.errors.push_back({i + 1, "missing tab separator"});
      continue;
    }
    const std::string stars_field = trim(std::string_view(line).substr(0, tab));
    std::string text = trim(std::string_view(line).substr(tab + 1));
    int stars = 0;
    try {
      stars = static_cast<int>(parse_int(stars_field));
    } catch (const Error&) {
      out.errors.push_back({i + 1, "stars field is not an integer: '" + stars_field + "'"});
      continue;
    }
    if (stars < 1 || stars > 5) {
      out.errors.push_back({i + 1, "stars out of range 1..5: " + stars_field});
      continue;
    }
    if (text.empty()) {
      out.errors.push_back({i + 1, "empty text"});
      continue;
    }
    out.records.push_back({std::move(text), stars, id});
  }
  return out;
}

// ---------------------------------------------------------------------------
// Filtering

enum class RejectReason { kNone, kLength, kHyperlink, kNoise };

inline const char* reject_reason_name(RejectReason r) {
  switch (r) {
    case RejectReason::kNone: return "none";
    case RejectReason::kLength: return "length";
    case RejectReason::kHyperlink: return "hyperlink";
    case RejectReason::kNoise: return "noise";
  }
  return "none";
}

struct FilterResult {
  bool accepted = true;
  RejectReason reason = RejectReason::kNone;
};

inline constexpr std::size_t kMaxWordsExclusive = 20;
inline constexpr double kMinCleanCharRatio = 0.70;

inline FilterResult filter_line(const RawRecord& record) {
  const std::string& text = record.text;
  if (split_ws(text).size() >= kMaxWordsExclusive) return {false, RejectReason::kLength};

  std::string lower = text;
  for (char& c : lower) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  for (std::string_view marker : {"http://", "https://", "www."}) {
    if (lower.find(marker) != std::string::npos) return {false, RejectReason::kHyperlink};
  }

  std::size_t clean = 0;
  for (unsigned char c : text) {
    if (std::isalnum(c) || c == ' ' || (c < 0x80 && std::ispunct(c))) ++clean;
  }
  if (text.empty() || static_cast<double>(clean) < kMinCleanCharRatio * static_cast<double>(text.size())) {
    return {false, RejectReason::kNoise};
  }
  return {};
}

// ---------------------------------------------------------------------------
// Normalization

inline bool is_kept_punct(char c) {
  return c == '.' || c == ',' || c == '!' || c == '?' || c == '\'' || c == '-';
}

// Lowercases, collapses runs of an identical punctuation mark, splits kept
// punctuation into its own token and drops the rest. An apostrophe or hyphen
// between two word characters stays inside the word ("couldn't", "jim's").
inline TokenSequence normalize(std::string_view text) {
  std::string collapsed;
  collapsed.reserve(text.size());
  for (char raw : text) {
    const char c = static_cast<char>(std::tolower(static_cast<unsigned char>(raw)));
    const auto uc = static_cast<unsigned char>(c);
    const bool punct = !is_word_char(uc) && !std::isspace(uc);
    if (punct && !collapsed.empty() && collapsed.back() == c) continue;
    collapsed.push_back(c);
  }

  TokenSequence out;
  std::string word;
  auto flush = [&] {
    if (!word.empty()) out.tokens.push_back(std::move(word));
    word.clear();
  };
  for (std::size_t i = 0; i < collapsed.size(); ++i) {
    const auto c = static_cast<unsigned char>(collapsed[i]);
    if (is_word_char(c)) {
      word.push_back(static_cast<char>(c));
      continue;
    }
    if (std::isspace(c)) {
      flush();
      continue;
    }
    if (c == '\'' || c == '-') {
      const bool inner = i > 0 && i + 1 < collapsed.size() &&
                         is_word_char(static_cast<unsigned char>(collapsed[i - 1])) &&
                         is_word_char(static_cast<unsigned char>(collapsed[i + 1]));
      if (inner) {
        word.push_back(static_cast<char>(c));
        continue;
      }
    }
    flush();
    if (is_kept_punct(static_cast<char>(c))) out.tokens.emplace_back(1, static_cast<char>(c));
  }
  flush();
  if (out.tokens.empty()) throw Error(Errc::kEmptyAfterNormalize, "no tokens in '" + std::string(text) + "'");
  return out;
}

// ---------------------------------------------------------------------------
// Labels and balancing

inline Sentiment label_from_stars(int stars) {
  if (stars < 1 || stars > 5) throw Error(Errc::kInvalidArgument, "stars must be in 1..5, got " + std::to_string(stars));
  if (stars > 3) return Sentiment::kPositive;
  if (stars == 3) return Sentiment::kNeutral;
  return Sentiment::kNegative;
}

// Keeps an equal number of positive and negative lines and half as many
// neutral ones. Unlabeled lines are dropped. Output preserves input order.
inline std::vector<TokenSequence> balance_by_sentiment(const std::vector<TokenSequence>& records,
                                                       std::uint64_t seed) {
  std::array<std::vector<std::size_t>, 3> by_class;  // positive, negative, neutral
  for (std::size_t i = 0; i < records.size(); ++i) {
    switch (records[i].sentiment) {
      case Sentiment::kPositive: by_class[0].push_back(i); break;
      case Sentiment::kNegative: by_class[1].push_back(i); break;
      case Sentiment::kNeutral: by_class[2].push_back(i); break;
      case Sentiment::kUnlabeled: break;
    }
  }
  static constexpr std::array<const char*, 3> kNames = {"positive", "negative", "neutral"};
  std::size_t polar = std::numeric_limits<std::size_t>::max();
  for (std::size_t c = 0; c < 3; ++c) {
    if (by_class[c].empty()) {
      warn(std::string("balance_by_sentiment: no ") + kNames[c] + " records");
      continue;
    }
    polar = std::min(polar, c == 2 ? 2 * by_class[c].size() : by_class[c].size());
  }
  if (polar == std::numeric_limits<std::size_t>::max()) return {};
  // An even polar count keeps the 2:2:1 ratio exact when neutral lines exist.
  if (!by_class[2].empty()) polar -= polar % 2;
  const std::array<std::size_t, 3> take = {polar, polar, polar / 2};

  std::vector<std::size_t> keep;
  for (std::size_t c = 0; c < 3; ++c) {
    Rng rng(derive_seed(seed, c));
    auto idx = by_class[c];
    rng.shuffle(idx);
    idx.resize(std::min(idx.size(), take[c]));
    keep.insert(keep.end(), idx.begin(), idx.end());
  }
  std::sort(keep.begin(), keep.end());
  std::vector<TokenSequence> out;
  out.reserve(keep.size());
  for (auto i : keep) out.push_back(records[i]);
  return out;
}

// Seeded shuffle, then the first `test_fraction` of lines become the test set.
inline CorpusSplit split_corpus(const std::vector<TokenSequence>& lines, double test_fraction, std::uint64_t seed) {
  if (test_fraction < 0.0 || test_fraction > 1.0) throw Error(Errc::kInvalidArgument, "test_fraction must be in [0,1]");
  std::vector<std::size_t> order(lines.size());
  std::iota(order.begin(), order.end(), 0);
  Rng rng(derive_seed(seed, 0x5911));
  rng.shuffle(order);
  const auto n_test = static_cast<std::size_t>(std::llround(test_fraction * static_cast<double>(lines.size())));
  std::vector<bool> is_test(lines.size(), false);
  for (std::size_t i = 0; i < n_test; ++i) is_test[order[i]] = true;
  CorpusSplit split;
  split.seed = seed;
  for (std::size_t i = 0; i < lines.size(); ++i) (is_test[i] ? split.test : split.train).push_back(lines[i]);
  return split;
}

// ---------------------------------------------------------------------------
// Tiered masking

inline constexpr std::array<int, 3> kTierPercents = {15, 30, 45};

// ceil(percent * words / 100) in exact integer arithmetic.
inline std::size_t masks_for(int percent, std::size_t words) {
  return (static_cast<std::size_t>(percent) * words + 99) / 100;
}

struct MaskedLine {
  Tokens tokens;             // before merging
  std::size_t masked = 0;    // masked word tokens
  std::size_t words = 0;     // word tokens in the line
};

inline MaskedLine mask_words(const Tokens& tokens, int percent, Rng& rng) {
  std::vector<std::size_t> positions;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (is_word_token(tokens[i])) positions.push_back(i);
  }
  MaskedLine out{tokens, 0, positions.size()};
  const std::size_t k = std::min(masks_for(percent, positions.size()), positions.size());
  // Partial Fisher-Yates: the first k slots become a uniform k-subset.
  for (std::size_t i = 0; i < k; ++i) {
    std::swap(positions[i], positions[i + rng.below(positions.size() - i)]);
    out.tokens[positions[i]] = std::string(kMaskToken);
  }
  out.masked = k;
  return out;
}

struct TrainingMasks {
  std::vector<MaskedPair> pairs;
  std::size_t skipped = 0;  // lines with no maskable word
};

inline TrainingMasks make_training_masks(const std::vector<TokenSequence>& corpus, std::uint64_t seed) {
  if (corpus.empty()) throw Error(Errc::kInvalidArgument, "make_training_masks: empty corpus");
  std::vector<std::size_t> order(corpus.size());
  std::iota(order.begin(), order.end(), 0);
  Rng shuffler(derive_seed(seed, 0x7ae5));
  shuffler.shuffle(order);

  std::vector<int> tier_of(corpus.size());
  for (std::size_t p = 0; p < order.size(); ++p) tier_of[order[p]] = kTierPercents[p * 3 / order.size()];

  TrainingMasks out;
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    Rng rng(derive_seed(seed, 0x100000 + i));
    MaskedLine m = mask_words(corpus[i].tokens, tier_of[i], rng);
    if (m.words == 0) {
      ++out.skipped;
      continue;
    }
    out.pairs.push_back({TokenSequence{merge_masks(m.tokens), corpus[i].sentiment}, corpus[i],
                         static_cast<double>(tier_of[i]) / 100.0});
  }
  return out;
}

// ---------------------------------------------------------------------------
// File formats

inline std::string format_token_sequences(const std::vector<TokenSequence>& lines) {
  std::string out;
  for (const auto& l : lines) {
    out += sentiment_name(l.sentiment);
    out += '\t';
    out += join(l.tokens);
    out += '\n';
  }
  return out;
}

// "sentiment<TAB>text" lines; text is already normalized and space-separated.
inline std::vector<TokenSequence> load_token_sequences(const std::string& path) {
  std::vector<TokenSequence> out;
  const auto lines = read_lines(path);
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (trim(lines[i]).empty()) continue;
    const auto tab = lines[i].find('\t');
    if (tab == std::string::npos) {
      throw Error(Errc::kParse, path + ":" + std::to_string(i + 1) + ": expected sentiment<TAB>text");
    }
    TokenSequence seq;
    seq.sentiment = parse_sentiment(lines[i].substr(0, tab));
    seq.tokens = split_ws(std::string_view(lines[i]).substr(tab + 1));
    if (seq.tokens.empty()) throw Error(Errc::kParse, path + ":" + std::to_string(i + 1) + ": empty text");
    out.push_back(std::move(seq));
  }
  return out;
}

inline std::string format_masked_pairs(const std::vector<MaskedPair>& pairs) {
  std::string out;
  char tier[16];
  for (const auto& p : pairs) {
    std::snprintf(tier, sizeof tier, "%.2f", p.tier);
    out += join(p.input.tokens) + '\t' + join(p.target.tokens) + '\t' + tier + '\n';
  }
  return out;
}

inline std::vector<MaskedPair> load_masked_pairs(const std::string& path) {
  std::vector<MaskedPair> out;
  const auto lines = read_lines(path);
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (trim(lines[i]).empty()) continue;
    const auto fields = split_on(lines[i], '\t');
    if (fields.size() != 3) throw Error(Errc::kParse, path + ":" + std::to_string(i + 1) + ": expected 3 fields");
    MaskedPair p;
    p.input.tokens = split_ws(fields[0]);
    p.target.tokens = split_ws(fields[1]);
    p.tier = parse_double(fields[2]);
    if (p.input.tokens.empty() || p.target.tokens.empty()) {
      throw Error(Errc::kParse, path + ":" + std::to_string(i + 1) + ": empty sequence");
    }
    out.push_back(std::move(p));
  }
  return out;
}

}  // namespace stex
