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

#include <gtest/gtest.h>

#include "stex/corpus.hpp"
#include "stex/desk_corpus.hpp"
#include "stex/exchange.hpp"
#include "stex/metrics.hpp"
#include "test_util.hpp"

namespace stex {
namespace {

using testing::TempDir;

TEST(DeskCorpus, Deterministic) {
  desk::DeskConfig cfg;
  cfg.lines = 200;
  cfg.seed = 3;
  const auto a = desk::format_reviews(desk::generate(cfg));
  EXPECT_EQ(a, desk::format_reviews(desk::generate(cfg)));
  cfg.seed = 4;
  EXPECT_NE(a, desk::format_reviews(desk::generate(cfg)));
}

TEST(DeskCorpus, StarsFollowNeutralFraction) {
  desk::DeskConfig cfg;
  cfg.lines = 4000;
  cfg.neutral_fraction = 0.2;
  const auto lines = desk::generate(cfg);
  ASSERT_EQ(lines.size(), 4000u);
  std::size_t neutral = 0;
  for (const auto& l : lines) {
    EXPECT_GE(l.stars, 1);
    EXPECT_LE(l.stars, 5);
    EXPECT_LT(l.topic, desk::kTopics.size());
    EXPECT_FALSE(l.text.empty());
    neutral += l.stars == 3;
  }
  EXPECT_NEAR(static_cast<double>(neutral) / 4000.0, 0.2, 0.03);
}

TEST(DeskCorpus, RejectsBadConfig) {
  desk::DeskConfig cfg;
  cfg.lines = 0;
  EXPECT_STEX_ERROR(desk::generate(cfg), Errc::kInvalidArgument);
  cfg.lines = 10;
  cfg.neutral_fraction = 1.0;
  EXPECT_STEX_ERROR(desk::generate(cfg), Errc::kInvalidArgument);
}

TEST(DeskCorpus, LexiconTextsParse) {
  TempDir dir;
  const auto pos = load_pos_lexicon(dir.write("pos.tsv", desk::pos_lexicon_text()));
  EXPECT_EQ(pos.words.at(std::string(desk::kTopics[0].head)), PosTag::kNoun);
  const auto lex = load_sentiment_lexicon(dir.write("lex.tsv", desk::sentiment_lexicon_text()),
                                          dir.write("mod.tsv", desk::sentiment_modifiers_text()));
  EXPECT_GT(lex.valence.at("great"), 0.0);
  EXPECT_LT(lex.valence.at("terrible"), 0.0);
  EXPECT_TRUE(lex.negators.contains("not"));
  EXPECT_FALSE(lex.intensifiers.empty());
}

TEST(DeskCorpus, PolarityMatchesSentimentClassifier) {
  TempDir dir;
  const auto lex = load_sentiment_lexicon(dir.write("lex.tsv", desk::sentiment_lexicon_text()),
                                          dir.write("mod.tsv", desk::sentiment_modifiers_text()));
  desk::DeskConfig cfg;
  cfg.lines = 500;
  std::size_t polar = 0;
  std::size_t agree = 0;
  for (const auto& l : desk::generate(cfg)) {
    if (l.stars == 3) continue;
    ++polar;
    const auto label = sentiment_score(normalize(l.text).tokens, lex).label;
    agree += (l.stars >= 4) == (label == Sentiment::kPositive);
  }
  EXPECT_GT(static_cast<double>(agree) / static_cast<double>(polar), 0.9);
}

}  // namespace
}  // namespace stex
