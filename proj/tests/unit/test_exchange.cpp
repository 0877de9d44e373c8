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

#include <algorithm>

#include "../fixtures/fixtures.hpp"
#include "stex/exchange.hpp"
#include "test_util.hpp"

namespace stex {
namespace {

using fixtures::make_embeddings;
using testing::TempDir;
using testing::toks;

bool has_span(const std::vector<CandidateSpan>& spans, const std::string& text) {
  return std::any_of(spans.begin(), spans.end(), [&](const CandidateSpan& s) { return s.text == text; });
}

// Small embedding space where "hotel" is the closest noun to "restaurant".
Embeddings hotel_space() {
  return make_embeddings({{"i", {0.1, 0.1, 1.0}},
                          {"love", {0.0, 1.0, 0.2}},
                          {"this", {0.2, 0.1, 0.9}},
                          {"hotel", {1.0, 0.1, 0.0}},
                          {"restaurant", {0.95, 0.2, 0.0}},
                          {"room", {0.8, 0.0, 0.5}},
                          {"pool", {0.5, 0.5, 0.5}},
                          {"great", {-0.2, 1.0, 0.0}}});
}

// ---------------------------------------------------------------------------
// POS tagging

TEST(PosTag, Examples) {
  auto lex = PosLexicon::with_defaults();
  EXPECT_EQ(lex.tag("wonderful"), PosTag::kAdj);
  EXPECT_EQ(lex.tag("xyzzy"), PosTag::kNoun);
  lex.words["run"] = PosTag::kVerb;
  EXPECT_EQ(lex.tag("run"), PosTag::kVerb);
  EXPECT_EQ(lex.tag("quickly"), PosTag::kOther);
  EXPECT_EQ(lex.tag("walked"), PosTag::kVerb);
  EXPECT_EQ(lex.tag("the"), PosTag::kOther);
  EXPECT_EQ(lex.tag("!"), PosTag::kOther);
}

TEST(PosTag, LexiconBeatsSuffixRules) {
  auto lex = PosLexicon::with_defaults();
  lex.words["wonderful"] = PosTag::kNoun;
  EXPECT_EQ(lex.tag("wonderful"), PosTag::kNoun);
  EXPECT_EQ(lex.tag("bed"), PosTag::kNoun);  // stem too short for "-ed"
}

TEST(PosTag, PhraseUsesHeadWord) {
  const auto lex = PosLexicon::with_defaults();
  EXPECT_EQ(lex.tag("the_lovely_beach"), PosTag::kNoun);
  EXPECT_EQ(lex.tag("very_wonderful"), PosTag::kAdj);
}

TEST(PosTag, LoadLexiconFile) {
  TempDir dir;
  const auto lex = load_pos_lexicon(dir.write("p.tsv", "# comment\nrun\tVERB\nblue\tADJ\n\n"));
  EXPECT_EQ(lex.tag("run"), PosTag::kVerb);
  EXPECT_EQ(lex.tag("blue"), PosTag::kAdj);
  EXPECT_EQ(lex.tag("the"), PosTag::kOther);
  EXPECT_STEX_ERROR(load_pos_lexicon(dir.write("bad.tsv", "run VERB\n")), Errc::kParse);
  EXPECT_STEX_ERROR(load_pos_lexicon(dir.write("bad2.tsv", "run\tFOO\n")), Errc::kParse);
}

// ---------------------------------------------------------------------------
// Candidates

TEST(Candidates, HotelSpans) {
  const auto lex = PosLexicon::with_defaults();
  const auto s = toks("i love this hotel");
  const auto spans = extract_candidates(s, pos_tag(s, lex), PosTag::kNoun, 1);
  EXPECT_TRUE(has_span(spans, "hotel"));
  EXPECT_TRUE(has_span(spans, "this hotel"));
  EXPECT_FALSE(has_span(spans, "this"));
  for (const auto& sp : spans) {
    EXPECT_GE(sp.size(), 1u);
    EXPECT_LE(sp.size(), 4u);
    EXPECT_EQ(sp.head_tag, PosTag::kNoun);
  }
}

TEST(Candidates, PunctuationOnlyIsEmpty) {
  const auto s = toks(". , ! ?");
  EXPECT_TRUE(extract_candidates(s, pos_tag(s, PosLexicon::with_defaults()), PosTag::kNoun, 1).empty());
}

TEST(Candidates, NeverCrossPunctuation) {
  const auto s = toks("the pool , the room");
  for (const auto& sp : extract_candidates(s, pos_tag(s, PosLexicon::with_defaults()), PosTag::kNoun, 1)) {
    for (auto i = sp.start; i < sp.end; ++i) EXPECT_TRUE(is_word_token(s[i]));
  }
}

TEST(Candidates, MultiTokenReAddsSameLengthSpans) {
  const auto s = toks("we took a ride on the old lake , fun");
  const auto tags = pos_tag(s, PosLexicon::with_defaults());
  const auto spans = extract_candidates(s, tags, PosTag::kNoun, 4);
  // Every 4-token punctuation-free window is present.
  for (std::size_t i = 0; i + 4 <= 8; ++i) {
    Tokens w(s.begin() + static_cast<std::ptrdiff_t>(i), s.begin() + static_cast<std::ptrdiff_t>(i + 4));
    EXPECT_TRUE(has_span(spans, join(w))) << join(w);
  }
  EXPECT_FALSE(has_span(spans, "old lake , fun"));
}

// ---------------------------------------------------------------------------
// OE selection and replacement

TEST(SelectOe, PicksMostSimilarEntity) {
  const auto emb = hotel_space();
  const auto lex = PosLexicon::with_defaults();
  const auto s = toks("i love this hotel");
  const auto tags = pos_tag(s, lex);
  const auto re = toks("restaurant");
  const auto cands = extract_candidates(s, tags, PosTag::kNoun, 1);
  EXPECT_EQ(select_oe(s, tags, re, cands, emb).text, "hotel");
}

TEST(SelectOe, SentenceEqualToReHasNoOe) {
  const auto emb = hotel_space();
  const auto s = toks("restaurant");
  const auto tags = pos_tag(s, PosLexicon::with_defaults());
  EXPECT_STEX_ERROR(select_oe(s, tags, s, extract_candidates(s, tags, PosTag::kNoun, 1), emb), Errc::kNoOe);
}

TEST(SelectOe, AllOovHasNoOe) {
  const auto emb = hotel_space();
  const auto s = toks("zork quux");
  const auto tags = pos_tag(s, PosLexicon::with_defaults());
  EXPECT_STEX_ERROR(select_oe(s, tags, toks("hotel"), extract_candidates(s, tags, PosTag::kNoun, 1), emb),
                    Errc::kNoOe);
}

TEST(SelectOe, TiesGoLeftmost) {
  const auto emb = make_embeddings({{"x", {1, 0}}, {"y", {1, 0}}, {"r", {1, 1}}});
  const auto s = toks("x y");
  const auto tags = pos_tag(s, PosLexicon::with_defaults());
  const auto cands = extract_candidates(s, tags, PosTag::kNoun, 1);
  const auto oe = select_oe(s, tags, toks("r"), cands, emb);
  EXPECT_EQ(oe.start, 0u);
  EXPECT_EQ(oe.size(), 1u);
}

TEST(SelectOe, FallsBackToWordsWhenNoCandidates) {
  const auto emb = hotel_space();
  const auto s = toks("i love this");
  const auto tags = pos_tag(s, PosLexicon::with_defaults());
  const auto oe = select_oe(s, tags, toks("restaurant"), {}, emb);
  EXPECT_EQ(oe.size(), 1u);
}

TEST(ReplaceEntity, Examples) {
  const auto s = toks("i love this hotel !");
  const auto tags = pos_tag(s, PosLexicon::with_defaults());
  EXPECT_EQ(replace_entity(s, make_span(s, tags, 3, 4), toks("restaurant")), toks("i love this restaurant !"));
  const auto grown = replace_entity(s, make_span(s, tags, 3, 4), toks("the big pool"));
  EXPECT_EQ(grown.size(), s.size() + 2);
  EXPECT_EQ(replace_entity(s, make_span(s, tags, 0, 5), toks("ok")), toks("ok"));
  CandidateSpan bad;
  bad.start = 3;
  bad.end = 9;
  EXPECT_STEX_ERROR(replace_entity(s, bad, toks("x")), Errc::kInvalidArgument);
}

// ---------------------------------------------------------------------------
// Similarity scores

TEST(Similarity, ExclusionsScoreZero) {
  const auto emb = hotel_space();
  const auto lex = PosLexicon::with_defaults();
  const auto s = toks("i love this hotel , hotel zzz .");
  const auto tags = pos_tag(s, lex);
  const auto cands = extract_candidates(s, tags, PosTag::kNoun, 1);
  const auto oe = make_span(s, tags, 3, 4);
  const auto replaced = replace_entity(s, oe, toks("restaurant"));
  const auto sim = score_similarity_to_oe(replaced, s, oe, 1, cands, emb);
  ASSERT_EQ(sim.size(), replaced.size());
  EXPECT_EQ(sim[3], 0.0);  // RE
  EXPECT_EQ(sim[4], 0.0);  // ","
  EXPECT_EQ(sim[6], 0.0);  // OOV
  EXPECT_EQ(sim[7], 0.0);  // "."
  // A surviving copy of the OE word is scored normally.
  EXPECT_NEAR(sim[5], 1.0, 1e-12);
  for (double x : sim) {
    EXPECT_GE(x, 0.0);
    EXPECT_LE(x, 1.0);
  }
}

TEST(Similarity, SpanScoresPropagateUpward) {
  const auto emb = make_embeddings(
      {{"oe", {1, 0}}, {"re", {1, 0.1}}, {"a", {0.6, 0.8}}, {"b", {0.6, -0.8}}, {"c", {0, 1}}});
  const auto s = toks("oe c a b");
  std::vector<PosTag> tags(s.size(), PosTag::kNoun);
  const auto cands = extract_candidates(s, tags, PosTag::kNoun, 1);
  const auto oe = make_span(s, tags, 0, 1);
  const auto replaced = replace_entity(s, oe, toks("re"));
  const auto sim = score_similarity_to_oe(replaced, s, oe, 1, cands, emb);
  // "a b" averages to (0.6, 0) which is identical in direction to OE.
  EXPECT_NEAR(sim[2], 1.0, 1e-12);
  EXPECT_NEAR(sim[3], 1.0, 1e-12);
  EXPECT_GT(sim[1], 0.0);
  EXPECT_LT(sim[1], 1.0);
}

// ---------------------------------------------------------------------------
// Masking

TEST(MaskSimilar, AllZeroMasksNothing) {
  const auto s = toks("a b c d .");
  const std::vector<double> sim(s.size(), 0.0);
  const auto m = mask_similar(s, sim, 0.6, 0.3);
  EXPECT_EQ(m.masked, s);
  EXPECT_EQ(m.actual_mr, 0.0);
  EXPECT_EQ(m.final_st, 0.3);
}

TEST(MaskSimilar, MrtZeroMasksNothing) {
  const auto s = toks("a b c d");
  const auto m = mask_similar(s, std::vector<double>{1.0, 0.99, 0.5, 0.2}, 0.0, 0.1);
  EXPECT_EQ(m.masked, s);
  EXPECT_EQ(m.actual_mr, 0.0);
}

TEST(MaskSimilar, HandTracedFixture) {
  const auto s = toks("w0 w1 w2 w3 w4 w5 w6 w7 w8 w9");
  const std::vector<double> sim = {0.9, 0.9, 0.5, 0.1, 0.2, 0.3, 0.1, 0.0, 0.35, 0.2};
  const auto m = mask_similar(s, sim, 0.2, 0.4);
  EXPECT_NEAR(m.final_st, 0.55, 1e-12);
  EXPECT_DOUBLE_EQ(m.actual_mr, 0.2);
  EXPECT_EQ(m.masked_words, 2u);
  EXPECT_EQ(m.masked, toks("[mask] w2 w3 w4 w5 w6 w7 w8 w9"));
}

TEST(MaskSimilar, RateCountsWordsBeforeMerging) {
  const auto s = toks("a b , c d");
  const auto m = mask_similar(s, std::vector<double>{0.9, 0.9, 0.0, 0.1, 0.1}, 0.5, 0.4);
  EXPECT_DOUBLE_EQ(m.actual_mr, 0.5);
  EXPECT_EQ(m.masked, toks("[mask] , c d"));
}

TEST(MaskSimilar, PreconditionsChecked) {
  const auto s = toks("a b");
  const std::vector<double> sim = {0.1, 0.2};
  EXPECT_STEX_ERROR(mask_similar(s, sim, 1.5, 0.4), Errc::kInvalidArgument);
  EXPECT_STEX_ERROR(mask_similar(s, sim, 0.5, 0.0), Errc::kInvalidArgument);
  EXPECT_STEX_ERROR(mask_similar(s, std::vector<double>{0.1}, 0.5, 0.4), Errc::kDimensionMismatch);
}

TEST(DefaultBaseSt, TableAndInterpolation) {
  EXPECT_EQ(default_base_st(0.2), 0.4);
  EXPECT_EQ(default_base_st(0.4), 0.3);
  EXPECT_EQ(default_base_st(0.6), 0.2);
  EXPECT_EQ(default_base_st(0.8), 0.1);
  EXPECT_DOUBLE_EQ(default_base_st(0.5), 0.25);
  EXPECT_EQ(default_base_st(0.0), 0.4);
  EXPECT_EQ(default_base_st(1.0), 0.1);
  EXPECT_STEX_ERROR(default_base_st(1.2), Errc::kInvalidArgument);
}

// ---------------------------------------------------------------------------
// Full plan

TEST(PlanExchange, WorkedExample) {
  const auto emb = hotel_space();
  const auto lex = PosLexicon::with_defaults();
  const TokenSequence s{toks("i love this hotel , great pool !")};
  for (double mrt : {0.0, 0.2, 0.4, 0.6, 0.8, 1.0}) {
    const auto plan = plan_exchange(s, toks("restaurant"), mrt, default_base_st(mrt), emb, lex);
    EXPECT_EQ(plan.oe.text, "hotel");
    EXPECT_EQ(plan.replaced.tokens, toks("i love this restaurant , great pool !"));
    EXPECT_LE(plan.actual_mr, mrt + 1e-12);
    EXPECT_GE(plan.final_st, plan.base_st);
    const auto& m = plan.masked.tokens;
    EXPECT_NE(std::find(m.begin(), m.end(), "restaurant"), m.end());
    EXPECT_EQ(std::find(m.begin(), m.end(), "hotel"), m.end());
    for (std::size_t i = 1; i < m.size(); ++i) EXPECT_FALSE(m[i] == kMaskToken && m[i - 1] == kMaskToken);
  }
}

TEST(PlanExchange, RecordFormat) {
  EXPECT_EQ(format_plan_record(toks("a b"), toks("c"), "b", 0.55, 0.2, toks("a c")), "a b\tc\tb\t0.55\t0.2000\ta c");
  EXPECT_STEX_ERROR(plan_exchange({toks("a")}, {}, 0.2, 0.4, hotel_space(), PosLexicon::with_defaults()),
                    Errc::kInvalidArgument);
}

}  // namespace
}  // namespace stex
