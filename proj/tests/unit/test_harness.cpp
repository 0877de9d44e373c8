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

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "../fixtures/fixtures.hpp"
#include "stex/harness.hpp"
#include "test_util.hpp"

namespace stex {
namespace {

using testing::TempDir;
using testing::toks;
using testing::WarningCapture;

TokenSequence seq(std::string_view text, Sentiment s) { return {toks(text), s}; }

std::string slurp(const std::string& path) {
  std::ifstream in(path);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

// ---------------------------------------------------------------------------
// Config

TEST(EvalConfig, ParsesKeysAndResolvesRelativePaths) {
  const auto c = parse_eval_config(
      "# comment\n"
      "dataset.yelp = data/yelp.tok\n"
      "dataset.abs = /tmp/abs.tok\n"
      "model.smerti-gru = models/gru.ckpt\n"
      "lines_per_re = 20\n"
      "mrts = 0.2, 0.6\n"
      "repeats = 2\n"
      "seed = 99\n"
      "balanced = false\n"
      "models = w2v-stem, smerti-gru\n"
      "unigram_embeddings = emb/uni.txt\n"
      "charlm = lm.txt\n"
      "sentiment_lexicon = lex.tsv\n"
      "failure_threshold = 0.25\n",
      "/base");
  EXPECT_EQ(c.datasets.at("yelp"), "/base/data/yelp.tok");
  EXPECT_EQ(c.datasets.at("abs"), "/tmp/abs.tok");
  EXPECT_EQ(c.model_paths.at("smerti-gru"), "/base/models/gru.ckpt");
  EXPECT_EQ(c.lines_per_re, 20u);
  EXPECT_EQ(c.mrts, (std::vector<double>{0.2, 0.6}));
  EXPECT_EQ(c.repeats, 2u);
  EXPECT_EQ(c.seed, 99u);
  EXPECT_FALSE(c.balanced);
  EXPECT_EQ(c.models, (std::vector<std::string>{"w2v-stem", "smerti-gru"}));
  EXPECT_EQ(c.unigram_embeddings, "/base/emb/uni.txt");
  EXPECT_DOUBLE_EQ(c.failure_threshold, 0.25);
  EXPECT_EQ(c.pos_buckets, EvalConfig().pos_buckets);
  EXPECT_NO_THROW(c.validate());
}

TEST(EvalConfig, PosKeysReplaceDefaultBuckets) {
  const auto c = parse_eval_config("pos.NOUN = 3\n");
  ASSERT_EQ(c.pos_buckets.size(), 1u);
  EXPECT_EQ(c.pos_buckets.at(PosBucket::kNoun), 3u);
}

TEST(EvalConfig, ParseErrors) {
  EXPECT_STEX_ERROR(parse_eval_config("bogus = 1\n"), Errc::kParse);
  EXPECT_STEX_ERROR(parse_eval_config("no equals sign\n"), Errc::kParse);
  EXPECT_STEX_ERROR(parse_eval_config("repeats = -1\n"), Errc::kParse);
  EXPECT_STEX_ERROR(parse_eval_config("repeats = x\n"), Errc::kParse);
}

TEST(EvalConfig, ValidateRejectsIncompleteConfigs) {
  const std::string ok =
      "dataset.d = d.tok\nmodels = w2v-stem\nunigram_embeddings = u\ncharlm = c\nsentiment_lexicon = s\n";
  EXPECT_NO_THROW(parse_eval_config(ok).validate());
  EXPECT_STEX_ERROR(parse_eval_config("models = w2v-stem\nunigram_embeddings = u\ncharlm = c\nsentiment_lexicon = s\n")
                        .validate(),
                    Errc::kInvalidArgument);
  EXPECT_STEX_ERROR(parse_eval_config(ok + "mrts = 1.5\n").validate(), Errc::kInvalidArgument);
  EXPECT_STEX_ERROR(parse_eval_config(ok + "models = smerti-gru\n").validate(), Errc::kInvalidArgument);
  EXPECT_STEX_ERROR(parse_eval_config(ok + "models = gpt\n").validate(), Errc::kInvalidArgument);
  EXPECT_STEX_ERROR(parse_eval_config(ok + "repeats = 0\n").validate(), Errc::kInvalidArgument);
  EXPECT_STEX_ERROR(parse_eval_config(ok + "pos.ADJ = 0\n").validate(), Errc::kInvalidArgument);
}

TEST(EvalConfig, SeedEnvironmentOverride) {
  TempDir dir;
  const auto path = dir.write("eval.cfg", "seed = 5\ncharlm = lm.txt\n");
  ::unsetenv("STEX_SEED");
  auto c = load_eval_config(path);
  EXPECT_EQ(c.seed, 5u);
  EXPECT_EQ(c.charlm, (dir.path() / "lm.txt").string());
  ::setenv("STEX_SEED", "1234", 1);
  c = load_eval_config(path);
  ::unsetenv("STEX_SEED");
  EXPECT_EQ(c.seed, 1234u);
  EXPECT_STEX_ERROR(load_eval_config(dir.file("missing.cfg")), Errc::kIo);
}

// ---------------------------------------------------------------------------
// RE selection

struct AdjFixture {
  PosLexicon pos = PosLexicon::with_defaults();
  SentimentLexicon sentiment;
  std::vector<TokenSequence> lines;

  AdjFixture() {
    // Eleven adjectives, so the top decile keeps two: great (x6), spicy (x4).
    const std::vector<std::pair<std::string, int>> adj = {{"great", 6}, {"spicy", 4}, {"warm", 3}, {"cold", 2},
                                                          {"salty", 1}, {"crisp", 1}, {"fresh", 1}, {"sweet", 1},
                                                          {"plain", 1}, {"dense", 1}, {"tiny", 1}};
    for (const auto& [w, n] : adj) {
      pos.words[w] = PosTag::kAdj;
      for (int i = 0; i < n; ++i) lines.push_back(seq("the " + w + " food", Sentiment::kPositive));
    }
    sentiment.valence["great"] = 3.1;
  }
};

TEST(SelectRes, DropsSentimentWordsInsideTopDecile) {
  AdjFixture f;
  const auto got = select_res(f.lines, PosBucket::kAdj, 1, f.pos, f.sentiment);
  ASSERT_EQ(got.size(), 1u);
  EXPECT_EQ(got[0].re, toks("spicy"));
  EXPECT_EQ(got[0].bucket, PosBucket::kAdj);
  EXPECT_EQ(got[0].frequency, 4u);
}

TEST(SelectRes, WarnsOnShortfall) {
  AdjFixture f;
  WarningCapture warnings;
  const auto got = select_res(f.lines, PosBucket::kAdj, 3, f.pos, f.sentiment);
  EXPECT_EQ(got.size(), 1u);
  ASSERT_EQ(warnings.messages.size(), 1u);
  EXPECT_NE(warnings.messages[0].find("wanted 3"), std::string::npos);
}

TEST(SelectRes, AdmissibleVetoAndNounBucket) {
  AdjFixture f;
  const auto none = select_res(f.lines, PosBucket::kAdj, 1, f.pos, f.sentiment, nullptr,
                               [](const Tokens& re) { return re[0] != "spicy"; });
  EXPECT_TRUE(none.empty());
  const auto nouns = select_res(f.lines, PosBucket::kNoun, 1, f.pos, f.sentiment);
  ASSERT_EQ(nouns.size(), 1u);
  EXPECT_EQ(nouns[0].re, toks("food"));
  EXPECT_EQ(nouns[0].frequency, f.lines.size());
}

TEST(SelectRes, PhraseBucketNeedsPhraser) {
  AdjFixture f;
  EXPECT_STEX_ERROR(select_res(f.lines, PosBucket::kPhrase, 1, f.pos, f.sentiment), Errc::kInvalidArgument);
  Phraser phraser;
  phraser.layers.resize(1);
  phraser.layers[0].scores[{"spicy", "food"}] = 10.0;
  const auto got = select_res(f.lines, PosBucket::kPhrase, 1, f.pos, f.sentiment, &phraser);
  ASSERT_EQ(got.size(), 1u);
  EXPECT_EQ(got[0].re, toks("spicy food"));
}

TEST(SelectRes, LoadReList) {
  TempDir dir;
  const auto p = dir.write("res.tsv", "# bucket\tre\nNOUN\tpizza\nPHRASE\tice cream\n");
  const auto got = load_re_list(p);
  ASSERT_EQ(got.size(), 2u);
  EXPECT_EQ(got[1].re, toks("ice cream"));
  EXPECT_EQ(got[1].bucket, PosBucket::kPhrase);
  EXPECT_STEX_ERROR(load_re_list(dir.write("bad.tsv", "NOUN pizza\n")), Errc::kParse);
}

// ---------------------------------------------------------------------------
// Evaluation-line selection

std::vector<TokenSequence> eval_pool() {
  std::vector<TokenSequence> v;
  for (int i = 0; i < 10; ++i) v.push_back(seq("the food here was really good " + std::to_string(i), Sentiment::kPositive));
  for (int i = 0; i < 10; ++i) v.push_back(seq("the food here was really bad " + std::to_string(i), Sentiment::kNegative));
  v.push_back(seq("the food here was just okay", Sentiment::kNeutral));
  v.push_back(seq("short bad line", Sentiment::kNegative));
  v.push_back(seq("the pizza here was really bad", Sentiment::kNegative));
  return v;
}

TEST(SelectEvalLines, BalancedAndFiltered) {
  const auto pool = eval_pool();
  const auto got = select_eval_lines(pool, toks("pizza"), 8, true, 7);
  ASSERT_EQ(got.size(), 8u);
  int pos = 0;
  for (std::size_t i = 0; i < got.size(); ++i) {
    if (i > 0) {
      EXPECT_LT(got[i - 1].index, got[i].index);
    }
    EXPECT_NE(got[i].line.sentiment, Sentiment::kNeutral);
    EXPECT_GE(count_words(got[i].line.tokens), 5u);
    EXPECT_EQ(find_run(got[i].line.tokens, toks("pizza")), got[i].line.tokens.size());
    pos += got[i].line.sentiment == Sentiment::kPositive;
  }
  EXPECT_EQ(pos, 4);
}

TEST(SelectEvalLines, DeterministicPerSeed) {
  const auto pool = eval_pool();
  auto ids = [&](std::uint64_t seed) {
    std::vector<std::size_t> v;
    for (const auto& e : select_eval_lines(pool, toks("pizza"), 6, true, seed)) v.push_back(e.index);
    return v;
  };
  EXPECT_EQ(ids(3), ids(3));
  bool any_diff = false;
  for (std::uint64_t s = 4; s < 10 && !any_diff; ++s) any_diff = ids(s) != ids(3);
  EXPECT_TRUE(any_diff);
}

TEST(SelectEvalLines, ExcludesLinesWithReAndWarnsOnShortfall) {
  const auto pool = eval_pool();
  WarningCapture warnings;
  const auto got = select_eval_lines(pool, toks("food"), 10, false, 1);
  ASSERT_EQ(got.size(), 1u);
  EXPECT_EQ(got[0].line.tokens, toks("the pizza here was really bad"));
  EXPECT_EQ(warnings.messages.size(), 1u);
}

// ---------------------------------------------------------------------------
// Records

TEST(Records, LineIdRoundTrip) {
  const auto id = make_line_id("yelp", PosBucket::kPhrase, toks("ice cream"), 2, 42);
  EXPECT_EQ(id, "yelp/PHRASE/ice_cream/r2/l000042");
  const auto k = parse_line_id(id);
  EXPECT_EQ(k.dataset, "yelp");
  EXPECT_EQ(k.pos, "PHRASE");
  EXPECT_EQ(k.re, "ice_cream");
  EXPECT_STEX_ERROR(parse_line_id("a/b"), Errc::kParse);
}

MetricRecord rec(const std::string& model, double mrt, double spa, double slor, double css, double bleu, double ttr,
                 const std::string& id = "d/NOUN/food/r1/l000001") {
  MetricRecord r;
  r.line_id = id;
  r.model = model;
  r.mrt = mrt;
  r.spa = spa;
  r.slor = slor;
  r.css = css;
  r.stes = stes(spa, slor, css);
  r.bleu = bleu;
  r.ttr = ttr;
  return r;
}

TEST(Records, MetricsCsvRoundTrip) {
  TempDir dir;
  const std::vector<MetricRecord> in = {rec("input", 0.0, 1, 0.5, 0.25, 1, 0.9),
                                        rec("w2v-stem", 0.4, 0, 0.1234567890123, 1.0 / 3.0, 0.2, 0.7)};
  const auto csv = format_metrics_csv(in);
  EXPECT_EQ(csv.substr(0, csv.find('\n')), kMetricsHeader);
  const auto out = load_metrics_csv(dir.write("m.csv", csv));
  ASSERT_EQ(out.size(), 2u);
  for (std::size_t i = 0; i < in.size(); ++i) {
    EXPECT_EQ(out[i].line_id, in[i].line_id);
    EXPECT_EQ(out[i].model, in[i].model);
    EXPECT_EQ(metric_values(out[i]), metric_values(in[i]));
    EXPECT_EQ(out[i].mrt, in[i].mrt);
  }
  EXPECT_STEX_ERROR(load_metrics_csv(dir.write("bad.csv", "x,y\n")), Errc::kParse);
  EXPECT_STEX_ERROR(load_metrics_csv(dir.write("short.csv", std::string(kMetricsHeader) + "\na,b\n")), Errc::kParse);
}

// ---------------------------------------------------------------------------
// Aggregation

TEST(Aggregate, MeansAndPercentChange) {
  const std::vector<MetricRecord> rs = {
      rec("input", 0.0, 1.0, 0.8, 0.2, 1.0, 0.9),
      rec("w2v-stem", 0.2, 1.0, 0.6, 0.4, 0.5, 0.9),
      rec("w2v-stem", 0.2, 0.0, 0.4, 0.8, 0.3, 0.6),
  };
  const auto rows = aggregate(rs, {GroupKey::kModel});
  ASSERT_EQ(rows.size(), 2u);
  EXPECT_EQ(rows[0].keys, (std::vector<std::string>{"input"}));
  EXPECT_EQ(rows[1].keys, (std::vector<std::string>{"w2v-stem"}));
  EXPECT_EQ(rows[1].n, 2u);
  EXPECT_DOUBLE_EQ(rows[1].mean[0], 0.5);
  EXPECT_DOUBLE_EQ(rows[1].mean[1], 0.5);
  EXPECT_NEAR(rows[1].mean[2], 0.6, 1e-15);
  EXPECT_DOUBLE_EQ(rows[1].stes_of_means, stes(0.5, 0.5, 0.6));
  EXPECT_NEAR(rows[1].pct_change[0], -50.0, 1e-12);
  EXPECT_NEAR(rows[1].pct_change[2], 200.0, 1e-12);
  EXPECT_NEAR(rows[0].pct_change[1], 0.0, 1e-12);
}

TEST(Aggregate, PercentChangeIsNanWithoutInputRows) {
  const auto rows = aggregate({rec("w2v-stem", 0.2, 1, 1, 1, 1, 1)}, {GroupKey::kModel});
  ASSERT_EQ(rows.size(), 1u);
  for (double p : rows[0].pct_change) EXPECT_TRUE(std::isnan(p));
}

TEST(Aggregate, GroupsByPosAndOrdersMrtNumerically) {
  std::vector<MetricRecord> rs;
  for (double m : {0.8, 0.2, 1.0, 0.4}) rs.push_back(rec("w2v-stem", m, 1, 1, 1, 1, 1));
  rs.push_back(rec("w2v-stem", 0.2, 0, 0, 0, 0, 0, "d/VERB/run/r1/l000002"));
  const auto by_mrt = aggregate(rs, {GroupKey::kMrt});
  ASSERT_EQ(by_mrt.size(), 4u);
  EXPECT_EQ(by_mrt[0].keys[0], "0.2");
  EXPECT_EQ(by_mrt[3].keys[0], "1");
  EXPECT_EQ(by_mrt[0].n, 2u);
  const auto by_pos = aggregate(rs, {GroupKey::kModel, GroupKey::kPos});
  ASSERT_EQ(by_pos.size(), 2u);
  EXPECT_EQ(by_pos[0].keys, (std::vector<std::string>{"w2v-stem", "NOUN"}));
  EXPECT_EQ(by_pos[1].keys, (std::vector<std::string>{"w2v-stem", "VERB"}));
}

TEST(Aggregate, Trends) {
  std::vector<MetricRecord> rs = {rec("input", 0.0, 1, 1, 0, 1, 1)};
  for (double m : {0.2, 0.4, 0.6, 0.8}) rs.push_back(rec("w2v-stem", m, 1.0 - m, 0.5, m, 1.0 - m / 2, 0.5));
  const auto t = trends(rs);
  ASSERT_EQ(t.size(), 1u);
  EXPECT_EQ(t[0].model, "w2v-stem");
  EXPECT_NEAR(t[0].r[0], -1.0, 1e-12);
  EXPECT_TRUE(std::isnan(t[0].r[1]));
  EXPECT_NEAR(t[0].r[2], 1.0, 1e-12);
  EXPECT_NEAR(t[0].r[4], -1.0, 1e-12);
}

// ---------------------------------------------------------------------------
// Rendering

TEST(Render, EmptyReportRenders) {
  EvalReport report;
  const auto md = render_markdown(report, default_groupings());
  EXPECT_NE(md.find("records: 0"), std::string::npos);
  TempDir dir;
  const auto written = render_report(report, dir.file("out"));
  EXPECT_FALSE(written.empty());
  for (const auto& p : written) EXPECT_TRUE(std::filesystem::exists(p)) << p;
}

TEST(Render, WritesEveryArtifact) {
  EvalReport report;
  report.records = {rec("input", 0.0, 1, 0.8, 0.2, 1, 0.9), rec("w2v-stem", 0.2, 1, 0.6, 0.4, 0.5, 0.9),
                    rec("w2v-stem", 0.4, 0, 0.4, 0.8, 0.3, 0.6)};
  report.failures = {{"d/NOUN/food/r1/l000001", "w2v-stem", 0.6, "kNoOe: none"}};
  report.attempts = 3;
  TempDir dir;
  const auto written = render_report(report, dir.path().string());
  for (const char* name : {"metrics.csv", "records.tsv", "failures.tsv", "by_model.csv", "by_pos.csv", "by_dataset.csv",
                           "by_mrt.csv", "trends.csv", "metric_vs_mrt_w2v-stem.csv", "report.md"}) {
    EXPECT_TRUE(std::filesystem::exists(dir.file(name))) << name;
  }
  EXPECT_EQ(written.size(), 10u);
  EXPECT_NE(slurp(dir.file("failures.tsv")).find("kNoOe"), std::string::npos);
  EXPECT_NE(slurp(dir.file("report.md")).find("Average results by model"), std::string::npos);

  TempDir again;
  report_from_metrics(dir.file("metrics.csv"), again.path().string());
  EXPECT_EQ(slurp(again.file("by_model.csv")), slurp(dir.file("by_model.csv")));
  EXPECT_TRUE(std::filesystem::exists(again.file("report.md")));
}

// ---------------------------------------------------------------------------
// Sweep

struct SweepFixture {
  Embeddings emb = fixtures::make_embeddings({
      {"pizza", {1.0, 0.0, 0.0}},  {"food", {0.9, 0.1, 0.0}},  {"soup", {0.6, 0.4, 0.0}},
      {"bread", {0.7, 0.2, 0.1}},  {"the", {0.0, 0.0, 1.0}},   {"was", {0.0, 1.0, 0.0}},
      {"here", {0.1, 0.9, 0.2}},   {"great", {0.2, 0.1, 0.9}}, {"awful", {-0.2, 0.1, 0.9}},
      {"really", {0.1, 0.3, 0.7}},
  });
  PosLexicon pos = PosLexicon::with_defaults();
  SentimentLexicon sentiment;
  CharLm lm;
  Dataset ds;

  SweepFixture() {
    for (const char* w : {"pizza", "food", "soup", "bread"}) pos.words[w] = PosTag::kNoun;
    pos.words["great"] = PosTag::kAdj;
    pos.words["awful"] = PosTag::kAdj;
    sentiment.valence["great"] = 3.1;
    sentiment.valence["awful"] = -3.0;
    ds.name = "toy";
    for (const char* n : {"food", "soup", "bread"}) {
      ds.lines.push_back(seq(std::string("the ") + n + " here was really great", Sentiment::kPositive));
      ds.lines.push_back(seq(std::string("the ") + n + " here was really awful", Sentiment::kNegative));
    }
    std::vector<std::string> text;
    for (const auto& l : ds.lines) text.push_back(join(l.tokens));
    lm = CharLm::train(text, 3);
  }

  EvalComponents components() const {
    EvalComponents c;
    c.unigram = &emb;
    c.pos = &pos;
    c.charlm = &lm;
    c.sentiment = &sentiment;
    return c;
  }

  EvalConfig config() const {
    EvalConfig cfg;
    cfg.datasets["toy"] = "unused";
    cfg.lines_per_re = 4;
    cfg.repeats = 2;
    cfg.mrts = {0.4, 1.0};
    cfg.models = {std::string(kModelBaseline)};
    return cfg;
  }
};

TEST(RunSweep, BaselineOnlyToyDataset) {
  SweepFixture f;
  const std::vector<SelectedRe> res = {{toks("pizza"), PosBucket::kNoun, 0}};
  const auto report = run_sweep(f.config(), {f.ds}, f.components(), &res);
  ASSERT_EQ(report.res.size(), 1u);
  std::size_t inputs = 0;
  std::size_t outputs = 0;
  for (std::size_t i = 0; i < report.records.size(); ++i) {
    const auto& r = report.records[i];
    if (i > 0) {
      EXPECT_LE(report.records[i - 1].line_id, r.line_id);
    }
    EXPECT_GE(r.slor, 0.0);
    EXPECT_LE(r.slor, 1.0);
    EXPECT_EQ(parse_line_id(r.line_id).re, "pizza");
    if (r.model == kModelInput) {
      ++inputs;
      EXPECT_DOUBLE_EQ(r.bleu, 1.0);
      EXPECT_DOUBLE_EQ(r.spa, 1.0);
      continue;
    }
    ++outputs;
    EXPECT_NE(r.output.find("pizza"), std::string::npos) << r.output;
    EXPECT_LE(r.actual_rate, r.mrt + 1e-12);
    EXPECT_DOUBLE_EQ(r.stes, stes(r.spa, r.slor, r.css));
  }
  EXPECT_EQ(inputs, 8u);  // 4 lines x 2 repeats
  EXPECT_EQ(report.attempts, 16u);
  EXPECT_EQ(outputs + report.failures.size(), report.attempts);
  EXPECT_GT(outputs, 0u);
}

TEST(RunSweep, DeterministicAndAutomaticReSelection) {
  SweepFixture f;
  auto cfg = f.config();
  cfg.pos_buckets = {{PosBucket::kNoun, 1}};
  const auto a = run_sweep(cfg, {f.ds}, f.components());
  const auto b = run_sweep(cfg, {f.ds}, f.components());
  EXPECT_EQ(format_metrics_csv(a.records), format_metrics_csv(b.records));
  ASSERT_EQ(a.res.size(), 1u);
  EXPECT_EQ(a.res[0].second.bucket, PosBucket::kNoun);
}

TEST(RunSweep, MissingComponentsAndModelsFailCleanly) {
  SweepFixture f;
  auto c = f.components();
  c.charlm = nullptr;
  EXPECT_STEX_ERROR(run_sweep(f.config(), {f.ds}, c), Errc::kInvalidArgument);
  auto cfg = f.config();
  cfg.models = {std::string(kModelGru)};
  cfg.repeats = 1;
  const std::vector<SelectedRe> res = {{toks("pizza"), PosBucket::kNoun, 0}};
  const auto report = run_sweep(cfg, {f.ds}, f.components(), &res);
  EXPECT_EQ(report.failures.size(), report.attempts);
  EXPECT_DOUBLE_EQ(report.failure_rate(), 1.0);
}

}  // namespace
}  // namespace stex
