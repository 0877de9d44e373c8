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

// Evaluation driver: RE and line selection, MRT/RRT sweeps over the SMERTI
// variants and the W2V-STEM baseline, aggregation and report rendering.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include "stex/baseline.hpp"
#include "stex/common.hpp"
#include "stex/corpus.hpp"
#include "stex/embed.hpp"
#include "stex/exchange.hpp"
#include "stex/infill.hpp"
#include "stex/metrics.hpp"
#include "stex/text.hpp"

namespace stex {

// ---------------------------------------------------------------------------
// Configuration

enum class PosBucket { kNoun, kVerb, kAdj, kPhrase };

inline constexpr std::array<PosBucket, 4> kAllBuckets = {PosBucket::kNoun, PosBucket::kVerb, PosBucket::kAdj,
                                                          PosBucket::kPhrase};

inline const char* bucket_name(PosBucket b) {
  switch (b) {
    case PosBucket::kNoun: return "NOUN";
    case PosBucket::kVerb: return "VERB";
    case PosBucket::kAdj: return "ADJ";
    case PosBucket::kPhrase: return "PHRASE";
  }
  return "?";
}

inline PosBucket parse_bucket(std::string_view s) {
  for (auto b : kAllBuckets) {
    if (s == bucket_name(b)) return b;
  }
  throw Error(Errc::kParse, "unknown POS bucket '" + std::string(s) + "'");
}

inline constexpr std::string_view kModelGru = "smerti-gru";
inline constexpr std::string_view kModelTransformer = "smerti-transformer";
inline constexpr std::string_view kModelBaseline = "w2v-stem";
inline constexpr std::string_view kModelInput = "input";

struct EvalConfig {
  std::map<std::string, std::string> datasets;  // name -> token-sequence file
  std::map<PosBucket, std::size_t> pos_buckets = {
      {PosBucket::kNoun, 10}, {PosBucket::kVerb, 10}, {PosBucket::kAdj, 10}, {PosBucket::kPhrase, 5}};
  std::size_t lines_per_re = 100;
  std::size_t min_words = 5;
  std::vector<double> mrts = {0.2, 0.4, 0.6, 0.8};
  std::size_t repeats = 3;
  std::uint64_t seed = 1;
  bool balanced = true;
  std::vector<std::string> models = {std::string(kModelGru), std::string(kModelTransformer), std::string(kModelBaseline)};
  std::map<std::string, std::string> model_paths;  // SMERTI model name -> checkpoint
  std::string unigram_embeddings;
  std::string fourgram_embeddings;
  std::string phraser;
  std::string charlm;
  std::string sentiment_lexicon;
  std::string sentiment_modifiers;
  std::string pos_lexicon;
  std::string re_list;  // optional "BUCKET<TAB>re words" override
  std::string output_dir = "report";
  double failure_threshold = 0.10;

  void validate() const {
    auto bad = [](const std::string& why) { return Error(Errc::kInvalidArgument, "config: " + why); };
    if (datasets.empty()) throw bad("no dataset.<name> entry");
    if (lines_per_re == 0 || repeats == 0 || min_words == 0) throw bad("counts must be positive");
    if (mrts.empty()) throw bad("mrts is empty");
    for (double m : mrts) {
      if (!(m >= 0.0 && m <= 1.0)) throw bad("mrt outside [0,1]");
    }
    if (models.empty()) throw bad("models is empty");
    for (const auto& m : models) {
      if (m == kModelBaseline) continue;
      if (m != kModelGru && m != kModelTransformer) throw bad("unknown model '" + m + "'");
      if (!model_paths.contains(m)) throw bad("model." + m + " is not set");
    }
    if (unigram_embeddings.empty()) throw bad("unigram_embeddings is not set");
    if (charlm.empty()) throw bad("charlm is not set");
    if (sentiment_lexicon.empty()) throw bad("sentiment_lexicon is not set");
    for (const auto& [b, n] : pos_buckets) {
      if (n == 0) throw bad(std::string("pos.") + bucket_name(b) + " must be positive");
    }
  }
};

inline std::vector<std::string> split_list(const std::string& value) {
  std::vector<std::string> out;
  for (const auto& part : split_on(value, ',')) {
    const auto t = trim(part);
    if (!t.empty()) out.push_back(t);
  }
  return out;
}

// Flat "key = value" lines; '#' starts a comment line. Relative paths are
// resolved against `base_dir`.
inline EvalConfig parse_eval_config(const std::string& text, const std::string& base_dir = ".") {
  EvalConfig c;
  c.pos_buckets.clear();
  bool buckets_set = false;
  auto path = [&](const std::string& v) {
    std::filesystem::path p(v);
    return p.is_absolute() ? p.string() : (std::filesystem::path(base_dir) / p).lexically_normal().string();
  };
  auto count = [](const std::string& v) {
    const auto n = parse_int(v);
    if (n < 0) throw Error(Errc::kParse, "config: negative count '" + v + "'");
    return static_cast<std::size_t>(n);
  };
  const auto lines = split_on(text, '\n');
  for (std::size_t i = 0; i < lines.size(); ++i) {
    const auto line = trim(lines[i]);
    if (line.empty() || line[0] == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw Error(Errc::kParse, "config line " + std::to_string(i + 1) + ": expected key = value");
    const auto key = trim(line.substr(0, eq));
    const auto value = trim(line.substr(eq + 1));
    if (key.starts_with("dataset.")) {
      c.datasets[key.substr(8)] = path(value);
    } else if (key.starts_with("model.")) {
      c.model_paths[key.substr(6)] = path(value);
    } else if (key.starts_with("pos.")) {
      c.pos_buckets[parse_bucket(key.substr(4))] = count(value);
      buckets_set = true;
    } else if (key == "lines_per_re") {
      c.lines_per_re = count(value);
    } else if (key == "min_words") {
      c.min_words = count(value);
    } else if (key == "mrts") {
      c.mrts.clear();
      for (const auto& v : split_list(value)) c.mrts.push_back(parse_double(v));
    } else if (key == "repeats") {
      c.repeats = count(value);
    } else if (key == "seed") {
      c.seed = static_cast<std::uint64_t>(parse_int(value));
    } else if (key == "balanced") {
      c.balanced = value == "true" || value == "1" || value == "yes";
    } else if (key == "models") {
      c.models = split_list(value);
    } else if (key == "unigram_embeddings") {
      c.unigram_embeddings = path(value);
    } else if (key == "fourgram_embeddings") {
      c.fourgram_embeddings = path(value);
    } else if (key == "phraser") {
      c.phraser = path(value);
    } else if (key == "charlm") {
      c.charlm = path(value);
    } else if (key == "sentiment_lexicon") {
      c.sentiment_lexicon = path(value);
    } else if (key == "sentiment_modifiers") {
      c.sentiment_modifiers = path(value);
    } else if (key == "pos_lexicon") {
      c.pos_lexicon = path(value);
    } else if (key == "re_list") {
      c.re_list = path(value);
    } else if (key == "output_dir") {
      c.output_dir = path(value);
    } else if (key == "failure_threshold") {
      c.failure_threshold = parse_double(value);
    } else {
      throw Error(Errc::kParse, "config line " + std::to_string(i + 1) + ": unknown key '" + key + "'");
    }
  }
  if (!buckets_set) c.pos_buckets = EvalConfig().pos_buckets;
  return c;
}

// Reads a config file; STEX_SEED in the environment overrides `seed`.
inline EvalConfig load_eval_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::kIo, "cannot open config " + path);
  std::ostringstream text;
  text << in.rdbuf();
  auto c = parse_eval_config(text.str(), std::filesystem::path(path).parent_path().string());
  if (const char* env = std::getenv("STEX_SEED"); env && *env) c.seed = static_cast<std::uint64_t>(parse_int(env));
  return c;
}

// ---------------------------------------------------------------------------
// RE and evaluation-line selection

struct SelectedRe {
  Tokens re;
  PosBucket bucket = PosBucket::kNoun;
  std::size_t frequency = 0;
};

// Frequency-ranked units of the bucket's POS (phrase units for PHRASE), top
// decile kept, sentiment-bearing units dropped, k most frequent returned.
// `admissible` can veto units (e.g. ones missing from an embedding table).
inline std::vector<SelectedRe> select_res(const std::vector<TokenSequence>& test_set, PosBucket bucket, std::size_t k,
                                          const PosLexicon& lexicon, const SentimentLexicon& sentiment,
                                          const Phraser* phraser = nullptr,
                                          const std::function<bool(const Tokens&)>& admissible = {}) {
  std::map<std::string, std::size_t> counts;
  if (bucket == PosBucket::kPhrase) {
    if (!phraser) throw Error(Errc::kInvalidArgument, "select_res: PHRASE bucket needs a phraser");
    for (const auto& line : test_set) {
      for (const auto& unit : phraser->apply(line.tokens)) {
        if (is_word_token(unit) && split_phrase(unit).size() >= 2) ++counts[unit];
      }
    }
  } else {
    const PosTag want = bucket == PosBucket::kNoun ? PosTag::kNoun : bucket == PosBucket::kVerb ? PosTag::kVerb : PosTag::kAdj;
    for (const auto& line : test_set) {
      const auto tags = pos_tag(line.tokens, lexicon);
      for (std::size_t i = 0; i < line.tokens.size(); ++i) {
        if (is_word_token(line.tokens[i]) && tags[i] == want) ++counts[line.tokens[i]];
      }
    }
  }
  std::vector<std::pair<std::string, std::size_t>> ranked(counts.begin(), counts.end());
  std::stable_sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) { return a.second > b.second; });
  ranked.resize((ranked.size() + 9) / 10);

  std::vector<SelectedRe> out;
  for (const auto& [unit, n] : ranked) {
    if (out.size() == k) break;
    Tokens words = split_phrase(unit);
    if (std::any_of(words.begin(), words.end(), [&](const auto& w) { return sentiment.valence.contains(w); })) continue;
    if (admissible && !admissible(words)) continue;
    out.push_back({std::move(words), bucket, n});
  }
  if (out.size() < k) {
    warn(std::string("select_res: only ") + std::to_string(out.size()) + " " + bucket_name(bucket) +
         " REs survive the filters, wanted " + std::to_string(k));
  }
  return out;
}

// "BUCKET<TAB>re words" lines.
inline std::vector<SelectedRe> load_re_list(const std::string& path) {
  std::vector<SelectedRe> out;
  const auto lines = read_lines(path);
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (trim(lines[i]).empty() || lines[i][0] == '#') continue;
    const auto f = split_on(lines[i], '\t');
    if (f.size() != 2) throw Error(Errc::kParse, path + ":" + std::to_string(i + 1) + ": expected BUCKET<TAB>re");
    auto re = split_ws(f[1]);
    if (re.empty()) throw Error(Errc::kParse, path + ":" + std::to_string(i + 1) + ": empty RE");
    out.push_back({std::move(re), parse_bucket(trim(f[0])), 0});
  }
  return out;
}

struct EvalLine {
  std::size_t index = 0;  // position in the test set
  TokenSequence line;
};

// Lines with at least `min_words` words that do not contain RE; neutral
// lines never qualify. Balanced draws take n/2 positive and n/2 negative.
inline std::vector<EvalLine> select_eval_lines(const std::vector<TokenSequence>& test_set, const Tokens& re,
                                               std::size_t n, bool balanced, std::uint64_t seed,
                                               std::size_t min_words = 5) {
  std::vector<std::size_t> pos;
  std::vector<std::size_t> neg;
  std::vector<std::size_t> any;
  for (std::size_t i = 0; i < test_set.size(); ++i) {
    const auto& s = test_set[i];
    if (s.sentiment == Sentiment::kNeutral) continue;
    if (count_words(s.tokens) < min_words) continue;
    if (find_run(s.tokens, re) != s.tokens.size()) continue;
    any.push_back(i);
    if (s.sentiment == Sentiment::kPositive) pos.push_back(i);
    if (s.sentiment == Sentiment::kNegative) neg.push_back(i);
  }
  Rng rng(seed);
  std::vector<std::size_t> chosen;
  auto draw = [&](std::vector<std::size_t> pool, std::size_t want, const char* what) {
    rng.shuffle(pool);
    if (pool.size() < want) {
      warn("select_eval_lines: only " + std::to_string(pool.size()) + " " + what + " lines for RE '" + join(re) +
           "', wanted " + std::to_string(want));
    }
    pool.resize(std::min(pool.size(), want));
    chosen.insert(chosen.end(), pool.begin(), pool.end());
  };
  if (balanced) {
    draw(pos, n / 2, "positive");
    draw(neg, n - n / 2, "negative");
  } else {
    draw(any, n, "eligible");
  }
  std::sort(chosen.begin(), chosen.end());
  std::vector<EvalLine> out;
  for (auto i : chosen) out.push_back({i, test_set[i]});
  return out;
}

// ---------------------------------------------------------------------------
// Records

struct MetricRecord {
  std::string line_id;
  std::string model;
  double mrt = 0.0;
  double spa = 0.0;
  double slor = 0.0;  // rescaled to [0,1]
  double css = 0.0;
  double stes = 0.0;
  double bleu = 0.0;
  double ttr = 0.0;
  // Not part of metrics.csv.
  double slor_raw = 0.0;
  double actual_rate = 0.0;
  std::string input;
  std::string output;
};

struct FailureRecord {
  std::string line_id;
  std::string model;
  double mrt = 0.0;
  std::string what;
};

struct EvalReport {
  std::vector<MetricRecord> records;
  std::vector<FailureRecord> failures;
  std::size_t attempts = 0;
  double slor_clamped_fraction = 0.0;
  std::vector<std::string> models;
  std::vector<double> mrts;
  std::vector<std::pair<std::string, SelectedRe>> res;  // dataset, RE
  std::uint64_t seed = 0;

  double failure_rate() const {
    return attempts == 0 ? 0.0 : static_cast<double>(failures.size()) / static_cast<double>(attempts);
  }
};

// dataset/POS/re_joined/rN/lNNNNNN
inline std::string make_line_id(const std::string& dataset, PosBucket bucket, const Tokens& re, std::size_t repeat,
                                std::size_t index) {
  char tail[48];
  std::snprintf(tail, sizeof tail, "r%zu/l%06zu", repeat, index);
  return dataset + "/" + bucket_name(bucket) + "/" + join_phrase(re) + "/" + tail;
}

struct LineKey {
  std::string dataset;
  std::string pos;
  std::string re;
};

inline LineKey parse_line_id(const std::string& id) {
  const auto parts = split_on(id, '/');
  if (parts.size() != 5) throw Error(Errc::kParse, "malformed line_id '" + id + "'");
  return {parts[0], parts[1], parts[2]};
}

inline constexpr std::string_view kMetricsHeader = "line_id,model,mrt,spa,slor,css,stes,bleu,ttr";

inline std::string format_metrics_csv(const std::vector<MetricRecord>& records) {
  std::string out(kMetricsHeader);
  out += '\n';
  for (const auto& r : records) {
    out += r.line_id + ',' + r.model + ',' + format_double(r.mrt) + ',' + format_double(r.spa) + ',' +
           format_double(r.slor) + ',' + format_double(r.css) + ',' + format_double(r.stes) + ',' +
           format_double(r.bleu) + ',' + format_double(r.ttr) + '\n';
  }
  return out;
}

inline std::vector<MetricRecord> load_metrics_csv(const std::string& path) {
  const auto lines = read_lines(path);
  if (lines.empty() || lines[0] != kMetricsHeader) throw Error(Errc::kParse, path + ": missing metrics header");
  std::vector<MetricRecord> out;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    if (lines[i].empty()) continue;
    const auto f = split_on(lines[i], ',');
    if (f.size() != 9) throw Error(Errc::kParse, path + ":" + std::to_string(i + 1) + ": expected 9 fields");
    MetricRecord r;
    r.line_id = f[0];
    r.model = f[1];
    r.mrt = parse_double(f[2]);
    r.spa = parse_double(f[3]);
    r.slor = parse_double(f[4]);
    r.css = parse_double(f[5]);
    r.stes = parse_double(f[6]);
    r.bleu = parse_double(f[7]);
    r.ttr = parse_double(f[8]);
    out.push_back(std::move(r));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Sweep

// Loaded artifacts a sweep runs against. Pointers are borrowed.
struct EvalComponents {
  const Embeddings* unigram = nullptr;
  const Embeddings* fourgram = nullptr;
  const Phraser* phraser = nullptr;
  const PosLexicon* pos = nullptr;
  const CharLm* charlm = nullptr;
  const SentimentLexicon* sentiment = nullptr;
  std::map<std::string, nn::InfillModel*> infillers;
};

struct Dataset {
  std::string name;
  std::vector<TokenSequence> lines;
};

struct Exchanged {
  Tokens output;
  double actual_rate = 0.0;
};

inline Exchanged run_model(const std::string& model, const TokenSequence& line, const Tokens& re, double mrt,
                           const EvalComponents& c) {
  if (model == kModelBaseline) {
    if (re.size() == 1) {
      auto r = w2v_stem(line.tokens, re, RrtConfig::unigram(mrt), *c.unigram, *c.pos);
      return {std::move(r.output), r.actual_rr};
    }
    if (!c.fourgram || !c.phraser) throw Error(Errc::kInvalidArgument, "phrase RE needs four-gram embeddings and a phraser");
    auto r = w2v_stem(line.tokens, re, RrtConfig::fourgram(mrt), *c.fourgram, *c.pos, c.phraser);
    return {std::move(r.output), r.actual_rr};
  }
  auto it = c.infillers.find(model);
  if (it == c.infillers.end()) throw Error(Errc::kInvalidArgument, "no infiller loaded for '" + model + "'");
  const auto plan = plan_exchange(line, re, mrt, default_base_st(mrt), *c.unigram, *c.pos);
  return {nn::infill(*it->second, plan.masked.tokens), plan.actual_mr};
}

// Per-line metrics against the input; slor is raw here and rescaled later.
inline MetricRecord score_line(const Tokens& input, const Tokens& output, const Tokens& re, const EvalComponents& c) {
  if (output.empty()) throw Error(Errc::kInvalidArgument, "empty output");
  MetricRecord r;
  r.spa = sentiment_score(input, *c.sentiment).label == sentiment_score(output, *c.sentiment).label ? 1.0 : 0.0;
  r.slor_raw = slor(output, *c.charlm);
  r.css = css(output, re, *c.unigram);
  r.bleu = bleu_avg(output, input);
  r.ttr = ttr(output);
  r.input = join(input);
  r.output = join(output);
  return r;
}

// Runs every (dataset, RE, repeat, line, mrt, model) cell. Failures are
// recorded and skipped. Records come out ordered by (line_id, mrt, model).
inline EvalReport run_sweep(const EvalConfig& cfg, const std::vector<Dataset>& datasets, const EvalComponents& c,
                            const std::vector<SelectedRe>* re_override = nullptr) {
  if (!c.unigram || !c.pos || !c.charlm || !c.sentiment) throw Error(Errc::kInvalidArgument, "run_sweep: missing component");
  EvalReport report;
  report.models = cfg.models;
  report.mrts = cfg.mrts;
  report.seed = cfg.seed;
  auto in_vocab = [&](const Tokens& re) {
    return std::all_of(re.begin(), re.end(), [&](const auto& w) { return c.unigram->vocab.contains(w); });
  };

  for (const auto& ds : datasets) {
    std::vector<SelectedRe> res;
    if (re_override) {
      res = *re_override;
    } else {
      for (auto bucket : kAllBuckets) {
        auto it = cfg.pos_buckets.find(bucket);
        if (it == cfg.pos_buckets.end()) continue;
        if (bucket == PosBucket::kPhrase && !c.phraser) {
          warn("run_sweep: no phraser configured, skipping PHRASE REs");
          continue;
        }
        auto got = select_res(ds.lines, bucket, it->second, *c.pos, *c.sentiment, c.phraser, in_vocab);
        res.insert(res.end(), got.begin(), got.end());
      }
    }
    for (const auto& sel : res) {
      report.res.emplace_back(ds.name, sel);
      for (std::size_t rep = 1; rep <= cfg.repeats; ++rep) {
        const auto seed = derive_seed(cfg.seed, fnv1a64(ds.name + "\n" + join(sel.re) + "\n" + std::to_string(rep)));
        for (const auto& el : select_eval_lines(ds.lines, sel.re, cfg.lines_per_re, cfg.balanced, seed, cfg.min_words)) {
          const auto id = make_line_id(ds.name, sel.bucket, sel.re, rep, el.index);
          auto base = score_line(el.line.tokens, el.line.tokens, sel.re, c);
          base.line_id = id;
          base.model = std::string(kModelInput);
          base.mrt = 0.0;
          report.records.push_back(std::move(base));
          for (double mrt : cfg.mrts) {
            for (const auto& model : cfg.models) {
              ++report.attempts;
              try {
                const auto ex = run_model(model, el.line, sel.re, mrt, c);
                auto r = score_line(el.line.tokens, ex.output, sel.re, c);
                r.line_id = id;
                r.model = model;
                r.mrt = mrt;
                r.actual_rate = ex.actual_rate;
                report.records.push_back(std::move(r));
              } catch (const Error& e) {
                report.failures.push_back({id, model, mrt, std::string(errc_name(e.code())) + ": " + e.what()});
              }
            }
          }
        }
      }
    }
  }

  std::stable_sort(report.records.begin(), report.records.end(), [](const auto& a, const auto& b) {
    if (a.line_id != b.line_id) return a.line_id < b.line_id;
    if (a.mrt != b.mrt) return a.mrt < b.mrt;
    return a.model < b.model;
  });

  std::vector<double> raw;
  raw.reserve(report.records.size());
  for (const auto& r : report.records) raw.push_back(r.slor_raw);
  const auto scaled = rescale_slor(raw);
  report.slor_clamped_fraction = scaled.clamped_fraction;
  for (std::size_t i = 0; i < report.records.size(); ++i) {
    auto& r = report.records[i];
    r.slor = scaled.values[i];
    r.stes = stes(r.spa, r.slor, r.css);
  }
  return report;
}

// ---------------------------------------------------------------------------
// Aggregation

enum class GroupKey { kModel, kPos, kDataset, kMrt };

inline const char* group_key_name(GroupKey k) {
  switch (k) {
    case GroupKey::kModel: return "model";
    case GroupKey::kPos: return "pos";
    case GroupKey::kDataset: return "dataset";
    case GroupKey::kMrt: return "mrt";
  }
  return "?";
}

inline constexpr std::array<const char*, 6> kMetricNames = {"spa", "slor", "css", "stes", "bleu", "ttr"};

inline std::array<double, 6> metric_values(const MetricRecord& r) { return {r.spa, r.slor, r.css, r.stes, r.bleu, r.ttr}; }

struct AggregateRow {
  std::vector<std::string> keys;  // one per group key, in request order
  std::size_t n = 0;
  std::array<double, 6> mean{};   // order of kMetricNames
  double stes_of_means = 0.0;     // harmonic mean of mean SPA, SLOR, CSS
  std::array<double, 6> pct_change{};  // vs the matching input rows; NaN if none
};

inline std::string group_value(const MetricRecord& r, GroupKey k) {
  switch (k) {
    case GroupKey::kModel: return r.model;
    case GroupKey::kPos: return parse_line_id(r.line_id).pos;
    case GroupKey::kDataset: return parse_line_id(r.line_id).dataset;
    case GroupKey::kMrt: return format_double(r.mrt);
  }
  return {};
}

// Arithmetic means per group, groups ordered by key values (mrt numerically).
inline std::vector<AggregateRow> aggregate(const std::vector<MetricRecord>& records, const std::vector<GroupKey>& keys) {
  struct Acc {
    std::size_t n = 0;
    std::array<double, 6> sum{};
  };
  auto sort_key = [&](const MetricRecord& r) {
    std::vector<std::string> k;
    for (auto g : keys) {
      if (g == GroupKey::kMrt) {
        char buf[32];
        std::snprintf(buf, sizeof buf, "%020.12f", r.mrt);
        k.push_back(buf);
      } else {
        k.push_back(group_value(r, g));
      }
    }
    return k;
  };
  std::map<std::vector<std::string>, std::pair<std::vector<std::string>, Acc>> groups;
  // Input rows matched on every key except model and mrt, for % change.
  std::map<std::vector<std::string>, Acc> inputs;
  auto input_key = [&](const MetricRecord& r) {
    std::vector<std::string> k;
    for (auto g : keys) {
      if (g != GroupKey::kModel && g != GroupKey::kMrt) k.push_back(group_value(r, g));
    }
    return k;
  };
  for (const auto& r : records) {
    auto& [label, acc] = groups[sort_key(r)];
    if (label.empty()) {
      for (auto g : keys) label.push_back(group_value(r, g));
    }
    ++acc.n;
    const auto v = metric_values(r);
    for (std::size_t m = 0; m < v.size(); ++m) acc.sum[m] += v[m];
    if (r.model == kModelInput) {
      auto& in = inputs[input_key(r)];
      ++in.n;
      for (std::size_t m = 0; m < v.size(); ++m) in.sum[m] += v[m];
    }
  }
  std::vector<AggregateRow> out;
  for (const auto& [sk, entry] : groups) {
    const auto& [label, acc] = entry;
    AggregateRow row;
    row.keys = label;
    row.n = acc.n;
    for (std::size_t m = 0; m < acc.sum.size(); ++m) row.mean[m] = acc.sum[m] / static_cast<double>(acc.n);
    row.stes_of_means = stes(std::clamp(row.mean[0], 0.0, 1.0), std::clamp(row.mean[1], 0.0, 1.0),
                             std::clamp(row.mean[2], 0.0, 1.0));
    std::vector<std::string> ik;
    for (std::size_t j = 0; j < keys.size(); ++j) {
      if (keys[j] != GroupKey::kModel && keys[j] != GroupKey::kMrt) ik.push_back(label[j]);
    }
    auto in = inputs.find(ik);
    for (std::size_t m = 0; m < row.pct_change.size(); ++m) {
      const double base = in == inputs.end() ? 0.0 : in->second.sum[m] / static_cast<double>(in->second.n);
      row.pct_change[m] = base == 0.0 ? std::numeric_limits<double>::quiet_NaN() : (row.mean[m] - base) / base * 100.0;
    }
    out.push_back(std::move(row));
  }
  return out;
}

struct TrendRow {
  std::string model;
  std::array<double, 6> r{};  // pearson(mrt, per-mrt mean), NaN when undefined
};

// Correlation of each metric's per-MRT mean with MRT, per non-input model.
inline std::vector<TrendRow> trends(const std::vector<MetricRecord>& records) {
  const auto rows = aggregate(records, {GroupKey::kModel, GroupKey::kMrt});
  std::map<std::string, std::vector<const AggregateRow*>> by_model;
  for (const auto& row : rows) {
    if (row.keys[0] != kModelInput) by_model[row.keys[0]].push_back(&row);
  }
  std::vector<TrendRow> out;
  for (const auto& [model, list] : by_model) {
    TrendRow t;
    t.model = model;
    std::vector<double> xs;
    for (const auto* row : list) xs.push_back(parse_double(row->keys[1]));
    for (std::size_t m = 0; m < kMetricNames.size(); ++m) {
      std::vector<double> ys;
      for (const auto* row : list) ys.push_back(row->mean[m]);
      try {
        t.r[m] = pearson(xs, ys);
      } catch (const Error&) {
        t.r[m] = std::numeric_limits<double>::quiet_NaN();
      }
    }
    out.push_back(t);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Rendering

inline std::string fixed4(double v) {
  if (std::isnan(v)) return "nan";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4f", v);
  return buf;
}

inline std::string format_aggregate_csv(const std::vector<AggregateRow>& rows, const std::vector<GroupKey>& keys) {
  std::string out;
  for (auto k : keys) out += std::string(group_key_name(k)) + ',';
  out += "n";
  for (auto m : kMetricNames) out += std::string(",") + m;
  out += ",stes_of_means";
  for (auto m : kMetricNames) out += std::string(",") + m + "_pct";
  out += '\n';
  for (const auto& row : rows) {
    for (const auto& k : row.keys) out += k + ',';
    out += std::to_string(row.n);
    for (double v : row.mean) out += ',' + format_double(v);
    out += ',' + format_double(row.stes_of_means);
    for (double v : row.pct_change) out += ',' + (std::isnan(v) ? std::string("nan") : format_double(v));
    out += '\n';
  }
  return out;
}

inline std::string format_aggregate_markdown(const std::vector<AggregateRow>& rows, const std::vector<GroupKey>& keys) {
  std::string out = "|";
  std::string rule = "|";
  for (auto k : keys) {
    out += std::string(" ") + group_key_name(k) + " |";
    rule += "---|";
  }
  out += " n |";
  rule += "---:|";
  for (auto m : kMetricNames) {
    out += std::string(" ") + m + " |";
    rule += "---:|";
  }
  out += " stes of means |\n" + rule + "---:|\n";
  for (const auto& row : rows) {
    out += "|";
    for (const auto& k : row.keys) out += " " + k + " |";
    out += " " + std::to_string(row.n) + " |";
    for (std::size_t m = 0; m < row.mean.size(); ++m) {
      out += " " + fixed4(row.mean[m]);
      if (row.keys[0] != kModelInput && !std::isnan(row.pct_change[m])) {
        out += " (" + std::string(row.pct_change[m] >= 0 ? "+" : "") + fixed4(row.pct_change[m]) + "%)";
      }
      out += " |";
    }
    out += " " + fixed4(row.stes_of_means) + " |\n";
  }
  return out;
}

inline std::string format_trends_csv(const std::vector<TrendRow>& rows) {
  std::string out = "model";
  for (auto m : kMetricNames) out += std::string(",r_mrt_") + m;
  out += '\n';
  for (const auto& t : rows) {
    out += t.model;
    for (double v : t.r) out += ',' + (std::isnan(v) ? std::string("nan") : format_double(v));
    out += '\n';
  }
  return out;
}

struct Grouping {
  std::string name;  // file stem
  std::string title;
  std::vector<GroupKey> keys;
};

inline std::vector<Grouping> default_groupings() {
  return {{"by_model", "Average results by model", {GroupKey::kModel}},
          {"by_pos", "Average results by POS", {GroupKey::kModel, GroupKey::kPos}},
          {"by_dataset", "Average results by dataset", {GroupKey::kModel, GroupKey::kDataset}},
          {"by_mrt", "Average results by MRT/RRT", {GroupKey::kModel, GroupKey::kMrt}}};
}

struct RenderOptions {
  bool csv = true;
  bool markdown = true;
  std::vector<Grouping> groupings = default_groupings();
};

inline std::string render_markdown(const EvalReport& report, const std::vector<Grouping>& groupings) {
  std::string md = "# Semantic text exchange evaluation\n\n";
  md += "- seed: " + std::to_string(report.seed) + "\n";
  md += "- records: " + std::to_string(report.records.size()) + "\n";
  md += "- attempts: " + std::to_string(report.attempts) + ", failures: " + std::to_string(report.failures.size()) +
        " (" + fixed4(100.0 * report.failure_rate()) + "%)\n";
  md += "- SLOR values clamped during rescaling: " + fixed4(100.0 * report.slor_clamped_fraction) + "%\n";
  if (!report.res.empty()) {
    md += "- replacement entities:";
    for (const auto& [ds, sel] : report.res) md += " " + ds + ":" + bucket_name(sel.bucket) + ":" + join_phrase(sel.re);
    md += "\n";
  }
  md += "\nPercentages in parentheses are changes from the input text rows.\n";
  for (const auto& g : groupings) {
    md += "\n## " + g.title + "\n\n" + format_aggregate_markdown(aggregate(report.records, g.keys), g.keys);
  }
  md += "\n## Trend with MRT/RRT (Pearson r of per-MRT means)\n\n| model |";
  std::string rule = "|---|";
  for (auto m : kMetricNames) {
    md += std::string(" ") + m + " |";
    rule += "---:|";
  }
  md += "\n" + rule + "\n";
  for (const auto& t : trends(report.records)) {
    md += "| " + t.model + " |";
    for (double v : t.r) md += " " + fixed4(v) + " |";
    md += "\n";
  }
  return md;
}

inline std::string format_records_tsv(const std::vector<MetricRecord>& records) {
  std::string out = "line_id\tmodel\tmrt\tactual_rate\tslor_raw\tinput\toutput\n";
  for (const auto& r : records) {
    out += r.line_id + '\t' + r.model + '\t' + format_double(r.mrt) + '\t' + format_double(r.actual_rate) + '\t' +
           format_double(r.slor_raw) + '\t' + r.input + '\t' + r.output + '\n';
  }
  return out;
}

// Writes metrics.csv, records.tsv, failures.tsv, one CSV per grouping,
// trends.csv, metric_vs_mrt_<model>.csv and report.md into `dir`.
inline std::vector<std::string> render_report(const EvalReport& report, const std::string& dir,
                                              const RenderOptions& opts = {}) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw Error(Errc::kIo, "cannot create " + dir + ": " + ec.message());
  std::vector<std::string> written;
  auto emit = [&](const std::string& name, const std::string& body) {
    const auto p = (std::filesystem::path(dir) / name).string();
    write_text_file(p, body);
    written.push_back(p);
  };
  if (opts.csv) {
    emit("metrics.csv", format_metrics_csv(report.records));
    emit("records.tsv", format_records_tsv(report.records));
    std::string fails = "line_id\tmodel\tmrt\terror\n";
    for (const auto& f : report.failures) fails += f.line_id + '\t' + f.model + '\t' + format_double(f.mrt) + '\t' + f.what + '\n';
    emit("failures.tsv", fails);
    for (const auto& g : opts.groupings) emit(g.name + ".csv", format_aggregate_csv(aggregate(report.records, g.keys), g.keys));
    emit("trends.csv", format_trends_csv(trends(report.records)));
    std::set<std::string> models;
    for (const auto& r : report.records) {
      if (r.model != kModelInput) models.insert(r.model);
    }
    for (const auto& m : models) {
      std::vector<MetricRecord> mine;
      for (const auto& r : report.records) {
        if (r.model == m) mine.push_back(r);
      }
      const auto rows = aggregate(mine, {GroupKey::kMrt});
      std::string csv = "mrt,n";
      for (auto name : kMetricNames) csv += std::string(",") + name;
      csv += '\n';
      for (const auto& row : rows) {
        csv += row.keys[0] + ',' + std::to_string(row.n);
        for (double v : row.mean) csv += ',' + format_double(v);
        csv += '\n';
      }
      emit("metric_vs_mrt_" + m + ".csv", csv);
    }
  }
  if (opts.markdown) emit("report.md", render_markdown(report, opts.groupings));
  return written;
}

// ---------------------------------------------------------------------------
// End-to-end driver

struct LoadedComponents {
  Embeddings unigram;
  std::optional<Embeddings> fourgram;
  std::optional<Phraser> phraser;
  PosLexicon pos = PosLexicon::with_defaults();
  CharLm charlm;
  SentimentLexicon sentiment;
  std::map<std::string, std::unique_ptr<nn::InfillModel>> infillers;

  EvalComponents view() const {
    EvalComponents c;
    c.unigram = &unigram;
    c.fourgram = fourgram ? &*fourgram : nullptr;
    c.phraser = phraser ? &*phraser : nullptr;
    c.pos = &pos;
    c.charlm = &charlm;
    c.sentiment = &sentiment;
    for (const auto& [name, m] : infillers) c.infillers[name] = m.get();
    return c;
  }
};

inline LoadedComponents load_components(const EvalConfig& cfg) {
  LoadedComponents lc;
  lc.unigram = load_embeddings(cfg.unigram_embeddings);
  if (!cfg.fourgram_embeddings.empty()) lc.fourgram = load_embeddings(cfg.fourgram_embeddings);
  if (!cfg.phraser.empty()) lc.phraser = load_phraser(cfg.phraser);
  if (!cfg.pos_lexicon.empty()) lc.pos = load_pos_lexicon(cfg.pos_lexicon);
  lc.charlm = load_char_lm(cfg.charlm);
  lc.sentiment = load_sentiment_lexicon(cfg.sentiment_lexicon, cfg.sentiment_modifiers);
  for (const auto& m : cfg.models) {
    if (m == kModelBaseline) continue;
    lc.infillers[m] = nn::load_checkpoint(cfg.model_paths.at(m));
  }
  return lc;
}

// Exit status convention: 0 success, 1 fatal, 2 too many failed cells.
inline constexpr int kExitOk = 0;
inline constexpr int kExitFatal = 1;
inline constexpr int kExitPartial = 2;

struct EvaluateResult {
  EvalReport report;
  int exit_code = kExitOk;
};

inline EvaluateResult evaluate(const EvalConfig& cfg) {
  cfg.validate();
  const auto lc = load_components(cfg);
  std::vector<Dataset> datasets;
  for (const auto& [name, path] : cfg.datasets) datasets.push_back({name, load_token_sequences(path)});
  std::optional<std::vector<SelectedRe>> override_res;
  if (!cfg.re_list.empty()) override_res = load_re_list(cfg.re_list);
  EvaluateResult out;
  out.report = run_sweep(cfg, datasets, lc.view(), override_res ? &*override_res : nullptr);
  render_report(out.report, cfg.output_dir);
  if (out.report.failure_rate() > cfg.failure_threshold) out.exit_code = kExitPartial;
  return out;
}

// Rebuilds the aggregate files and report.md from a metrics.csv.
inline std::vector<std::string> report_from_metrics(const std::string& metrics_csv, const std::string& dir) {
  EvalReport report;
  report.records = load_metrics_csv(metrics_csv);
  RenderOptions opts;
  std::vector<std::string> written;
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw Error(Errc::kIo, "cannot create " + dir + ": " + ec.message());
  for (const auto& g : opts.groupings) {
    const auto p = (std::filesystem::path(dir) / (g.name + ".csv")).string();
    write_text_file(p, format_aggregate_csv(aggregate(report.records, g.keys), g.keys));
    written.push_back(p);
  }
  const auto t = (std::filesystem::path(dir) / "trends.csv").string();
  write_text_file(t, format_trends_csv(trends(report.records)));
  written.push_back(t);
  const auto md = (std::filesystem::path(dir) / "report.md").string();
  write_text_file(md, render_markdown(report, opts.groupings));
  written.push_back(md);
  return written;
}

}  // namespace stex
