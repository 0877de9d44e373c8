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

// Command-line front end. Exit codes: 0 success, 1 fatal, 2 evaluation
// finished with too many failed cells.

#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "stex/stex.hpp"

namespace {

namespace fs = std::filesystem;
using namespace stex;

std::string in_dir(const std::string& dir, const std::string& name) { return (fs::path(dir) / name).string(); }

void ensure_dir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error(Errc::kIo, "cannot create " + dir + ": " + ec.message());
}

Corpus token_corpus(const std::string& path) {
  Corpus corpus;
  for (auto& s : load_token_sequences(path)) corpus.push_back(std::move(s.tokens));
  return corpus;
}

// ---------------------------------------------------------------------------

struct DeskArgs {
  std::string out;
  std::size_t lines = 4000;
  double neutral = 0.1;
  std::uint64_t seed = 1;
};

int run_desk(const DeskArgs& a) {
  ensure_dir(a.out);
  const auto lines = desk::generate({a.lines, a.neutral, a.seed});
  write_text_file(in_dir(a.out, "reviews.tsv"), desk::format_reviews(lines));
  write_text_file(in_dir(a.out, "pos_lexicon.tsv"), desk::pos_lexicon_text());
  write_text_file(in_dir(a.out, "sentiment_lexicon.tsv"), desk::sentiment_lexicon_text());
  write_text_file(in_dir(a.out, "sentiment_modifiers.tsv"), desk::sentiment_modifiers_text());
  std::cerr << "wrote " << lines.size() << " reviews to " << a.out << '\n';
  return 0;
}

struct PreprocessArgs {
  std::string input;
  std::string format = "tsv";
  std::string out;
  double test_fraction = 0.1;
  bool balance = false;
  std::uint64_t seed = 1;
};

int run_preprocess(const PreprocessArgs& a) {
  const auto format = a.format == "lines" ? CorpusFormat::kLines : CorpusFormat::kTsv;
  if (a.format != "lines" && a.format != "tsv") throw Error(Errc::kInvalidArgument, "--format must be tsv or lines");
  const auto loaded = load_corpus(a.input, format);
  for (const auto& e : loaded.errors) warn(a.input + ":" + std::to_string(e.line) + ": " + e.message);
  std::vector<TokenSequence> kept;
  std::map<std::string, std::size_t> rejected;
  for (const auto& rec : loaded.records) {
    const auto f = filter_line(rec);
    if (!f.accepted) {
      ++rejected[reject_reason_name(f.reason)];
      continue;
    }
    try {
      auto seq = normalize(rec.text);
      if (rec.stars) seq.sentiment = label_from_stars(*rec.stars);
      kept.push_back(std::move(seq));
    } catch (const Error& e) {
      if (e.code() != Errc::kEmptyAfterNormalize) throw;
      ++rejected["empty"];
    }
  }
  if (a.balance) kept = balance_by_sentiment(kept, a.seed);
  const auto split = split_corpus(kept, a.test_fraction, a.seed);
  const auto masks = make_training_masks(split.train, a.seed);
  ensure_dir(a.out);
  write_text_file(in_dir(a.out, "train.txt"), format_token_sequences(split.train));
  write_text_file(in_dir(a.out, "test.txt"), format_token_sequences(split.test));
  write_text_file(in_dir(a.out, "train_pairs.tsv"), format_masked_pairs(masks.pairs));
  std::cerr << "kept " << kept.size() << " of " << loaded.records.size() << " records (train " << split.train.size()
            << ", test " << split.test.size() << ", pairs " << masks.pairs.size() << ")";
  for (const auto& [why, n] : rejected) std::cerr << ", " << why << " " << n;
  std::cerr << '\n';
  return 0;
}

struct EmbeddingArgs {
  std::string input;
  std::string out;
  std::string kind = "unigram";
  std::string phraser;
  std::size_t dim = 0;
  std::size_t window = 0;
  std::size_t epochs = 0;
  std::size_t negatives = 0;
  std::size_t min_count = 0;
  double lr = 0.0;
  std::uint64_t seed = 1;
};

int run_embeddings(const EmbeddingArgs& a) {
  const bool four = a.kind == "fourgram";
  if (!four && a.kind != "unigram") throw Error(Errc::kInvalidArgument, "--kind must be unigram or fourgram");
  auto cfg = four ? W2VConfig::fourgram_defaults() : W2VConfig::unigram_defaults();
  if (a.dim) cfg.dim = a.dim;
  if (a.window) cfg.window = a.window;
  if (a.epochs) cfg.epochs = a.epochs;
  if (a.negatives) cfg.negatives = a.negatives;
  if (a.min_count) cfg.min_count = a.min_count;
  if (a.lr > 0.0) cfg.lr0 = a.lr;
  cfg.seed = a.seed;
  auto corpus = token_corpus(a.input);
  if (four) {
    if (a.phraser.empty()) throw Error(Errc::kInvalidArgument, "fourgram embeddings need --phraser");
    const auto phraser = load_phraser(a.phraser);
    for (auto& line : corpus) line = phraser.apply(line);
  }
  const auto result = train_word2vec(corpus, cfg, four ? EmbeddingKind::kFourgram : EmbeddingKind::kUnigram);
  write_text_file(a.out, format_embeddings(result.embeddings));
  std::cerr << "trained " << result.embeddings.vocab.size() << " x " << result.embeddings.dim << " " << a.kind
            << " embeddings, final loss " << (result.epoch_loss.empty() ? 0.0 : result.epoch_loss.back()) << '\n';
  return 0;
}

struct PhraserArgs {
  std::string input;
  std::string out;
  double threshold = 10.0;
  double discount = 5.0;
};

int run_phraser(const PhraserArgs& a) {
  const auto phraser = train_fourgram_phraser(token_corpus(a.input), a.threshold, a.discount);
  write_text_file(a.out, format_phraser(phraser));
  std::cerr << "phraser layers: " << phraser.layers[0].scores.size() << " and " << phraser.layers[1].scores.size()
            << " merges\n";
  return 0;
}

struct CharLmArgs {
  std::string input;
  std::string out;
  int order = 6;
};

int run_charlm(const CharLmArgs& a) {
  std::vector<std::string> lines;
  for (const auto& line : token_corpus(a.input)) lines.push_back(join(line));
  const auto lm = CharLm::train(lines, a.order);
  write_text_file(a.out, lm.serialize());
  std::cerr << "char LM of order " << lm.order() << " over " << lm.alphabet_size() << " symbols\n";
  return 0;
}

struct InfillerArgs {
  std::string pairs;
  std::string out;
  std::string arch = "gru_attn";
  std::string preset = "desk";
  std::size_t d_model = 0;
  std::size_t layers = 0;
  std::size_t heads = 0;
  std::size_t d_ff = 0;
  std::size_t hidden = 0;
  double dropout = -1.0;
  std::size_t epochs = 10;
  double lr = 0.0;
  std::size_t batch = 0;
  std::size_t warmup = 0;
  std::size_t min_count = 1;
  std::size_t max_pairs = 0;
  std::uint64_t seed = 1;
};

int run_infiller(const InfillerArgs& a) {
  const auto arch = nn::parse_arch(a.arch);
  const bool full = a.preset == "full";
  if (!full && a.preset != "desk") throw Error(Errc::kInvalidArgument, "--preset must be desk or full");
  nn::ModelDims dims = arch == nn::Arch::kGruAttn ? (full ? nn::ModelDims::gru_full() : nn::ModelDims::gru_desk())
                                                  : (full ? nn::ModelDims::transformer_full()
                                                           : nn::ModelDims::transformer_desk());
  if (a.d_model) dims.d_model = a.d_model;
  if (a.layers) dims.layers = a.layers;
  if (a.heads) dims.heads = a.heads;
  if (a.d_ff) dims.d_ff = a.d_ff;
  if (a.hidden) dims.hidden = a.hidden;
  if (a.dropout >= 0.0) dims.dropout = a.dropout;

  nn::TrainConfig cfg = arch == nn::Arch::kGruAttn ? nn::TrainConfig::gru_defaults()
                                                   : (full ? nn::TrainConfig::transformer_full()
                                                            : nn::TrainConfig::transformer_defaults());
  cfg.epochs = a.epochs;
  cfg.dropout = dims.dropout;
  cfg.seed = a.seed;
  if (a.lr > 0.0) {
    if (cfg.schedule == nn::LrSchedule::kNoam) {
      cfg.factor = a.lr;
    } else {
      cfg.lr0 = a.lr;
    }
  }
  if (a.batch) cfg.batch = a.batch;
  if (a.warmup) cfg.warmup_steps = a.warmup;
  cfg.on_epoch = [](std::size_t epoch, double loss) {
    std::cerr << "epoch " << epoch << " loss " << loss << '\n';
  };

  auto pairs = load_masked_pairs(a.pairs);
  if (a.max_pairs && pairs.size() > a.max_pairs) pairs.resize(a.max_pairs);
  auto vocab = nn::InfillVocab::build(pairs, a.min_count);
  auto model = nn::make_model(dims, std::move(vocab), a.seed);
  std::cerr << nn::arch_name(arch) << ": " << model->params().count() << " parameters, vocab " << model->vocab().size()
            << ", " << pairs.size() << " pairs\n";
  nn::train(*model, pairs, cfg);
  nn::save_checkpoint(*model, a.out);
  return 0;
}

struct ExchangeArgs {
  std::string text;
  std::string re;
  double mrt = 0.4;
  double base_st = -1.0;
  std::string model;
  std::string embeddings;
  std::string fourgram;
  std::string phraser;
  std::string pos_lexicon;
  bool plan = false;
};

int run_exchange(const ExchangeArgs& a) {
  const auto sentence = normalize(a.text);
  const Tokens re = normalize(a.re).tokens;
  const auto emb = load_embeddings(a.embeddings);
  const auto lexicon = a.pos_lexicon.empty() ? PosLexicon::with_defaults() : load_pos_lexicon(a.pos_lexicon);
  if (a.model == kModelBaseline) {
    BaselineResult r;
    if (re.size() == 1) {
      r = w2v_stem(sentence.tokens, re, RrtConfig::unigram(a.mrt), emb, lexicon);
    } else {
      if (a.fourgram.empty() || a.phraser.empty()) {
        throw Error(Errc::kInvalidArgument, "phrase RE needs --fourgram-embeddings and --phraser");
      }
      const auto four = load_embeddings(a.fourgram);
      const auto phraser = load_phraser(a.phraser);
      r = w2v_stem(sentence.tokens, re, RrtConfig::fourgram(a.mrt), four, lexicon, &phraser);
    }
    if (a.plan) {
      std::cerr << format_plan_record(sentence.tokens, re, r.oe, r.threshold, r.actual_rr, r.output) << '\n';
    }
    std::cout << join(r.output) << '\n';
    return 0;
  }
  const double base_st = a.base_st >= 0.0 ? a.base_st : default_base_st(a.mrt);
  const auto plan = plan_exchange(sentence, re, a.mrt, base_st, emb, lexicon);
  if (a.plan) std::cerr << format_plan(plan) << '\n';
  auto model = nn::load_checkpoint(a.model);
  std::cout << join(nn::infill(*model, plan.masked.tokens)) << '\n';
  return 0;
}

int run_evaluate(const std::string& config_path) {
  const auto cfg = load_eval_config(config_path);
  const auto result = evaluate(cfg);
  const auto& r = result.report;
  std::cerr << "evaluated " << r.records.size() << " records, " << r.failures.size() << " of " << r.attempts
            << " cells failed; report in " << cfg.output_dir << '\n';
  return result.exit_code;
}

int run_report(const std::string& metrics, const std::string& out) {
  for (const auto& p : report_from_metrics(metrics, out)) std::cerr << "wrote " << p << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"stex: semantic text exchange toolkit"};
  app.require_subcommand(1);
  int status = 0;

  DeskArgs desk;
  auto* c_desk = app.add_subcommand("make-desk-corpus", "Generate the synthetic topic review corpus and lexicons");
  c_desk->add_option("--out", desk.out, "Output directory")->required();
  c_desk->add_option("--lines", desk.lines, "Number of reviews");
  c_desk->add_option("--neutral-fraction", desk.neutral, "Share of three-star reviews");
  c_desk->add_option("--seed", desk.seed, "Random seed");
  c_desk->callback([&] { status = run_desk(desk); });

  PreprocessArgs pre;
  auto* c_pre = app.add_subcommand("preprocess", "Filter, normalize, split and mask a raw corpus");
  c_pre->add_option("--input", pre.input, "Raw corpus file")->required();
  c_pre->add_option("--format", pre.format, "tsv (stars<TAB>text) or lines");
  c_pre->add_option("--out", pre.out, "Output directory")->required();
  c_pre->add_option("--test-fraction", pre.test_fraction, "Share of lines held out for evaluation");
  c_pre->add_flag("--balance", pre.balance, "Balance positive, negative and neutral lines");
  c_pre->add_option("--seed", pre.seed, "Random seed");
  c_pre->callback([&] { status = run_preprocess(pre); });

  EmbeddingArgs emb;
  auto* c_emb = app.add_subcommand("train-embeddings", "Train unigram or four-gram word2vec embeddings");
  c_emb->add_option("--input", emb.input, "Token-sequence file")->required();
  c_emb->add_option("--out", emb.out, "Embedding file")->required();
  c_emb->add_option("--kind", emb.kind, "unigram or fourgram");
  c_emb->add_option("--phraser", emb.phraser, "Phraser file (fourgram only)");
  c_emb->add_option("--dim", emb.dim, "Vector size");
  c_emb->add_option("--window", emb.window, "Context window");
  c_emb->add_option("--epochs", emb.epochs, "Training epochs");
  c_emb->add_option("--negatives", emb.negatives, "Negative samples per update");
  c_emb->add_option("--min-count", emb.min_count, "Minimum token count");
  c_emb->add_option("--lr", emb.lr, "Initial learning rate");
  c_emb->add_option("--seed", emb.seed, "Random seed");
  c_emb->callback([&] { status = run_embeddings(emb); });

  PhraserArgs phr;
  auto* c_phr = app.add_subcommand("train-phraser", "Train the two-pass bigram phraser");
  c_phr->add_option("--input", phr.input, "Token-sequence file")->required();
  c_phr->add_option("--out", phr.out, "Phraser file")->required();
  c_phr->add_option("--threshold", phr.threshold, "Merge score threshold");
  c_phr->add_option("--discount", phr.discount, "Bigram count discount");
  c_phr->callback([&] { status = run_phraser(phr); });

  CharLmArgs clm;
  auto* c_clm = app.add_subcommand("train-charlm", "Train the character n-gram language model");
  c_clm->add_option("--input", clm.input, "Token-sequence file")->required();
  c_clm->add_option("--out", clm.out, "Model file")->required();
  c_clm->add_option("--order", clm.order, "n-gram order");
  c_clm->callback([&] { status = run_charlm(clm); });

  InfillerArgs inf;
  auto* c_inf = app.add_subcommand("train-infiller", "Train a seq2seq infiller on masked pairs");
  c_inf->add_option("--pairs", inf.pairs, "Masked-pair file")->required();
  c_inf->add_option("--out", inf.out, "Checkpoint path")->required();
  c_inf->add_option("--arch", inf.arch, "gru_attn or transformer");
  c_inf->add_option("--preset", inf.preset, "desk or full dimensions");
  c_inf->add_option("--d-model", inf.d_model, "Embedding / model width");
  c_inf->add_option("--layers", inf.layers, "Layers per stack");
  c_inf->add_option("--heads", inf.heads, "Attention heads");
  c_inf->add_option("--d-ff", inf.d_ff, "Feed-forward width");
  c_inf->add_option("--hidden", inf.hidden, "GRU hidden size");
  c_inf->add_option("--dropout", inf.dropout, "Dropout probability");
  c_inf->add_option("--epochs", inf.epochs, "Training epochs");
  c_inf->add_option("--lr", inf.lr, "Learning rate (noam factor for the transformer)");
  c_inf->add_option("--batch", inf.batch, "Batch size (tokens for the transformer)");
  c_inf->add_option("--warmup", inf.warmup, "Noam warmup steps");
  c_inf->add_option("--min-count", inf.min_count, "Minimum token count for the vocabulary");
  c_inf->add_option("--max-pairs", inf.max_pairs, "Use at most this many pairs");
  c_inf->add_option("--seed", inf.seed, "Random seed");
  c_inf->callback([&] { status = run_infiller(inf); });

  ExchangeArgs ex;
  auto* c_ex = app.add_subcommand("exchange", "Run semantic text exchange on one line");
  c_ex->add_option("--text", ex.text, "Input text")->required();
  c_ex->add_option("--re", ex.re, "Replacement entity")->required();
  c_ex->add_option("--mrt", ex.mrt, "Masking (or replacement) rate threshold");
  c_ex->add_option("--base-st", ex.base_st, "Starting similarity threshold");
  c_ex->add_option("--model", ex.model, "Infiller checkpoint, or w2v-stem")->required();
  c_ex->add_option("--embeddings", ex.embeddings, "Unigram embeddings")->required();
  c_ex->add_option("--fourgram-embeddings", ex.fourgram, "Four-gram embeddings (w2v-stem phrases)");
  c_ex->add_option("--phraser", ex.phraser, "Phraser (w2v-stem phrases)");
  c_ex->add_option("--pos-lexicon", ex.pos_lexicon, "POS lexicon");
  c_ex->add_flag("--plan", ex.plan, "Print the exchange plan to stderr");
  c_ex->callback([&] { status = run_exchange(ex); });

  std::string config;
  auto* c_eval = app.add_subcommand("evaluate", "Run the evaluation sweep from a config file");
  c_eval->add_option("--config", config, "Config file")->required();
  c_eval->callback([&] { status = run_evaluate(config); });

  std::string metrics;
  std::string report_out;
  auto* c_rep = app.add_subcommand("report", "Rebuild aggregate tables from metrics.csv");
  c_rep->add_option("--metrics", metrics, "metrics.csv")->required();
  c_rep->add_option("--out", report_out, "Output directory")->required();
  c_rep->callback([&] { status = run_report(metrics, report_out); });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : kExitFatal;
  } catch (const std::exception& e) {
    std::cerr << "stex: " << e.what() << '\n';
    return kExitFatal;
  }
  return status;
}
