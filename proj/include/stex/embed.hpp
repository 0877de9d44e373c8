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

// Word and phrase embeddings: vocabulary construction, bigram phrasing,
// word2vec with negative sampling, and the similarity queries built on top.

#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <limits>
#include <numbers>
#include <numeric>
#include <optional>
#include <set>
#include <span>
#include <sstream>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <vector>

#include "stex/common.hpp"
#include "stex/text.hpp"

namespace stex {

using Corpus = std::vector<Tokens>;

// ---------------------------------------------------------------------------
// Vocabulary

class Vocab {
 public:
  Vocab() = default;

  // Tokens must be unique; indices follow the given order.
  Vocab(std::vector<std::string> tokens, std::vector<std::size_t> counts)
      : tokens_(std::move(tokens)), counts_(std::move(counts)) {
    if (counts_.size() != tokens_.size()) counts_.resize(tokens_.size(), 0);
    for (std::size_t i = 0; i < tokens_.size(); ++i) {
      if (!index_.emplace(tokens_[i], i).second) {
        throw Error(Errc::kInvalidArgument, "duplicate vocabulary token '" + tokens_[i] + "'");
      }
    }
  }

  std::size_t size() const { return tokens_.size(); }
  bool empty() const { return tokens_.empty(); }
  const std::string& token(std::size_t i) const { return tokens_.at(i); }
  std::size_t count(std::size_t i) const { return counts_.at(i); }
  const std::vector<std::string>& tokens() const { return tokens_; }

  std::optional<std::size_t> find(std::string_view token) const {
    auto it = index_.find(std::string(token));
    if (it == index_.end()) return std::nullopt;
    return it->second;
  }
  bool contains(std::string_view token) const { return find(token).has_value(); }

 private:
  std::vector<std::string> tokens_;
  std::vector<std::size_t> counts_;
  std::unordered_map<std::string, std::size_t> index_;
};

// Tokens occurring at least max(min_count, 1) times, ordered by descending
// frequency with lexicographic tie-break.
inline Vocab build_vocab(const Corpus& corpus, std::size_t min_count) {
  if (corpus.empty()) throw Error(Errc::kEmptyVocab, "build_vocab: empty corpus");
  std::map<std::string, std::size_t> freq;
  for (const auto& line : corpus) {
    for (const auto& t : line) ++freq[t];
  }
  const std::size_t floor = std::max<std::size_t>(min_count, 1);
  std::vector<std::pair<std::string, std::size_t>> kept;
  for (auto& [tok, n] : freq) {
    if (n >= floor) kept.emplace_back(tok, n);
  }
  if (kept.empty()) throw Error(Errc::kEmptyVocab, "build_vocab: no token reaches min_count");
  std::stable_sort(kept.begin(), kept.end(), [](const auto& a, const auto& b) { return a.second > b.second; });
  std::vector<std::string> tokens;
  std::vector<std::size_t> counts;
  for (auto& [tok, n] : kept) {
    tokens.push_back(tok);
    counts.push_back(n);
  }
  return Vocab(std::move(tokens), std::move(counts));
}

// ---------------------------------------------------------------------------
// Phrasing

inline constexpr char kPhraseJoiner = '_';

// One bigram merge pass. A pair (a, b) is merged when
//   (count(ab) - discount) * N / (count(a) * count(b)) >= threshold
// with N the total token count. Only word tokens form bigrams.
struct PhrasingModel {
  std::map<std::pair<std::string, std::string>, double> scores;
  double threshold = 10.0;
  double discount = 5.0;

  bool merges(const std::string& a, const std::string& b) const { return scores.contains({a, b}); }
};

inline PhrasingModel train_phraser(const Corpus& corpus, double threshold, double discount) {
  PhrasingModel model;
  model.threshold = threshold;
  model.discount = discount;
  if (corpus.empty()) return model;
  std::unordered_map<std::string, double> unigram;
  std::map<std::pair<std::string, std::string>, double> bigram;
  double total = 0.0;
  for (const auto& line : corpus) {
    for (std::size_t i = 0; i < line.size(); ++i) {
      unigram[line[i]] += 1.0;
      total += 1.0;
      if (i + 1 < line.size() && is_word_token(line[i]) && is_word_token(line[i + 1])) {
        bigram[{line[i], line[i + 1]}] += 1.0;
      }
    }
  }
  for (const auto& [ab, n_ab] : bigram) {
    if (n_ab <= discount) continue;
    const double score = (n_ab - discount) * total / (unigram[ab.first] * unigram[ab.second]);
    if (score >= threshold) model.scores.emplace(ab, score);
  }
  return model;
}

// Greedy left-to-right single pass.
inline Tokens apply_phraser(const PhrasingModel& model, const Tokens& tokens) {
  Tokens out;
  out.reserve(tokens.size());
  for (std::size_t i = 0; i < tokens.size();) {
    if (i + 1 < tokens.size() && model.merges(tokens[i], tokens[i + 1])) {
      out.push_back(tokens[i] + kPhraseJoiner + tokens[i + 1]);
      i += 2;
    } else {
      out.push_back(tokens[i]);
      ++i;
    }
  }
  return out;
}

// Two stacked bigram passes, producing units of up to four words.
struct Phraser {
  std::vector<PhrasingModel> layers;

  Tokens apply(const Tokens& tokens) const {
    Tokens out = tokens;
    for (const auto& layer : layers) out = apply_phraser(layer, out);
    return out;
  }
};

inline Phraser train_fourgram_phraser(const Corpus& corpus, double threshold, double discount) {
  Phraser phraser;
  Corpus current = corpus;
  for (int pass = 0; pass < 2; ++pass) {
    phraser.layers.push_back(train_phraser(current, threshold, discount));
    for (auto& line : current) line = apply_phraser(phraser.layers.back(), line);
  }
  return phraser;
}

inline Tokens split_phrase(std::string_view unit) {
  Tokens out;
  for (auto& part : split_on(unit, kPhraseJoiner)) {
    if (!part.empty()) out.push_back(std::move(part));
  }
  return out;
}

inline std::string join_phrase(const Tokens& words) { return join(words, std::string_view(&kPhraseJoiner, 1)); }

inline std::string format_phraser(const Phraser& phraser) {
  std::ostringstream out;
  out << "stex-phraser " << phraser.layers.size() << '\n';
  for (std::size_t l = 0; l < phraser.layers.size(); ++l) {
    const auto& layer = phraser.layers[l];
    out << "layer " << l << ' ' << format_double(layer.threshold) << ' ' << format_double(layer.discount) << ' '
        << layer.scores.size() << '\n';
    for (const auto& [ab, score] : layer.scores) {
      out << ab.first << '\t' << ab.second << '\t' << format_double(score) << '\n';
    }
  }
  return out.str();
}

inline Phraser load_phraser(const std::string& path) {
  const auto lines = read_lines(path);
  auto fail = [&](const std::string& why) { return Error(Errc::kParse, path + ": " + why); };
  if (lines.empty()) throw fail("empty file");
  const auto head = split_ws(lines[0]);
  if (head.size() != 2 || head[0] != "stex-phraser") throw fail("bad header");
  Phraser phraser;
  const auto n_layers = static_cast<std::size_t>(parse_int(head[1]));
  std::size_t at = 1;
  for (std::size_t l = 0; l < n_layers; ++l) {
    if (at >= lines.size()) throw fail("truncated");
    const auto lh = split_ws(lines[at++]);
    if (lh.size() != 5 || lh[0] != "layer") throw fail("bad layer header");
    PhrasingModel layer;
    layer.threshold = parse_double(lh[2]);
    layer.discount = parse_double(lh[3]);
    const auto n = static_cast<std::size_t>(parse_int(lh[4]));
    for (std::size_t i = 0; i < n; ++i) {
      if (at >= lines.size()) throw fail("truncated");
      const auto f = split_on(lines[at++], '\t');
      if (f.size() != 3) throw fail("bad bigram row");
      layer.scores.emplace(std::make_pair(f[0], f[1]), parse_double(f[2]));
    }
    phraser.layers.push_back(std::move(layer));
  }
  return phraser;
}

// ---------------------------------------------------------------------------
// Embeddings

enum class EmbeddingKind { kUnigram, kFourgram };

inline const char* embedding_kind_name(EmbeddingKind k) { return k == EmbeddingKind::kUnigram ? "unigram" : "fourgram"; }

using Vector = std::vector<double>;

struct Embeddings {
  Vocab vocab;
  std::size_t dim = 0;
  std::vector<double> data;  // row-major |V| x dim
  EmbeddingKind kind = EmbeddingKind::kUnigram;

  std::span<const double> row(std::size_t i) const { return {data.data() + i * dim, dim}; }
  std::span<double> row(std::size_t i) { return {data.data() + i * dim, dim}; }

  std::optional<std::span<const double>> lookup(std::string_view token) const {
    auto i = vocab.find(token);
    if (!i) return std::nullopt;
    return row(*i);
  }
};

inline double dot(std::span<const double> u, std::span<const double> v) {
  double s = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) s += u[i] * v[i];
  return s;
}

inline double norm(std::span<const double> u) { return std::sqrt(dot(u, u)); }

inline double cosine(std::span<const double> u, std::span<const double> v) {
  if (u.size() != v.size()) throw Error(Errc::kDimensionMismatch, "cosine: vector sizes differ");
  const double nu = norm(u);
  const double nv = norm(v);
  if (nu == 0.0 || nv == 0.0) throw Error(Errc::kZeroNorm, "cosine of a zero vector");
  return dot(u, v) / (nu * nv);
}

// 1 - arccos(cos)/pi, in [0, 1].
inline double angular_similarity(std::span<const double> u, std::span<const double> v) {
  if (u.size() != v.size()) throw Error(Errc::kDimensionMismatch, "angular_similarity: vector sizes differ");
  const double nu = norm(u);
  const double nv = norm(v);
  if (nu == 0.0 || nv == 0.0) throw Error(Errc::kZeroNorm, "angular_similarity of a zero vector");
  // Half-angle form; acos of the cosine is ill-conditioned near +-1.
  double diff = 0.0;
  double sum = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    const double a = u[i] / nu;
    const double b = v[i] / nv;
    diff += (a - b) * (a - b);
    sum += (a + b) * (a + b);
  }
  const double angle = 2.0 * std::atan2(std::sqrt(diff), std::sqrt(sum));
  return 1.0 - angle / std::numbers::pi;
}

// Mean vector of the in-vocabulary word tokens.
inline Vector embed_text(const Tokens& tokens, const Embeddings& emb) {
  Vector sum(emb.dim, 0.0);
  std::size_t n = 0;
  for (const auto& t : tokens) {
    if (!is_word_token(t)) continue;
    auto v = emb.lookup(t);
    if (!v) continue;
    for (std::size_t i = 0; i < emb.dim; ++i) sum[i] += (*v)[i];
    ++n;
  }
  if (n == 0) throw Error(Errc::kAllOov, "embed_text: no in-vocabulary word in '" + join(tokens) + "'");
  for (auto& x : sum) x /= static_cast<double>(n);
  return sum;
}

// Index of the most cosine-similar vocabulary row, skipping `exclude`.
// Ties resolve to the lower index.
inline std::size_t nearest_neighbor_index(std::span<const double> query, const Embeddings& emb,
                                          const std::unordered_set<std::string>& exclude) {
  const double qn = norm(query);
  if (qn == 0.0) throw Error(Errc::kZeroNorm, "nearest_neighbor: zero query");
  std::optional<std::size_t> best;
  double best_cos = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < emb.vocab.size(); ++i) {
    if (exclude.contains(emb.vocab.token(i))) continue;
    const auto r = emb.row(i);
    const double rn = norm(r);
    if (rn == 0.0) continue;
    const double c = dot(query, r) / (qn * rn);
    if (!best || c > best_cos) {
      best = i;
      best_cos = c;
    }
  }
  if (!best) throw Error(Errc::kEmptyCandidates, "nearest_neighbor: every vocabulary entry is excluded");
  return *best;
}

inline std::string nearest_neighbor(std::span<const double> query, const Embeddings& emb,
                                    const std::unordered_set<std::string>& exclude = {}) {
  return emb.vocab.token(nearest_neighbor_index(query, emb, exclude));
}

// ---------------------------------------------------------------------------
// word2vec

enum class W2VMode { kSkipGram, kCbow };

struct W2VConfig {
  std::size_t dim = 50;
  std::size_t window = 3;
  std::size_t min_count = 0;
  W2VMode mode = W2VMode::kSkipGram;
  std::size_t negatives = 5;
  std::size_t epochs = 5;
  double lr0 = 0.025;
  std::uint64_t seed = 1;

  static W2VConfig unigram_defaults() { return {}; }

  static W2VConfig fourgram_defaults() {
    W2VConfig c;
    c.dim = 10;
    c.window = 1;
    c.mode = W2VMode::kCbow;
    return c;
  }
};

struct W2VResult {
  Embeddings embeddings;
  std::vector<double> epoch_loss;  // mean negative-sampling loss per update
};

namespace detail {

inline double sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

// log(sigmoid(x)) without overflow.
inline double log_sigmoid(double x) { return x >= 0 ? -std::log1p(std::exp(-x)) : x - std::log1p(std::exp(x)); }

}  // namespace detail

inline W2VResult train_word2vec(const Corpus& corpus, const W2VConfig& cfg, EmbeddingKind kind = EmbeddingKind::kUnigram) {
  if (cfg.dim == 0 || cfg.window == 0 || cfg.negatives == 0) {
    throw Error(Errc::kInvalidArgument, "word2vec: dim, window and negatives must be positive");
  }
  Vocab vocab = build_vocab(corpus, cfg.min_count);
  const std::size_t V = vocab.size();
  const std::size_t d = cfg.dim;

  std::vector<std::vector<std::size_t>> lines;
  std::size_t total_tokens = 0;
  bool has_pair = false;
  for (const auto& line : corpus) {
    std::vector<std::size_t> ids;
    for (const auto& t : line) {
      if (auto i = vocab.find(t)) ids.push_back(*i);
    }
    total_tokens += ids.size();
    has_pair = has_pair || ids.size() >= 2;
    lines.push_back(std::move(ids));
  }
  if (!has_pair) throw Error(Errc::kCorpusTooSmall, "word2vec: no line holds a context window");

  // Noise distribution proportional to count^0.75.
  std::vector<double> cdf(V);
  double acc = 0.0;
  for (std::size_t i = 0; i < V; ++i) {
    acc += std::pow(static_cast<double>(vocab.count(i)), 0.75);
    cdf[i] = acc;
  }
  for (auto& c : cdf) c /= acc;

  Rng rng(cfg.seed);
  std::vector<double> in(V * d);
  std::vector<double> out(V * d, 0.0);
  for (auto& x : in) x = (rng.uniform() - 0.5) / static_cast<double>(d);

  auto draw_noise = [&] {
    const double u = rng.uniform();
    auto it = std::upper_bound(cdf.begin(), cdf.end(), u);
    return static_cast<std::size_t>(std::min<std::ptrdiff_t>(it - cdf.begin(), static_cast<std::ptrdiff_t>(V - 1)));
  };

  std::vector<double> hidden(d);
  std::vector<double> grad(d);
  double loss_sum = 0.0;
  std::size_t updates = 0;

  // One positive target plus negatives against the hidden vector; returns
  // the loss and accumulates the hidden-vector gradient into `grad`.
  auto train_target = [&](std::size_t target, double lr) {
    double loss = 0.0;
    for (std::size_t k = 0; k <= cfg.negatives; ++k) {
      std::size_t t = target;
      double label = 1.0;
      if (k > 0) {
        t = draw_noise();
        if (t == target) continue;
        label = 0.0;
      }
      double* o = out.data() + t * d;
      double f = 0.0;
      for (std::size_t j = 0; j < d; ++j) f += hidden[j] * o[j];
      loss -= label > 0 ? detail::log_sigmoid(f) : detail::log_sigmoid(-f);
      const double g = (label - detail::sigmoid(f)) * lr;
      for (std::size_t j = 0; j < d; ++j) {
        grad[j] += g * o[j];
        o[j] += g * hidden[j];
      }
    }
    return loss;
  };

  W2VResult result;
  const double total_work = static_cast<double>(cfg.epochs * total_tokens);
  std::size_t processed = 0;
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    loss_sum = 0.0;
    updates = 0;
    for (const auto& ids : lines) {
      for (std::size_t pos = 0; pos < ids.size(); ++pos, ++processed) {
        const double progress = total_work > 0 ? static_cast<double>(processed) / total_work : 0.0;
        const double lr = cfg.lr0 * (1.0 - 0.99 * progress);
        const std::size_t lo = pos >= cfg.window ? pos - cfg.window : 0;
        const std::size_t hi = std::min(ids.size() - 1, pos + cfg.window);
        if (cfg.mode == W2VMode::kSkipGram) {
          const std::size_t center = ids[pos];
          double* c = in.data() + center * d;
          for (std::size_t ctx = lo; ctx <= hi; ++ctx) {
            if (ctx == pos) continue;
            std::copy(c, c + d, hidden.begin());
            std::fill(grad.begin(), grad.end(), 0.0);
            loss_sum += train_target(ids[ctx], lr);
            ++updates;
            for (std::size_t j = 0; j < d; ++j) c[j] += grad[j];
          }
        } else {
          std::fill(hidden.begin(), hidden.end(), 0.0);
          std::size_t n_ctx = 0;
          for (std::size_t ctx = lo; ctx <= hi; ++ctx) {
            if (ctx == pos) continue;
            const double* c = in.data() + ids[ctx] * d;
            for (std::size_t j = 0; j < d; ++j) hidden[j] += c[j];
            ++n_ctx;
          }
          if (n_ctx == 0) continue;
          for (auto& h : hidden) h /= static_cast<double>(n_ctx);
          std::fill(grad.begin(), grad.end(), 0.0);
          loss_sum += train_target(ids[pos], lr);
          ++updates;
          for (std::size_t ctx = lo; ctx <= hi; ++ctx) {
            if (ctx == pos) continue;
            double* c = in.data() + ids[ctx] * d;
            for (std::size_t j = 0; j < d; ++j) c[j] += grad[j];
          }
        }
      }
    }
    result.epoch_loss.push_back(updates > 0 ? loss_sum / static_cast<double>(updates) : 0.0);
  }

  result.embeddings.vocab = std::move(vocab);
  result.embeddings.dim = d;
  result.embeddings.data = std::move(in);
  result.embeddings.kind = kind;
  return result;
}

// ---------------------------------------------------------------------------
// Embedding file: "<vocab_size> <d> <kind>" then "<token> <v1> ... <vd>".

inline std::string format_embeddings(const Embeddings& emb) {
  std::string out = std::to_string(emb.vocab.size()) + " " + std::to_string(emb.dim) + " " +
                    embedding_kind_name(emb.kind) + "\n";
  for (std::size_t i = 0; i < emb.vocab.size(); ++i) {
    out += emb.vocab.token(i);
    for (double x : emb.row(i)) {
      out += ' ';
      out += format_double(x);
    }
    out += '\n';
  }
  return out;
}

inline Embeddings load_embeddings(const std::string& path) {
  const auto lines = read_lines(path);
  auto fail = [&](std::size_t line, const std::string& why) {
    return Error(Errc::kParse, path + ":" + std::to_string(line) + ": " + why);
  };
  if (lines.empty()) throw fail(1, "missing header");
  const auto head = split_ws(lines[0]);
  if (head.size() != 3) throw fail(1, "header must be '<vocab_size> <d> <kind>'");
  Embeddings emb;
  const auto n = static_cast<std::size_t>(parse_int(head[0]));
  emb.dim = static_cast<std::size_t>(parse_int(head[1]));
  if (head[2] == "unigram") {
    emb.kind = EmbeddingKind::kUnigram;
  } else if (head[2] == "fourgram") {
    emb.kind = EmbeddingKind::kFourgram;
  } else {
    throw fail(1, "unknown kind '" + head[2] + "'");
  }
  if (lines.size() < n + 1) throw fail(lines.size(), "fewer rows than declared");
  std::vector<std::string> tokens;
  emb.data.reserve(n * emb.dim);
  for (std::size_t i = 0; i < n; ++i) {
    const auto f = split_ws(lines[i + 1]);
    if (f.size() != emb.dim + 1) throw fail(i + 2, "expected token and " + std::to_string(emb.dim) + " values");
    tokens.push_back(f[0]);
    for (std::size_t j = 1; j < f.size(); ++j) {
      const double x = parse_double(f[j]);
      if (!std::isfinite(x)) throw fail(i + 2, "non-finite value");
      emb.data.push_back(x);
    }
  }
  emb.vocab = Vocab(std::move(tokens), {});
  return emb;
}

}  // namespace stex
