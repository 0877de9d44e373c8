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

// Infiller vocabulary, model dimensions and the seq2seq model interface.

#pragma once

#include <algorithm>
#include <map>
#include <memory>
#include <string>
#include <unordered_map>
#include <vector>

#include "stex/corpus.hpp"
#include "stex/infill/tape.hpp"
#include "stex/text.hpp"

namespace stex::nn {

inline constexpr int kPadId = 0;
inline constexpr int kSosId = 1;
inline constexpr int kEosId = 2;
inline constexpr int kUnkId = 3;
inline constexpr int kMaskId = 4;
inline constexpr int kNumSpecials = 5;

inline const std::vector<std::string>& special_tokens() {
  static const std::vector<std::string> kSpecials = {"<pad>", "<sos>", "<eos>", "<unk>", std::string(kMaskToken)};
  return kSpecials;
}

class InfillVocab {
 public:
  InfillVocab() : InfillVocab(special_tokens()) {}

  // `tokens` must start with the special tokens in their fixed order.
  explicit InfillVocab(std::vector<std::string> tokens) : tokens_(std::move(tokens)) {
    const auto& sp = special_tokens();
    if (tokens_.size() < sp.size() || !std::equal(sp.begin(), sp.end(), tokens_.begin())) {
      throw Error(Errc::kParse, "InfillVocab: special tokens missing or out of order");
    }
    for (std::size_t i = 0; i < tokens_.size(); ++i) {
      if (!index_.emplace(tokens_[i], static_cast<int>(i)).second) {
        throw Error(Errc::kParse, "InfillVocab: duplicate token '" + tokens_[i] + "'");
      }
    }
  }

  // Specials, then every token seen at least `min_count` times (descending
  // frequency, ties lexicographic).
  static InfillVocab build(const std::vector<MaskedPair>& pairs, std::size_t min_count = 1) {
    std::unordered_map<std::string, std::size_t> counts;
    for (const auto& p : pairs) {
      for (const auto& t : p.input.tokens) ++counts[t];
      for (const auto& t : p.target.tokens) ++counts[t];
    }
    std::vector<std::pair<std::string, std::size_t>> items;
    const auto& sp = special_tokens();
    for (auto& [t, n] : counts) {
      if (n >= std::max<std::size_t>(min_count, 1) && std::find(sp.begin(), sp.end(), t) == sp.end()) items.emplace_back(t, n);
    }
    std::sort(items.begin(), items.end(), [](const auto& a, const auto& b) {
      return a.second != b.second ? a.second > b.second : a.first < b.first;
    });
    std::vector<std::string> tokens = sp;
    for (auto& [t, n] : items) tokens.push_back(t);
    return InfillVocab(std::move(tokens));
  }

  std::size_t size() const { return tokens_.size(); }
  const std::vector<std::string>& tokens() const { return tokens_; }
  const std::string& token(int id) const { return tokens_.at(static_cast<std::size_t>(id)); }

  int id(const std::string& token) const {
    auto it = index_.find(token);
    return it == index_.end() ? kUnkId : it->second;
  }

  bool contains(const std::string& token) const { return index_.contains(token); }

  std::vector<int> encode(const Tokens& tokens) const {
    std::vector<int> out;
    out.reserve(tokens.size());
    for (const auto& t : tokens) out.push_back(id(t));
    return out;
  }

  std::uint64_t hash() const { return fnv1a64(join(tokens_, "\n")); }

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, int> index_;
};

enum class Arch { kGruAttn, kTransformer };

inline const char* arch_name(Arch a) { return a == Arch::kGruAttn ? "gru_attn" : "transformer"; }

inline Arch parse_arch(const std::string& s) {
  if (s == "gru_attn" || s == "gru") return Arch::kGruAttn;
  if (s == "transformer") return Arch::kTransformer;
  throw Error(Errc::kParse, "unknown architecture '" + s + "'");
}

struct ModelDims {
  Arch arch = Arch::kTransformer;
  std::size_t d_model = 64;  // transformer width
  std::size_t layers = 2;
  std::size_t heads = 4;
  std::size_t d_ff = 256;
  std::size_t hidden = 64;   // GRU width
  double dropout = 0.1;

  static ModelDims gru_desk() { return {Arch::kGruAttn, 64, 2, 4, 256, 64, 0.1}; }
  static ModelDims transformer_desk() { return {Arch::kTransformer, 64, 2, 4, 256, 64, 0.1}; }
  static ModelDims gru_full() { return {Arch::kGruAttn, 500, 2, 4, 2048, 500, 0.1}; }
  static ModelDims transformer_full() { return {Arch::kTransformer, 512, 6, 8, 2048, 64, 0.1}; }

  std::size_t width() const { return arch == Arch::kGruAttn ? hidden : d_model; }
};

// Encoder output: per-position memory plus any recurrent state handed to the
// decoder.
struct Encoded {
  Tape::Var memory = 0;
  std::vector<Tape::Var> state;
};

class InfillModel {
 public:
  InfillModel(ModelDims dims, InfillVocab vocab) : dims_(dims), vocab_(std::move(vocab)) {}
  virtual ~InfillModel() = default;
  InfillModel(const InfillModel&) = delete;
  InfillModel& operator=(const InfillModel&) = delete;

  Arch arch() const { return dims_.arch; }
  const ModelDims& dims() const { return dims_; }
  const InfillVocab& vocab() const { return vocab_; }
  ParamStore& params() { return params_; }
  const ParamStore& params() const { return params_; }
  void set_dropout(double p) { dims_.dropout = p; }

  // `dropout_rng` non-null enables dropout.
  virtual Encoded encode(Tape& tape, const std::vector<int>& src, Rng* dropout_rng) = 0;

  // Logits (T x |V|) for every decoder input position.
  virtual Tape::Var decode(Tape& tape, const Encoded& enc, const std::vector<int>& tgt_in, Rng* dropout_rng) = 0;

  Tape::Var logits(Tape& tape, const std::vector<int>& src, const std::vector<int>& tgt_in, Rng* dropout_rng) {
    return decode(tape, encode(tape, src, dropout_rng), tgt_in, dropout_rng);
  }

 protected:
  ModelDims dims_;
  InfillVocab vocab_;
  ParamStore params_;
};

}  // namespace stex::nn
