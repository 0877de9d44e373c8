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

// Post-norm encoder-decoder transformer with sinusoidal positions. The
// feed-forward block uses GELU so finite-difference checks never straddle a
// ReLU kink.

#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "stex/infill/attention.hpp"
#include "stex/infill/model.hpp"

namespace stex::nn {

// PE(p, 2i) = sin(p / 10000^(2i/d)), PE(p, 2i+1) = cos(same).
inline Mat sinusoidal_positions(Eigen::Index len, Eigen::Index d) {
  Mat pe(len, d);
  for (Eigen::Index p = 0; p < len; ++p) {
    for (Eigen::Index i = 0; i < d; ++i) {
      const double rate = std::pow(10000.0, static_cast<double>(2 * (i / 2)) / static_cast<double>(d));
      const double a = static_cast<double>(p) / rate;
      pe(p, i) = i % 2 == 0 ? std::sin(a) : std::cos(a);
    }
  }
  return pe;
}

struct NormParams {
  std::size_t gain = 0;
  std::size_t bias = 0;

  static NormParams create(ParamStore& store, const std::string& name, std::size_t d) {
    return {store.add(name + ".gain", Mat::Ones(1, static_cast<Eigen::Index>(d))),
            store.add(name + ".bias", Mat::Zero(1, static_cast<Eigen::Index>(d)))};
  }
};

struct FfnParams {
  LinearParams in;
  LinearParams out;
};

class TransformerModel : public InfillModel {
 public:
  TransformerModel(ModelDims dims, InfillVocab vocab, std::uint64_t seed) : InfillModel(dims, std::move(vocab)) {
    dims_.arch = Arch::kTransformer;
    if (dims_.d_model == 0 || dims_.layers == 0 || dims_.heads == 0 || dims_.d_model % dims_.heads != 0) {
      throw Error(Errc::kInvalidArgument, "TransformerModel: d_model must be a positive multiple of heads");
    }
    Rng rng(seed);
    const std::size_t d = dims_.d_model;
    const std::size_t v = vocab_.size();
    const double emb_sd = 1.0 / std::sqrt(static_cast<double>(d));
    src_embedding_ = params_.add("src_embedding", normal_init(v, d, emb_sd, rng));
    tgt_embedding_ = params_.add("tgt_embedding", normal_init(v, d, emb_sd, rng));
    for (std::size_t l = 0; l < dims_.layers; ++l) {
      const std::string p = "enc." + std::to_string(l);
      EncLayer e;
      e.self = MhaParams::create(params_, p + ".self", d, rng);
      e.norm1 = NormParams::create(params_, p + ".norm1", d);
      e.ffn = {LinearParams::create(params_, p + ".ffn.in", d, dims_.d_ff, rng),
               LinearParams::create(params_, p + ".ffn.out", dims_.d_ff, d, rng)};
      e.norm2 = NormParams::create(params_, p + ".norm2", d);
      enc_.push_back(e);
    }
    for (std::size_t l = 0; l < dims_.layers; ++l) {
      const std::string p = "dec." + std::to_string(l);
      DecLayer e;
      e.self = MhaParams::create(params_, p + ".self", d, rng);
      e.norm1 = NormParams::create(params_, p + ".norm1", d);
      e.cross = MhaParams::create(params_, p + ".cross", d, rng);
      e.norm2 = NormParams::create(params_, p + ".norm2", d);
      e.ffn = {LinearParams::create(params_, p + ".ffn.in", d, dims_.d_ff, rng),
               LinearParams::create(params_, p + ".ffn.out", dims_.d_ff, d, rng)};
      e.norm3 = NormParams::create(params_, p + ".norm3", d);
      dec_.push_back(e);
    }
    out_ = LinearParams::create(params_, "out", d, v, rng);
  }

  Encoded encode(Tape& tape, const std::vector<int>& src, Rng* rng) override {
    if (src.empty()) throw Error(Errc::kInvalidArgument, "transformer encode: empty input");
    auto x = embed(tape, src_embedding_, src, rng);
    for (const auto& layer : enc_) {
      x = residual_norm(tape, x, multi_head_attention(tape, params_, layer.self, x, x, heads()), layer.norm1, rng);
      x = residual_norm(tape, x, ffn(tape, layer.ffn, x), layer.norm2, rng);
    }
    return {x, {}};
  }

  Tape::Var decode(Tape& tape, const Encoded& enc, const std::vector<int>& tgt_in, Rng* rng) override {
    if (tgt_in.empty()) throw Error(Errc::kInvalidArgument, "transformer decode: empty decoder input");
    const Mat causal = additive_mask(causal_mask(static_cast<Eigen::Index>(tgt_in.size())));
    auto x = embed(tape, tgt_embedding_, tgt_in, rng);
    for (const auto& layer : dec_) {
      x = residual_norm(tape, x, multi_head_attention(tape, params_, layer.self, x, x, heads(), &causal), layer.norm1, rng);
      x = residual_norm(tape, x, multi_head_attention(tape, params_, layer.cross, x, enc.memory, heads()), layer.norm2,
                        rng);
      x = residual_norm(tape, x, ffn(tape, layer.ffn, x), layer.norm3, rng);
    }
    return linear(tape, params_, out_, x);
  }

 private:
  struct EncLayer {
    MhaParams self;
    NormParams norm1;
    FfnParams ffn;
    NormParams norm2;
  };
  struct DecLayer {
    MhaParams self;
    NormParams norm1;
    MhaParams cross;
    NormParams norm2;
    FfnParams ffn;
    NormParams norm3;
  };

  int heads() const { return static_cast<int>(dims_.heads); }

  Tape::Var embed(Tape& tape, std::size_t table, const std::vector<int>& ids, Rng* rng) {
    const auto d = static_cast<Eigen::Index>(dims_.d_model);
    auto x = tape.scale(tape.gather(params_, table, ids), std::sqrt(static_cast<double>(d)));
    x = tape.add_const(x, sinusoidal_positions(static_cast<Eigen::Index>(ids.size()), d));
    return rng ? tape.dropout(x, dims_.dropout, *rng) : x;
  }

  Tape::Var ffn(Tape& tape, const FfnParams& p, Tape::Var x) {
    return linear(tape, params_, p.out, tape.gelu(linear(tape, params_, p.in, x)));
  }

  // LayerNorm(x + Dropout(sub)).
  Tape::Var residual_norm(Tape& tape, Tape::Var x, Tape::Var sub, const NormParams& n, Rng* rng) {
    if (rng) sub = tape.dropout(sub, dims_.dropout, *rng);
    return tape.layer_norm(tape.add(x, sub), tape.param(params_, n.gain), tape.param(params_, n.bias));
  }

  std::size_t src_embedding_ = 0;
  std::size_t tgt_embedding_ = 0;
  std::vector<EncLayer> enc_;
  std::vector<DecLayer> dec_;
  LinearParams out_;
};

}  // namespace stex::nn
