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

// Bidirectional GRU encoder with a GRU decoder and Luong dot attention.
//
// Cell, gates stacked as [r z n]:
//   r = sig(x W_ir + b_ir + h W_hr + b_hr)
//   z = sig(x W_iz + b_iz + h W_hz + b_hz)
//   n = tanh(x W_in + b_in + r * (h W_hn + b_hn))
//   h' = (1 - z) * n + z * h

#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "stex/infill/attention.hpp"
#include "stex/infill/model.hpp"

namespace stex::nn {

struct GruCellParams {
  std::size_t w_ih = 0;
  std::size_t b_ih = 0;
  std::size_t w_hh = 0;
  std::size_t b_hh = 0;

  static GruCellParams create(ParamStore& store, const std::string& name, std::size_t in, std::size_t hidden, Rng& rng) {
    const double a = 1.0 / std::sqrt(static_cast<double>(hidden));
    GruCellParams p;
    p.w_ih = store.add(name + ".w_ih", uniform_init(in, 3 * hidden, a, rng));
    p.b_ih = store.add(name + ".b_ih", uniform_init(1, 3 * hidden, a, rng));
    p.w_hh = store.add(name + ".w_hh", uniform_init(hidden, 3 * hidden, a, rng));
    p.b_hh = store.add(name + ".b_hh", uniform_init(1, 3 * hidden, a, rng));
    return p;
  }
};

// Runs one direction over every row of x; returns the state after each
// position, indexed by position.
inline std::vector<Tape::Var> run_gru(Tape& tape, ParamStore& store, const GruCellParams& p, Tape::Var x, Tape::Var h0,
                                      bool reverse) {
  const Eigen::Index len = tape.value(x).rows();
  const Eigen::Index hid = tape.value(h0).cols();
  const auto gx = tape.add_row(tape.matmul(x, tape.param(store, p.w_ih)), tape.param(store, p.b_ih));
  const auto w_hh = tape.param(store, p.w_hh);
  const auto b_hh = tape.param(store, p.b_hh);
  std::vector<Tape::Var> out(static_cast<std::size_t>(len));
  auto h = h0;
  for (Eigen::Index s = 0; s < len; ++s) {
    const Eigen::Index t = reverse ? len - 1 - s : s;
    const auto xt = tape.slice_rows(gx, t, 1);
    const auto gh = tape.add_row(tape.matmul(h, w_hh), b_hh);
    const auto rz = tape.sigmoid(tape.add(tape.slice_cols(xt, 0, 2 * hid), tape.slice_cols(gh, 0, 2 * hid)));
    const auto r = tape.slice_cols(rz, 0, hid);
    const auto z = tape.slice_cols(rz, hid, hid);
    const auto n = tape.tanh(tape.add(tape.slice_cols(xt, 2 * hid, hid), tape.mul(r, tape.slice_cols(gh, 2 * hid, hid))));
    h = tape.add(n, tape.mul(z, tape.sub(h, n)));
    out[static_cast<std::size_t>(t)] = h;
  }
  return out;
}

class GruAttnModel : public InfillModel {
 public:
  GruAttnModel(ModelDims dims, InfillVocab vocab, std::uint64_t seed) : InfillModel(dims, std::move(vocab)) {
    dims_.arch = Arch::kGruAttn;
    if (dims_.hidden == 0 || dims_.layers == 0) throw Error(Errc::kInvalidArgument, "GruAttnModel: zero dims");
    Rng rng(seed);
    const std::size_t h = dims_.hidden;
    const std::size_t v = vocab_.size();
    embedding_ = params_.add("embedding", normal_init(v, h, 1.0, rng));
    for (std::size_t l = 0; l < dims_.layers; ++l) {
      const std::size_t in = l == 0 ? h : 2 * h;
      enc_fwd_.push_back(GruCellParams::create(params_, "enc." + std::to_string(l) + ".fwd", in, h, rng));
      enc_bwd_.push_back(GruCellParams::create(params_, "enc." + std::to_string(l) + ".bwd", in, h, rng));
    }
    for (std::size_t l = 0; l < dims_.layers; ++l) {
      dec_.push_back(GruCellParams::create(params_, "dec." + std::to_string(l), h, h, rng));
    }
    concat_ = LinearParams::create(params_, "attn.concat", 2 * h, h, rng);
    out_ = LinearParams::create(params_, "out", h, v, rng);
  }

  // Makes both directions of every encoder layer share one set of weights.
  void tie_encoder_directions() {
    for (std::size_t l = 0; l < dims_.layers; ++l) {
      params_[enc_bwd_[l].w_ih].value = params_[enc_fwd_[l].w_ih].value;
      params_[enc_bwd_[l].b_ih].value = params_[enc_fwd_[l].b_ih].value;
      params_[enc_bwd_[l].w_hh].value = params_[enc_fwd_[l].w_hh].value;
      params_[enc_bwd_[l].b_hh].value = params_[enc_fwd_[l].b_hh].value;
    }
  }

  // memory: per-position sum of the top layer's two directions. state: per
  // layer, forward final state + backward final state.
  Encoded encode(Tape& tape, const std::vector<int>& src, Rng* rng) override {
    if (src.empty()) throw Error(Errc::kInvalidArgument, "encode_bigru: empty input");
    const auto h = static_cast<Eigen::Index>(dims_.hidden);
    auto x = tape.gather(params_, embedding_, src);
    if (rng) x = tape.dropout(x, dims_.dropout, *rng);
    const auto zero = tape.constant(Mat::Zero(1, h));
    Encoded enc;
    std::vector<Tape::Var> fwd;
    std::vector<Tape::Var> bwd;
    for (std::size_t l = 0; l < dims_.layers; ++l) {
      fwd = run_gru(tape, params_, enc_fwd_[l], x, zero, false);
      bwd = run_gru(tape, params_, enc_bwd_[l], x, zero, true);
      enc.state.push_back(tape.add(fwd.back(), bwd.front()));
      if (l + 1 < dims_.layers) {
        x = tape.concat_cols({tape.concat_rows(fwd), tape.concat_rows(bwd)});
        if (rng) x = tape.dropout(x, dims_.dropout, *rng);
      }
    }
    enc.memory = tape.add(tape.concat_rows(fwd), tape.concat_rows(bwd));
    return enc;
  }

  Tape::Var decode(Tape& tape, const Encoded& enc, const std::vector<int>& tgt_in, Rng* rng) override {
    if (tgt_in.empty()) throw Error(Errc::kInvalidArgument, "decode: empty decoder input");
    auto x = tape.gather(params_, embedding_, tgt_in);
    if (rng) x = tape.dropout(x, dims_.dropout, *rng);
    for (std::size_t l = 0; l < dims_.layers; ++l) {
      x = tape.concat_rows(run_gru(tape, params_, dec_[l], x, enc.state[l], false));
      if (rng && l + 1 < dims_.layers) x = tape.dropout(x, dims_.dropout, *rng);
    }
    // Luong dot attention, no input feeding: every step attends independently.
    const auto weights = tape.softmax_rows(tape.matmul_nt(x, enc.memory));
    const auto context = tape.matmul(weights, enc.memory);
    const auto attn = tape.tanh(linear(tape, params_, concat_, tape.concat_cols({x, context})));
    return linear(tape, params_, out_, attn);
  }

 private:
  std::size_t embedding_ = 0;
  std::vector<GruCellParams> enc_fwd_;
  std::vector<GruCellParams> enc_bwd_;
  std::vector<GruCellParams> dec_;
  LinearParams concat_;
  LinearParams out_;
};

// Encoder states (L x hidden) of a GRU model for a token sequence; OOV
// tokens map to <unk>.
inline Mat encode_bigru(GruAttnModel& model, const Tokens& tokens) {
  Tape tape(false);
  const auto enc = model.encode(tape, model.vocab().encode(tokens), nullptr);
  return tape.value(enc.memory);
}

}  // namespace stex::nn
