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

// Scaled dot-product, multi-head and Luong dot attention.

#pragma once

#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "stex/infill/tape.hpp"

namespace stex::nn {

// true = blocked.
using Mask = Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic>;

// Position i may only see positions <= i.
inline Mask causal_mask(Eigen::Index n) {
  Mask m(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) m(i, j) = j > i;
  }
  return m;
}

// Blocks every query from attending to padded keys.
inline Mask key_padding_mask(Eigen::Index queries, const std::vector<bool>& key_is_pad) {
  Mask m(queries, static_cast<Eigen::Index>(key_is_pad.size()));
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) m(i, j) = key_is_pad[static_cast<std::size_t>(j)];
  }
  return m;
}

inline Mat additive_mask(const Mask& m) {
  Mat out = Mat::Zero(m.rows(), m.cols());
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      if (m(i, j)) out(i, j) = -std::numeric_limits<double>::infinity();
    }
  }
  return out;
}

// softmax(Q K^T / sqrt(d_k)) V with blocked scores set to -inf first.
inline Mat scaled_dot_attention(const Mat& q, const Mat& k, const Mat& v, const Mask* mask = nullptr,
                                Mat* weights_out = nullptr) {
  if (q.cols() != k.cols() || k.rows() != v.rows()) {
    throw Error(Errc::kDimensionMismatch, "scaled_dot_attention: Q/K/V shapes disagree");
  }
  if (mask && (mask->rows() != q.rows() || mask->cols() != k.rows())) {
    throw Error(Errc::kDimensionMismatch, "scaled_dot_attention: mask shape disagrees");
  }
  Mat scores = (q * k.transpose()) / std::sqrt(static_cast<double>(q.cols()));
  if (mask) scores += additive_mask(*mask);
  Mat w = Tape::softmax_rows_value(scores);
  if (weights_out) *weights_out = w;
  return w * v;
}

// Same computation recorded on a tape.
inline Tape::Var attention(Tape& tape, Tape::Var q, Tape::Var k, Tape::Var v, const Mat* additive = nullptr,
                           Tape::Var* weights_out = nullptr) {
  if (tape.value(q).cols() != tape.value(k).cols() || tape.value(k).rows() != tape.value(v).rows()) {
    throw Error(Errc::kDimensionMismatch, "attention: Q/K/V shapes disagree");
  }
  auto s = tape.scale(tape.matmul_nt(q, k), 1.0 / std::sqrt(static_cast<double>(tape.value(q).cols())));
  if (additive) s = tape.add_const(s, *additive);
  const auto w = tape.softmax_rows(s);
  if (weights_out) *weights_out = w;
  return tape.matmul(w, v);
}

struct LinearParams {
  std::size_t w = 0;
  std::size_t b = 0;
  bool has_bias = true;

  static LinearParams create(ParamStore& store, const std::string& name, std::size_t in, std::size_t out, Rng& rng) {
    LinearParams p;
    p.w = store.add(name + ".w", xavier(in, out, rng));
    p.b = store.add(name + ".b", Mat::Zero(1, static_cast<Eigen::Index>(out)));
    return p;
  }

  static LinearParams create_unbiased(ParamStore& store, const std::string& name, std::size_t in, std::size_t out,
                                      Rng& rng) {
    LinearParams p;
    p.w = store.add(name + ".w", xavier(in, out, rng));
    p.has_bias = false;
    return p;
  }
};

// x W + b
inline Tape::Var linear(Tape& tape, ParamStore& store, const LinearParams& p, Tape::Var x) {
  const auto y = tape.matmul(x, tape.param(store, p.w));
  return p.has_bias ? tape.add_row(y, tape.param(store, p.b)) : y;
}

struct MhaParams {
  LinearParams q, k, v, o;

  static MhaParams create(ParamStore& store, const std::string& name, std::size_t d_model, Rng& rng) {
    MhaParams p;
    p.q = LinearParams::create(store, name + ".q", d_model, d_model, rng);
    // A key bias adds the same amount to every score in a row, which softmax
    // cancels; it would only ever receive a zero gradient.
    p.k = LinearParams::create_unbiased(store, name + ".k", d_model, d_model, rng);
    p.v = LinearParams::create(store, name + ".v", d_model, d_model, rng);
    p.o = LinearParams::create(store, name + ".o", d_model, d_model, rng);
    return p;
  }
};

// Per-head projections of width d_model / heads, attention per head,
// concatenation and an output projection.
inline Tape::Var multi_head_attention(Tape& tape, ParamStore& store, const MhaParams& p, Tape::Var x_q, Tape::Var x_kv,
                                      int heads, const Mat* additive = nullptr) {
  const auto d_model = tape.value(x_q).cols();
  if (heads <= 0 || d_model % heads != 0) {
    throw Error(Errc::kInvalidArgument, "multi_head_attention: d_model " + std::to_string(d_model) +
                                            " is not divisible by heads " + std::to_string(heads));
  }
  if (tape.value(x_kv).cols() != d_model) throw Error(Errc::kDimensionMismatch, "multi_head_attention: width mismatch");
  const auto q = linear(tape, store, p.q, x_q);
  const auto k = linear(tape, store, p.k, x_kv);
  const auto v = linear(tape, store, p.v, x_kv);
  const Eigen::Index dk = d_model / heads;
  std::vector<Tape::Var> outs;
  outs.reserve(static_cast<std::size_t>(heads));
  for (int h = 0; h < heads; ++h) {
    outs.push_back(attention(tape, tape.slice_cols(q, h * dk, dk), tape.slice_cols(k, h * dk, dk),
                             tape.slice_cols(v, h * dk, dk), additive));
  }
  const auto cat = heads == 1 ? outs[0] : tape.concat_cols(outs);
  return linear(tape, store, p.o, cat);
}

// Weights softmax_s(h_t . hbar_s) of one decoder state over encoder states.
inline Eigen::RowVectorXd luong_dot_scores(const Eigen::RowVectorXd& h_t, const Mat& encoder_states) {
  if (h_t.size() != encoder_states.cols()) throw Error(Errc::kDimensionMismatch, "luong_dot_scores: hidden size mismatch");
  if (encoder_states.rows() == 0) throw Error(Errc::kInvalidArgument, "luong_dot_scores: no encoder states");
  const Mat scores = h_t * encoder_states.transpose();
  return Tape::softmax_rows_value(scores).row(0);
}

}  // namespace stex::nn
