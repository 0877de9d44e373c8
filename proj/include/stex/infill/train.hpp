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

// Loss, Adam training, teacher-forced accuracy and finite-difference
// gradient checking for infiller models.

#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "stex/corpus.hpp"
#include "stex/infill/gru.hpp"
#include "stex/infill/model.hpp"
#include "stex/infill/transformer.hpp"

namespace stex::nn {

inline std::unique_ptr<InfillModel> make_model(const ModelDims& dims, InfillVocab vocab, std::uint64_t seed) {
  if (dims.arch == Arch::kGruAttn) return std::make_unique<GruAttnModel>(dims, std::move(vocab), seed);
  return std::make_unique<TransformerModel>(dims, std::move(vocab), seed);
}

// One training example as ids: decoder input <sos>+target, output target+<eos>.
struct EncodedPair {
  std::vector<int> src;
  std::vector<int> tgt_in;
  std::vector<int> tgt_out;
};

inline EncodedPair encode_pair(const InfillVocab& vocab, const Tokens& input, const Tokens& target) {
  if (input.empty()) throw Error(Errc::kInvalidArgument, "infill: empty input");
  if (target.empty()) throw Error(Errc::kInvalidArgument, "infill: empty target");
  EncodedPair p;
  p.src = vocab.encode(input);
  const auto t = vocab.encode(target);
  p.tgt_in.push_back(kSosId);
  p.tgt_in.insert(p.tgt_in.end(), t.begin(), t.end());
  p.tgt_out = t;
  p.tgt_out.push_back(kEosId);
  return p;
}

struct LossResult {
  double loss = 0.0;
  Mat logits;  // (|target| + 1) x |V|
};

// Teacher-forced mean token cross-entropy of the full target, dropout off.
inline LossResult forward_loss(InfillModel& model, const Tokens& masked_input, const Tokens& target) {
  const auto p = encode_pair(model.vocab(), masked_input, target);
  Tape tape(false);
  const auto z = model.logits(tape, p.src, p.tgt_in, nullptr);
  const auto loss = tape.cross_entropy(z, p.tgt_out);
  return {tape.value(loss)(0, 0), tape.value(z)};
}

enum class LrSchedule { kFixed, kNoam };

// lr = factor * d^-0.5 * min(step^-0.5, step * warmup^-1.5), step from 1.
inline double noam_lr(std::size_t step, std::size_t d_model, std::size_t warmup, double factor = 1.0) {
  const double s = static_cast<double>(std::max<std::size_t>(step, 1));
  const double w = static_cast<double>(std::max<std::size_t>(warmup, 1));
  return factor * std::pow(static_cast<double>(d_model), -0.5) * std::min(std::pow(s, -0.5), s * std::pow(w, -1.5));
}

struct TrainConfig {
  double lr0 = 1e-4;
  double dropout = 0.1;
  std::size_t batch = 64;
  bool batch_in_tokens = false;  // batch counts target tokens instead of sequences
  std::size_t epochs = 10;
  double teacher_forcing = 1.0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  LrSchedule schedule = LrSchedule::kFixed;
  std::size_t warmup_steps = 200;
  double factor = 1.0;
  double clip_norm = 0.0;  // 0 disables clipping
  std::uint64_t seed = 1;
  // Early stop once teacher-forced accuracy reaches this (0 disables),
  // checked every `check_every` epochs.
  double target_accuracy = 0.0;
  std::size_t check_every = 10;
  std::function<void(std::size_t epoch, double loss)> on_epoch;  // 1-based epoch

  static TrainConfig gru_defaults() { return {}; }

  static TrainConfig transformer_defaults() {
    TrainConfig c;
    c.lr0 = 0.0;
    c.batch = 512;
    c.batch_in_tokens = true;
    c.beta2 = 0.98;
    c.eps = 1e-9;
    c.schedule = LrSchedule::kNoam;
    c.warmup_steps = 200;
    return c;
  }

  static TrainConfig transformer_full() {
    TrainConfig c = transformer_defaults();
    c.batch = 4096;
    c.warmup_steps = 2000;
    return c;
  }

  void validate() const {
    auto bad = [](const std::string& why) { return Error(Errc::kInvalidArgument, "TrainConfig: " + why); };
    if (schedule == LrSchedule::kFixed && !(lr0 > 0.0)) throw bad("lr0 must be positive");
    if (schedule == LrSchedule::kNoam && !(factor > 0.0)) throw bad("factor must be positive");
    if (!(dropout >= 0.0 && dropout < 1.0)) throw bad("dropout must lie in [0,1)");
    if (batch == 0) throw bad("batch must be positive");
    if (!(teacher_forcing >= 0.0 && teacher_forcing <= 1.0)) throw bad("teacher_forcing must lie in [0,1]");
    if (!(beta1 >= 0.0 && beta1 < 1.0 && beta2 >= 0.0 && beta2 < 1.0 && eps > 0.0)) throw bad("bad Adam constants");
    if (warmup_steps == 0) throw bad("warmup_steps must be positive");
    if (check_every == 0) throw bad("check_every must be positive");
  }
};

class Adam {
 public:
  Adam(const ParamStore& store, double beta1, double beta2, double eps) : b1_(beta1), b2_(beta2), eps_(eps) {
    for (const auto& p : store.all()) {
      m_.push_back(Mat::Zero(p.value.rows(), p.value.cols()));
      v_.push_back(Mat::Zero(p.value.rows(), p.value.cols()));
    }
  }

  std::size_t steps() const { return t_; }

  // Applies grad * grad_scale with bias-corrected moments.
  void step(ParamStore& store, double lr, double grad_scale) {
    ++t_;
    const double c1 = 1.0 - std::pow(b1_, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(b2_, static_cast<double>(t_));
    for (std::size_t i = 0; i < store.size(); ++i) {
      auto& p = store[i];
      const Mat g = p.grad * grad_scale;
      m_[i] = b1_ * m_[i] + (1.0 - b1_) * g;
      v_[i] = b2_ * v_[i] + (1.0 - b2_) * g.cwiseProduct(g);
      p.value.array() -= lr * (m_[i].array() / c1) / ((v_[i].array() / c2).sqrt() + eps_);
    }
  }

 private:
  double b1_, b2_, eps_;
  std::size_t t_ = 0;
  std::vector<Mat> m_, v_;
};

// No-grad greedy predictions used as decoder inputs when teacher forcing is
// skipped: input k is <sos> followed by the model's own first k-1 outputs.
inline std::vector<int> free_running_inputs(InfillModel& model, const EncodedPair& p) {
  Tape tape(false);
  const auto enc = model.encode(tape, p.src, nullptr);
  const std::size_t mark = tape.size();
  std::vector<int> in = {kSosId};
  while (in.size() < p.tgt_in.size()) {
    const auto z = model.decode(tape, enc, in, nullptr);
    Eigen::Index best = 0;
    tape.value(z).row(tape.value(z).rows() - 1).maxCoeff(&best);
    tape.truncate(mark);
    in.push_back(static_cast<int>(best));
  }
  return in;
}

// Fraction of target positions (end token included) whose teacher-forced
// argmax equals the reference.
inline double teacher_forced_accuracy(InfillModel& model, const std::vector<MaskedPair>& pairs) {
  std::size_t right = 0;
  std::size_t total = 0;
  for (const auto& pair : pairs) {
    const auto p = encode_pair(model.vocab(), pair.input.tokens, pair.target.tokens);
    Tape tape(false);
    const Mat& z = tape.value(model.logits(tape, p.src, p.tgt_in, nullptr));
    for (Eigen::Index t = 0; t < z.rows(); ++t) {
      Eigen::Index best = 0;
      z.row(t).maxCoeff(&best);
      if (static_cast<int>(best) == p.tgt_out[static_cast<std::size_t>(t)]) ++right;
      ++total;
    }
  }
  return total == 0 ? 0.0 : static_cast<double>(right) / static_cast<double>(total);
}

struct TrainResult {
  std::vector<double> epoch_loss;  // mean per-sequence loss of each epoch
  std::size_t steps = 0;
  double final_accuracy = -1.0;  // set when early stopping is enabled
};

inline TrainResult train(InfillModel& model, const std::vector<MaskedPair>& pairs, const TrainConfig& cfg) {
  cfg.validate();
  if (pairs.empty()) throw Error(Errc::kInvalidArgument, "train: no training pairs");
  std::vector<EncodedPair> data;
  data.reserve(pairs.size());
  for (const auto& p : pairs) data.push_back(encode_pair(model.vocab(), p.input.tokens, p.target.tokens));

  model.set_dropout(cfg.dropout);
  Rng rng(cfg.seed);
  Rng* drop_rng = cfg.dropout > 0.0 ? &rng : nullptr;
  auto& store = model.params();
  Adam adam(store, cfg.beta1, cfg.beta2, cfg.eps);
  TrainResult result;
  std::vector<std::size_t> order(data.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

  auto apply = [&](std::size_t nseq) {
    const double scale = 1.0 / static_cast<double>(nseq);
    if (cfg.clip_norm > 0.0) {
      double sq = 0.0;
      for (const auto& p : store.all()) sq += p.grad.squaredNorm();
      const double norm = std::sqrt(sq) * scale;
      if (norm > cfg.clip_norm) {
        for (auto& p : store.all()) p.grad *= cfg.clip_norm / norm;
      }
    }
    const double lr = cfg.schedule == LrSchedule::kNoam
                          ? noam_lr(adam.steps() + 1, model.dims().width(), cfg.warmup_steps, cfg.factor)
                          : cfg.lr0;
    adam.step(store, lr, scale);
    store.zero_grad();
    if (!store.all_finite()) {
      throw Error(Errc::kDiverged, "train: non-finite parameter after step " + std::to_string(adam.steps()));
    }
  };

  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    rng.shuffle(order);
    store.zero_grad();
    std::size_t nseq = 0;
    std::size_t ntok = 0;
    double sum = 0.0;
    for (std::size_t k = 0; k < order.size(); ++k) {
      const auto& p = data[order[k]];
      const bool forced = cfg.teacher_forcing >= 1.0 || rng.uniform() < cfg.teacher_forcing;
      const std::vector<int> in = forced ? p.tgt_in : free_running_inputs(model, p);
      Tape tape(true);
      const auto loss = tape.cross_entropy(model.logits(tape, p.src, in, drop_rng), p.tgt_out);
      const double l = tape.value(loss)(0, 0);
      if (!std::isfinite(l)) {
        throw Error(Errc::kDiverged, "train: loss became " + format_double(l) + " in epoch " + std::to_string(epoch + 1) +
                                         " at step " + std::to_string(adam.steps()));
      }
      tape.backward(loss);
      sum += l;
      ++nseq;
      ntok += p.tgt_out.size();
      const bool full = cfg.batch_in_tokens ? ntok >= cfg.batch : nseq >= cfg.batch;
      if (full || k + 1 == order.size()) {
        apply(nseq);
        nseq = 0;
        ntok = 0;
      }
    }
    result.epoch_loss.push_back(sum / static_cast<double>(order.size()));
    if (cfg.on_epoch) cfg.on_epoch(epoch + 1, result.epoch_loss.back());
    if (cfg.target_accuracy > 0.0 && ((epoch + 1) % cfg.check_every == 0 || epoch + 1 == cfg.epochs)) {
      result.final_accuracy = teacher_forced_accuracy(model, pairs);
      if (result.final_accuracy >= cfg.target_accuracy) break;
    }
  }
  result.steps = adam.steps();
  return result;
}

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::vector<std::pair<std::string, double>> per_param;  // max error per parameter block
  std::size_t checked = 0;
  std::size_t skipped_zero = 0;
};

// Central differences on every parameter entry against the tape's gradient
// of the mean loss over `batch`; dropout is off. Entries where both
// gradients are exactly zero are skipped.
inline GradCheckResult gradient_check(InfillModel& model, const std::vector<MaskedPair>& batch, double eps = 1e-4) {
  if (batch.empty()) throw Error(Errc::kInvalidArgument, "gradient_check: empty batch");
  std::vector<EncodedPair> data;
  for (const auto& p : batch) data.push_back(encode_pair(model.vocab(), p.input.tokens, p.target.tokens));
  auto& store = model.params();
  const double n = static_cast<double>(data.size());

  store.zero_grad();
  for (const auto& p : data) {
    Tape tape(true);
    tape.backward(tape.cross_entropy(model.logits(tape, p.src, p.tgt_in, nullptr), p.tgt_out));
  }
  auto loss = [&] {
    double s = 0.0;
    for (const auto& p : data) {
      Tape tape(false);
      s += tape.value(tape.cross_entropy(model.logits(tape, p.src, p.tgt_in, nullptr), p.tgt_out))(0, 0);
    }
    return s / n;
  };

  GradCheckResult r;
  for (std::size_t i = 0; i < store.size(); ++i) {
    auto& param = store[i];
    double worst = 0.0;
    for (Eigen::Index j = 0; j < param.value.size(); ++j) {
      double& x = param.value.data()[j];
      const double saved = x;
      x = saved + eps;
      const double up = loss();
      x = saved - eps;
      const double down = loss();
      x = saved;
      const double numeric = (up - down) / (2.0 * eps);
      const double analytic = param.grad.data()[j] / n;
      if (numeric == 0.0 && analytic == 0.0) {
        ++r.skipped_zero;
        continue;
      }
      const double rel = std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), 1e-8});
      worst = std::max(worst, rel);
      ++r.checked;
    }
    r.per_param.emplace_back(param.name, worst);
    r.max_rel_error = std::max(r.max_rel_error, worst);
  }
  store.zero_grad();
  return r;
}

}  // namespace stex::nn
