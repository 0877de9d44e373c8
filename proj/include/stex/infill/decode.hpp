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

// Greedy infilling. Constrained mode copies every unmasked token in order and
// only generates at mask positions; free mode decodes to the end token.

#pragma once

#include <vector>

#include "stex/infill/model.hpp"
#include "stex/text.hpp"

namespace stex::nn {

enum class InfillMode { kConstrained, kFree };

inline constexpr std::size_t kMaxSpanTokens = 8;

// Next-token distributions for growing prefixes of one source sentence. The
// encoder runs once; the decoder is re-run on each prefix.
class GreedyDecoder {
 public:
  GreedyDecoder(InfillModel& model, const std::vector<int>& src) : model_(model), tape_(false) {
    enc_ = model_.encode(tape_, src, nullptr);
    mark_ = tape_.size();
  }

  Eigen::RowVectorXd next(const std::vector<int>& prefix) {
    const auto z = model_.decode(tape_, enc_, prefix, nullptr);
    const Mat& logits = tape_.value(z);
    Eigen::RowVectorXd probs = Tape::softmax_rows_value(logits.row(logits.rows() - 1)).row(0);
    tape_.truncate(mark_);
    return probs;
  }

 private:
  InfillModel& model_;
  Tape tape_;
  Encoded enc_;
  std::size_t mark_ = 0;
};

inline bool is_special_id(int id) { return id < kNumSpecials; }

// Highest-probability id that is not special and not `exclude`.
inline int best_free_token(const Eigen::RowVectorXd& probs, int exclude) {
  int best = -1;
  for (Eigen::Index i = kNumSpecials; i < probs.size(); ++i) {
    const int id = static_cast<int>(i);
    if (id == exclude) continue;
    if (best < 0 || probs(i) > probs(best)) best = id;
  }
  return best;
}

// The forced token is also the model's top choice, so it may either close the
// span or belong inside it. Append it and check whether the model then
// prefers whatever follows the forced token in the input (another mask
// counts as a close).
inline bool span_ends_here(GreedyDecoder& dec, std::vector<int> prefix, int forced, int after_forced) {
  if (after_forced == kMaskId) return true;
  prefix.push_back(forced);
  const auto probs = dec.next(prefix);
  const int rival = best_free_token(probs, after_forced);
  return rival < 0 || probs(after_forced) >= probs(rival);
}

inline Tokens infill(InfillModel& model, const Tokens& masked, InfillMode mode = InfillMode::kConstrained,
                     std::size_t max_span = kMaxSpanTokens) {
  const Tokens input = merge_masks(masked);
  if (input.empty()) return {};
  const auto& vocab = model.vocab();
  const bool has_mask = std::any_of(input.begin(), input.end(), [](const auto& t) { return is_mask(t); });
  if (mode == InfillMode::kConstrained && !has_mask) return input;

  GreedyDecoder dec(model, vocab.encode(input));
  std::vector<int> prefix = {kSosId};
  Tokens out;

  if (mode == InfillMode::kFree) {
    const std::size_t limit = 2 * input.size() + 8;
    while (out.size() < limit) {
      const auto probs = dec.next(prefix);
      int best = -1;
      for (Eigen::Index i = 0; i < probs.size(); ++i) {
        const int id = static_cast<int>(i);
        if (id == kPadId || id == kSosId || id == kMaskId) continue;
        if (best < 0 || probs(i) > probs(best)) best = id;
      }
      if (best == kEosId) break;
      out.push_back(vocab.token(best));
      prefix.push_back(best);
    }
    return out;
  }

  for (std::size_t i = 0; i < input.size(); ++i) {
    if (!is_mask(input[i])) {
      out.push_back(input[i]);
      prefix.push_back(vocab.id(input[i]));
      continue;
    }
    // The token that must follow this span: the next unmasked token, or the
    // end of the sentence.
    const int forced = i + 1 < input.size() ? vocab.id(input[i + 1]) : kEosId;
    // Every span gets at least one token, then grows until the forced token
    // outscores the best free token or the span cap is hit.
    for (std::size_t generated = 0; generated < max_span; ++generated) {
      const auto probs = dec.next(prefix);
      const int free = best_free_token(probs, -1);
      if (free < 0) break;
      if (generated > 0) {
        if (free != forced) {
          if (probs(forced) > probs(free)) break;
        } else if (span_ends_here(dec, prefix, forced, i + 2 < input.size() ? vocab.id(input[i + 2]) : kEosId)) {
          break;
        }
      }
      out.push_back(vocab.token(free));
      prefix.push_back(free);
    }
  }
  return out;
}

}  // namespace stex::nn
