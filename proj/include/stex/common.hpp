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

#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <iostream>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace stex {

enum class Errc {
  kIo,
  kParse,
  kInvalidArgument,
  kEmptyAfterNormalize,
  kEmptyVocab,
  kCorpusTooSmall,
  kZeroNorm,
  kAllOov,
  kEmptyCandidates,
  kNoOe,
  kOovEntity,
  kRrtUnsatisfiable,
  kDimensionMismatch,
  kDiverged,
  kVocabMismatch,
  kZeroVariance,
};

inline const char* errc_name(Errc code) {
  switch (code) {
    case Errc::kIo: return "io";
    case Errc::kParse: return "parse";
    case Errc::kInvalidArgument: return "invalid-argument";
    case Errc::kEmptyAfterNormalize: return "empty-after-normalize";
    case Errc::kEmptyVocab: return "empty-vocab";
    case Errc::kCorpusTooSmall: return "corpus-too-small";
    case Errc::kZeroNorm: return "zero-norm";
    case Errc::kAllOov: return "all-oov";
    case Errc::kEmptyCandidates: return "empty-candidates";
    case Errc::kNoOe: return "no-oe";
    case Errc::kOovEntity: return "oov-entity";
    case Errc::kRrtUnsatisfiable: return "rrt-unsatisfiable";
    case Errc::kDimensionMismatch: return "dimension-mismatch";
    case Errc::kDiverged: return "diverged";
    case Errc::kVocabMismatch: return "vocab-mismatch";
    case Errc::kZeroVariance: return "zero-variance";
  }
  return "unknown";
}

class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what)
      : std::runtime_error(std::string(errc_name(code)) + ": " + what), code_(code) {}

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

// Warnings go through a replaceable sink so tests can capture them.
using WarningSink = std::function<void(const std::string&)>;

inline WarningSink& warning_sink() {
  static WarningSink sink = [](const std::string& msg) { std::cerr << "warning: " << msg << '\n'; };
  return sink;
}

inline void warn(const std::string& msg) { warning_sink()(msg); }

// Seeded generator used by every stochastic routine. The mapping from raw
// 64-bit draws to indices and reals is done here rather than through the
// standard distributions so sequences do not depend on the library vendor.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next() { return engine_(); }

  // Uniform in [0, 1).
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  // Uniform integer in [0, n).
  std::size_t below(std::size_t n) { return n == 0 ? 0 : static_cast<std::size_t>(engine_() % n); }

  double normal(double mean = 0.0, double stddev = 1.0) {
    if (has_spare_) {
      has_spare_ = false;
      return mean + stddev * spare_;
    }
    double u = 0.0;
    double v = 0.0;
    double s = 0.0;
    do {
      u = 2.0 * uniform() - 1.0;
      v = 2.0 * uniform() - 1.0;
      s = u * u + v * v;
    } while (s >= 1.0 || s == 0.0);
    const double f = std::sqrt(-2.0 * std::log(s) / s);
    spare_ = v * f;
    has_spare_ = true;
    return mean + stddev * u * f;
  }

  template <typename T>
  void shuffle(std::vector<T>& items) {
    for (std::size_t i = items.size(); i > 1; --i) {
      std::swap(items[i - 1], items[below(i)]);
    }
  }

 private:
  std::mt19937_64 engine_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

// Derives an independent stream seed from a base seed and a salt.
inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t salt) {
  std::uint64_t z = base + 0x9e3779b97f4a7c15ULL * (salt + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

inline std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t h = 0xcbf29ce484222325ULL) {
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace stex
