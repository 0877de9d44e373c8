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

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "stex/common.hpp"

namespace stex {

using Tokens = std::vector<std::string>;

inline constexpr std::string_view kMaskToken = "[mask]";

inline bool is_mask(std::string_view token) { return token == kMaskToken; }

inline bool is_word_char(unsigned char c) { return std::isalnum(c) != 0 || c >= 0x80; }

// A token is punctuation when it carries no letter, digit or non-ASCII byte.
// The mask marker is neither punctuation nor a word.
inline bool is_punct_token(std::string_view token) {
  if (token.empty() || is_mask(token)) return false;
  return std::none_of(token.begin(), token.end(),
                      [](char c) { return is_word_char(static_cast<unsigned char>(c)); });
}

inline bool is_word_token(std::string_view token) { return !token.empty() && !is_mask(token) && !is_punct_token(token); }

inline std::size_t count_words(const Tokens& tokens) {
  return static_cast<std::size_t>(std::count_if(tokens.begin(), tokens.end(),
                                                [](const std::string& t) { return is_word_token(t); }));
}

inline std::string join(const Tokens& tokens, std::string_view sep = " ") {
  std::string out;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (i > 0) out += sep;
    out += tokens[i];
  }
  return out;
}

inline Tokens split_ws(std::string_view text) {
  Tokens out;
  std::size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && std::isspace(static_cast<unsigned char>(text[i]))) ++i;
    std::size_t j = i;
    while (j < text.size() && !std::isspace(static_cast<unsigned char>(text[j]))) ++j;
    if (j > i) out.emplace_back(text.substr(i, j - i));
    i = j;
  }
  return out;
}

inline std::vector<std::string> split_on(std::string_view text, char sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = text.find(sep, start);
    if (pos == std::string_view::npos) {
      out.emplace_back(text.substr(start));
      return out;
    }
    out.emplace_back(text.substr(start, pos - start));
    start = pos + 1;
  }
}

inline std::string trim(std::string_view s) {
  std::size_t b = 0;
  std::size_t e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return std::string(s.substr(b, e - b));
}

// Collapses every maximal run of mask tokens into one.
inline Tokens merge_masks(const Tokens& tokens) {
  Tokens out;
  out.reserve(tokens.size());
  for (const auto& t : tokens) {
    if (is_mask(t) && !out.empty() && is_mask(out.back())) continue;
    out.push_back(t);
  }
  return out;
}

// Finds `needle` as a contiguous token run in `hay`; returns hay.size() if absent.
inline std::size_t find_run(const Tokens& hay, const Tokens& needle) {
  if (needle.empty() || needle.size() > hay.size()) return hay.size();
  for (std::size_t i = 0; i + needle.size() <= hay.size(); ++i) {
    if (std::equal(needle.begin(), needle.end(), hay.begin() + static_cast<std::ptrdiff_t>(i))) return i;
  }
  return hay.size();
}

inline std::vector<std::string> read_lines(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::kIo, "cannot open " + path);
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(std::move(line));
  }
  if (in.bad()) throw Error(Errc::kIo, "read failure on " + path);
  return lines;
}

inline void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(Errc::kIo, "cannot write " + path);
  out << content;
  if (!out) throw Error(Errc::kIo, "write failure on " + path);
}

// Shortest text that parses back to exactly `v`.
inline std::string format_double(double v) {
  char buf[32];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

inline double parse_double(const std::string& s) {
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(s, &used);
  } catch (const std::exception&) {
    throw Error(Errc::kParse, "not a number: '" + s + "'");
  }
  if (used != s.size()) throw Error(Errc::kParse, "not a number: '" + s + "'");
  return v;
}

inline long long parse_int(const std::string& s) {
  std::size_t used = 0;
  long long v = 0;
  try {
    v = std::stoll(s, &used);
  } catch (const std::exception&) {
    throw Error(Errc::kParse, "not an integer: '" + s + "'");
  }
  if (used != s.size()) throw Error(Errc::kParse, "not an integer: '" + s + "'");
  return v;
}

}  // namespace stex
