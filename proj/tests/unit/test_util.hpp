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

// Shared helpers for the unit tests.

#pragma once

#include <gtest/gtest.h>

#include <atomic>
#include <filesystem>
#include <string>
#include <vector>

#include "stex/common.hpp"
#include "stex/text.hpp"

namespace stex::testing {

// Fresh directory removed on destruction.
class TempDir {
 public:
  TempDir() {
    static std::atomic<int> counter{0};
    const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
    std::string name = "stex_test";
    if (info) name += std::string("_") + info->test_suite_name() + "_" + info->name();
    for (auto& c : name) {
      if (c == '/') c = '_';
    }
    path_ = std::filesystem::temp_directory_path() / (name + "_" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  std::string file(const std::string& name) const { return (path_ / name).string(); }
  std::string write(const std::string& name, const std::string& body) const {
    const auto p = file(name);
    write_text_file(p, body);
    return p;
  }
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

// Collects warnings for the lifetime of the object.
class WarningCapture {
 public:
  WarningCapture() : saved_(warning_sink()) {
    warning_sink() = [this](const std::string& m) { messages.push_back(m); };
  }
  ~WarningCapture() { warning_sink() = saved_; }
  WarningCapture(const WarningCapture&) = delete;
  WarningCapture& operator=(const WarningCapture&) = delete;

  std::vector<std::string> messages;

 private:
  WarningSink saved_;
};

inline Tokens toks(std::string_view text) { return split_ws(text); }

}  // namespace stex::testing

// Asserts that `stmt` throws stex::Error with the given code.
#define EXPECT_STEX_ERROR(stmt, errc)                                        \
  do {                                                                       \
    try {                                                                    \
      stmt;                                                                  \
      ADD_FAILURE() << "expected " << ::stex::errc_name(errc) << " error";   \
    } catch (const ::stex::Error& e) {                                       \
      EXPECT_EQ(e.code(), errc) << e.what();                                 \
    }                                                                        \
  } while (0)
