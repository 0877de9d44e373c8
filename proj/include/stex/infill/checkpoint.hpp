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

// Binary checkpoints.
//
//   "STEXCKPT1"
//   u64 manifest length, manifest text ("key=value" lines)
//   per parameter block, in declaration order:
//     u64 name length, name, u64 rows, u64 cols, rows*cols f64 (row-major)
//
// Integers and floats are little-endian. The vocabulary lives next to the
// checkpoint in "<path>.vocab", one token per line; its hash is recorded in
// the manifest and verified on load.

#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <map>
#include <memory>
#include <sstream>
#include <string>

#include "stex/infill/train.hpp"

namespace stex::nn {

inline constexpr std::string_view kCheckpointMagic = "STEXCKPT1";

namespace detail {

inline void put_u64(std::ostream& out, std::uint64_t v) {
  char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xff);
  out.write(b, 8);
}

inline std::uint64_t get_u64(std::istream& in, const std::string& path) {
  unsigned char b[8];
  if (!in.read(reinterpret_cast<char*>(b), 8)) throw Error(Errc::kParse, path + ": truncated checkpoint");
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
  return v;
}

inline std::string get_bytes(std::istream& in, std::uint64_t n, const std::string& path) {
  if (n > (1ULL << 32)) throw Error(Errc::kParse, path + ": implausible block length");
  std::string s(n, '\0');
  if (n > 0 && !in.read(s.data(), static_cast<std::streamsize>(n))) throw Error(Errc::kParse, path + ": truncated checkpoint");
  return s;
}

}  // namespace detail

inline std::string checkpoint_manifest(const InfillModel& model) {
  const auto& d = model.dims();
  std::ostringstream m;
  m << "arch=" << arch_name(d.arch) << '\n'
    << "d_model=" << d.d_model << '\n'
    << "layers=" << d.layers << '\n'
    << "heads=" << d.heads << '\n'
    << "d_ff=" << d.d_ff << '\n'
    << "hidden=" << d.hidden << '\n'
    << "dropout=" << format_double(d.dropout) << '\n'
    << "vocab_size=" << model.vocab().size() << '\n'
    << "vocab_hash=" << model.vocab().hash() << '\n'
    << "blocks=" << model.params().size() << '\n';
  return m.str();
}

inline void save_checkpoint(const InfillModel& model, const std::string& path) {
  {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(Errc::kIo, "cannot write " + path);
    out.write(kCheckpointMagic.data(), static_cast<std::streamsize>(kCheckpointMagic.size()));
    const std::string manifest = checkpoint_manifest(model);
    detail::put_u64(out, manifest.size());
    out.write(manifest.data(), static_cast<std::streamsize>(manifest.size()));
    for (const auto& p : model.params().all()) {
      detail::put_u64(out, p.name.size());
      out.write(p.name.data(), static_cast<std::streamsize>(p.name.size()));
      detail::put_u64(out, static_cast<std::uint64_t>(p.value.rows()));
      detail::put_u64(out, static_cast<std::uint64_t>(p.value.cols()));
      for (Eigen::Index r = 0; r < p.value.rows(); ++r) {
        for (Eigen::Index c = 0; c < p.value.cols(); ++c) detail::put_u64(out, std::bit_cast<std::uint64_t>(p.value(r, c)));
      }
    }
    if (!out) throw Error(Errc::kIo, "write failed for " + path);
  }
  write_text_file(path + ".vocab", join(model.vocab().tokens(), "\n") + "\n");
}

inline std::unique_ptr<InfillModel> load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::kIo, "cannot open " + path);
  if (detail::get_bytes(in, kCheckpointMagic.size(), path) != kCheckpointMagic) {
    throw Error(Errc::kParse, path + ": not a stex checkpoint (bad magic)");
  }
  const std::string manifest = detail::get_bytes(in, detail::get_u64(in, path), path);
  std::map<std::string, std::string> kv;
  for (const auto& line : split_on(manifest, '\n')) {
    const auto eq = line.find('=');
    if (eq != std::string::npos) kv[line.substr(0, eq)] = line.substr(eq + 1);
  }
  auto field = [&](const std::string& key) -> const std::string& {
    auto it = kv.find(key);
    if (it == kv.end()) throw Error(Errc::kParse, path + ": manifest lacks '" + key + "'");
    return it->second;
  };
  auto size_field = [&](const std::string& key) { return static_cast<std::size_t>(parse_int(field(key))); };

  ModelDims dims;
  dims.arch = parse_arch(field("arch"));
  dims.d_model = size_field("d_model");
  dims.layers = size_field("layers");
  dims.heads = size_field("heads");
  dims.d_ff = size_field("d_ff");
  dims.hidden = size_field("hidden");
  dims.dropout = parse_double(field("dropout"));

  auto lines = read_lines(path + ".vocab");
  while (!lines.empty() && lines.back().empty()) lines.pop_back();
  InfillVocab vocab(std::move(lines));
  if (std::to_string(vocab.hash()) != field("vocab_hash") || std::to_string(vocab.size()) != field("vocab_size")) {
    throw Error(Errc::kVocabMismatch, path + ": vocabulary file does not match the checkpoint");
  }

  auto model = make_model(dims, std::move(vocab), 0);
  auto& store = model->params();
  if (size_field("blocks") != store.size()) throw Error(Errc::kParse, path + ": parameter block count mismatch");
  for (std::size_t i = 0; i < store.size(); ++i) {
    auto& p = store[i];
    const auto name = detail::get_bytes(in, detail::get_u64(in, path), path);
    const auto rows = detail::get_u64(in, path);
    const auto cols = detail::get_u64(in, path);
    if (name != p.name || rows != static_cast<std::uint64_t>(p.value.rows()) ||
        cols != static_cast<std::uint64_t>(p.value.cols())) {
      throw Error(Errc::kParse, path + ": unexpected block '" + name + "'");
    }
    for (Eigen::Index r = 0; r < p.value.rows(); ++r) {
      for (Eigen::Index c = 0; c < p.value.cols(); ++c) p.value(r, c) = std::bit_cast<double>(detail::get_u64(in, path));
    }
  }
  if (!store.all_finite()) throw Error(Errc::kParse, path + ": non-finite parameter");
  return model;
}

}  // namespace stex::nn
