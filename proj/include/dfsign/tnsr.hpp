// dfsign/tnsr.hpp

// Copyright 2026 The dfsign Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// THIS CODE IS PROVIDED *AS IS* BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY
// KIND, EITHER EXPRESS OR IMPLIED, INCLUDING WITHOUT LIMITATION ANY IMPLIED
// WARRANTIES OR CONDITIONS OF TITLE, FITNESS FOR A PARTICULAR PURPOSE,
// MERCHANTABLITY OR NON-INFRINGEMENT.
// See the Apache 2 License for the specific language governing permissions and
// limitations under the License.

// TNSR container: "TNSR" | version 0x01 | dtype 0x01 (float32 LE) | rank |
// rank x uint32 LE dims | row-major float32 LE payload.

#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "dfsign/error.hpp"
#include "dfsign/tensor.hpp"

namespace dfsign::tnsr {

inline constexpr char kMagic[4] = {'T', 'N', 'S', 'R'};
inline constexpr std::uint8_t kVersion = 0x01;
inline constexpr std::uint8_t kDtypeF32 = 0x01;

namespace detail {

inline void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(char((v >> (8 * i)) & 0xffu));
}

inline std::uint32_t get_u32(const unsigned char* p) {
  return std::uint32_t(p[0]) | std::uint32_t(p[1]) << 8 | std::uint32_t(p[2]) << 16 |
         std::uint32_t(p[3]) << 24;
}

}  // namespace detail

inline std::string encode(const Tensor& t) {
  if (t.rank() > 255) throw ShapeError("TNSR: rank exceeds 255");
  std::string out(kMagic, 4);
  out.push_back(char(kVersion));
  out.push_back(char(kDtypeF32));
  out.push_back(char(t.rank()));
  for (auto d : t.shape()) {
    if (d > 0xffffffffu) throw ShapeError("TNSR: dimension exceeds uint32");
    detail::put_u32(out, std::uint32_t(d));
  }
  out.reserve(out.size() + 4 * t.size());
  for (float v : t.storage()) detail::put_u32(out, std::bit_cast<std::uint32_t>(v));
  return out;
}

inline Tensor decode(const std::string& bytes) {
  const auto* p = reinterpret_cast<const unsigned char*>(bytes.data());
  if (bytes.size() < 7 || std::memcmp(p, kMagic, 4) != 0)
    throw DataError("TNSR: bad magic");
  if (p[4] != kVersion) throw DataError("TNSR: unsupported version " + std::to_string(p[4]));
  if (p[5] != kDtypeF32) throw DataError("TNSR: unsupported dtype " + std::to_string(p[5]));
  const std::size_t rank = p[6];
  if (bytes.size() < 7 + 4 * rank) throw DataError("TNSR: truncated header");
  Shape shape(rank);
  for (std::size_t i = 0; i < rank; ++i) {
    shape[i] = detail::get_u32(p + 7 + 4 * i);
    if (shape[i] == 0) throw DataError("TNSR: zero dimension");
  }
  const std::size_t n = shape_numel(shape), off = 7 + 4 * rank;
  if (bytes.size() != off + 4 * n)
    throw DataError("TNSR: payload is " + std::to_string(bytes.size() - off) + " bytes, expected " +
                    std::to_string(4 * n));
  std::vector<float> data(n);
  for (std::size_t i = 0; i < n; ++i) data[i] = std::bit_cast<float>(detail::get_u32(p + off + 4 * i));
  return Tensor(std::move(shape), std::move(data));
}

inline void write(const std::filesystem::path& path, const Tensor& t) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open " + path.string() + " for writing");
  const auto bytes = encode(t);
  f.write(bytes.data(), std::streamsize(bytes.size()));
  if (!f) throw IoError("write failed: " + path.string());
}

inline Tensor read(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open " + path.string());
  std::ostringstream ss;
  ss << f.rdbuf();
  return decode(ss.str());
}

}  // namespace dfsign::tnsr
