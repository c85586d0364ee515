// Copyright 2026 The lsr-code Authors
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

// Little-endian primitive (de)serialization shared by the index and vector
// file formats.

#include <bit>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "lsr/error.hpp"

namespace lsr::detail {

static_assert(std::endian::native == std::endian::little || std::endian::native == std::endian::big);

template <typename T>
T byteswap_if_big(T v) {
  if constexpr (std::endian::native == std::endian::big) {
    unsigned char b[sizeof(T)];
    std::memcpy(b, &v, sizeof(T));
    for (std::size_t i = 0; i < sizeof(T) / 2; ++i) std::swap(b[i], b[sizeof(T) - 1 - i]);
    std::memcpy(&v, b, sizeof(T));
  }
  return v;
}

class BinaryWriter {
 public:
  explicit BinaryWriter(std::ostream& out) : out_(out) {}

  template <typename T>
  void put(T v) {
    v = byteswap_if_big(v);
    out_.write(reinterpret_cast<const char*>(&v), sizeof(T));
  }

  void bytes(std::string_view s) { out_.write(s.data(), static_cast<std::streamsize>(s.size())); }

  void string(const std::string& s) {
    put<std::uint32_t>(static_cast<std::uint32_t>(s.size()));
    bytes(s);
  }

  void check(const char* what) {
    if (!out_) fail(ErrorKind::kIo, std::string("write failed: ") + what);
  }

 private:
  std::ostream& out_;
};

class BinaryReader {
 public:
  BinaryReader(std::istream& in, std::string context, std::uint64_t base_offset = 0)
      : in_(in), context_(std::move(context)), offset_(base_offset) {}

  template <typename T>
  T get(const char* field) {
    T v;
    raw(reinterpret_cast<char*>(&v), sizeof(T), field);
    return byteswap_if_big(v);
  }

  template <typename T>
  void array(std::span<T> dst, const char* field) {
    raw(reinterpret_cast<char*>(dst.data()), dst.size_bytes(), field);
    if constexpr (std::endian::native == std::endian::big) {
      for (auto& v : dst) v = byteswap_if_big(v);
    }
  }

  std::string string(const char* field, std::uint32_t max_len = 1u << 20) {
    const auto len = get<std::uint32_t>(field);
    if (len > max_len) fail(ErrorKind::kFormat, context_ + ": implausible length for " + field + at());
    std::string s(len, '\0');
    raw(s.data(), len, field);
    return s;
  }

  void raw(char* dst, std::size_t n, const char* field) {
    in_.read(dst, static_cast<std::streamsize>(n));
    const auto got = static_cast<std::size_t>(in_.gcount());
    offset_ += got;
    if (got != n) {
      if (in_.bad()) fail(ErrorKind::kIo, context_ + ": read error in " + field + at());
      fail(ErrorKind::kTruncated, context_ + ": unexpected end of file in " + field + at());
    }
  }

  /// True when the stream has no more bytes.
  bool at_eof() { return in_.peek() == std::char_traits<char>::eof(); }

  std::uint64_t offset() const noexcept { return offset_; }
  std::string at() const { return " at byte offset " + std::to_string(offset_); }
  const std::string& context() const noexcept { return context_; }

 private:
  std::istream& in_;
  std::string context_;
  std::uint64_t offset_ = 0;
};

}  // namespace lsr::detail
