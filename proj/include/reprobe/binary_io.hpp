// Copyright 2026 The reprobe Authors
// SPDX-License-Identifier: Apache-2.0
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <zlib.h>

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "reprobe/error.hpp"

namespace reprobe {

static_assert(std::endian::native == std::endian::little,
              "binary formats are written with native little-endian stores");

inline std::uint32_t crc32(std::string_view bytes) {
  uLong crc = ::crc32(0L, Z_NULL, 0);
  // zlib takes uInt lengths; feed large buffers in chunks.
  std::size_t offset = 0;
  while (offset < bytes.size()) {
    const std::size_t chunk = std::min<std::size_t>(bytes.size() - offset, 1u << 30);
    crc = ::crc32(crc, reinterpret_cast<const Bytef*>(bytes.data() + offset),
                  static_cast<uInt>(chunk));
    offset += chunk;
  }
  return static_cast<std::uint32_t>(crc);
}

class ByteWriter {
 public:
  void magic(std::string_view tag) { buf_.append(tag); }

  template <typename T>
  void put(T value) {
    static_assert(std::is_trivially_copyable_v<T>);
    char raw[sizeof(T)];
    std::memcpy(raw, &value, sizeof(T));
    buf_.append(raw, sizeof(T));
  }

  void put_f32(std::span<const float> values) {
    buf_.append(reinterpret_cast<const char*>(values.data()), values.size_bytes());
  }

  /// Appends the CRC-32 of everything written so far.
  void seal() { put<std::uint32_t>(crc32(buf_)); }

  const std::string& bytes() const { return buf_; }
  std::string take() { return std::move(buf_); }

 private:
  std::string buf_;
};

/// Bounds-checked reader; any overrun is a SchemaError.
class ByteReader {
 public:
  explicit ByteReader(std::string_view bytes) : bytes_(bytes) {}

  void expect_magic(std::string_view tag) {
    need(tag.size());
    if (bytes_.substr(pos_, tag.size()) != tag) fail(Errc::SchemaError, "bad magic, expected " + std::string(tag));
    pos_ += tag.size();
  }

  template <typename T>
  T get() {
    need(sizeof(T));
    T value;
    std::memcpy(&value, bytes_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return value;
  }

  std::vector<float> get_f32(std::size_t count) {
    if (count > remaining() / sizeof(float)) fail(Errc::SchemaError, "truncated tensor data");
    std::vector<float> out(count);
    std::memcpy(out.data(), bytes_.data() + pos_, count * sizeof(float));
    pos_ += count * sizeof(float);
    return out;
  }

  std::size_t remaining() const { return bytes_.size() - pos_; }
  std::size_t position() const { return pos_; }

 private:
  void need(std::size_t n) const {
    if (n > remaining()) fail(Errc::SchemaError, "unexpected end of data");
  }

  std::string_view bytes_;
  std::size_t pos_ = 0;
};

/// Verifies and strips a trailing CRC-32. Returns the payload view.
inline std::string_view check_crc_trailer(std::string_view bytes) {
  if (bytes.size() < 4) fail(Errc::SchemaError, "file too short for checksum trailer");
  const std::string_view payload = bytes.substr(0, bytes.size() - 4);
  std::uint32_t stored;
  std::memcpy(&stored, bytes.data() + payload.size(), 4);
  if (stored != crc32(payload)) fail(Errc::ChecksumError, "checksum mismatch");
  return payload;
}

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(Errc::IoError, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return std::move(ss).str();
}

inline void write_file(const std::filesystem::path& path, std::string_view bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(Errc::IoError, "cannot write " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) fail(Errc::IoError, "short write to " + path.string());
}

/// Stages several files and publishes them together: each is written to a
/// temporary sibling and renamed only in commit(). Nothing is visible if the
/// owner is destroyed before commit().
class AtomicOutputs {
 public:
  explicit AtomicOutputs(std::filesystem::path dir) : dir_(std::move(dir)) {}
  AtomicOutputs(const AtomicOutputs&) = delete;
  AtomicOutputs& operator=(const AtomicOutputs&) = delete;

  ~AtomicOutputs() {
    if (committed_) return;
    std::error_code ec;
    for (const auto& [tmp, final_path] : staged_) std::filesystem::remove(tmp, ec);
  }

  void add(const std::string& name, std::string_view bytes) {
    std::filesystem::create_directories(dir_);
    const auto final_path = dir_ / name;
    const auto tmp = dir_ / ("." + name + ".tmp");
    write_file(tmp, bytes);
    staged_.emplace_back(tmp, final_path);
  }

  void commit() {
    for (const auto& [tmp, final_path] : staged_) {
      std::error_code ec;
      std::filesystem::rename(tmp, final_path, ec);
      if (ec) fail(Errc::IoError, "cannot publish " + final_path.string() + ": " + ec.message());
    }
    committed_ = true;
  }

  std::vector<std::string> names() const {
    std::vector<std::string> out;
    for (const auto& [tmp, final_path] : staged_) out.push_back(final_path.filename().string());
    return out;
  }

 private:
  std::filesystem::path dir_;
  std::vector<std::pair<std::filesystem::path, std::filesystem::path>> staged_;
  bool committed_ = false;
};

}  // namespace reprobe
