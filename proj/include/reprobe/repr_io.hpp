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

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "reprobe/binary_io.hpp"
#include "reprobe/error.hpp"

namespace reprobe {

/// One last-token hidden state with its label and CoT stage.
struct RepresentationRecord {
  std::uint64_t id = 0;
  std::uint32_t stage = 0;
  std::int32_t label = 0;
  std::vector<float> values;
  std::string source;  // in-memory only; not part of the binary layout

  bool operator==(const RepresentationRecord& o) const {
    return id == o.id && stage == o.stage && label == o.label && values == o.values;
  }
};

inline constexpr std::uint16_t kReprVersion = 1;

inline std::string encode_representations(const std::vector<RepresentationRecord>& records) {
  const std::uint32_t dim = records.empty() ? 0 : static_cast<std::uint32_t>(records.front().values.size());
  ByteWriter w;
  w.magic("RREP");
  w.put<std::uint16_t>(kReprVersion);
  w.put<std::uint32_t>(dim);
  w.put<std::uint64_t>(records.size());
  for (const auto& r : records) {
    require(r.values.size() == dim, Errc::DimensionMismatch, "records must share one dimension");
    for (float v : r.values) require(std::isfinite(v), Errc::InvalidArgument, "non-finite representation entry");
    w.put(r.id);
    w.put(r.stage);
    w.put(r.label);
    w.put_f32(r.values);
  }
  w.seal();
  return w.take();
}

inline std::vector<RepresentationRecord> decode_representations(std::string_view bytes) {
  require(bytes.size() >= 4 + 2 + 4 + 8 + 4, Errc::SchemaError, "representation file too short");
  {
    ByteReader head(bytes);
    head.expect_magic("RREP");
    const auto version = head.get<std::uint16_t>();
    require(version == kReprVersion, Errc::SchemaError, "unsupported representation version " + std::to_string(version));
    const auto dim = head.get<std::uint32_t>();
    const auto count = head.get<std::uint64_t>();
    const std::uint64_t record_bytes = 16 + 4ull * dim;
    require(count <= bytes.size() && 18 + count * record_bytes + 4 == bytes.size(), Errc::SchemaError,
            "representation file length does not match header");
  }
  ByteReader r(check_crc_trailer(bytes));
  r.expect_magic("RREP");
  r.get<std::uint16_t>();
  const auto dim = r.get<std::uint32_t>();
  const auto count = r.get<std::uint64_t>();
  std::vector<RepresentationRecord> out;
  out.reserve(static_cast<std::size_t>(count));
  for (std::uint64_t i = 0; i < count; ++i) {
    RepresentationRecord rec;
    rec.id = r.get<std::uint64_t>();
    rec.stage = r.get<std::uint32_t>();
    rec.label = r.get<std::int32_t>();
    rec.values = r.get_f32(dim);
    for (float v : rec.values) require(std::isfinite(v), Errc::SchemaError, "non-finite representation entry");
    out.push_back(std::move(rec));
  }
  return out;
}

inline void write_representations(const std::vector<RepresentationRecord>& records, const std::filesystem::path& path) {
  write_file(path, encode_representations(records));
}

inline std::vector<RepresentationRecord> read_representations(const std::filesystem::path& path) {
  return decode_representations(read_file(path));
}

}  // namespace reprobe
