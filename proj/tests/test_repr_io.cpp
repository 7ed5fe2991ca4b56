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


#include <zlib.h>

#include <cstring>
#include <random>

#include "gtest/gtest.h"
#include "reprobe/repr_io.hpp"

namespace reprobe {
namespace {

template <typename T>
void append_le(std::string& out, T v) {
  unsigned char raw[sizeof(T)];
  std::memcpy(raw, &v, sizeof(T));
  for (std::size_t i = 0; i < sizeof(T); ++i) out.push_back(static_cast<char>(raw[i]));
}

std::vector<RepresentationRecord> random_records(std::size_t count, std::size_t dim, std::uint64_t seed) {
  std::mt19937_64 gen(seed);
  std::normal_distribution<float> nd;
  std::vector<RepresentationRecord> out(count);
  for (std::size_t i = 0; i < count; ++i) {
    out[i].id = gen();
    out[i].stage = static_cast<std::uint32_t>(gen() % 7);
    out[i].label = static_cast<std::int32_t>(gen() % 5) - 1;
    out[i].values.resize(dim);
    for (auto& v : out[i].values) v = nd(gen);
  }
  return out;
}

TEST(ReprIo, ByteLayout) {
  RepresentationRecord r{7, 2, 1, {1.5f, -2.0f}, "initial"};
  std::string expect = "RREP";
  append_le<std::uint16_t>(expect, 1);
  append_le<std::uint32_t>(expect, 2);
  append_le<std::uint64_t>(expect, 1);
  append_le<std::uint64_t>(expect, 7);
  append_le<std::uint32_t>(expect, 2);
  append_le<std::int32_t>(expect, 1);
  append_le<float>(expect, 1.5f);
  append_le<float>(expect, -2.0f);
  const auto crc = static_cast<std::uint32_t>(
      ::crc32(0L, reinterpret_cast<const Bytef*>(expect.data()), static_cast<uInt>(expect.size())));
  append_le<std::uint32_t>(expect, crc);
  EXPECT_EQ(encode_representations({r}), expect);
}

TEST(ReprIo, RoundTripThousandRecords) {
  const auto recs = random_records(1000, 64, 1);
  const auto back = decode_representations(encode_representations(recs));
  ASSERT_EQ(back.size(), recs.size());
  for (std::size_t i = 0; i < recs.size(); ++i) EXPECT_EQ(back[i], recs[i]);
  const auto path = std::filesystem::temp_directory_path() / "reprobe_repr_io_test.rrep";
  write_representations(recs, path);
  EXPECT_EQ(read_representations(path), recs);
  std::filesystem::remove(path);
  EXPECT_TRUE(decode_representations(encode_representations({})).empty());
}

TEST(ReprIo, TruncationIsSchemaError) {
  const auto bytes = encode_representations(random_records(10, 8, 2));
  for (std::size_t cut : {std::size_t{0}, std::size_t{3}, std::size_t{17}, bytes.size() - 1, bytes.size() - 40}) {
    try {
      decode_representations(std::string_view(bytes).substr(0, cut));
      FAIL() << cut;
    } catch (const Error& e) {
      EXPECT_EQ(e.code(), Errc::SchemaError) << cut;
    }
  }
  auto bad_magic = bytes;
  bad_magic[0] = 'X';
  try {
    decode_representations(bad_magic);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::SchemaError);
  }
}

TEST(ReprIo, FlippedByteIsChecksumError) {
  const auto bytes = encode_representations(random_records(10, 8, 3));
  std::mt19937_64 gen(4);
  for (int trial = 0; trial < 100; ++trial) {
    auto copy = bytes;
    const std::size_t pos = 18 + gen() % (copy.size() - 22);
    copy[pos] = static_cast<char>(copy[pos] ^ (1 << (gen() % 8)));
    try {
      decode_representations(copy);
      FAIL() << pos;
    } catch (const Error& e) {
      EXPECT_EQ(e.code(), Errc::ChecksumError) << pos;
    }
  }
}

TEST(ReprIo, RejectsMixedDimensionsAndNonFinite) {
  auto recs = random_records(3, 4, 5);
  recs[1].values.pop_back();
  EXPECT_THROW(encode_representations(recs), Error);
  recs = random_records(3, 4, 5);
  recs[2].values[0] = std::nanf("");
  EXPECT_THROW(encode_representations(recs), Error);
}

}  // namespace
}  // namespace reprobe
