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

#include <stdexcept>
#include <string>
#include <string_view>

namespace reprobe {

enum class Errc {
  InvalidArgument,
  DegenerateSize,
  DepthOutOfRange,
  IdenticalCandidates,
  Unparseable,
  UnknownMarker,
  SequenceTooLong,
  MissingTape,
  EmptyInput,
  ShapeMismatch,
  EmptyDataset,
  DimensionMismatch,
  IdMismatch,
  TimesOutOfRange,
  EmptyPool,
  LengthMismatch,
  DegenerateInput,
  TooFewBuckets,
  EmptyGroup,
  SingleClass,
  DomainError,
  Infeasible,
  ConfigError,
  IoError,
  SchemaError,
  ChecksumError,
};

constexpr std::string_view to_string(Errc code) {
  switch (code) {
    case Errc::InvalidArgument: return "InvalidArgument";
    case Errc::DegenerateSize: return "DegenerateSize";
    case Errc::DepthOutOfRange: return "DepthOutOfRange";
    case Errc::IdenticalCandidates: return "IdenticalCandidates";
    case Errc::Unparseable: return "Unparseable";
    case Errc::UnknownMarker: return "UnknownMarker";
    case Errc::SequenceTooLong: return "SequenceTooLong";
    case Errc::MissingTape: return "MissingTape";
    case Errc::EmptyInput: return "EmptyInput";
    case Errc::ShapeMismatch: return "ShapeMismatch";
    case Errc::EmptyDataset: return "EmptyDataset";
    case Errc::DimensionMismatch: return "DimensionMismatch";
    case Errc::IdMismatch: return "IdMismatch";
    case Errc::TimesOutOfRange: return "TimesOutOfRange";
    case Errc::EmptyPool: return "EmptyPool";
    case Errc::LengthMismatch: return "LengthMismatch";
    case Errc::DegenerateInput: return "DegenerateInput";
    case Errc::TooFewBuckets: return "TooFewBuckets";
    case Errc::EmptyGroup: return "EmptyGroup";
    case Errc::SingleClass: return "SingleClass";
    case Errc::DomainError: return "DomainError";
    case Errc::Infeasible: return "Infeasible";
    case Errc::ConfigError: return "ConfigError";
    case Errc::IoError: return "IoError";
    case Errc::SchemaError: return "SchemaError";
    case Errc::ChecksumError: return "ChecksumError";
  }
  return "Unknown";
}

/// Every failure raised by the library carries one of the codes above so the
/// CLI can map it onto a machine-readable error object.
class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

[[noreturn]] inline void fail(Errc code, const std::string& what) { throw Error(code, what); }

inline void require(bool cond, Errc code, const std::string& what) {
  if (!cond) fail(code, what);
}

}  // namespace reprobe
