// Copyright 2026 The pqcascade Authors.
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

#include <stdexcept>
#include <string>
#include <string_view>

namespace pqcascade {

enum class ErrorKind {
  kIo,
  kMissingFile,
  kBadMagic,
  kTruncated,
  kDimensionMismatch,
  kInvalidArgument,
  kDuplicateId,
  kZeroNorm,
  kDegenerate,
  kMissingRaw,
  kIdMismatch,
  kNotFound,
  kFormat,
};

std::string_view ErrorKindName(ErrorKind kind);

/// Every failure in the library surfaces as an Error; kind() lets callers
/// (the CLI in particular) distinguish the causes without parsing messages.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

#define PQC_THROW_IF_NOT(cond, kind, msg)      \
  do {                                          \
    if (!(cond)) {                              \
      throw ::pqcascade::Error((kind), (msg));  \
    }                                           \
  } while (0)

}  // namespace pqcascade
