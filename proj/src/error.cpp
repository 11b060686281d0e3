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

#include "pqcascade/error.hpp"

namespace pqcascade {

std::string_view ErrorKindName(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kIo: return "io error";
    case ErrorKind::kMissingFile: return "missing file";
    case ErrorKind::kBadMagic: return "bad magic";
    case ErrorKind::kTruncated: return "truncated payload";
    case ErrorKind::kDimensionMismatch: return "dimension mismatch";
    case ErrorKind::kInvalidArgument: return "invalid argument";
    case ErrorKind::kDuplicateId: return "duplicate id";
    case ErrorKind::kZeroNorm: return "zero norm";
    case ErrorKind::kDegenerate: return "degenerate score set";
    case ErrorKind::kMissingRaw: return "missing raw vectors";
    case ErrorKind::kIdMismatch: return "id-set mismatch";
    case ErrorKind::kNotFound: return "not found";
    case ErrorKind::kFormat: return "malformed file";
  }
  return "unknown";
}

}  // namespace pqcascade
