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

#include "pqcascade/binary_io.hpp"

#include <cstring>

namespace pqcascade::io {

BinaryWriter::BinaryWriter(const std::filesystem::path& path)
    : path_(path), out_(path, std::ios::binary | std::ios::trunc) {
  PQC_THROW_IF_NOT(out_.good(), ErrorKind::kIo,
                   "cannot open for writing: " + path.string());
}

void BinaryWriter::WriteMagic(std::string_view magic) {
  WriteBytes(magic.data(), magic.size());
}

void BinaryWriter::WriteBytes(const void* data, std::size_t n) {
  out_.write(static_cast<const char*>(data), static_cast<std::streamsize>(n));
  PQC_THROW_IF_NOT(out_.good(), ErrorKind::kIo,
                   "write failed: " + path_.string());
}

void BinaryWriter::Close() {
  out_.flush();
  PQC_THROW_IF_NOT(out_.good(), ErrorKind::kIo,
                   "flush failed: " + path_.string());
  out_.close();
}

BinaryReader::BinaryReader(const std::filesystem::path& path) : path_(path) {
  std::error_code ec;
  PQC_THROW_IF_NOT(std::filesystem::is_regular_file(path, ec),
                   ErrorKind::kMissingFile,
                   "missing file: " + path.string());
  size_ = std::filesystem::file_size(path, ec);
  PQC_THROW_IF_NOT(!ec, ErrorKind::kIo, "cannot stat: " + path.string());
  in_.open(path, std::ios::binary);
  PQC_THROW_IF_NOT(in_.good(), ErrorKind::kIo,
                   "cannot open for reading: " + path.string());
}

void BinaryReader::ExpectMagic(std::string_view magic) {
  char buf[8] = {};
  if (remaining() < magic.size()) {
    throw Error(ErrorKind::kBadMagic,
                "bad magic in " + path_.string() + ": file too short");
  }
  ReadBytes(buf, magic.size());
  if (std::memcmp(buf, magic.data(), magic.size()) != 0) {
    throw Error(ErrorKind::kBadMagic, "bad magic in " + path_.string() +
                                          ": expected " + std::string(magic));
  }
}

void BinaryReader::ReadBytes(void* data, std::size_t n) {
  if (n > remaining()) {
    throw Error(ErrorKind::kTruncated, "truncated payload in " +
                                           path_.string());
  }
  in_.read(static_cast<char*>(data), static_cast<std::streamsize>(n));
  PQC_THROW_IF_NOT(in_.good(), ErrorKind::kIo, "read failed: " + path_.string());
  offset_ += n;
}

}  // namespace pqcascade::io
