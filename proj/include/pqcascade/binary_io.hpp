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

#include <array>
#include <bit>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <span>
#include <string>
#include <string_view>
#include <type_traits>

#include "pqcascade/error.hpp"

namespace pqcascade::io {

static_assert(std::endian::native == std::endian::little,
              "binary formats are little-endian; big-endian hosts unsupported");

using Magic = std::array<char, 4>;

class BinaryWriter {
 public:
  explicit BinaryWriter(const std::filesystem::path& path);

  void WriteMagic(std::string_view magic);

  template <typename T>
    requires std::is_trivially_copyable_v<T>
  void Write(const T& value) {
    WriteBytes(&value, sizeof(T));
  }

  template <typename T>
    requires std::is_trivially_copyable_v<T>
  void WriteSpan(std::span<const T> values) {
    WriteBytes(values.data(), values.size_bytes());
  }

  // Flushes and checks the stream; throws kIo on failure.
  void Close();

 private:
  void WriteBytes(const void* data, std::size_t n);

  std::filesystem::path path_;
  std::ofstream out_;
};

class BinaryReader {
 public:
  explicit BinaryReader(const std::filesystem::path& path);

  // Throws kBadMagic when the first four bytes differ from `magic`.
  void ExpectMagic(std::string_view magic);

  template <typename T>
    requires std::is_trivially_copyable_v<T>
  T Read() {
    T value;
    ReadBytes(&value, sizeof(T));
    return value;
  }

  template <typename T>
    requires std::is_trivially_copyable_v<T>
  void ReadSpan(std::span<T> out) {
    ReadBytes(out.data(), out.size_bytes());
  }

  std::uint64_t remaining() const { return size_ - offset_; }
  bool at_end() const { return offset_ == size_; }

 private:
  void ReadBytes(void* data, std::size_t n);

  std::filesystem::path path_;
  std::ifstream in_;
  std::uint64_t size_ = 0;
  std::uint64_t offset_ = 0;
};

}  // namespace pqcascade::io
