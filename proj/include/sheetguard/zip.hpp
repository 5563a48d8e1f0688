//
// Copyright 2026 The Sheetguard Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
//

// Minimal ZIP container support: stored and deflated entries, no zip64, no
// encryption. Enough to read OOXML packages and to splice modified entries
// back while leaving every other entry byte-identical.

#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "sheetguard/util.hpp"

namespace sheetguard::zip {

enum class Method : std::uint16_t { Stored = 0, Deflated = 8 };

struct Entry {
  std::string name;
  std::uint16_t method = 0;
  std::uint16_t flags = 0;
  std::uint32_t crc32 = 0;
  std::uint32_t compressed_size = 0;
  std::uint32_t uncompressed_size = 0;
  std::uint32_t local_header_offset = 0;
  std::size_t central_record_offset = 0;  // into the archive bytes
  std::size_t central_record_size = 0;
};

class Archive {
 public:
  // Throws NotAPackage when the bytes are not a readable ZIP archive.
  static Archive parse(Bytes bytes);

  const std::vector<Entry>& entries() const { return entries_; }  // central order
  const Entry* find(std::string_view name) const;
  bool contains(std::string_view name) const { return find(name) != nullptr; }

  // Decompressed content; throws CorruptPart on inflate or CRC failure.
  Bytes read(const Entry& entry) const;
  Bytes read(std::string_view name) const;

  // Re-emits the archive with the named entries' content replaced. Modified
  // entries keep their compression method; all other local records and the
  // central directory records are copied verbatim (offsets patched).
  Bytes replace(const std::map<std::string, Bytes>& replacements) const;

  const Bytes& bytes() const { return bytes_; }

 private:
  Bytes bytes_;
  std::vector<Entry> entries_;
  std::size_t cd_offset_ = 0;
  std::size_t eocd_offset_ = 0;
};

class Writer {
 public:
  // `data_descriptor` sets general-purpose bit 3 and writes sizes after the
  // data, as streaming writers do.
  void add(std::string name, std::string_view data, Method method = Method::Deflated,
           bool data_descriptor = false);
  Bytes finish(std::string_view comment = {});

 private:
  Bytes out_;
  Bytes central_;
  std::uint16_t count_ = 0;
};

std::uint32_t crc32(std::string_view data);
Bytes deflate_raw(std::string_view data);
Bytes inflate_raw(std::string_view data, std::size_t expected_size);

}  // namespace sheetguard::zip
