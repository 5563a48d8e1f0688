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

#include "sheetguard/zip.hpp"

#include <zlib.h>

#include <algorithm>

#include "sheetguard/error.hpp"

namespace sheetguard::zip {

namespace {

constexpr std::uint32_t kLocalSig = 0x04034b50;
constexpr std::uint32_t kCentralSig = 0x02014b50;
constexpr std::uint32_t kEndSig = 0x06054b50;
constexpr std::uint32_t kDescriptorSig = 0x08074b50;
constexpr std::size_t kLocalHeaderSize = 30;
constexpr std::size_t kCentralHeaderSize = 46;
constexpr std::size_t kEndRecordSize = 22;
constexpr std::uint16_t kDescriptorFlag = 0x0008;

std::uint16_t get16(std::string_view b, std::size_t at) {
  return static_cast<std::uint16_t>(static_cast<unsigned char>(b[at]) |
                                    (static_cast<unsigned char>(b[at + 1]) << 8));
}

std::uint32_t get32(std::string_view b, std::size_t at) {
  return static_cast<std::uint32_t>(get16(b, at)) |
         (static_cast<std::uint32_t>(get16(b, at + 2)) << 16);
}

void put16(Bytes& b, std::uint16_t v) {
  b.push_back(static_cast<char>(v & 0xFF));
  b.push_back(static_cast<char>(v >> 8));
}

void put32(Bytes& b, std::uint32_t v) {
  put16(b, static_cast<std::uint16_t>(v & 0xFFFF));
  put16(b, static_cast<std::uint16_t>(v >> 16));
}

void patch16(Bytes& b, std::size_t at, std::uint16_t v) {
  b[at] = static_cast<char>(v & 0xFF);
  b[at + 1] = static_cast<char>(v >> 8);
}

void patch32(Bytes& b, std::size_t at, std::uint32_t v) {
  patch16(b, at, static_cast<std::uint16_t>(v & 0xFFFF));
  patch16(b, at + 2, static_cast<std::uint16_t>(v >> 16));
}

[[noreturn]] void not_a_package(const std::string& why) {
  throw Error(ErrorCode::NotAPackage, why);
}

std::size_t local_data_offset(std::string_view b, const Entry& e) {
  const std::size_t at = e.local_header_offset;
  if (at + kLocalHeaderSize > b.size() || get32(b, at) != kLocalSig) {
    throw Error(ErrorCode::CorruptPart, e.name + ": bad local header");
  }
  const std::size_t data = at + kLocalHeaderSize + get16(b, at + 26) + get16(b, at + 28);
  if (data + e.compressed_size > b.size()) {
    throw Error(ErrorCode::CorruptPart, e.name + ": truncated data");
  }
  return data;
}

Bytes compress_for(std::uint16_t method, std::string_view data, const std::string& name) {
  if (method == static_cast<std::uint16_t>(Method::Stored)) return Bytes(data);
  if (method == static_cast<std::uint16_t>(Method::Deflated)) return deflate_raw(data);
  throw Error(ErrorCode::CorruptPart,
              name + ": unsupported compression method " + std::to_string(method));
}

}  // namespace

std::uint32_t crc32(std::string_view data) {
  uLong crc = ::crc32(0L, Z_NULL, 0);
  std::size_t off = 0;
  while (off < data.size()) {
    const auto chunk = static_cast<uInt>(std::min<std::size_t>(data.size() - off, 1u << 30));
    crc = ::crc32(crc, reinterpret_cast<const Bytef*>(data.data() + off), chunk);
    off += chunk;
  }
  return static_cast<std::uint32_t>(crc);
}

Bytes deflate_raw(std::string_view data) {
  z_stream zs{};
  if (deflateInit2(&zs, Z_DEFAULT_COMPRESSION, Z_DEFLATED, -MAX_WBITS, 8,
                   Z_DEFAULT_STRATEGY) != Z_OK) {
    throw Error(ErrorCode::IoError, "deflateInit2 failed");
  }
  Bytes out(deflateBound(&zs, static_cast<uLong>(data.size())), '\0');
  zs.next_in = reinterpret_cast<Bytef*>(const_cast<char*>(data.data()));
  zs.avail_in = static_cast<uInt>(data.size());
  zs.next_out = reinterpret_cast<Bytef*>(out.data());
  zs.avail_out = static_cast<uInt>(out.size());
  const int rc = deflate(&zs, Z_FINISH);
  out.resize(zs.total_out);
  deflateEnd(&zs);
  if (rc != Z_STREAM_END) throw Error(ErrorCode::IoError, "deflate failed");
  return out;
}

Bytes inflate_raw(std::string_view data, std::size_t expected_size) {
  z_stream zs{};
  if (inflateInit2(&zs, -MAX_WBITS) != Z_OK) {
    throw Error(ErrorCode::IoError, "inflateInit2 failed");
  }
  Bytes out(expected_size, '\0');
  zs.next_in = reinterpret_cast<Bytef*>(const_cast<char*>(data.data()));
  zs.avail_in = static_cast<uInt>(data.size());
  zs.next_out = reinterpret_cast<Bytef*>(out.data());
  zs.avail_out = static_cast<uInt>(out.size());
  int rc = inflate(&zs, Z_FINISH);
  // An empty output buffer makes zlib report Z_BUF_ERROR even for a valid
  // empty stream.
  if (rc == Z_BUF_ERROR && expected_size == 0 && zs.avail_in <= 2) rc = Z_STREAM_END;
  const auto produced = zs.total_out;
  inflateEnd(&zs);
  if (rc != Z_STREAM_END || produced != expected_size) {
    throw Error(ErrorCode::CorruptPart, "inflate failed");
  }
  return out;
}

Archive Archive::parse(Bytes bytes) {
  Archive a;
  a.bytes_ = std::move(bytes);
  const std::string_view b = a.bytes_;
  if (b.size() < kEndRecordSize || get32(b, 0) != kLocalSig) {
    not_a_package("missing ZIP signature");
  }
  // The end record sits within the last 64 KiB + 22 bytes (comment limit).
  const std::size_t lowest = b.size() > 0xFFFF + kEndRecordSize
                                 ? b.size() - 0xFFFF - kEndRecordSize
                                 : 0;
  std::size_t eocd = std::string_view::npos;
  for (std::size_t pos = b.size() - kEndRecordSize + 1; pos-- > lowest;) {
    if (get32(b, pos) == kEndSig &&
        pos + kEndRecordSize + get16(b, pos + 20) == b.size()) {
      eocd = pos;
      break;
    }
  }
  if (eocd == std::string_view::npos) not_a_package("end of central directory not found");
  const std::uint16_t count = get16(b, eocd + 10);
  const std::uint32_t cd_size = get32(b, eocd + 12);
  const std::uint32_t cd_offset = get32(b, eocd + 16);
  if (count == 0xFFFF || cd_offset == 0xFFFFFFFF || cd_size == 0xFFFFFFFF) {
    not_a_package("zip64 archives are not supported");
  }
  if (get16(b, eocd + 4) != 0 || get16(b, eocd + 6) != 0) {
    not_a_package("multi-disk archives are not supported");
  }
  if (static_cast<std::size_t>(cd_offset) + cd_size > eocd) {
    not_a_package("central directory out of range");
  }
  a.cd_offset_ = cd_offset;
  a.eocd_offset_ = eocd;
  std::size_t pos = cd_offset;
  for (std::uint16_t i = 0; i < count; ++i) {
    if (pos + kCentralHeaderSize > eocd || get32(b, pos) != kCentralSig) {
      not_a_package("bad central directory record");
    }
    Entry e;
    e.flags = get16(b, pos + 8);
    e.method = get16(b, pos + 10);
    e.crc32 = get32(b, pos + 16);
    e.compressed_size = get32(b, pos + 20);
    e.uncompressed_size = get32(b, pos + 24);
    const std::uint16_t name_len = get16(b, pos + 28);
    const std::uint16_t extra_len = get16(b, pos + 30);
    const std::uint16_t comment_len = get16(b, pos + 32);
    e.local_header_offset = get32(b, pos + 42);
    const std::size_t size = kCentralHeaderSize + name_len + extra_len + comment_len;
    if (pos + size > eocd) not_a_package("central directory record overflows");
    if (e.flags & 0x0001) not_a_package("encrypted entries are not supported");
    if (e.local_header_offset >= cd_offset) not_a_package("local header out of range");
    e.name = std::string(b.substr(pos + kCentralHeaderSize, name_len));
    e.central_record_offset = pos;
    e.central_record_size = size;
    pos += size;
    a.entries_.push_back(std::move(e));
  }
  return a;
}

const Entry* Archive::find(std::string_view name) const {
  for (const auto& e : entries_) {
    if (e.name == name) return &e;
  }
  return nullptr;
}

Bytes Archive::read(const Entry& e) const {
  const std::string_view b = bytes_;
  const std::size_t data = local_data_offset(b, e);
  const std::string_view raw = b.substr(data, e.compressed_size);
  Bytes out;
  if (e.method == static_cast<std::uint16_t>(Method::Stored)) {
    out = Bytes(raw);
  } else if (e.method == static_cast<std::uint16_t>(Method::Deflated)) {
    try {
      out = inflate_raw(raw, e.uncompressed_size);
    } catch (const Error&) {
      throw Error(ErrorCode::CorruptPart, e.name + ": inflate failed");
    }
  } else {
    throw Error(ErrorCode::CorruptPart,
                e.name + ": unsupported compression method " + std::to_string(e.method));
  }
  if (out.size() != e.uncompressed_size || crc32(out) != e.crc32) {
    throw Error(ErrorCode::CorruptPart, e.name + ": CRC mismatch");
  }
  return out;
}

Bytes Archive::read(std::string_view name) const {
  const Entry* e = find(name);
  if (!e) throw Error(ErrorCode::CorruptPart, std::string(name) + ": no such part");
  return read(*e);
}

Bytes Archive::replace(const std::map<std::string, Bytes>& replacements) const {
  const std::string_view b = bytes_;
  // Local records in file order; each spans up to the next record so that
  // data descriptors and any padding travel with their entry.
  std::vector<const Entry*> by_offset;
  for (const auto& e : entries_) by_offset.push_back(&e);
  std::sort(by_offset.begin(), by_offset.end(), [](const Entry* x, const Entry* y) {
    return x->local_header_offset < y->local_header_offset;
  });

  Bytes out;
  out.reserve(b.size());
  // Bytes before the first local header (normally none) are kept.
  const std::size_t first = by_offset.empty() ? cd_offset_ : by_offset.front()->local_header_offset;
  out.append(b.substr(0, first));

  struct Patched {
    std::uint32_t offset;
    bool modified;
    std::uint16_t flags;
    std::uint32_t crc;
    std::uint32_t csize;
    std::uint32_t usize;
  };
  std::map<const Entry*, Patched> patched;
  for (std::size_t i = 0; i < by_offset.size(); ++i) {
    const Entry& e = *by_offset[i];
    const std::size_t start = e.local_header_offset;
    const std::size_t end =
        i + 1 < by_offset.size() ? by_offset[i + 1]->local_header_offset : cd_offset_;
    const auto new_offset = static_cast<std::uint32_t>(out.size());
    const auto it = replacements.find(e.name);
    if (it == replacements.end()) {
      out.append(b.substr(start, end - start));
      patched[&e] = {new_offset, false, e.flags, e.crc32, e.compressed_size,
                     e.uncompressed_size};
      continue;
    }
    if (start + kLocalHeaderSize > b.size() || get32(b, start) != kLocalSig) {
      throw Error(ErrorCode::CorruptPart, e.name + ": bad local header");
    }
    const std::uint16_t name_len = get16(b, start + 26);
    const std::uint16_t extra_len = get16(b, start + 28);
    const Bytes payload = compress_for(e.method, it->second, e.name);
    Patched p{new_offset,
              true,
              static_cast<std::uint16_t>(e.flags & ~kDescriptorFlag),
              crc32(it->second),
              static_cast<std::uint32_t>(payload.size()),
              static_cast<std::uint32_t>(it->second.size())};
    Bytes header(b.substr(start, kLocalHeaderSize + name_len + extra_len));
    patch16(header, 6, p.flags);
    patch32(header, 14, p.crc);
    patch32(header, 18, p.csize);
    patch32(header, 22, p.usize);
    out += header;
    out += payload;
    patched[&e] = p;
  }

  const auto new_cd_offset = static_cast<std::uint32_t>(out.size());
  for (const auto& e : entries_) {
    Bytes record(b.substr(e.central_record_offset, e.central_record_size));
    const Patched& p = patched.at(&e);
    patch32(record, 42, p.offset);
    if (p.modified) {
      patch16(record, 8, p.flags);
      patch32(record, 16, p.crc);
      patch32(record, 20, p.csize);
      patch32(record, 24, p.usize);
    }
    out += record;
  }
  const auto new_cd_size = static_cast<std::uint32_t>(out.size() - new_cd_offset);
  // Anything between the central directory and the end record is kept.
  const std::size_t old_cd_end = entries_.empty()
                                     ? cd_offset_
                                     : entries_.back().central_record_offset +
                                           entries_.back().central_record_size;
  out.append(b.substr(old_cd_end, eocd_offset_ - old_cd_end));
  Bytes end_record(b.substr(eocd_offset_));
  patch32(end_record, 12, new_cd_size);
  patch32(end_record, 16, new_cd_offset);
  out += end_record;
  return out;
}

void Writer::add(std::string name, std::string_view data, Method method,
                 bool data_descriptor) {
  const std::uint32_t crc = crc32(data);
  const Bytes payload = method == Method::Stored ? Bytes(data) : deflate_raw(data);
  const auto offset = static_cast<std::uint32_t>(out_.size());
  const std::uint16_t flags = data_descriptor ? kDescriptorFlag : 0;
  // Fixed DOS timestamp 1980-01-01 00:00 keeps generated packages reproducible.
  constexpr std::uint16_t kDosTime = 0;
  constexpr std::uint16_t kDosDate = (0 << 9) | (1 << 5) | 1;

  put32(out_, kLocalSig);
  put16(out_, 20);
  put16(out_, flags);
  put16(out_, static_cast<std::uint16_t>(method));
  put16(out_, kDosTime);
  put16(out_, kDosDate);
  put32(out_, data_descriptor ? 0 : crc);
  put32(out_, data_descriptor ? 0 : static_cast<std::uint32_t>(payload.size()));
  put32(out_, data_descriptor ? 0 : static_cast<std::uint32_t>(data.size()));
  put16(out_, static_cast<std::uint16_t>(name.size()));
  put16(out_, 0);
  out_ += name;
  out_ += payload;
  if (data_descriptor) {
    put32(out_, kDescriptorSig);
    put32(out_, crc);
    put32(out_, static_cast<std::uint32_t>(payload.size()));
    put32(out_, static_cast<std::uint32_t>(data.size()));
  }

  put32(central_, kCentralSig);
  put16(central_, 20);
  put16(central_, 20);
  put16(central_, flags);
  put16(central_, static_cast<std::uint16_t>(method));
  put16(central_, kDosTime);
  put16(central_, kDosDate);
  put32(central_, crc);
  put32(central_, static_cast<std::uint32_t>(payload.size()));
  put32(central_, static_cast<std::uint32_t>(data.size()));
  put16(central_, static_cast<std::uint16_t>(name.size()));
  put16(central_, 0);
  put16(central_, 0);
  put16(central_, 0);
  put16(central_, 0);
  put32(central_, 0);
  put32(central_, offset);
  central_ += name;
  ++count_;
}

Bytes Writer::finish(std::string_view comment) {
  Bytes out = std::move(out_);
  const auto cd_offset = static_cast<std::uint32_t>(out.size());
  out += central_;
  put32(out, kEndSig);
  put16(out, 0);
  put16(out, 0);
  put16(out, count_);
  put16(out, count_);
  put32(out, static_cast<std::uint32_t>(central_.size()));
  put32(out, cd_offset);
  put16(out, static_cast<std::uint16_t>(comment.size()));
  out += comment;
  out_.clear();
  central_.clear();
  count_ = 0;
  return out;
}

}  // namespace sheetguard::zip
