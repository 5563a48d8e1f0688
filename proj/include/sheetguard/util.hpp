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

#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace sheetguard {

// Binary-safe byte buffer. Packages, repository objects and HTTP bodies all
// travel as Bytes.
using Bytes = std::string;

using Timestamp = std::chrono::sys_seconds;
using Clock = std::function<Timestamp()>;

Timestamp now_utc();
Clock system_clock();

// ISO-8601 UTC, "2007-03-01T12:00:00Z".
std::string format_timestamp(Timestamp t);
// Accepts "YYYY-MM-DD", "YYYY-MM-DDTHH:MM:SS" with optional fraction and
// "Z" or "+hh:mm" suffix.
std::optional<Timestamp> parse_timestamp(std::string_view text);
// RFC 1123 form used by HTTP and mail headers.
std::string format_http_date(Timestamp t);
int year_of(Timestamp t);

std::string sha256_hex(std::string_view data);
std::string random_hex(std::size_t n_bytes);
std::string to_hex(std::string_view data);
std::string base64_encode(std::string_view data);
// Standard alphabet with padding; nullopt for malformed input.
std::optional<std::string> base64_decode(std::string_view text);

Bytes read_file(const std::filesystem::path& path);
// Writes via a temporary sibling and rename.
void write_file_atomic(const std::filesystem::path& path, std::string_view data);

std::string to_lower(std::string_view s);
std::string to_upper(std::string_view s);
bool iequals(std::string_view a, std::string_view b);
std::vector<std::string> split(std::string_view s, char sep);

// One RFC 4180 record, CRLF-terminated; fields are quoted only when needed.
std::string csv_row(const std::vector<std::string>& fields);

}  // namespace sheetguard
