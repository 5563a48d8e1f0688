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

// Link-target normalization shared by link rewriting, the dependency graph
// and migration. All three must agree on when two targets name one file.

#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>

namespace sheetguard::uri {

std::string percent_decode(std::string_view s);
// Encodes everything except RFC 3986 unreserved characters and '/'.
std::string percent_encode_path(std::string_view s);

// Matching form of a stored target: backslashes become slashes, percent
// escapes are decoded, scheme and host are lowercased (path case is kept),
// drive paths and UNC paths become file URIs, dot segments are removed from
// absolute forms. Relative targets stay relative.
std::string normalize(std::string_view raw);

bool is_absolute(std::string_view normalized);

// Resolves `target` against the URI of the workbook that stores it and
// returns the canonical absolute form (normalized).
std::string resolve(std::string_view owner_uri, std::string_view target);

// "file:///abs/path" for a local path (made absolute and lexically normal).
std::string from_path(const std::filesystem::path& path);
// Local path for a file URI without host; nullopt for anything else.
std::optional<std::filesystem::path> to_path(std::string_view uri);

// Last path segment, decoded.
std::string basename(std::string_view uri);

}  // namespace sheetguard::uri
