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

// File inventory: directory scanning, the record query language and
// CSV/JSON export.
//
// Query grammar:
//
//   expr := or
//   or   := and ('OR' and)*
//   and  := not ('AND' not)*
//   not  := 'NOT' not | '(' expr ')' | cmp
//   cmp  := field op literal
//   op   := '==' | '!=' | '<' | '<=' | '>' | '>=' | 'contains'
//
// Literals are double-quoted text, integers, High|Medium|Low and true|false.
// Keywords are case-insensitive. Timestamp fields compare against quoted
// dates ("2007-03-01" or a full ISO timestamp).

#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "sheetguard/grid.hpp"
#include "sheetguard/risk.hpp"

namespace sheetguard::discovery {

enum class FileKind { Spreadsheet, MacroSpreadsheet, AccessDb, Other };
enum class ParseStatus { Parsed, MetadataOnly, Failed };

std::string_view file_kind_name(FileKind k);
std::string_view parse_status_name(ParseStatus s);
FileKind kind_for_extension(std::string_view ext);  // with or without the dot

struct InventoryRecord {
  std::string uri;
  std::int64_t size_bytes = 0;
  Timestamp created{};
  Timestamp modified{};
  std::string owner = "unknown";
  FileKind kind = FileKind::Other;
  std::optional<WorkbookStats> stats;  // present iff parse_status == Parsed
  std::optional<risk::Level> risk;
  ParseStatus parse_status = ParseStatus::MetadataOnly;
  std::string detail;  // failure reason when Failed

  bool operator==(const InventoryRecord&) const = default;
};

// Export column order; every name is also a query field. The derived fields
// year(created) and year(modified) are query-only.
const std::vector<std::string>& field_catalog();

enum class Op { Eq, Ne, Lt, Le, Gt, Ge, Contains };

struct Literal {
  enum class Kind { Text, Integer, Level, Boolean };
  Kind kind = Kind::Text;
  std::string text;
  std::int64_t integer = 0;
  risk::Level level = risk::Level::Low;
  bool boolean = false;
};

struct Query {
  enum class Node { Compare, And, Or, Not };
  Node node = Node::Compare;
  std::vector<Query> children;
  std::string field;
  Op op = Op::Eq;
  Literal literal;
};

// Throws SyntaxError (offset = byte position) or UnknownField.
Query parse_query(std::string_view text);
// Comparisons on absent optional values are false.
bool matches(const InventoryRecord& r, const Query& q);

struct ScanOptions {
  std::vector<std::string> roots;  // paths or file:// URIs
  std::vector<std::string> extensions{"xlsx", "xlsm", "mdb", "accdb"};
  std::optional<Query> query;
  bool include_hidden = false;
  // When set, spreadsheets are risk-rated before the query is applied.
  std::optional<risk::RiskConfig> risk;
};

// Throws RootNotFound. Per-file failures are recorded, never thrown.
std::vector<InventoryRecord> scan(const ScanOptions& opts);

// Builds the record for a single file (used by scan and by the CLI).
InventoryRecord inspect_file(const std::filesystem::path& path,
                             const std::optional<risk::RiskConfig>& risk = std::nullopt);

enum class Format { Csv, Json };

std::string export_inventory(const std::vector<InventoryRecord>& records, Format format);
// Inverse of export_inventory. Throws SyntaxError on malformed input.
std::vector<InventoryRecord> import_inventory(std::string_view text, Format format);

// RFC 4180 reader used by import_inventory; exposed for tests.
std::vector<std::vector<std::string>> parse_csv(std::string_view text);

}  // namespace sheetguard::discovery
