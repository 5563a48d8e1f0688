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

// In-memory workbook model shared by every module, plus the A1 address codec
// and the lexical formula scanner used for R1C1 normalization.

#pragma once

#include <array>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "sheetguard/util.hpp"

namespace sheetguard {

inline constexpr int kMaxRows = 1048576;
inline constexpr int kMaxCols = 16384;

struct CellAddress {
  std::string sheet;  // empty when unqualified
  int row = 1;
  int col = 1;
  bool row_abs = false;
  bool col_abs = false;

  bool operator==(const CellAddress&) const = default;
};

// "A" -> 1, "AA" -> 27. Throws MalformedAddress outside 1..kMaxCols.
int column_index(std::string_view letters);
std::string column_label(int col);

CellAddress parse_a1(std::string_view text);
std::string format_a1(const CellAddress& addr);
// Sheet-name quoting used by format_a1: quoted only when the name is not a
// plain identifier.
std::string quote_sheet_name(std::string_view name);

enum class ValueKind { Empty, Number, Text, Boolean, Error };

const std::array<std::string_view, 7>& error_literals();
bool is_error_literal(std::string_view text);

struct CellValue {
  ValueKind kind = ValueKind::Empty;
  double number = 0.0;
  std::string text;  // Text payload, or the error literal for Error
  bool boolean = false;

  static CellValue empty() { return {}; }
  static CellValue of_number(double v);
  static CellValue of_text(std::string v);
  static CellValue of_bool(bool v);
  static CellValue of_error(std::string literal);

  bool is_empty() const { return kind == ValueKind::Empty; }
  // Shortest round-trippable rendering; "" for Empty.
  std::string display() const;

  bool operator==(const CellValue&) const = default;
};

struct Cell {
  CellAddress addr;
  CellValue value;
  std::optional<std::string> formula;  // A1 style, no leading '='
  std::optional<std::string> font_color;  // uppercase AARRGGBB
  std::optional<std::string> fill_color;
  std::optional<std::string> number_format;

  bool operator==(const Cell&) const = default;
};

enum class Visibility { Visible, Hidden, VeryHidden };
std::string_view visibility_name(Visibility v);

struct Worksheet {
  std::string name;
  Visibility visibility = Visibility::Visible;
  std::map<std::pair<int, int>, Cell> cells;  // keyed by (row, col)

  const Cell* find(int row, int col) const;
  // Inserts or replaces the cell at (row, col); addr.sheet is set to name.
  Cell& put(int row, int col, CellValue value,
            std::optional<std::string> formula = std::nullopt);
  int max_row() const;
  int max_col() const;

  bool operator==(const Worksheet&) const = default;
};

enum class LinkMode { External, Internal };

struct ExternalLink {
  int index = 1;
  std::string target;
  LinkMode mode = LinkMode::External;

  bool operator==(const ExternalLink&) const = default;
};

struct DefinedName {
  std::string name;
  std::string refers_to;

  bool operator==(const DefinedName&) const = default;
};

struct Workbook {
  std::string source_uri;
  std::vector<Worksheet> sheets;
  std::vector<DefinedName> defined_names;
  std::vector<ExternalLink> external_links;
  bool has_macros = false;
  bool has_connections = false;
  std::optional<Timestamp> created;
  std::optional<Timestamp> modified;
  std::string creator;
  std::string last_modified_by;
  // SHA-256 of the raw xl/vbaProject.bin and xl/connections.xml parts.
  std::optional<std::string> macro_sha256;
  std::optional<std::string> connections_sha256;

  const Worksheet* find_sheet(std::string_view name) const;

  bool operator==(const Workbook&) const = default;
};

struct WorkbookStats {
  int sheet_count = 0;
  int formula_count = 0;
  int external_link_count = 0;
  int unique_function_count = 0;
  int error_cell_count = 0;
  bool has_macros = false;

  bool operator==(const WorkbookStats&) const = default;
};

WorkbookStats compute_stats(const Workbook& wb);

// ---------------------------------------------------------------------------
// Formula scanning
// ---------------------------------------------------------------------------

struct FormulaToken {
  enum class Kind {
    String,      // "..." literal
    Prefix,      // sheet / external-book qualifier including the '!'
    CellRef,
    ColumnRef,   // one side of A:C
    RowRef,      // one side of 1:3
    Function,    // identifier immediately followed by '('
    Name,        // any other identifier (defined names, TRUE, ...)
    Number,
    ThreeD,      // Sheet1:Sheet3! qualifier
    Structured,  // Table1[Column] reference
    ErrorLiteral,
    Other,       // operators, punctuation, whitespace
  };

  Kind kind = Kind::Other;
  std::string text;
  // Populated for CellRef / ColumnRef / RowRef.
  int row = 0;
  int col = 0;
  bool row_abs = false;
  bool col_abs = false;
};

// Throws MalformedFormula when the scanner cannot finish (unterminated
// literals, unbalanced parentheses or brackets).
std::vector<FormulaToken> tokenize_formula(std::string_view formula);

struct NormalizedFormula {
  std::string text;
  // False when the formula holds 3-D or structured references, which pass
  // through unrewritten.
  bool analyzable = true;
};

NormalizedFormula normalize_formula(std::string_view formula,
                                    const CellAddress& origin);
std::string normalize_formula_r1c1(std::string_view formula,
                                   const CellAddress& origin);

// Moves every relative reference by (drow, dcol), as when a formula is
// copied. References pushed off the grid become #REF!.
std::string shift_formula(std::string_view formula, int drow, int dcol);

// Distinct function identifiers, uppercased, without _xlfn./_xlws. prefixes.
std::vector<std::string> formula_functions(std::string_view formula);

}  // namespace sheetguard
