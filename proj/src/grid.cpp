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

#include "sheetguard/grid.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <set>

#include "sheetguard/error.hpp"

namespace sheetguard {

namespace {

bool is_alpha(char c) { return std::isalpha(static_cast<unsigned char>(c)) != 0; }
bool is_digit(char c) { return std::isdigit(static_cast<unsigned char>(c)) != 0; }

// Characters that may appear in an unquoted identifier run. Bytes >= 0x80 are
// accepted so that UTF-8 sheet and defined names scan as one run.
bool is_ident_char(char c) {
  return is_alpha(c) || is_digit(c) || c == '_' || c == '.' || c == '$' ||
         c == '\\' || c == '?' || static_cast<unsigned char>(c) >= 0x80;
}

[[noreturn]] void bad_address(std::string_view text, const std::string& why) {
  throw Error(ErrorCode::MalformedAddress,
              "'" + std::string(text) + "': " + why);
}

struct RefParts {
  bool col_abs = false;
  bool row_abs = false;
  int col = 0;
  int row = 0;
  bool has_col = false;
  bool has_row = false;
};

// Matches \$?[A-Za-z]{0,3}\$?[0-9]{0,7} exactly and checks grid bounds.
std::optional<RefParts> match_ref(std::string_view s) {
  RefParts p;
  std::size_t i = 0;
  if (i < s.size() && s[i] == '$') {
    p.col_abs = true;
    ++i;
  }
  const std::size_t letters_begin = i;
  while (i < s.size() && is_alpha(s[i]) && static_cast<unsigned char>(s[i]) < 0x80) ++i;
  const std::size_t n_letters = i - letters_begin;
  if (n_letters > 3) return std::nullopt;
  if (n_letters > 0) {
    int col = 0;
    for (std::size_t k = letters_begin; k < i; ++k) {
      col = col * 26 + (std::toupper(static_cast<unsigned char>(s[k])) - 'A' + 1);
    }
    if (col > kMaxCols) return std::nullopt;
    p.col = col;
    p.has_col = true;
  } else if (p.col_abs) {
    // "$5" is an absolute row marker, not a column one.
    p.col_abs = false;
    p.row_abs = true;
  }
  if (i < s.size() && s[i] == '$') {
    if (n_letters == 0) return std::nullopt;
    p.row_abs = true;
    ++i;
  }
  const std::size_t digits_begin = i;
  while (i < s.size() && is_digit(s[i])) ++i;
  const std::size_t n_digits = i - digits_begin;
  if (i != s.size() || n_digits > 7) return std::nullopt;
  if (n_digits > 0) {
    int row = 0;
    for (std::size_t k = digits_begin; k < i; ++k) row = row * 10 + (s[k] - '0');
    if (row < 1 || row > kMaxRows) return std::nullopt;
    p.row = row;
    p.has_row = true;
  } else if (p.row_abs && n_letters > 0) {
    return std::nullopt;  // "A$" dangling marker
  }
  if (!p.has_col && !p.has_row) return std::nullopt;
  return p;
}

}  // namespace

int column_index(std::string_view letters) {
  if (letters.empty() || letters.size() > 3) {
    bad_address(letters, "column must be 1-3 letters");
  }
  int col = 0;
  for (char c : letters) {
    if (!is_alpha(c)) bad_address(letters, "column must be letters");
    col = col * 26 + (std::toupper(static_cast<unsigned char>(c)) - 'A' + 1);
  }
  if (col > kMaxCols) bad_address(letters, "column beyond XFD");
  return col;
}

std::string column_label(int col) {
  if (col < 1 || col > kMaxCols) {
    throw Error(ErrorCode::MalformedAddress,
                "column index out of range: " + std::to_string(col));
  }
  std::string out;
  while (col > 0) {
    const int rem = (col - 1) % 26;
    out.insert(out.begin(), static_cast<char>('A' + rem));
    col = (col - 1) / 26;
  }
  return out;
}

std::string quote_sheet_name(std::string_view name) {
  bool plain = !name.empty() && (is_alpha(name[0]) || name[0] == '_');
  for (char c : name) {
    if (!(is_alpha(c) || is_digit(c) || c == '_' || c == '.')) plain = false;
  }
  // A name that itself scans as a reference ("A1", "XFD") must be quoted.
  if (plain && match_ref(name)) plain = false;
  if (plain) return std::string(name);
  std::string out = "'";
  for (char c : name) {
    out.push_back(c);
    if (c == '\'') out.push_back('\'');
  }
  out.push_back('\'');
  return out;
}

CellAddress parse_a1(std::string_view text) {
  CellAddress addr;
  std::string_view ref = text;
  if (!text.empty() && text.front() == '\'') {
    std::string sheet;
    std::size_t i = 1;
    bool closed = false;
    while (i < text.size()) {
      if (text[i] == '\'') {
        if (i + 1 < text.size() && text[i + 1] == '\'') {
          sheet.push_back('\'');
          i += 2;
          continue;
        }
        closed = true;
        ++i;
        break;
      }
      sheet.push_back(text[i++]);
    }
    if (!closed || i >= text.size() || text[i] != '!' || sheet.empty()) {
      bad_address(text, "malformed quoted sheet name");
    }
    addr.sheet = std::move(sheet);
    ref = text.substr(i + 1);
  } else if (const auto bang = text.rfind('!'); bang != std::string_view::npos) {
    addr.sheet = std::string(text.substr(0, bang));
    if (addr.sheet.empty()) bad_address(text, "empty sheet name");
    for (char c : addr.sheet) {
      if (!is_ident_char(c) || c == '$') bad_address(text, "sheet name needs quoting");
    }
    ref = text.substr(bang + 1);
  }
  const auto parts = match_ref(ref);
  if (!parts || !parts->has_col || !parts->has_row) {
    bad_address(text, "expected column letters followed by row digits");
  }
  addr.col = parts->col;
  addr.row = parts->row;
  addr.col_abs = parts->col_abs;
  addr.row_abs = parts->row_abs;
  return addr;
}

std::string format_a1(const CellAddress& addr) {
  if (addr.row < 1 || addr.row > kMaxRows) {
    throw Error(ErrorCode::MalformedAddress,
                "row out of range: " + std::to_string(addr.row));
  }
  std::string out;
  if (!addr.sheet.empty()) out = quote_sheet_name(addr.sheet) + "!";
  if (addr.col_abs) out.push_back('$');
  out += column_label(addr.col);
  if (addr.row_abs) out.push_back('$');
  out += std::to_string(addr.row);
  return out;
}

const std::array<std::string_view, 7>& error_literals() {
  static constexpr std::array<std::string_view, 7> kLiterals = {
      "#DIV/0!", "#N/A", "#NAME?", "#NULL!", "#NUM!", "#REF!", "#VALUE!"};
  return kLiterals;
}

bool is_error_literal(std::string_view text) {
  const auto& lits = error_literals();
  return std::find(lits.begin(), lits.end(), text) != lits.end();
}

CellValue CellValue::of_number(double v) {
  CellValue out;
  out.kind = ValueKind::Number;
  out.number = v;
  return out;
}

CellValue CellValue::of_text(std::string v) {
  CellValue out;
  out.kind = ValueKind::Text;
  out.text = std::move(v);
  return out;
}

CellValue CellValue::of_bool(bool v) {
  CellValue out;
  out.kind = ValueKind::Boolean;
  out.boolean = v;
  return out;
}

CellValue CellValue::of_error(std::string literal) {
  if (!is_error_literal(literal)) {
    throw Error(ErrorCode::InvalidArgument, "not an error literal: " + literal);
  }
  CellValue out;
  out.kind = ValueKind::Error;
  out.text = std::move(literal);
  return out;
}

std::string CellValue::display() const {
  switch (kind) {
    case ValueKind::Empty: return "";
    case ValueKind::Number: {
      char buf[64];
      const auto res = std::to_chars(buf, buf + sizeof buf, number);
      return std::string(buf, res.ptr);
    }
    case ValueKind::Text:
    case ValueKind::Error: return text;
    case ValueKind::Boolean: return boolean ? "TRUE" : "FALSE";
  }
  return "";
}

std::string_view visibility_name(Visibility v) {
  switch (v) {
    case Visibility::Visible: return "visible";
    case Visibility::Hidden: return "hidden";
    case Visibility::VeryHidden: return "veryHidden";
  }
  return "visible";
}

const Cell* Worksheet::find(int row, int col) const {
  const auto it = cells.find({row, col});
  return it == cells.end() ? nullptr : &it->second;
}

Cell& Worksheet::put(int row, int col, CellValue value,
                     std::optional<std::string> formula) {
  Cell cell;
  cell.addr.sheet = name;
  cell.addr.row = row;
  cell.addr.col = col;
  cell.value = std::move(value);
  cell.formula = std::move(formula);
  auto& slot = cells[{row, col}];
  slot = std::move(cell);
  return slot;
}

int Worksheet::max_row() const {
  return cells.empty() ? 0 : cells.rbegin()->first.first;
}

int Worksheet::max_col() const {
  int m = 0;
  for (const auto& [key, cell] : cells) m = std::max(m, key.second);
  return m;
}

const Worksheet* Workbook::find_sheet(std::string_view name) const {
  for (const auto& ws : sheets) {
    if (ws.name == name) return &ws;
  }
  return nullptr;
}

WorkbookStats compute_stats(const Workbook& wb) {
  WorkbookStats s;
  s.sheet_count = static_cast<int>(wb.sheets.size());
  s.external_link_count = static_cast<int>(wb.external_links.size());
  s.has_macros = wb.has_macros;
  std::set<std::string> functions;
  for (const auto& ws : wb.sheets) {
    for (const auto& [key, cell] : ws.cells) {
      if (cell.value.kind == ValueKind::Error) ++s.error_cell_count;
      if (!cell.formula) continue;
      ++s.formula_count;
      try {
        for (auto& f : formula_functions(*cell.formula)) functions.insert(std::move(f));
      } catch (const Error&) {
        // Unscannable formulas still count as formulas.
      }
    }
  }
  s.unique_function_count = static_cast<int>(functions.size());
  return s;
}

// ---------------------------------------------------------------------------
// Formula scanner
// ---------------------------------------------------------------------------

namespace {

using Kind = FormulaToken::Kind;

[[noreturn]] void bad_formula(std::string_view formula, std::size_t pos,
                              const std::string& why) {
  throw Error(ErrorCode::MalformedFormula,
              why + " in '" + std::string(formula) + "'", pos);
}

class Scanner {
 public:
  explicit Scanner(std::string_view f) : f_(f) {}

  std::vector<FormulaToken> run() {
    while (i_ < f_.size()) step();
    if (depth_ != 0) bad_formula(f_, i_, "unbalanced parentheses");
    return std::move(out_);
  }

 private:
  char peek(std::size_t ahead = 0) const {
    return i_ + ahead < f_.size() ? f_[i_ + ahead] : '\0';
  }

  void emit(Kind kind, std::size_t begin, std::size_t end) {
    FormulaToken t;
    t.kind = kind;
    t.text = std::string(f_.substr(begin, end - begin));
    out_.push_back(std::move(t));
  }

  void emit_ref(Kind kind, std::string_view text, const RefParts& p) {
    FormulaToken t;
    t.kind = kind;
    t.text = std::string(text);
    t.row = p.row;
    t.col = p.col;
    t.row_abs = p.row_abs;
    t.col_abs = p.col_abs;
    out_.push_back(std::move(t));
  }

  std::size_t run_end(std::size_t from) const {
    std::size_t j = from;
    while (j < f_.size() && is_ident_char(f_[j])) ++j;
    return j;
  }

  std::size_t scan_quoted(std::size_t from, char quote) const {
    std::size_t j = from + 1;
    while (j < f_.size()) {
      if (f_[j] == quote) {
        if (j + 1 < f_.size() && f_[j + 1] == quote) {
          j += 2;
          continue;
        }
        return j + 1;
      }
      ++j;
    }
    bad_formula(f_, from, quote == '"' ? "unterminated string literal"
                                       : "unterminated quoted sheet name");
  }

  std::size_t scan_brackets(std::size_t from) const {
    int depth = 0;
    std::size_t j = from;
    while (j < f_.size()) {
      if (f_[j] == '[') ++depth;
      if (f_[j] == ']' && --depth == 0) return j + 1;
      ++j;
    }
    bad_formula(f_, from, "unbalanced brackets");
  }

  // Emits a reference run [begin, end) as CellRef, or as one side of a
  // column/row range when `range_kind` says so. Returns false if the run is
  // not a reference.
  bool try_reference(std::size_t begin, std::size_t end) {
    const std::string_view run = f_.substr(begin, end - begin);
    const auto parts = match_ref(run);
    if (!parts) return false;
    if (parts->has_col && parts->has_row) {
      emit_ref(Kind::CellRef, run, *parts);
      return true;
    }
    // Whole-column or whole-row references only make sense inside a range.
    const bool before_colon = end < f_.size() && f_[end] == ':';
    const bool after_colon = begin > 0 && f_[begin - 1] == ':' &&
                             !out_.empty() &&
                             (out_.back().kind == Kind::Other && out_.back().text == ":");
    bool partner = false;
    if (before_colon) {
      const std::size_t nb = end + 1;
      const std::size_t ne = run_end(nb);
      if (auto other = match_ref(f_.substr(nb, ne - nb))) {
        partner = other->has_col == parts->has_col && other->has_row == parts->has_row;
      }
    } else if (after_colon && out_.size() >= 2) {
      const auto& prev = out_[out_.size() - 2];
      partner = (prev.kind == Kind::ColumnRef && parts->has_col) ||
                (prev.kind == Kind::RowRef && parts->has_row);
    }
    if (!partner) return false;
    emit_ref(parts->has_col ? Kind::ColumnRef : Kind::RowRef, run, *parts);
    return true;
  }

  // Handles what follows an external-book "[n]" or a sheet qualifier start.
  void step() {
    const std::size_t start = i_;
    const char c = f_[i_];
    if (c == '"') {
      i_ = scan_quoted(i_, '"');
      emit(Kind::String, start, i_);
      return;
    }
    if (c == '\'') {
      const std::size_t close = scan_quoted(i_, '\'');
      if (close >= f_.size() || f_[close] != '!') {
        bad_formula(f_, start, "quoted sheet name must be followed by '!'");
      }
      i_ = close + 1;
      const std::string_view inner = f_.substr(start + 1, close - start - 2);
      // ':' is illegal in sheet names, so inside quotes it marks a 3-D span.
      const auto bracket_end = inner.rfind(']');
      const std::string_view sheet_part =
          bracket_end == std::string_view::npos ? inner : inner.substr(bracket_end + 1);
      emit(sheet_part.find(':') != std::string_view::npos ? Kind::ThreeD : Kind::Prefix,
           start, i_);
      return;
    }
    if (c == '[') {
      const std::size_t close = scan_brackets(i_);
      const std::string_view inner = f_.substr(start + 1, close - start - 2);
      const bool book_index =
          !inner.empty() && std::all_of(inner.begin(), inner.end(), is_digit);
      if (!book_index) {
        i_ = close;
        emit(Kind::Structured, start, i_);
        return;
      }
      // "[1]Sheet1!" or "[1]!Name"
      if (close < f_.size() && f_[close] == '!') {
        i_ = close + 1;
        emit(Kind::Prefix, start, i_);
        return;
      }
      const std::size_t name_end = run_end(close);
      if (name_end > close && name_end < f_.size() && f_[name_end] == '!') {
        i_ = name_end + 1;
        emit(Kind::Prefix, start, i_);
        return;
      }
      if (name_end > close && name_end < f_.size() && f_[name_end] == ':') {
        const std::size_t second_end = run_end(name_end + 1);
        if (second_end < f_.size() && f_[second_end] == '!') {
          i_ = second_end + 1;
          emit(Kind::ThreeD, start, i_);
          return;
        }
      }
      i_ = name_end;
      emit(Kind::Name, start, i_);
      return;
    }
    if (c == '#') {
      for (auto lit : error_literals()) {
        if (f_.substr(i_, lit.size()) == lit ||
            iequals(f_.substr(i_, lit.size()), lit)) {
          i_ += lit.size();
          emit(Kind::ErrorLiteral, start, i_);
          return;
        }
      }
      ++i_;
      emit(Kind::Other, start, i_);
      return;
    }
    if (is_digit(c) || (c == '.' && is_digit(peek(1)))) {
      std::size_t j = i_;
      while (j < f_.size() && is_digit(f_[j])) ++j;
      // Pure digits adjacent to ':' form a row range such as 1:3.
      const bool all_digits = j == f_.size() || !(f_[j] == '.' || f_[j] == 'E' || f_[j] == 'e');
      if (all_digits && try_reference(i_, j)) {
        i_ = j;
        return;
      }
      if (j < f_.size() && f_[j] == '.') {
        ++j;
        while (j < f_.size() && is_digit(f_[j])) ++j;
      }
      if (j < f_.size() && (f_[j] == 'E' || f_[j] == 'e')) {
        std::size_t k = j + 1;
        if (k < f_.size() && (f_[k] == '+' || f_[k] == '-')) ++k;
        if (k < f_.size() && is_digit(f_[k])) {
          while (k < f_.size() && is_digit(f_[k])) ++k;
          j = k;
        }
      }
      i_ = j;
      emit(Kind::Number, start, i_);
      return;
    }
    if (is_ident_char(c)) {
      const std::size_t end = run_end(i_);
      const char next = end < f_.size() ? f_[end] : '\0';
      if (next == '(') {
        i_ = end;
        emit(Kind::Function, start, i_);
        return;
      }
      if (next == '!') {
        i_ = end + 1;
        emit(Kind::Prefix, start, i_);
        return;
      }
      if (next == '[') {
        i_ = scan_brackets(end);
        emit(Kind::Structured, start, i_);
        return;
      }
      if (next == ':') {
        const std::size_t second_end = run_end(end + 1);
        if (second_end > end + 1 && second_end < f_.size() && f_[second_end] == '!') {
          i_ = second_end + 1;
          emit(Kind::ThreeD, start, i_);
          return;
        }
      }
      if (try_reference(i_, end)) {
        i_ = end;
        return;
      }
      i_ = end;
      emit(Kind::Name, start, i_);
      return;
    }
    if (c == '(') ++depth_;
    if (c == ')' && --depth_ < 0) bad_formula(f_, i_, "unbalanced parentheses");
    ++i_;
    emit(Kind::Other, start, i_);
  }

  std::string_view f_;
  std::size_t i_ = 0;
  int depth_ = 0;
  std::vector<FormulaToken> out_;
};

std::string r1c1_component(char axis, int value, int origin, bool absolute) {
  std::string out(1, axis);
  if (absolute) return out + std::to_string(value);
  const int delta = value - origin;
  if (delta != 0) out += "[" + std::to_string(delta) + "]";
  return out;
}

}  // namespace

std::vector<FormulaToken> tokenize_formula(std::string_view formula) {
  if (!formula.empty() && formula.front() == '=') formula.remove_prefix(1);
  return Scanner(formula).run();
}

NormalizedFormula normalize_formula(std::string_view formula,
                                    const CellAddress& origin) {
  NormalizedFormula out;
  for (const auto& t : tokenize_formula(formula)) {
    switch (t.kind) {
      case Kind::CellRef:
        out.text += r1c1_component('R', t.row, origin.row, t.row_abs);
        out.text += r1c1_component('C', t.col, origin.col, t.col_abs);
        break;
      case Kind::ColumnRef:
        out.text += r1c1_component('C', t.col, origin.col, t.col_abs);
        break;
      case Kind::RowRef:
        out.text += r1c1_component('R', t.row, origin.row, t.row_abs);
        break;
      case Kind::ThreeD:
      case Kind::Structured:
        out.analyzable = false;
        out.text += t.text;
        break;
      default:
        out.text += t.text;
    }
  }
  if (!out.analyzable) {
    if (!formula.empty() && formula.front() == '=') formula.remove_prefix(1);
    out.text = std::string(formula);
  }
  return out;
}

std::string normalize_formula_r1c1(std::string_view formula,
                                   const CellAddress& origin) {
  return normalize_formula(formula, origin).text;
}

std::string shift_formula(std::string_view formula, int drow, int dcol) {
  std::string out;
  const auto tokens = tokenize_formula(formula);
  for (const auto& t : tokens) {
    if (t.kind != Kind::CellRef && t.kind != Kind::ColumnRef &&
        t.kind != Kind::RowRef) {
      out += t.text;
      continue;
    }
    const bool has_row = t.kind != Kind::ColumnRef;
    const bool has_col = t.kind != Kind::RowRef;
    const int row = has_row && !t.row_abs ? t.row + drow : t.row;
    const int col = has_col && !t.col_abs ? t.col + dcol : t.col;
    if ((has_row && (row < 1 || row > kMaxRows)) ||
        (has_col && (col < 1 || col > kMaxCols))) {
      out += "#REF!";
      continue;
    }
    if (has_col) {
      if (t.col_abs) out.push_back('$');
      out += column_label(col);
    }
    if (has_row) {
      if (t.row_abs) out.push_back('$');
      out += std::to_string(row);
    }
  }
  return out;
}

std::vector<std::string> formula_functions(std::string_view formula) {
  std::set<std::string> names;
  for (const auto& t : tokenize_formula(formula)) {
    if (t.kind != Kind::Function) continue;
    std::string name = to_upper(t.text);
    for (std::string_view prefix : {"_XLFN.", "_XLWS."}) {
      if (name.rfind(prefix, 0) == 0) name.erase(0, prefix.size());
    }
    names.insert(std::move(name));
  }
  return {names.begin(), names.end()};
}

}  // namespace sheetguard
