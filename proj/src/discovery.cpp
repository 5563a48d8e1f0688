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

#include "sheetguard/discovery.hpp"

#include <fcntl.h>
#include <pwd.h>
#include <sys/stat.h>

#include <algorithm>
#include <cctype>
#include <charconv>
#include <set>
#include <variant>

#include "json.hpp"
#include "sheetguard/error.hpp"
#include "sheetguard/ooxml.hpp"
#include "sheetguard/uri.hpp"

namespace sheetguard::discovery {

namespace fs = std::filesystem;
using nlohmann::json;

std::string_view file_kind_name(FileKind k) {
  switch (k) {
    case FileKind::Spreadsheet: return "Spreadsheet";
    case FileKind::MacroSpreadsheet: return "MacroSpreadsheet";
    case FileKind::AccessDb: return "AccessDb";
    case FileKind::Other: return "Other";
  }
  return "Other";
}

std::string_view parse_status_name(ParseStatus s) {
  switch (s) {
    case ParseStatus::Parsed: return "Parsed";
    case ParseStatus::MetadataOnly: return "MetadataOnly";
    case ParseStatus::Failed: return "Failed";
  }
  return "Failed";
}

FileKind kind_for_extension(std::string_view ext) {
  if (!ext.empty() && ext.front() == '.') ext.remove_prefix(1);
  const auto e = to_lower(ext);
  if (e == "xlsx") return FileKind::Spreadsheet;
  if (e == "xlsm") return FileKind::MacroSpreadsheet;
  if (e == "mdb" || e == "accdb") return FileKind::AccessDb;
  return FileKind::Other;
}

const std::vector<std::string>& field_catalog() {
  static const std::vector<std::string> kFields = {
      "uri",           "size_bytes",          "created",
      "modified",      "owner",               "kind",
      "parse_status",  "risk",                "sheet_count",
      "formula_count", "external_link_count", "unique_function_count",
      "error_cell_count", "has_macros",       "detail"};
  return kFields;
}

namespace {

enum class FieldType { Text, Integer, Time, Level, Boolean };

std::optional<FieldType> field_type(std::string_view f) {
  if (f == "uri" || f == "owner" || f == "kind" || f == "parse_status" || f == "detail") {
    return FieldType::Text;
  }
  if (f == "size_bytes" || f == "sheet_count" || f == "formula_count" ||
      f == "external_link_count" || f == "unique_function_count" || f == "error_cell_count" ||
      f == "year(created)" || f == "year(modified)") {
    return FieldType::Integer;
  }
  if (f == "created" || f == "modified") return FieldType::Time;
  if (f == "risk") return FieldType::Level;
  if (f == "has_macros") return FieldType::Boolean;
  return std::nullopt;
}

// ---------------------------------------------------------------------------
// Query parsing
// ---------------------------------------------------------------------------

struct Token {
  enum class Kind { Ident, Text, Integer, Op, LParen, RParen, End };
  Kind kind = Kind::End;
  std::string text;
  std::size_t offset = 0;
};

[[noreturn]] void syntax(std::string msg, std::size_t offset) {
  throw Error(ErrorCode::SyntaxError, std::move(msg) + " at offset " + std::to_string(offset),
              offset);
}

std::vector<Token> lex(std::string_view s) {
  std::vector<Token> out;
  std::size_t i = 0;
  while (i < s.size()) {
    const char c = s[i];
    if (std::isspace(static_cast<unsigned char>(c))) {
      ++i;
      continue;
    }
    const std::size_t start = i;
    if (c == '(' || c == ')') {
      out.push_back({c == '(' ? Token::Kind::LParen : Token::Kind::RParen, std::string(1, c), start});
      ++i;
    } else if (c == '"') {
      std::string text;
      ++i;
      bool closed = false;
      while (i < s.size()) {
        if (s[i] == '\\' && i + 1 < s.size()) {
          text.push_back(s[i + 1]);
          i += 2;
        } else if (s[i] == '"') {
          closed = true;
          ++i;
          break;
        } else {
          text.push_back(s[i++]);
        }
      }
      if (!closed) syntax("unterminated string", start);
      out.push_back({Token::Kind::Text, std::move(text), start});
    } else if (std::isdigit(static_cast<unsigned char>(c)) ||
               (c == '-' && i + 1 < s.size() && std::isdigit(static_cast<unsigned char>(s[i + 1])))) {
      ++i;
      while (i < s.size() && std::isdigit(static_cast<unsigned char>(s[i]))) ++i;
      out.push_back({Token::Kind::Integer, std::string(s.substr(start, i - start)), start});
    } else if (c == '=' || c == '!' || c == '<' || c == '>') {
      if (i + 1 < s.size() && s[i + 1] == '=') {
        out.push_back({Token::Kind::Op, std::string(s.substr(i, 2)), start});
        i += 2;
      } else if (c == '<' || c == '>') {
        out.push_back({Token::Kind::Op, std::string(1, c), start});
        ++i;
      } else {
        syntax(std::string("unexpected '") + c + "'", start);
      }
    } else if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
      while (i < s.size() && (std::isalnum(static_cast<unsigned char>(s[i])) || s[i] == '_')) ++i;
      std::string ident(s.substr(start, i - start));
      // year(created) and year(modified) lex as one field identifier.
      if (to_lower(ident) == "year") {
        std::size_t j = i;
        while (j < s.size() && std::isspace(static_cast<unsigned char>(s[j]))) ++j;
        if (j < s.size() && s[j] == '(') {
          const auto close = s.find(')', j);
          if (close == std::string_view::npos) syntax("unbalanced '('", j);
          std::string inner(s.substr(j + 1, close - j - 1));
          inner.erase(std::remove_if(inner.begin(), inner.end(),
                                     [](unsigned char ch) { return std::isspace(ch); }),
                      inner.end());
          ident = "year(" + inner + ")";
          i = close + 1;
        }
      }
      out.push_back({Token::Kind::Ident, std::move(ident), start});
    } else {
      syntax(std::string("unexpected '") + c + "'", start);
    }
  }
  out.push_back({Token::Kind::End, "", s.size()});
  return out;
}

Query node_of(Query::Node n) {
  Query q;
  q.node = n;
  return q;
}

class Parser {
 public:
  explicit Parser(std::vector<Token> tokens) : t_(std::move(tokens)) {}

  Query parse() {
    Query q = parse_or();
    if (peek().kind != Token::Kind::End) syntax("unexpected '" + peek().text + "'", peek().offset);
    return q;
  }

 private:
  const Token& peek() const { return t_[pos_]; }
  const Token& next() {
    const Token& t = t_[pos_];
    if (t.kind != Token::Kind::End) ++pos_;
    return t;
  }
  bool keyword(std::string_view kw) const {
    return peek().kind == Token::Kind::Ident && iequals(peek().text, kw);
  }

  Query parse_or() {
    Query left = parse_and();
    if (!keyword("OR")) return left;
    Query node = node_of(Query::Node::Or);
    node.children.push_back(std::move(left));
    while (keyword("OR")) {
      next();
      node.children.push_back(parse_and());
    }
    return node;
  }

  Query parse_and() {
    Query left = parse_not();
    if (!keyword("AND")) return left;
    Query node = node_of(Query::Node::And);
    node.children.push_back(std::move(left));
    while (keyword("AND")) {
      next();
      node.children.push_back(parse_not());
    }
    return node;
  }

  Query parse_not() {
    if (keyword("NOT")) {
      next();
      Query node = node_of(Query::Node::Not);
      node.children.push_back(parse_not());
      return node;
    }
    if (peek().kind == Token::Kind::LParen) {
      next();
      Query inner = parse_or();
      if (peek().kind != Token::Kind::RParen) syntax("expected ')'", peek().offset);
      next();
      return inner;
    }
    return parse_cmp();
  }

  Query parse_cmp() {
    const Token& f = next();
    if (f.kind != Token::Kind::Ident) syntax("expected a field name", f.offset);
    const auto type = field_type(f.text);
    if (!type) throw Error(ErrorCode::UnknownField, "unknown field '" + f.text + "'", f.offset);
    Query q = node_of(Query::Node::Compare);
    q.field = f.text;

    const Token& o = next();
    if (o.kind == Token::Kind::Op) {
      static const std::pair<const char*, Op> kOps[] = {{"==", Op::Eq}, {"!=", Op::Ne},
                                                         {"<", Op::Lt},  {"<=", Op::Le},
                                                         {">", Op::Gt},  {">=", Op::Ge}};
      for (const auto& [text, op] : kOps) {
        if (o.text == text) q.op = op;
      }
    } else if (o.kind == Token::Kind::Ident && iequals(o.text, "contains")) {
      q.op = Op::Contains;
    } else {
      syntax("expected a comparison operator", o.offset);
    }

    const Token& l = next();
    auto mismatch = [&] { syntax("literal does not fit field " + q.field, l.offset); };
    switch (l.kind) {
      case Token::Kind::Text:
        q.literal.kind = Literal::Kind::Text;
        q.literal.text = l.text;
        if (*type == FieldType::Time) {
          if (!parse_timestamp(l.text)) syntax("bad timestamp \"" + l.text + "\"", l.offset);
        } else if (*type != FieldType::Text) {
          mismatch();
        }
        break;
      case Token::Kind::Integer: {
        q.literal.kind = Literal::Kind::Integer;
        const auto* end = l.text.data() + l.text.size();
        if (std::from_chars(l.text.data(), end, q.literal.integer).ptr != end) {
          syntax("integer out of range", l.offset);
        }
        if (*type != FieldType::Integer) mismatch();
        break;
      }
      case Token::Kind::Ident:
        if (const auto level = risk::parse_level(l.text)) {
          q.literal.kind = Literal::Kind::Level;
          q.literal.level = *level;
          if (*type != FieldType::Level) mismatch();
        } else if (l.text == "true" || l.text == "false") {
          q.literal.kind = Literal::Kind::Boolean;
          q.literal.boolean = l.text == "true";
          if (*type != FieldType::Boolean) mismatch();
        } else {
          syntax("expected a literal", l.offset);
        }
        break;
      default:
        syntax("expected a literal", l.offset);
    }
    if (q.op == Op::Contains && *type != FieldType::Text) {
      syntax("contains applies to text fields only", o.offset);
    }
    return q;
  }

  std::vector<Token> t_;
  std::size_t pos_ = 0;
};

// ---------------------------------------------------------------------------
// Evaluation
// ---------------------------------------------------------------------------

using Value = std::variant<std::monostate, std::string, std::int64_t, Timestamp, risk::Level, bool>;

Value field_value(const InventoryRecord& r, std::string_view f) {
  if (f == "uri") return r.uri;
  if (f == "owner") return r.owner;
  if (f == "kind") return std::string(file_kind_name(r.kind));
  if (f == "parse_status") return std::string(parse_status_name(r.parse_status));
  if (f == "detail") return r.detail;
  if (f == "size_bytes") return r.size_bytes;
  if (f == "created") return r.created;
  if (f == "modified") return r.modified;
  if (f == "year(created)") return static_cast<std::int64_t>(year_of(r.created));
  if (f == "year(modified)") return static_cast<std::int64_t>(year_of(r.modified));
  if (f == "risk") return r.risk ? Value{*r.risk} : Value{};
  if (!r.stats) return {};
  const auto& s = *r.stats;
  if (f == "sheet_count") return static_cast<std::int64_t>(s.sheet_count);
  if (f == "formula_count") return static_cast<std::int64_t>(s.formula_count);
  if (f == "external_link_count") return static_cast<std::int64_t>(s.external_link_count);
  if (f == "unique_function_count") return static_cast<std::int64_t>(s.unique_function_count);
  if (f == "error_cell_count") return static_cast<std::int64_t>(s.error_cell_count);
  if (f == "has_macros") return s.has_macros;
  return {};
}

template <typename T>
bool compare(const T& a, Op op, const T& b) {
  switch (op) {
    case Op::Eq: return a == b;
    case Op::Ne: return a != b;
    case Op::Lt: return a < b;
    case Op::Le: return a <= b;
    case Op::Gt: return a > b;
    case Op::Ge: return a >= b;
    case Op::Contains: return false;
  }
  return false;
}

bool eval_compare(const InventoryRecord& r, const Query& q) {
  const Value v = field_value(r, q.field);
  const Literal& l = q.literal;
  if (const auto* s = std::get_if<std::string>(&v)) {
    if (q.op == Op::Contains) return s->find(l.text) != std::string::npos;
    return compare(*s, q.op, l.text);
  }
  if (const auto* i = std::get_if<std::int64_t>(&v)) return compare(*i, q.op, l.integer);
  if (const auto* t = std::get_if<Timestamp>(&v)) {
    const auto lit = parse_timestamp(l.text);
    return lit && compare(*t, q.op, *lit);
  }
  if (const auto* lv = std::get_if<risk::Level>(&v)) return compare(*lv, q.op, l.level);
  if (const auto* b = std::get_if<bool>(&v)) return compare(*b, q.op, l.boolean);
  return false;
}

// ---------------------------------------------------------------------------
// Filesystem metadata
// ---------------------------------------------------------------------------

struct FileMeta {
  std::int64_t size = 0;
  Timestamp created{};
  Timestamp modified{};
  std::string owner = "unknown";
};

FileMeta file_meta(const fs::path& p) {
  FileMeta m;
  struct statx sx {};
  if (statx(AT_FDCWD, p.c_str(), 0, STATX_BASIC_STATS | STATX_BTIME, &sx) != 0) {
    throw Error(ErrorCode::IoError, "cannot stat " + p.string());
  }
  m.size = static_cast<std::int64_t>(sx.stx_size);
  m.modified = Timestamp{std::chrono::seconds{sx.stx_mtime.tv_sec}};
  m.created = (sx.stx_mask & STATX_BTIME) ? Timestamp{std::chrono::seconds{sx.stx_btime.tv_sec}}
                                          : m.modified;
  if (const passwd* pw = getpwuid(sx.stx_uid)) m.owner = pw->pw_name;
  return m;
}

bool hidden(const fs::path& p) {
  const auto name = p.filename().string();
  return !name.empty() && name.front() == '.' && name != "." && name != "..";
}

fs::path root_path(const std::string& root) {
  if (root.rfind("file:", 0) == 0) {
    if (auto p = uri::to_path(uri::normalize(root))) return *p;
  }
  return fs::path(root);
}

std::vector<std::string> row_values(const InventoryRecord& r) {
  auto stat = [&](int WorkbookStats::*m) {
    return r.stats ? std::to_string((*r.stats).*m) : std::string();
  };
  return {r.uri,
          std::to_string(r.size_bytes),
          format_timestamp(r.created),
          format_timestamp(r.modified),
          r.owner,
          std::string(file_kind_name(r.kind)),
          std::string(parse_status_name(r.parse_status)),
          r.risk ? std::string(risk::level_name(*r.risk)) : std::string(),
          stat(&WorkbookStats::sheet_count),
          stat(&WorkbookStats::formula_count),
          stat(&WorkbookStats::external_link_count),
          stat(&WorkbookStats::unique_function_count),
          stat(&WorkbookStats::error_cell_count),
          r.stats ? (r.stats->has_macros ? "true" : "false") : std::string(),
          r.detail};
}

std::int64_t to_int(const std::string& s) {
  std::int64_t v = 0;
  const auto* end = s.data() + s.size();
  if (s.empty() || std::from_chars(s.data(), end, v).ptr != end) {
    throw Error(ErrorCode::SyntaxError, "bad integer '" + s + "' in inventory");
  }
  return v;
}

Timestamp to_time(const std::string& s) {
  const auto t = parse_timestamp(s);
  if (!t) throw Error(ErrorCode::SyntaxError, "bad timestamp '" + s + "' in inventory");
  return *t;
}

FileKind to_kind(const std::string& s) {
  for (auto k : {FileKind::Spreadsheet, FileKind::MacroSpreadsheet, FileKind::AccessDb,
                 FileKind::Other}) {
    if (file_kind_name(k) == s) return k;
  }
  throw Error(ErrorCode::SyntaxError, "bad kind '" + s + "' in inventory");
}

ParseStatus to_status(const std::string& s) {
  for (auto k : {ParseStatus::Parsed, ParseStatus::MetadataOnly, ParseStatus::Failed}) {
    if (parse_status_name(k) == s) return k;
  }
  throw Error(ErrorCode::SyntaxError, "bad parse_status '" + s + "' in inventory");
}

InventoryRecord from_row(const std::vector<std::string>& v) {
  if (v.size() != field_catalog().size()) {
    throw Error(ErrorCode::SyntaxError, "inventory row has " + std::to_string(v.size()) +
                                            " fields, expected " +
                                            std::to_string(field_catalog().size()));
  }
  InventoryRecord r;
  r.uri = v[0];
  r.size_bytes = to_int(v[1]);
  r.created = to_time(v[2]);
  r.modified = to_time(v[3]);
  r.owner = v[4];
  r.kind = to_kind(v[5]);
  r.parse_status = to_status(v[6]);
  if (!v[7].empty()) {
    r.risk = risk::parse_level(v[7]);
    if (!r.risk) throw Error(ErrorCode::SyntaxError, "bad risk '" + v[7] + "' in inventory");
  }
  if (!v[8].empty()) {
    WorkbookStats s;
    s.sheet_count = static_cast<int>(to_int(v[8]));
    s.formula_count = static_cast<int>(to_int(v[9]));
    s.external_link_count = static_cast<int>(to_int(v[10]));
    s.unique_function_count = static_cast<int>(to_int(v[11]));
    s.error_cell_count = static_cast<int>(to_int(v[12]));
    s.has_macros = v[13] == "true";
    r.stats = s;
  }
  r.detail = v[14];
  return r;
}

}  // namespace

Query parse_query(std::string_view text) { return Parser(lex(text)).parse(); }

bool matches(const InventoryRecord& r, const Query& q) {
  switch (q.node) {
    case Query::Node::Compare: return eval_compare(r, q);
    case Query::Node::And:
      return std::all_of(q.children.begin(), q.children.end(),
                         [&](const Query& c) { return matches(r, c); });
    case Query::Node::Or:
      return std::any_of(q.children.begin(), q.children.end(),
                         [&](const Query& c) { return matches(r, c); });
    case Query::Node::Not: return !matches(r, q.children.at(0));
  }
  return false;
}

InventoryRecord inspect_file(const fs::path& path, const std::optional<risk::RiskConfig>& rc) {
  InventoryRecord r;
  r.uri = uri::from_path(path);
  r.kind = kind_for_extension(path.extension().string());
  try {
    const auto meta = file_meta(path);
    r.size_bytes = meta.size;
    r.created = meta.created;
    r.modified = meta.modified;
    r.owner = meta.owner;
  } catch (const Error& e) {
    r.parse_status = ParseStatus::Failed;
    r.detail = e.what();
    return r;
  }
  if (r.kind != FileKind::Spreadsheet && r.kind != FileKind::MacroSpreadsheet) {
    r.parse_status = ParseStatus::MetadataOnly;
    return r;
  }
  try {
    const auto wb = ooxml::read_package(read_file(path), r.uri);
    r.stats = compute_stats(wb);
    r.parse_status = ParseStatus::Parsed;
    // Document properties carry the "date last saved" users search by.
    if (wb.created) r.created = *wb.created;
    if (wb.modified) r.modified = *wb.modified;
    if (rc) r.risk = risk::score(wb, risk::diagnose(wb), *rc).rating;
  } catch (const Error& e) {
    r.parse_status = ParseStatus::Failed;
    r.detail = e.what();
  }
  return r;
}

std::vector<InventoryRecord> scan(const ScanOptions& opts) {
  if (opts.risk) opts.risk->validate();
  std::set<std::string> exts;
  for (const auto& e : opts.extensions) {
    exts.insert(to_lower(!e.empty() && e.front() == '.' ? e.substr(1) : e));
  }
  std::vector<fs::path> files;
  for (const auto& root : opts.roots) {
    const auto base = root_path(root);
    std::error_code ec;
    if (!fs::is_directory(base, ec)) {
      throw Error(ErrorCode::RootNotFound, "scan root not found: " + root);
    }
    fs::recursive_directory_iterator it(base, fs::directory_options::skip_permission_denied, ec);
    if (ec) throw Error(ErrorCode::RootNotFound, "cannot read scan root: " + root);
    for (const fs::recursive_directory_iterator end; it != end; it.increment(ec)) {
      if (ec) break;
      const auto& p = it->path();
      if (!opts.include_hidden && hidden(p)) {
        if (it->is_directory(ec)) it.disable_recursion_pending();
        continue;
      }
      if (!it->is_regular_file(ec)) continue;
      auto ext = p.extension().string();
      if (!ext.empty()) ext.erase(0, 1);
      if (exts.count(to_lower(ext))) files.push_back(p);
    }
  }
  std::vector<InventoryRecord> out;
  std::set<std::string> seen;
  for (const auto& f : files) {
    auto rec = inspect_file(f, opts.risk);
    if (!seen.insert(rec.uri).second) continue;  // overlapping roots
    if (opts.query && !matches(rec, *opts.query)) continue;
    out.push_back(std::move(rec));
  }
  std::sort(out.begin(), out.end(),
            [](const InventoryRecord& a, const InventoryRecord& b) { return a.uri < b.uri; });
  return out;
}

std::string export_inventory(const std::vector<InventoryRecord>& records, Format format) {
  const auto& fields = field_catalog();
  if (format == Format::Csv) {
    std::string out = csv_row(fields);
    for (const auto& r : records) out += csv_row(row_values(r));
    return out;
  }
  json arr = json::array();
  for (const auto& r : records) {
    json o = json::object();
    o["uri"] = r.uri;
    o["size_bytes"] = r.size_bytes;
    o["created"] = format_timestamp(r.created);
    o["modified"] = format_timestamp(r.modified);
    o["owner"] = r.owner;
    o["kind"] = file_kind_name(r.kind);
    o["parse_status"] = parse_status_name(r.parse_status);
    o["risk"] = r.risk ? json(risk::level_name(*r.risk)) : json(nullptr);
    if (r.stats) {
      o["sheet_count"] = r.stats->sheet_count;
      o["formula_count"] = r.stats->formula_count;
      o["external_link_count"] = r.stats->external_link_count;
      o["unique_function_count"] = r.stats->unique_function_count;
      o["error_cell_count"] = r.stats->error_cell_count;
      o["has_macros"] = r.stats->has_macros;
    } else {
      for (const char* f : {"sheet_count", "formula_count", "external_link_count",
                            "unique_function_count", "error_cell_count", "has_macros"}) {
        o[f] = nullptr;
      }
    }
    o["detail"] = r.detail;
    arr.push_back(std::move(o));
  }
  // nlohmann orders keys alphabetically; re-emit in catalog order.
  std::string out = "[";
  for (std::size_t i = 0; i < arr.size(); ++i) {
    out += i ? ",\n  {" : "\n  {";
    for (std::size_t k = 0; k < fields.size(); ++k) {
      out += (k ? ", " : "") + json(fields[k]).dump() + ": " + arr[i][fields[k]].dump();
    }
    out += "}";
  }
  out += records.empty() ? "]\n" : "\n]\n";
  return out;
}

std::vector<std::vector<std::string>> parse_csv(std::string_view text) {
  std::vector<std::vector<std::string>> rows;
  std::vector<std::string> row;
  std::string field;
  bool quoted = false, in_row = false;
  std::size_t i = 0;
  auto end_row = [&] {
    row.push_back(std::move(field));
    field.clear();
    rows.push_back(std::move(row));
    row.clear();
    in_row = false;
  };
  while (i < text.size()) {
    const char c = text[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < text.size() && text[i + 1] == '"') {
          field += '"';
          i += 2;
          continue;
        }
        quoted = false;
      } else {
        field += c;
      }
      ++i;
      continue;
    }
    in_row = true;
    if (c == '"') {
      if (!field.empty()) throw Error(ErrorCode::SyntaxError, "stray quote in CSV", i);
      quoted = true;
    } else if (c == ',') {
      row.push_back(std::move(field));
      field.clear();
    } else if (c == '\r' && i + 1 < text.size() && text[i + 1] == '\n') {
      end_row();
      ++i;
    } else if (c == '\n') {
      end_row();
    } else {
      field += c;
    }
    ++i;
  }
  if (quoted) throw Error(ErrorCode::SyntaxError, "unterminated quoted CSV field", i);
  if (in_row) end_row();
  return rows;
}

std::vector<InventoryRecord> import_inventory(std::string_view text, Format format) {
  std::vector<InventoryRecord> out;
  if (format == Format::Csv) {
    const auto rows = parse_csv(text);
    if (rows.empty() || rows[0] != field_catalog()) {
      throw Error(ErrorCode::SyntaxError, "inventory CSV header does not match the field catalog");
    }
    for (std::size_t i = 1; i < rows.size(); ++i) out.push_back(from_row(rows[i]));
    return out;
  }
  json arr;
  try {
    arr = json::parse(text);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::SyntaxError, std::string("inventory JSON: ") + e.what());
  }
  if (!arr.is_array()) throw Error(ErrorCode::SyntaxError, "inventory JSON must be an array");
  for (const auto& o : arr) {
    std::vector<std::string> v;
    for (const auto& f : field_catalog()) {
      if (!o.contains(f) || o[f].is_null()) {
        v.emplace_back();
      } else if (o[f].is_string()) {
        v.push_back(o[f].get<std::string>());
      } else if (o[f].is_boolean()) {
        v.push_back(o[f].get<bool>() ? "true" : "false");
      } else {
        v.push_back(o[f].dump());
      }
    }
    out.push_back(from_row(v));
  }
  return out;
}

}  // namespace sheetguard::discovery
