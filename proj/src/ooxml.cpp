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

#include "sheetguard/ooxml.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <set>

#include "sheetguard/error.hpp"
#include "sheetguard/uri.hpp"
#include "sheetguard/xml.hpp"
#include "sheetguard/zip.hpp"

namespace sheetguard::ooxml {

namespace {

constexpr std::string_view kContentTypes = "[Content_Types].xml";
constexpr std::string_view kDefaultWorkbook = "xl/workbook.xml";
constexpr std::string_view kLinkDir = "xl/externalLinks/";

struct Relationship {
  std::string id;
  std::string type;
  std::string target;
  bool external = false;
};

bool ends_with(std::string_view s, std::string_view suffix) {
  return s.size() >= suffix.size() && s.substr(s.size() - suffix.size()) == suffix;
}

std::string part_dir(std::string_view part) {
  const auto slash = part.rfind('/');
  return slash == std::string_view::npos ? "" : std::string(part.substr(0, slash + 1));
}

std::string rels_part_for(std::string_view part) {
  const auto slash = part.rfind('/');
  if (slash == std::string_view::npos) return "_rels/" + std::string(part) + ".rels";
  return std::string(part.substr(0, slash + 1)) + "_rels/" +
         std::string(part.substr(slash + 1)) + ".rels";
}

// Resolves an internal relationship target to a part name.
std::string resolve_part(std::string_view source_part, std::string_view target) {
  if (!target.empty() && target.front() == '/') return std::string(target.substr(1));
  std::vector<std::string> segs;
  for (auto& s : split(part_dir(source_part) + std::string(target), '/')) {
    if (s.empty() || s == ".") continue;
    if (s == "..") {
      if (!segs.empty()) segs.pop_back();
      continue;
    }
    segs.push_back(std::move(s));
  }
  std::string out;
  for (std::size_t i = 0; i < segs.size(); ++i) {
    if (i) out += '/';
    out += segs[i];
  }
  return out;
}

class Package {
 public:
  explicit Package(std::string_view bytes) : zip_(zip::Archive::parse(Bytes(bytes))) {
    if (!zip_.contains(kContentTypes)) {
      throw Error(ErrorCode::NotASpreadsheet, "missing [Content_Types].xml");
    }
    workbook_part_ = std::string(kDefaultWorkbook);
    if (zip_.contains("_rels/.rels")) {
      for (const auto& r : relationships("_rels/.rels")) {
        if (ends_with(r.type, "/officeDocument") && !r.external) {
          workbook_part_ = resolve_part("", r.target);
          break;
        }
      }
    }
    if (!zip_.contains(workbook_part_)) {
      throw Error(ErrorCode::NotASpreadsheet, "missing workbook part " + workbook_part_);
    }
  }

  const zip::Archive& archive() const { return zip_; }
  const std::string& workbook_part() const { return workbook_part_; }

  Bytes read(std::string_view part) const { return zip_.read(part); }

  xml::Element xml(std::string_view part) const { return xml::parse(read(part), part); }

  std::vector<Relationship> relationships(std::string_view rels_part) const {
    std::vector<Relationship> out;
    if (!zip_.contains(rels_part)) return out;
    const auto root = xml(rels_part);
    for (const auto* rel : root.children_named("Relationship")) {
      Relationship r;
      r.id = rel->attr("Id").value_or("");
      r.type = rel->attr("Type").value_or("");
      r.target = rel->attr("Target").value_or("");
      r.external = rel->attr("TargetMode").value_or("") == "External";
      out.push_back(std::move(r));
    }
    return out;
  }

  std::vector<LinkPart> link_parts(const xml::Element& workbook) const {
    std::vector<LinkPart> out;
    std::set<std::string> seen;
    const auto rels = relationships(rels_part_for(workbook_part_));
    if (const auto* refs = workbook.child("externalReferences")) {
      for (const auto* ref : refs->children_named("externalReference")) {
        const auto id = ref->attr("id");
        if (!id) continue;
        for (const auto& r : rels) {
          if (r.id != *id || r.external) continue;
          const auto part = resolve_part(workbook_part_, r.target);
          if (zip_.contains(part) && seen.insert(part).second) {
            out.push_back({part, rels_part_for(part)});
          }
        }
      }
    }
    // Link parts the workbook does not reference, in numeric order.
    std::vector<std::pair<long, std::string>> stray;
    for (const auto& e : zip_.entries()) {
      const std::string_view n = e.name;
      if (n.substr(0, kLinkDir.size()) != kLinkDir || !ends_with(n, ".xml")) continue;
      const std::string_view file = n.substr(kLinkDir.size());
      if (file.find('/') != std::string_view::npos || seen.count(e.name)) continue;
      long number = 0;
      for (char c : file) {
        if (std::isdigit(static_cast<unsigned char>(c))) number = number * 10 + (c - '0');
      }
      stray.emplace_back(number, e.name);
    }
    std::sort(stray.begin(), stray.end());
    for (auto& [num, part] : stray) out.push_back({part, rels_part_for(part)});
    for (const auto& lp : out) {
      if (!zip_.contains(lp.rels_part)) {
        throw Error(ErrorCode::CorruptPart, lp.part + ": missing relationship part");
      }
    }
    return out;
  }

 private:
  zip::Archive zip_;
  std::string workbook_part_;
};

// The relationship carrying the external book's location.
struct LinkRelationship {
  Relationship rel;
  const xml::Element* element = nullptr;
};

LinkRelationship pick_link_relationship(const xml::Element& rels_root,
                                        const std::string& part) {
  const xml::Element* chosen = nullptr;
  for (const auto* rel : rels_root.children_named("Relationship")) {
    const auto type = rel->attr("Type").value_or("");
    if (type.find("externalLinkPath") != std::string::npos ||
        type.find("xlPathMissing") != std::string::npos) {
      chosen = rel;
      break;
    }
    if (!chosen) chosen = rel;
  }
  if (!chosen) throw Error(ErrorCode::CorruptPart, part + ": no relationship");
  LinkRelationship out;
  out.element = chosen;
  out.rel.id = chosen->attr("Id").value_or("");
  out.rel.type = chosen->attr("Type").value_or("");
  out.rel.target = chosen->attr("Target").value_or("");
  out.rel.external = chosen->attr("TargetMode").value_or("") == "External";
  return out;
}

std::vector<ExternalLink> read_links(const Package& pkg, const xml::Element& workbook) {
  std::vector<ExternalLink> out;
  int index = 1;
  for (const auto& lp : pkg.link_parts(workbook)) {
    const auto root = pkg.xml(lp.rels_part);
    const auto link = pick_link_relationship(root, lp.rels_part);
    out.push_back({index++, link.rel.target,
                   link.rel.external ? LinkMode::External : LinkMode::Internal});
  }
  return out;
}

// --- styles ----------------------------------------------------------------

struct CellStyle {
  std::optional<std::string> font_color;
  std::optional<std::string> fill_color;
  std::optional<std::string> number_format;
};

std::optional<std::string> builtin_format(int id) {
  switch (id) {
    case 1: return "0";
    case 2: return "0.00";
    case 3: return "#,##0";
    case 4: return "#,##0.00";
    case 9: return "0%";
    case 10: return "0.00%";
    case 11: return "0.00E+00";
    case 12: return "# ?/?";
    case 13: return "# ?\?/??";
    case 14: return "mm-dd-yy";
    case 15: return "d-mmm-yy";
    case 16: return "d-mmm";
    case 17: return "mmm-yy";
    case 18: return "h:mm AM/PM";
    case 19: return "h:mm:ss AM/PM";
    case 20: return "h:mm";
    case 21: return "h:mm:ss";
    case 22: return "m/d/yy h:mm";
    case 37: return "#,##0 ;(#,##0)";
    case 38: return "#,##0 ;[Red](#,##0)";
    case 39: return "#,##0.00;(#,##0.00)";
    case 40: return "#,##0.00;[Red](#,##0.00)";
    case 45: return "mm:ss";
    case 46: return "[h]:mm:ss";
    case 47: return "mmss.0";
    case 48: return "##0.0E+0";
    case 49: return "@";
    default: return std::nullopt;
  }
}

int to_int(const std::optional<std::string>& s, int fallback = 0) {
  if (!s) return fallback;
  int v = fallback;
  const auto res = std::from_chars(s->data(), s->data() + s->size(), v);
  return res.ec == std::errc() ? v : fallback;
}

std::optional<std::string> resolve_color(const xml::Element* color) {
  if (!color) return std::nullopt;
  if (auto rgb = color->attr("rgb")) {
    std::string v = to_upper(*rgb);
    if (v.size() == 6) v = "FF" + v;
    return v;
  }
  if (auto theme = color->attr("theme")) {
    const auto& pal = default_theme_palette();
    const int i = to_int(theme, -1);
    if (i >= 0 && i < static_cast<int>(pal.size())) return pal[static_cast<std::size_t>(i)];
    return std::nullopt;
  }
  if (auto indexed = color->attr("indexed")) {
    const int i = to_int(indexed, -1);
    const auto& pal = indexed_palette();
    if (i >= 0 && i < static_cast<int>(pal.size())) return pal[static_cast<std::size_t>(i)];
    if (i == 64) return "FF000000";  // system foreground
    if (i == 65) return "FFFFFFFF";  // system background
  }
  return std::nullopt;
}

std::vector<CellStyle> read_styles(const xml::Element& root) {
  std::map<int, std::string> custom_formats;
  if (const auto* fmts = root.child("numFmts")) {
    for (const auto* f : fmts->children_named("numFmt")) {
      custom_formats[to_int(f->attr("numFmtId"))] = f->attr("formatCode").value_or("");
    }
  }
  std::vector<std::optional<std::string>> font_colors;
  if (const auto* fonts = root.child("fonts")) {
    for (const auto* f : fonts->children_named("font")) {
      font_colors.push_back(resolve_color(f->child("color")));
    }
  }
  std::vector<std::optional<std::string>> fill_colors;
  if (const auto* fills = root.child("fills")) {
    for (const auto* f : fills->children_named("fill")) {
      std::optional<std::string> color;
      if (const auto* pattern = f->child("patternFill")) {
        const auto type = pattern->attr("patternType").value_or("none");
        if (type != "none") color = resolve_color(pattern->child("fgColor"));
      }
      fill_colors.push_back(color);
    }
  }
  std::vector<CellStyle> out;
  if (const auto* xfs = root.child("cellXfs")) {
    for (const auto* xf : xfs->children_named("xf")) {
      CellStyle s;
      const auto font = static_cast<std::size_t>(to_int(xf->attr("fontId")));
      const auto fill = static_cast<std::size_t>(to_int(xf->attr("fillId")));
      const int fmt = to_int(xf->attr("numFmtId"));
      if (font < font_colors.size()) s.font_color = font_colors[font];
      if (fill < fill_colors.size()) s.fill_color = fill_colors[fill];
      if (const auto it = custom_formats.find(fmt); it != custom_formats.end()) {
        s.number_format = it->second;
      } else {
        s.number_format = builtin_format(fmt);
      }
      out.push_back(std::move(s));
    }
  }
  return out;
}

// --- cells -----------------------------------------------------------------

// Text of a shared-string item or inline string with rich-text runs
// flattened; phonetic runs are dropped.
std::string string_item_text(const xml::Element& si) {
  std::string out;
  for (const auto& c : si.children) {
    if (c.name == "t") {
      out += c.text;
    } else if (c.name == "r") {
      for (const auto* t : c.children_named("t")) out += t->text;
    }
  }
  return out;
}

std::vector<std::string> read_shared_strings(const xml::Element& root) {
  std::vector<std::string> out;
  for (const auto* si : root.children_named("si")) out.push_back(string_item_text(*si));
  return out;
}

std::optional<double> parse_double(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  double v = 0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size()) return std::nullopt;
  return v;
}

struct SharedFormula {
  std::string text;
  int row = 0;
  int col = 0;
};

void read_sheet(const xml::Element& root, Worksheet& ws,
                const std::vector<std::string>& shared_strings,
                const std::vector<CellStyle>& styles, const std::string& part) {
  const auto* data = root.child("sheetData");
  if (!data) return;
  std::map<std::string, SharedFormula> shared;
  int row_number = 0;
  for (const auto* row : data->children_named("row")) {
    row_number = to_int(row->attr("r"), row_number + 1);
    int col_number = 0;
    for (const auto* c : row->children_named("c")) {
      int r = row_number;
      int col = col_number + 1;
      if (auto ref = c->attr("r")) {
        try {
          const auto addr = parse_a1(*ref);
          r = addr.row;
          col = addr.col;
        } catch (const Error&) {
          throw Error(ErrorCode::CorruptPart, part + ": bad cell reference " + *ref);
        }
      }
      col_number = col;

      std::optional<std::string> formula;
      if (const auto* f = c->child("f")) {
        const auto type = f->attr("t").value_or("normal");
        if (type == "shared") {
          const auto si = f->attr("si").value_or("");
          if (!f->text.empty() || !shared.count(si)) {
            shared[si] = {f->text, r, col};
            formula = f->text;
          } else {
            const auto& master = shared[si];
            try {
              formula = shift_formula(master.text, r - master.row, col - master.col);
            } catch (const Error&) {
              formula = master.text;
            }
          }
        } else {
          formula = f->text;
        }
      }

      CellValue value;
      const auto type = c->attr("t").value_or("n");
      const xml::Element* v = c->child("v");
      if (type == "inlineStr") {
        if (const auto* is = c->child("is")) value = CellValue::of_text(string_item_text(*is));
      } else if (v) {
        if (type == "s") {
          const auto idx = static_cast<std::size_t>(to_int(v->text, -1));
          if (idx >= shared_strings.size()) {
            throw Error(ErrorCode::CorruptPart, part + ": shared string index out of range");
          }
          value = CellValue::of_text(shared_strings[idx]);
        } else if (type == "str" || type == "d") {
          value = CellValue::of_text(v->text);
        } else if (type == "b") {
          value = CellValue::of_bool(v->text == "1" || iequals(v->text, "true"));
        } else if (type == "e") {
          value = is_error_literal(v->text) ? CellValue::of_error(v->text)
                                            : CellValue::of_text(v->text);
        } else {
          const auto num = parse_double(v->text);
          if (!num) throw Error(ErrorCode::CorruptPart, part + ": bad number " + v->text);
          value = CellValue::of_number(*num);
        }
      }
      if (value.is_empty() && !formula) continue;

      Cell& cell = ws.put(r, col, std::move(value), std::move(formula));
      const auto s = static_cast<std::size_t>(to_int(c->attr("s")));
      if (s < styles.size()) {
        cell.font_color = styles[s].font_color;
        cell.fill_color = styles[s].fill_color;
        cell.number_format = styles[s].number_format;
      }
    }
  }
}

void read_core_properties(const Package& pkg, Workbook& wb) {
  std::string part = "docProps/core.xml";
  for (const auto& r : pkg.relationships("_rels/.rels")) {
    if (ends_with(r.type, "/core-properties") && !r.external) {
      part = resolve_part("", r.target);
    }
  }
  if (!pkg.archive().contains(part)) return;
  const auto root = pkg.xml(part);
  for (const auto& c : root.children) {
    if (c.name == "created") wb.created = parse_timestamp(c.text);
    if (c.name == "modified") wb.modified = parse_timestamp(c.text);
    if (c.name == "creator") wb.creator = c.text;
    if (c.name == "lastModifiedBy") wb.last_modified_by = c.text;
  }
}

// Finds the Target attribute value inside a raw start tag; returns the span
// of the value between its quotes.
std::optional<std::pair<std::size_t, std::size_t>> find_target_value(std::string_view tag) {
  std::size_t pos = 0;
  while ((pos = tag.find("Target", pos)) != std::string_view::npos) {
    const bool boundary = pos > 0 && std::isspace(static_cast<unsigned char>(tag[pos - 1]));
    std::size_t i = pos + 6;
    while (i < tag.size() && std::isspace(static_cast<unsigned char>(tag[i]))) ++i;
    if (boundary && i < tag.size() && tag[i] == '=') {
      ++i;
      while (i < tag.size() && std::isspace(static_cast<unsigned char>(tag[i]))) ++i;
      if (i < tag.size() && (tag[i] == '"' || tag[i] == '\'')) {
        const char quote = tag[i];
        const auto close = tag.find(quote, i + 1);
        if (close != std::string_view::npos) return std::make_pair(i + 1, close);
      }
    }
    pos += 6;
  }
  return std::nullopt;
}

}  // namespace

const std::vector<std::string>& default_theme_palette() {
  // Office default theme in SpreadsheetML index order (lt1, dk1, lt2, dk2,
  // accent1-6, hlink, folHlink).
  static const std::vector<std::string> kPalette = {
      "FFFFFFFF", "FF000000", "FFEEECE1", "FF1F497D", "FF4F81BD", "FFC0504D",
      "FF9BBB59", "FF8064A2", "FF4BACC6", "FFF79646", "FF0000FF", "FF800080"};
  return kPalette;
}

const std::vector<std::string>& indexed_palette() {
  static const std::vector<std::string> kPalette = {
      "FF000000", "FFFFFFFF", "FFFF0000", "FF00FF00", "FF0000FF", "FFFFFF00",
      "FFFF00FF", "FF00FFFF", "FF000000", "FFFFFFFF", "FFFF0000", "FF00FF00",
      "FF0000FF", "FFFFFF00", "FFFF00FF", "FF00FFFF", "FF800000", "FF008000",
      "FF000080", "FF808000", "FF800080", "FF008080", "FFC0C0C0", "FF808080",
      "FF9999FF", "FF993366", "FFFFFFCC", "FFCCFFFF", "FF660066", "FFFF8080",
      "FF0066CC", "FFCCCCFF", "FF000080", "FFFF00FF", "FFFFFF00", "FF00FFFF",
      "FF800080", "FF800000", "FF008080", "FF0000FF", "FF00CCFF", "FFCCFFFF",
      "FFCCFFCC", "FFFFFF99", "FF99CCFF", "FFFF99CC", "FFCC99FF", "FFFFCC99",
      "FF3366FF", "FF33CCCC", "FF99CC00", "FFFFCC00", "FFFF9900", "FFFF6600",
      "FF666699", "FF969696", "FF003366", "FF339966", "FF003300", "FF333300",
      "FF993300", "FF993366", "FF333399", "FF333333"};
  return kPalette;
}

PackageSummary summarize_package(std::string_view bytes) {
  const Package pkg(bytes);
  PackageSummary s;
  for (const auto& e : pkg.archive().entries()) s.part_names.push_back(e.name);
  s.has_vba_part = pkg.archive().contains(kVbaPart);
  s.has_connections_part = pkg.archive().contains(kConnectionsPart);
  s.external_link_parts = pkg.link_parts(pkg.xml(pkg.workbook_part()));
  return s;
}

Workbook read_package(std::string_view bytes, std::string source_uri) {
  const Package pkg(bytes);
  Workbook wb;
  wb.source_uri = std::move(source_uri);
  const auto workbook = pkg.xml(pkg.workbook_part());
  const auto rels = pkg.relationships(rels_part_for(pkg.workbook_part()));

  std::vector<std::string> shared_strings;
  std::vector<CellStyle> styles;
  for (const auto& r : rels) {
    if (r.external) continue;
    const auto part = resolve_part(pkg.workbook_part(), r.target);
    if (ends_with(r.type, "/sharedStrings") && pkg.archive().contains(part)) {
      shared_strings = read_shared_strings(pkg.xml(part));
    } else if (ends_with(r.type, "/styles") && pkg.archive().contains(part)) {
      styles = read_styles(pkg.xml(part));
    }
  }

  if (const auto* sheets = workbook.child("sheets")) {
    for (const auto* s : sheets->children_named("sheet")) {
      Worksheet ws;
      ws.name = s->attr("name").value_or("");
      const auto state = s->attr("state").value_or("visible");
      ws.visibility = state == "veryHidden" ? Visibility::VeryHidden
                      : state == "hidden"   ? Visibility::Hidden
                                            : Visibility::Visible;
      const auto id = s->attr("id");
      for (const auto& r : rels) {
        if (!id || r.id != *id || r.external) continue;
        const auto part = resolve_part(pkg.workbook_part(), r.target);
        if (ends_with(r.type, "/worksheet") && pkg.archive().contains(part)) {
          read_sheet(pkg.xml(part), ws, shared_strings, styles, part);
        }
      }
      wb.sheets.push_back(std::move(ws));
    }
  }
  if (const auto* names = workbook.child("definedNames")) {
    for (const auto* n : names->children_named("definedName")) {
      wb.defined_names.push_back({n->attr("name").value_or(""), n->text});
    }
  }
  wb.external_links = read_links(pkg, workbook);
  read_core_properties(pkg, wb);

  if (pkg.archive().contains(kVbaPart)) {
    wb.has_macros = true;
    wb.macro_sha256 = sha256_hex(pkg.read(kVbaPart));
  }
  if (pkg.archive().contains(kConnectionsPart)) {
    wb.has_connections = true;
    wb.connections_sha256 = sha256_hex(pkg.read(kConnectionsPart));
  }
  return wb;
}

std::vector<ExternalLink> list_link_targets(std::string_view bytes) {
  const Package pkg(bytes);
  return read_links(pkg, pkg.xml(pkg.workbook_part()));
}

RewriteResult rewrite_links(std::string_view bytes,
                            const std::map<std::string, std::string>& rewrites) {
  const Package pkg(bytes);
  RewriteResult result;
  std::map<std::string, std::string> by_normal;
  for (const auto& [from, to] : rewrites) by_normal.emplace(uri::normalize(from), to);

  std::map<std::string, Bytes> replacements;
  int index = 1;
  for (const auto& lp : pkg.link_parts(pkg.xml(pkg.workbook_part()))) {
    const int this_index = index++;
    if (by_normal.empty()) continue;
    Bytes raw = pkg.read(lp.rels_part);
    const auto root = xml::parse(raw, lp.rels_part);
    const auto link = pick_link_relationship(root, lp.rels_part);
    const auto hit = by_normal.find(uri::normalize(link.rel.target));
    if (hit == by_normal.end() || hit->second == link.rel.target) continue;

    const std::string_view tag =
        std::string_view(raw).substr(link.element->start_offset, link.element->start_length);
    const auto span = find_target_value(tag);
    if (!span) throw Error(ErrorCode::CorruptPart, lp.rels_part + ": Target not found");
    const std::size_t begin = link.element->start_offset + span->first;
    const std::size_t end = link.element->start_offset + span->second;
    raw.replace(begin, end - begin, xml::escape_attr(hit->second));
    replacements[lp.rels_part] = std::move(raw);
    result.applied.push_back({this_index, link.rel.target, hit->second});
  }
  result.bytes = replacements.empty() ? Bytes(bytes) : pkg.archive().replace(replacements);
  return result;
}

}  // namespace sheetguard::ooxml
