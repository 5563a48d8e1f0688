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

#include "doctest.h"
#include "sheetguard/error.hpp"
#include "sheetguard/ooxml.hpp"
#include "sheetguard/uri.hpp"
#include "sheetguard/zip.hpp"
#include "xlsx_builder.hpp"

using namespace sheetguard;
using testing::BookSpec;

namespace {

BookSpec minimal() {
  BookSpec b;
  b.sheet("Sheet1").number(1, 1, 1);
  return b;
}

BookSpec linked() {
  BookSpec b;
  auto& s = b.sheet("Sheet1");
  s.number(1, 1, 10).formula(1, 2, "[1]Sheet1!A1*2", CellValue::of_number(20));
  b.sheet("Hidden", "veryHidden").text(1, 1, "x");
  b.link_targets = {"file:///C:/finance/revenue.xlsx", "..\\inputs\\fx%20rates.xlsx"};
  return b;
}

ErrorCode code_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an Error");
  return ErrorCode::IoError;
}

std::vector<std::string> entry_names(const Bytes& b) {
  std::vector<std::string> out;
  const auto ar = zip::Archive::parse(b);
  for (const auto& e : ar.entries()) out.push_back(e.name);
  return out;
}

}  // namespace

TEST_CASE("zip writer and reader agree") {
  zip::Writer w;
  w.add("a.txt", "hello", zip::Method::Stored);
  w.add("b.txt", std::string(10000, 'z'), zip::Method::Deflated);
  w.add("c.txt", "streamed", zip::Method::Deflated, true);
  const auto bytes = w.finish();
  const auto ar = zip::Archive::parse(bytes);
  REQUIRE(ar.entries().size() == 3);
  CHECK(ar.read("a.txt") == "hello");
  CHECK(ar.read("b.txt") == std::string(10000, 'z'));
  CHECK(ar.read("c.txt") == "streamed");
  CHECK(zip::crc32("123456789") == 0xCBF43926u);  // published check value

  const auto same = ar.replace({});
  CHECK(same == bytes);
  const auto changed = zip::Archive::parse(ar.replace({{"c.txt", "new"}}));
  CHECK(changed.read("c.txt") == "new");
  CHECK(changed.read("b.txt") == std::string(10000, 'z'));
}

TEST_CASE("non-zip input is NotAPackage") {
  CHECK(code_of([] { ooxml::read_package("not a zip"); }) == ErrorCode::NotAPackage);
  zip::Writer w;
  w.add("hello.txt", "x");
  const auto bytes = w.finish();
  CHECK(code_of([&] { ooxml::read_package(bytes); }) == ErrorCode::NotASpreadsheet);
}

TEST_CASE("minimal package") {
  const auto wb = ooxml::read_package(testing::build_xlsx(minimal()), "file:///m.xlsx");
  REQUIRE(wb.sheets.size() == 1);
  CHECK(wb.sheets[0].visibility == Visibility::Visible);
  CHECK(wb.external_links.empty());
  CHECK(wb.source_uri == "file:///m.xlsx");
  CHECK(ooxml::list_link_targets(testing::build_xlsx(minimal())).empty());
  CHECK_FALSE(wb.has_macros);
}

TEST_CASE("sheet state, values and links") {
  const auto bytes = testing::build_xlsx(linked());
  const auto wb = ooxml::read_package(bytes);
  REQUIRE(wb.sheets.size() == 2);
  CHECK(wb.sheets[1].visibility == Visibility::VeryHidden);
  const Cell* b1 = wb.sheets[0].find(1, 2);
  REQUIRE(b1);
  CHECK(b1->formula == "[1]Sheet1!A1*2");
  CHECK(b1->value == CellValue::of_number(20));
  CHECK(wb.sheets[1].find(1, 1)->value == CellValue::of_text("x"));

  // Targets as written into the rels XML by the fixture builder.
  REQUIRE(wb.external_links.size() == 2);
  CHECK(wb.external_links[0] ==
        ExternalLink{1, "file:///C:/finance/revenue.xlsx", LinkMode::External});
  CHECK(wb.external_links[1] == ExternalLink{2, "..\\inputs\\fx%20rates.xlsx", LinkMode::External});
  CHECK(ooxml::list_link_targets(bytes) == wb.external_links);

  const auto summary = ooxml::summarize_package(bytes);
  REQUIRE(summary.external_link_parts.size() == 2);
  CHECK(summary.external_link_parts[1].rels_part ==
        "xl/externalLinks/_rels/externalLink2.xml.rels");
}

TEST_CASE("styles, errors, inline strings, shared formulas") {
  BookSpec b;
  b.shared_strings = false;
  b.method = zip::Method::Stored;
  b.data_descriptors = true;
  auto& s = b.sheet("S");
  s.text(1, 1, "white");
  s.last().font_rgb = "FFFFFFFF";
  s.last().fill_rgb = "FFFFFFFF";
  s.number(2, 1, 7);
  s.last().num_fmt = ";;;";
  s.error(3, 1, "#REF!", "A99/0");
  s.formula(1, 3, "A1&\"x\"", CellValue::of_text("whitex"));
  s.formula(4, 2, "A4+1", CellValue::of_number(1));
  s.last().shared_group = 0;
  s.formula(5, 2, "A4+1", CellValue::of_number(1));
  s.last().shared_group = 0;
  s.formula(6, 2, "A4+1", CellValue::of_bool(true));
  s.last().shared_group = 0;

  const auto wb = ooxml::read_package(testing::build_xlsx(b));
  const auto& ws = wb.sheets[0];
  CHECK(ws.find(1, 1)->font_color == "FFFFFFFF");
  CHECK(ws.find(1, 1)->fill_color == "FFFFFFFF");
  CHECK(ws.find(1, 1)->value == CellValue::of_text("white"));
  CHECK(ws.find(2, 1)->number_format == ";;;");
  CHECK(ws.find(3, 1)->value == CellValue::of_error("#REF!"));
  CHECK(ws.find(1, 3)->value == CellValue::of_text("whitex"));
  CHECK(ws.find(4, 2)->formula == "A4+1");
  CHECK(ws.find(5, 2)->formula == "A5+1");
  CHECK(ws.find(6, 2)->formula == "A6+1");
  CHECK(ws.find(6, 2)->value == CellValue::of_bool(true));
  CHECK(compute_stats(wb).error_cell_count == 1);
}

TEST_CASE("core properties, macros, connections") {
  BookSpec b = minimal();
  b.created = "2006-01-02T03:04:05Z";
  b.modified = "2007-03-01T00:00:00Z";
  b.creator = "alice";
  b.vba_bytes = std::string("\xd0\xcf\x11\xe0vba", 7);
  b.connections_xml = "<connections/>";
  const auto wb = ooxml::read_package(testing::build_xlsx(b));
  CHECK(wb.has_macros);
  CHECK(wb.has_connections);
  CHECK(wb.creator == "alice");
  REQUIRE(wb.created);
  CHECK(format_timestamp(*wb.created) == "2006-01-02T03:04:05Z");
  CHECK(year_of(*wb.modified) == 2007);
  CHECK(wb.macro_sha256 == sha256_hex(*b.vba_bytes));
  CHECK(compute_stats(wb).has_macros);
}

TEST_CASE("corrupt part is named") {
  const auto bytes = testing::build_xlsx(minimal());
  const auto ar = zip::Archive::parse(bytes);
  const auto broken = ar.replace({{"xl/worksheets/sheet1.xml", "<worksheet><sheetData>"}});
  try {
    ooxml::read_package(broken);
    FAIL("expected CorruptPart");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::CorruptPart);
    CHECK(std::string(e.what()).find("xl/worksheets/sheet1.xml") != std::string::npos);
  }
}

TEST_CASE("rewrite_links") {
  const auto bytes = testing::build_xlsx(linked());
  SUBCASE("empty mapping is identity") {
    const auto r = ooxml::rewrite_links(bytes, {});
    CHECK(r.bytes == bytes);
    CHECK(r.applied.empty());
  }
  SUBCASE("unmatched key is identity") {
    const auto r = ooxml::rewrite_links(bytes, {{"file:///nowhere.xlsx", "http://x/y.xlsx"}});
    CHECK(r.bytes == bytes);
    CHECK(r.applied.empty());
  }
  SUBCASE("matched key rewrites only that target") {
    const std::string old_t = "file:///C:/finance/revenue.xlsx";
    const std::string new_t = "http://sharepoint/repo/finance/revenue.xlsx";
    const auto r = ooxml::rewrite_links(bytes, {{old_t, new_t}});
    REQUIRE(r.applied.size() == 1);
    CHECK(r.applied[0] == ooxml::AppliedRewrite{1, old_t, new_t});
    auto before = ooxml::read_package(bytes);
    auto after = ooxml::read_package(r.bytes);
    CHECK(after.external_links[0].target == new_t);
    CHECK(after.external_links[1] == before.external_links[1]);
    after.external_links = before.external_links;
    CHECK(after == before);
    CHECK(entry_names(r.bytes) == entry_names(bytes));

    // Untouched entries keep their bytes exactly.
    const auto a = zip::Archive::parse(bytes), c = zip::Archive::parse(r.bytes);
    for (const auto& e : a.entries()) {
      if (e.name == "xl/externalLinks/_rels/externalLink1.xml.rels") continue;
      const auto* f = c.find(e.name);
      REQUIRE(f);
      CHECK(bytes.substr(e.local_header_offset, 30 + e.name.size() + e.compressed_size) ==
            r.bytes.substr(f->local_header_offset, 30 + f->name.size() + f->compressed_size));
    }

    // Applying the same mapping twice equals applying it once.
    CHECK(ooxml::rewrite_links(r.bytes, {{old_t, new_t}}).bytes == r.bytes);
  }
  SUBCASE("keys match after normalization") {
    const auto r = ooxml::rewrite_links(bytes, {{"FILE:///C:\\finance\\revenue.xlsx", "http://h/r.xlsx"}});
    CHECK(r.applied.size() == 1);
    const auto r2 = ooxml::rewrite_links(bytes, {{"..\\inputs\\fx rates.xlsx", "http://h/fx.xlsx"}});
    REQUIRE(r2.applied.size() == 1);
    CHECK(r2.applied[0].index == 2);
  }
}

TEST_CASE("uri normalization") {
  CHECK(uri::normalize("C:\\finance\\revenue.xlsx") == "file:///C:/finance/revenue.xlsx");
  CHECK(uri::normalize("\\\\server\\share\\a.xlsx") == "file://server/share/a.xlsx");
  CHECK(uri::normalize("HTTP://SharePoint/Repo/a%20b.xlsx") == "http://sharepoint/Repo/a b.xlsx");
  CHECK(uri::normalize("/data/x/../a.xlsx") == "file:///data/a.xlsx");
  CHECK(uri::normalize("..\\inputs\\fx.xlsx") == "../inputs/fx.xlsx");
  // Resolved by hand: the owner directory is /data/models, one level up is
  // /data, then inputs/fx.xlsx.
  CHECK(uri::resolve("file:///data/models/m.xlsx", "..\\inputs\\fx.xlsx") ==
        "file:///data/inputs/fx.xlsx");
  CHECK(uri::resolve("http://h/repo/a/m.xlsx", "b.xlsx") == "http://h/repo/a/b.xlsx");
  CHECK(uri::resolve("file:///d/m.xlsx", "file:///e/x.xlsx") == "file:///e/x.xlsx");
  CHECK(uri::basename("file:///d/a%20b.xlsx") == "a b.xlsx");
  CHECK(uri::to_path("file:///tmp/x") == std::filesystem::path("/tmp/x"));
}
