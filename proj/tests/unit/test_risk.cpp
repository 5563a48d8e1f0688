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

#include <random>

#include "doctest.h"
#include "sheetguard/error.hpp"
#include "sheetguard/ooxml.hpp"
#include "sheetguard/risk.hpp"
#include "xlsx_builder.hpp"

using namespace sheetguard;
using namespace sheetguard::risk;

namespace {

Workbook one_sheet() {
  Workbook wb;
  wb.sheets.push_back({"Sheet1"});
  return wb;
}

// True when a finding's location names something that exists in wb.
bool resolves(const Workbook& wb, const Finding& f) {
  if (f.kind == FindingKind::VeryHiddenSheet) return wb.find_sheet(f.location) != nullptr;
  if (f.kind == FindingKind::BrokenLink) {
    for (const auto& l : wb.external_links) {
      if (l.target == f.location) return true;
    }
    return false;
  }
  const auto a = parse_a1(f.location);
  const auto* ws = wb.find_sheet(a.sheet);
  return ws && ws->find(a.row, a.col);
}

}  // namespace

TEST_CASE("diagnose on empty and seeded workbooks") {
  CHECK(diagnose(one_sheet()).empty());

  auto wb = one_sheet();
  wb.sheets[0].put(4, 3, CellValue::of_error("#REF!"));
  auto f = diagnose(wb);
  REQUIRE(f.size() == 1);
  CHECK(f[0].kind == FindingKind::ErrorCell);
  CHECK(f[0].location == "Sheet1!C4");

  auto wb2 = one_sheet();
  auto& c = wb2.sheets[0].put(1, 1, CellValue::of_text("secret"));
  c.font_color = "FFFFFFFF";
  c.fill_color = "FFFFFFFF";
  wb2.sheets.push_back({"Vault", Visibility::VeryHidden});
  f = diagnose(wb2);
  REQUIRE(f.size() == 2);
  CHECK(f[0].kind == FindingKind::InvisibleCell);
  CHECK(f[1].kind == FindingKind::VeryHiddenSheet);
  CHECK(f[1].location == "Vault");
}

TEST_CASE("detect_inconsistent") {
  SUBCASE("uniform run") {
    Worksheet ws{"Calc"};
    for (int r = 2; r <= 5; ++r) ws.put(r, 2, {}, "A" + std::to_string(r) + "+1");
    CHECK(detect_inconsistent(ws).empty());
  }
  SUBCASE("hardcoded cell in a run") {
    // By hand: B2, B3, B5 normalize to RC[-1]+1, B4 to 42.
    Worksheet ws{"Calc"};
    for (int r = 2; r <= 5; ++r) ws.put(r, 2, {}, r == 4 ? "42" : "A" + std::to_string(r) + "+1");
    const auto f = detect_inconsistent(ws);
    REQUIRE(f.size() == 1);
    CHECK(f[0].location == "Calc!B4");
    CHECK(f[0].severity == Severity::High);
    CHECK(f[0].detail.find("RC[-1]+1") != std::string::npos);
  }
  SUBCASE("runs of two are ignored") {
    Worksheet ws{"Calc"};
    ws.put(1, 1, {}, "B1");
    ws.put(2, 1, {}, "99");
    CHECK(detect_inconsistent(ws).empty());
  }
  SUBCASE("tie yields one warning") {
    Worksheet ws{"Calc"};
    ws.put(1, 1, {}, "B1");
    ws.put(2, 1, {}, "B2");
    ws.put(3, 1, {}, "1");
    ws.put(4, 1, {}, "2");
    const auto f = detect_inconsistent(ws);
    REQUIRE(f.size() == 1);
    CHECK(f[0].severity == Severity::Warn);
    CHECK(f[0].location == "Calc!A1");
  }
  SUBCASE("horizontal run") {
    Worksheet ws{"Calc"};
    ws.put(5, 1, {}, "SUM(A1:A4)");
    ws.put(5, 2, {}, "SUM(B1:B4)");
    ws.put(5, 3, {}, "SUM(C1:C3)");
    ws.put(5, 4, {}, "SUM(D1:D4)");
    const auto f = detect_inconsistent(ws);
    REQUIRE(f.size() == 1);
    CHECK(f[0].location == "Calc!C5");
  }
}

TEST_CASE("unanalyzable formulas are reported") {
  auto wb = one_sheet();
  wb.sheets[0].put(1, 1, {}, "SUM(Sheet1:Sheet3!A1)");
  wb.sheets[0].put(2, 1, {}, "SUM(A1");
  const auto f = diagnose(wb);
  REQUIRE(f.size() == 2);
  CHECK(f[0].kind == FindingKind::Unanalyzable);
  CHECK(f[1].kind == FindingKind::Unanalyzable);
}

TEST_CASE("score arithmetic") {
  const RiskConfig cfg;
  auto empty = one_sheet();
  auto s = score(empty, {}, cfg);
  CHECK(s.complexity == 0.0);
  CHECK(s.complexity_bucket == Level::Low);
  CHECK(s.rating == Level::Low);

  // 120 formulas, 3 links, 1 distinct function, 1 sheet, macros, 2 High
  // findings. By hand: 120*1 + 3*5 + 1*2 + 0*1 + 25 + 2*10 = 182.
  Workbook wb = one_sheet();
  for (int r = 1; r <= 120; ++r) wb.sheets[0].put(r, 2, CellValue::of_number(1), "SUM(A" + std::to_string(r) + ")");
  for (int i = 1; i <= 3; ++i) wb.external_links.push_back({i, "x" + std::to_string(i) + ".xlsx"});
  wb.has_macros = true;
  const std::vector<Finding> two_high{{FindingKind::ErrorCell, "Sheet1!A1", "", Severity::High},
                                      {FindingKind::ErrorCell, "Sheet1!A2", "", Severity::High},
                                      {FindingKind::Unanalyzable, "Sheet1!A3", "", Severity::Info}};
  s = score(wb, two_high, cfg);
  CHECK(s.complexity == 182.0);
  CHECK(s.complexity_bucket == Level::Medium);

  RiskConfig tagged;
  tagged.materiality["file:///m.xlsx"] = Level::High;
  wb.source_uri = "file:///m.xlsx";
  s = score(wb, two_high, tagged);
  CHECK(s.materiality == Level::High);
  CHECK(s.rating == Level::High);
}

TEST_CASE("rating matrix is monotone") {
  const Level all[] = {Level::Low, Level::Medium, Level::High};
  CHECK(rating_matrix(Level::Low, Level::Low) == Level::Low);
  CHECK(rating_matrix(Level::Medium, Level::High) == Level::High);
  CHECK(rating_matrix(Level::High, Level::Low) == Level::High);
  CHECK(rating_matrix(Level::Low, Level::High) == Level::Medium);
  for (auto c : all) {
    for (auto m : all) {
      for (auto c2 : all) {
        if (c2 >= c) CHECK(rating_matrix(c2, m) >= rating_matrix(c, m));
        if (c2 >= m) CHECK(rating_matrix(c, c2) >= rating_matrix(c, m));
      }
    }
  }
}

TEST_CASE("default materiality") {
  RiskConfig cfg;
  auto wb = one_sheet();
  CHECK(default_materiality(wb, cfg) == Level::Low);
  wb.sheets[0].put(1, 1, CellValue::of_number(-2500));
  CHECK(default_materiality(wb, cfg) == Level::Medium);
  wb.sheets[0].put(1, 2, CellValue::of_number(1e6));
  CHECK(default_materiality(wb, cfg) == Level::High);
}

TEST_CASE("config validation") {
  RiskConfig cfg;
  cfg.medium_at = 300;
  CHECK_THROWS_AS(cfg.validate(), Error);
  CHECK_THROWS_AS(RiskConfig::from_json("{\"weights\":{\"per_link\":-1}}"), Error);
  CHECK_THROWS_AS(RiskConfig::from_json("[1"), Error);
  const auto c = RiskConfig::from_json(
      R"({"weights":{"per_link":7},"complexity_thresholds":{"medium_at":10,"high_at":20},
          "materiality":{"C:\\fin\\a.xlsx":"High"}})");
  CHECK(c.weights.per_link == 7.0);
  CHECK(c.high_at == 20.0);
  CHECK(c.materiality.at("file:///C:/fin/a.xlsx") == Level::High);
}

TEST_CASE("complexity never decreases under augmentation") {
  std::mt19937 rng(3);
  const RiskConfig cfg;
  for (int trial = 0; trial < 200; ++trial) {
    Workbook wb = one_sheet();
    std::vector<Finding> findings;
    double prev = score(wb, findings, cfg).complexity;
    for (int step = 0; step < 20; ++step) {
      switch (rng() % 4) {
        case 0: {
          const int r = 1 + static_cast<int>(rng() % 50);
          wb.sheets[0].put(r, 3 + static_cast<int>(rng() % 5), {}, "ABS(A" + std::to_string(r) + ")");
          break;
        }
        case 1:
          findings.push_back({FindingKind::ErrorCell, "Sheet1!A1", "", rng() % 2 ? Severity::High : Severity::Warn});
          break;
        case 2:
          wb.external_links.push_back({static_cast<int>(wb.external_links.size()) + 1, "l.xlsx"});
          break;
        default:
          wb.sheets.push_back({"S" + std::to_string(wb.sheets.size())});
      }
      const double now = score(wb, findings, cfg).complexity;
      CHECK(now >= prev);
      prev = now;
    }
  }
}

TEST_CASE("diagnose is pure and locations resolve") {
  testing::BookSpec b;
  auto& s = b.sheet("Data");
  for (int r = 1; r <= 6; ++r) s.number(r, 1, r);
  for (int r = 1; r <= 6; ++r) s.formula(r, 2, r == 3 ? "7" : "A" + std::to_string(r) + "*2");
  s.error(7, 1, "#DIV/0!", "1/0");
  s.number(8, 1, 5);
  s.last().num_fmt = ";;;";
  b.sheet("My Hidden", "veryHidden").number(1, 1, 1);
  b.link_targets = {"missing.xlsx"};
  const auto wb = ooxml::read_package(testing::build_xlsx(b), "file:///tmp/x.xlsx");
  auto f = diagnose(wb);
  CHECK(report_json(f, score(wb, f, {})) == report_json(diagnose(wb), score(wb, f, {})));
  const auto broken = broken_links(wb, [](const std::string&) { return false; });
  REQUIRE(broken.size() == 1);
  f.insert(f.end(), broken.begin(), broken.end());
  CHECK(f.size() == 5);
  for (const auto& x : f) {
    INFO(x.location);
    CHECK(resolves(wb, x));
  }
}
