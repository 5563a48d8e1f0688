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

// Cell and formula diagnostics plus the complexity/materiality risk rating.
//
// "Inconsistent formula" has no canonical definition. Here it means a cell
// whose R1C1 normal form disagrees with a strict majority of the other
// formula cells in its contiguous row or column run (runs of 3 or more).

#pragma once

#include <functional>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "sheetguard/grid.hpp"

namespace sheetguard::risk {

enum class FindingKind {
  ErrorCell,
  VeryHiddenSheet,
  InvisibleCell,
  InconsistentFormula,
  BrokenLink,
  Unanalyzable,
};

enum class Severity { Info, Warn, High };

// Shared by complexity buckets, materiality and the final rating.
enum class Level { Low, Medium, High };

std::string_view finding_kind_name(FindingKind k);
std::string_view severity_name(Severity s);
std::string_view level_name(Level l);
std::optional<Level> parse_level(std::string_view text);

struct Finding {
  FindingKind kind = FindingKind::ErrorCell;
  std::string location;  // "Sheet!A1", a sheet name, or a link target
  std::string detail;
  Severity severity = Severity::Info;

  bool operator==(const Finding&) const = default;
};

struct Weights {
  double per_formula = 1.0;
  double per_link = 5.0;
  double per_unique_function = 2.0;
  double per_sheet = 1.0;  // applied to sheet_count - 1
  double macro_bonus = 25.0;
  double per_high_finding = 10.0;
};

struct RiskConfig {
  Weights weights;
  double medium_at = 50.0;
  double high_at = 200.0;
  // Explicit materiality tags by canonical workbook URI.
  std::map<std::string, Level> materiality;
  // Default rule over max |numeric cached value|.
  double material_medium_at = 1e3;
  double material_high_at = 1e6;

  // Throws InvalidConfig.
  void validate() const;
  // Reads the JSON config format documented in the README. Throws InvalidConfig.
  static RiskConfig from_json(std::string_view text);
};

struct RiskScore {
  double complexity = 0.0;
  Level complexity_bucket = Level::Low;
  Level materiality = Level::Low;
  Level rating = Level::Low;

  bool operator==(const RiskScore&) const = default;
};

// Findings ordered by (sheet position, row, col); sheet-level findings sort
// before cells of the same sheet.
std::vector<Finding> diagnose(const Workbook& wb);
std::vector<Finding> detect_inconsistent(const Worksheet& ws);

// One BrokenLink finding per external link whose resolved target fails
// `exists`. Needs filesystem knowledge, so it is not part of diagnose.
std::vector<Finding> broken_links(const Workbook& wb,
                                  const std::function<bool(const std::string&)>& exists);

Level rating_matrix(Level complexity, Level materiality);
Level default_materiality(const Workbook& wb, const RiskConfig& cfg);
RiskScore score(const Workbook& wb, const std::vector<Finding>& findings,
                const RiskConfig& cfg);

std::string report_json(const std::vector<Finding>& findings, const RiskScore& s);
std::string report_text(const std::vector<Finding>& findings, const RiskScore& s);

}  // namespace sheetguard::risk
