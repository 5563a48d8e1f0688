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

#include "sheetguard/risk.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

#include "json.hpp"
#include "sheetguard/error.hpp"
#include "sheetguard/uri.hpp"

namespace sheetguard::risk {

using nlohmann::json;

std::string_view finding_kind_name(FindingKind k) {
  switch (k) {
    case FindingKind::ErrorCell: return "ErrorCell";
    case FindingKind::VeryHiddenSheet: return "VeryHiddenSheet";
    case FindingKind::InvisibleCell: return "InvisibleCell";
    case FindingKind::InconsistentFormula: return "InconsistentFormula";
    case FindingKind::BrokenLink: return "BrokenLink";
    case FindingKind::Unanalyzable: return "Unanalyzable";
  }
  return "Unknown";
}

std::string_view severity_name(Severity s) {
  switch (s) {
    case Severity::Info: return "Info";
    case Severity::Warn: return "Warn";
    case Severity::High: return "High";
  }
  return "Unknown";
}

std::string_view level_name(Level l) {
  switch (l) {
    case Level::Low: return "Low";
    case Level::Medium: return "Medium";
    case Level::High: return "High";
  }
  return "Unknown";
}

std::optional<Level> parse_level(std::string_view text) {
  if (text == "Low") return Level::Low;
  if (text == "Medium") return Level::Medium;
  if (text == "High") return Level::High;
  return std::nullopt;
}

void RiskConfig::validate() const {
  const auto& w = weights;
  for (double v : {w.per_formula, w.per_link, w.per_unique_function, w.per_sheet,
                   w.macro_bonus, w.per_high_finding}) {
    if (!(v >= 0.0) || !std::isfinite(v)) {
      throw Error(ErrorCode::InvalidConfig, "weights must be finite and non-negative");
    }
  }
  if (!(medium_at < high_at)) {
    throw Error(ErrorCode::InvalidConfig, "complexity thresholds need medium_at < high_at");
  }
  if (!(material_medium_at < material_high_at)) {
    throw Error(ErrorCode::InvalidConfig,
                "materiality thresholds need medium_at < high_at");
  }
}

RiskConfig RiskConfig::from_json(std::string_view text) {
  RiskConfig cfg;
  try {
    const json j = json::parse(text);
    if (!j.is_object()) throw Error(ErrorCode::InvalidConfig, "risk config must be an object");
    if (j.contains("weights")) {
      const auto& w = j.at("weights");
      auto& cw = cfg.weights;
      cw.per_formula = w.value("per_formula", cw.per_formula);
      cw.per_link = w.value("per_link", cw.per_link);
      cw.per_unique_function = w.value("per_unique_function", cw.per_unique_function);
      cw.per_sheet = w.value("per_sheet", cw.per_sheet);
      cw.macro_bonus = w.value("macro_bonus", cw.macro_bonus);
      cw.per_high_finding = w.value("per_high_finding", cw.per_high_finding);
    }
    if (j.contains("complexity_thresholds")) {
      const auto& t = j.at("complexity_thresholds");
      cfg.medium_at = t.value("medium_at", cfg.medium_at);
      cfg.high_at = t.value("high_at", cfg.high_at);
    }
    if (j.contains("materiality")) {
      for (const auto& [key, value] : j.at("materiality").items()) {
        const auto level = parse_level(value.get<std::string>());
        if (!level) throw Error(ErrorCode::InvalidConfig, "bad materiality level for " + key);
        cfg.materiality[uri::normalize(key)] = *level;
      }
    }
    if (j.contains("materiality_default")) {
      const auto& m = j.at("materiality_default");
      cfg.material_medium_at = m.value("medium_at", cfg.material_medium_at);
      cfg.material_high_at = m.value("high_at", cfg.material_high_at);
    }
  } catch (const json::exception& e) {
    throw Error(ErrorCode::InvalidConfig, std::string("risk config: ") + e.what());
  }
  cfg.validate();
  return cfg;
}

namespace {

struct Keyed {
  int sheet;
  int row;
  int col;
  int order;
  Finding finding;
};

std::string cell_location(const Worksheet& ws, int row, int col) {
  return format_a1(CellAddress{ws.name, row, col});
}

std::string range_text(const Worksheet& ws, int r1, int c1, int r2, int c2) {
  return format_a1(CellAddress{ws.name, r1, c1}) + ":" + format_a1(CellAddress{"", r2, c2});
}

struct RunCell {
  int row;
  int col;
  std::string form;
};

void judge_run(const Worksheet& ws, const std::vector<RunCell>& run, std::vector<Keyed>& out,
               std::set<std::pair<int, int>>& flagged) {
  if (run.size() < 3) return;
  std::map<std::string, int> counts;
  for (const auto& c : run) ++counts[c.form];
  if (counts.size() < 2) return;
  const auto best = std::max_element(counts.begin(), counts.end(),
                                     [](const auto& a, const auto& b) { return a.second < b.second; });
  const auto range = range_text(ws, run.front().row, run.front().col, run.back().row,
                                run.back().col);
  const int n = static_cast<int>(run.size());
  if (best->second * 2 > n) {
    for (const auto& c : run) {
      if (c.form == best->first || !flagged.insert({c.row, c.col}).second) continue;
      out.push_back({0, c.row, c.col, 2,
                     {FindingKind::InconsistentFormula, cell_location(ws, c.row, c.col),
                      "form " + c.form + " differs from majority form " + best->first +
                          " in " + range,
                      Severity::High}});
    }
    return;
  }
  out.push_back({0, run.front().row, run.front().col, 4,
                 {FindingKind::InconsistentFormula,
                  cell_location(ws, run.front().row, run.front().col),
                  "no majority form among " + std::to_string(n) + " formulas in " + range,
                  Severity::Warn}});
}

// Normal forms of analyzable formula cells keyed by (row, col).
std::map<std::pair<int, int>, std::string> normal_forms(const Worksheet& ws) {
  std::map<std::pair<int, int>, std::string> forms;
  for (const auto& [key, cell] : ws.cells) {
    if (!cell.formula) continue;
    try {
      auto n = normalize_formula(*cell.formula, CellAddress{ws.name, key.first, key.second});
      if (n.analyzable) forms.emplace(key, std::move(n.text));
    } catch (const Error&) {
    }
  }
  return forms;
}

std::vector<Keyed> inconsistent_keyed(const Worksheet& ws) {
  const auto forms = normal_forms(ws);
  std::vector<Keyed> out;
  std::set<std::pair<int, int>> flagged;
  std::vector<RunCell> run;

  // Horizontal runs: map order is row-major already.
  for (const auto& [key, form] : forms) {
    if (!run.empty() && (run.back().row != key.first || run.back().col + 1 != key.second)) {
      judge_run(ws, run, out, flagged);
      run.clear();
    }
    run.push_back({key.first, key.second, form});
  }
  judge_run(ws, run, out, flagged);
  run.clear();

  std::map<std::pair<int, int>, const std::string*> by_col;
  for (const auto& [key, form] : forms) by_col.emplace(std::pair{key.second, key.first}, &form);
  for (const auto& [key, form] : by_col) {
    if (!run.empty() && (run.back().col != key.first || run.back().row + 1 != key.second)) {
      judge_run(ws, run, out, flagged);
      run.clear();
    }
    run.push_back({key.second, key.first, *form});
  }
  judge_run(ws, run, out, flagged);
  return out;
}

void sort_keyed(std::vector<Keyed>& v) {
  std::stable_sort(v.begin(), v.end(), [](const Keyed& a, const Keyed& b) {
    return std::tie(a.sheet, a.row, a.col, a.order) < std::tie(b.sheet, b.row, b.col, b.order);
  });
}

}  // namespace

std::vector<Finding> detect_inconsistent(const Worksheet& ws) {
  auto keyed = inconsistent_keyed(ws);
  sort_keyed(keyed);
  std::vector<Finding> out;
  for (auto& k : keyed) out.push_back(std::move(k.finding));
  return out;
}

std::vector<Finding> diagnose(const Workbook& wb) {
  std::vector<Keyed> all;
  for (std::size_t si = 0; si < wb.sheets.size(); ++si) {
    const auto& ws = wb.sheets[si];
    const int s = static_cast<int>(si);
    if (ws.visibility == Visibility::VeryHidden) {
      all.push_back({s, 0, 0, 0,
                     {FindingKind::VeryHiddenSheet, ws.name, "sheet state is veryHidden",
                      Severity::High}});
    }
    for (const auto& [key, cell] : ws.cells) {
      const auto [row, col] = key;
      if (cell.value.kind == ValueKind::Error) {
        all.push_back({s, row, col, 0,
                       {FindingKind::ErrorCell, cell_location(ws, row, col),
                        "cached value " + cell.value.text, Severity::High}});
      }
      const bool populated = !cell.value.is_empty() || cell.formula.has_value();
      if (populated) {
        if (cell.number_format == ";;;") {
          all.push_back({s, row, col, 1,
                         {FindingKind::InvisibleCell, cell_location(ws, row, col),
                          "number format ;;; hides the value", Severity::High}});
        } else if (cell.font_color && cell.fill_color && *cell.font_color == *cell.fill_color) {
          all.push_back({s, row, col, 1,
                         {FindingKind::InvisibleCell, cell_location(ws, row, col),
                          "font color equals fill color " + *cell.font_color, Severity::High}});
        }
      }
      if (cell.formula) {
        try {
          if (!normalize_formula(*cell.formula, CellAddress{ws.name, row, col}).analyzable) {
            all.push_back({s, row, col, 3,
                           {FindingKind::Unanalyzable, cell_location(ws, row, col),
                            "3-D or structured reference", Severity::Info}});
          }
        } catch (const Error& e) {
          all.push_back({s, row, col, 3,
                         {FindingKind::Unanalyzable, cell_location(ws, row, col), e.what(),
                          Severity::Warn}});
        }
      }
    }
    for (auto& k : inconsistent_keyed(ws)) {
      k.sheet = s;
      all.push_back(std::move(k));
    }
  }
  sort_keyed(all);
  std::vector<Finding> out;
  for (auto& k : all) out.push_back(std::move(k.finding));
  return out;
}

std::vector<Finding> broken_links(const Workbook& wb,
                                  const std::function<bool(const std::string&)>& exists) {
  std::vector<Finding> out;
  for (const auto& link : wb.external_links) {
    const auto target = uri::resolve(wb.source_uri, link.target);
    if (!exists(target)) {
      out.push_back({FindingKind::BrokenLink, link.target,
                     "link " + std::to_string(link.index) + " resolves to missing " + target,
                     Severity::Warn});
    }
  }
  return out;
}

Level rating_matrix(Level complexity, Level materiality) {
  if (complexity == Level::High) return Level::High;
  if (materiality == Level::High && complexity >= Level::Medium) return Level::High;
  if (complexity >= Level::Medium || materiality >= Level::Medium) return Level::Medium;
  return Level::Low;
}

Level default_materiality(const Workbook& wb, const RiskConfig& cfg) {
  if (!cfg.materiality.empty()) {
    auto it = cfg.materiality.find(wb.source_uri);
    if (it == cfg.materiality.end()) it = cfg.materiality.find(uri::normalize(wb.source_uri));
    if (it != cfg.materiality.end()) return it->second;
  }
  double peak = 0.0;
  for (const auto& ws : wb.sheets) {
    for (const auto& [key, cell] : ws.cells) {
      if (cell.value.kind == ValueKind::Number) peak = std::max(peak, std::fabs(cell.value.number));
    }
  }
  if (peak >= cfg.material_high_at) return Level::High;
  if (peak >= cfg.material_medium_at) return Level::Medium;
  return Level::Low;
}

RiskScore score(const Workbook& wb, const std::vector<Finding>& findings,
                const RiskConfig& cfg) {
  cfg.validate();
  const auto st = compute_stats(wb);
  const auto high = std::count_if(findings.begin(), findings.end(),
                                  [](const Finding& f) { return f.severity == Severity::High; });
  const auto& w = cfg.weights;
  RiskScore s;
  s.complexity = w.per_formula * st.formula_count + w.per_link * st.external_link_count +
                 w.per_unique_function * st.unique_function_count +
                 w.per_sheet * std::max(0, st.sheet_count - 1) +
                 (st.has_macros ? w.macro_bonus : 0.0) +
                 w.per_high_finding * static_cast<double>(high);
  s.complexity_bucket = s.complexity >= cfg.high_at     ? Level::High
                        : s.complexity >= cfg.medium_at ? Level::Medium
                                                        : Level::Low;
  s.materiality = default_materiality(wb, cfg);
  s.rating = rating_matrix(s.complexity_bucket, s.materiality);
  return s;
}

std::string report_json(const std::vector<Finding>& findings, const RiskScore& s) {
  json arr = json::array();
  for (const auto& f : findings) {
    arr.push_back({{"kind", finding_kind_name(f.kind)},
                   {"location", f.location},
                   {"detail", f.detail},
                   {"severity", severity_name(f.severity)}});
  }
  json out = {{"findings", arr},
              {"score",
               {{"complexity", s.complexity},
                {"complexity_bucket", level_name(s.complexity_bucket)},
                {"materiality", level_name(s.materiality)},
                {"rating", level_name(s.rating)}}}};
  return out.dump(2) + "\n";
}

std::string report_text(const std::vector<Finding>& findings, const RiskScore& s) {
  std::ostringstream os;
  os << "Risk rating: " << level_name(s.rating) << "\n"
     << "Complexity: " << s.complexity << " (" << level_name(s.complexity_bucket) << ")\n"
     << "Materiality: " << level_name(s.materiality) << "\n"
     << "Findings: " << findings.size() << "\n";
  for (const auto& f : findings) {
    os << "  [" << severity_name(f.severity) << "] " << finding_kind_name(f.kind) << " "
       << f.location << ": " << f.detail << "\n";
  }
  return os.str();
}

}  // namespace sheetguard::risk
